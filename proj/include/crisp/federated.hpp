#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <vector>

#include "crisp/data.hpp"
#include "crisp/gibbs.hpp"
#include "crisp/model.hpp"

namespace crisp {

/// What a device shares with one contact: its trace and, for every shared
/// contact day up to its own infection day, log f of itself without the
/// receiver's factor.
struct MinimalStatisticsMessage {
    int sender = 0;
    int receiver = 0;
    InfectionTrace trace;
    std::map<int, double> log_f;  // day -> log f_{-receiver}(sender, day)

    friend bool operator==(const MinimalStatisticsMessage&, const MinimalStatisticsMessage&) = default;
};

inline constexpr std::uint16_t kMessageVersion = 1;

/// Little-endian wire form: "CRSP", version, sender, receiver, t0, dE, dI,
/// entry count, then (day, log f) pairs.
std::vector<std::uint8_t> encode_message(const MinimalStatisticsMessage& m);
/// Throws DataError on a bad header, version or length.
MinimalStatisticsMessage decode_message(std::span<const std::uint8_t> bytes);

class DeviceNode {
public:
    /// A partner not heard from yet contributes nothing to the conditional.
    struct CacheEntry {
        InfectionTrace trace;
        std::map<int, double> log_f;
        bool heard = false;
    };

    /// `contacts` must all have u == id; `tests` must all belong to id.
    DeviceNode(int id, int horizon, const ModelParams& params, std::vector<ContactRecord> contacts,
               std::vector<TestRecord> tests);

    int id() const { return id_; }
    const InfectionTrace& trace() const { return trace_; }
    void set_trace(const InfectionTrace& z) { trace_ = canonicalize(z, horizon_); }
    const std::map<int, CacheEntry>& cache() const { return cache_; }
    const std::vector<ContactRecord>& contacts() const { return contacts_; }
    const std::vector<TestRecord>& tests() const { return tests_; }
    /// Distinct contacts, ascending.
    const std::vector<int>& partners() const { return partners_; }

    void deliver(MinimalStatisticsMessage m) { inbox_.push_back(std::move(m)); }
    /// Applies queued messages to the cache (last writer wins per sender).
    /// Returns the senders whose trace changed.
    std::vector<int> drain_inbox();

    /// log f of this node on `day` without `excluded`'s factor, from the cache.
    double log_f_without(int day, int excluded) const;
    MinimalStatisticsMessage message_for(int partner) const;
    /// One message per distinct contact.
    std::vector<MinimalStatisticsMessage> build_outgoing() const;

    /// Scorer of this node's conditional given its cache.
    TraceScorer scorer() const;
    /// Drains the inbox, redraws the trace and returns fresh messages.
    std::vector<MinimalStatisticsMessage> device_step(SamplerRoute route, Rng& rng);

    /// Stored data only concerns this node: every contact has u == id, every
    /// test is its own and the cache only holds its partners.
    bool satisfies_locality() const;

private:
    int id_;
    int horizon_;
    ModelParams params_;
    PriorTables prior_;
    TestTables test_tables_;
    std::vector<ContactRecord> contacts_;  // sorted by (t, v)
    std::vector<double> log_weight_;       // per contact
    std::vector<TestRecord> tests_;
    std::vector<int> partners_;
    InfectionTrace trace_;
    std::map<int, CacheEntry> cache_;
    std::deque<MinimalStatisticsMessage> inbox_;
};

/// Splits centralized data into per-device local views.
std::vector<DeviceNode> make_nodes(const ContactLog& contacts, const TestLog& tests, const ModelParams& params,
                                   int horizon);

enum class ScheduleKind { round_robin, random, replay };

struct Schedule {
    ScheduleKind kind = ScheduleKind::round_robin;
    std::vector<int> replay;  // activation order for `replay`, repeated every round
    /// Rounds a message waits before delivery; 0 delivers before the next activation.
    int default_delay = 0;
    std::map<std::pair<int, int>, int> edge_delay;  // (sender, receiver) -> rounds

    int delay(int sender, int receiver) const;
};

struct RoundStats {
    int round = 0;
    std::size_t messages = 0;
    std::size_t bytes = 0;
};

struct FederatedRun {
    /// (round, node, trace) after every activation.
    struct Activation {
        int round;
        int node;
        InfectionTrace trace;
    };
    std::vector<Activation> activations;
    std::vector<RoundStats> rounds;
};

/// Runs the protocol. Nodes first exchange their initial messages; a node that
/// learns a changed partner trace re-sends its messages so partners see fresh
/// log f values. One executor stream drives every draw. Throws DataError on a
/// message to an unknown node.
FederatedRun run_federated(std::vector<DeviceNode>& nodes, const Schedule& schedule, int rounds, std::uint64_t seed,
                           SamplerRoute route = SamplerRoute::automatic);

}  // namespace crisp
