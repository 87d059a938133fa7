#include "crisp/federated.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace crisp {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    std::uint64_t take(int n) {
        if (pos + static_cast<std::size_t>(n) > bytes.size()) throw DataError("message: truncated payload");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += static_cast<std::size_t>(n);
        return v;
    }
    int i32() { return static_cast<int>(static_cast<std::int32_t>(take(4))); }
};

constexpr std::uint8_t kMagic[4] = {'C', 'R', 'S', 'P'};

}  // namespace

std::vector<std::uint8_t> encode_message(const MinimalStatisticsMessage& m) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(static_cast<std::uint8_t>(kMessageVersion & 0xff));
    out.push_back(static_cast<std::uint8_t>(kMessageVersion >> 8));
    for (int v : {m.sender, m.receiver, m.trace.t0, m.trace.dE, m.trace.dI}) put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(m.log_f.size()));
    for (const auto& [day, lf] : m.log_f) {
        put_u32(out, static_cast<std::uint32_t>(day));
        put_u64(out, std::bit_cast<std::uint64_t>(lf));
    }
    return out;
}

MinimalStatisticsMessage decode_message(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("message: bad header");
    Reader r{bytes, 4};
    auto version = static_cast<std::uint16_t>(r.take(2));
    if (version != kMessageVersion) throw DataError("message: unsupported version " + std::to_string(version));
    MinimalStatisticsMessage m;
    m.sender = r.i32();
    m.receiver = r.i32();
    m.trace.t0 = r.i32();
    m.trace.dE = r.i32();
    m.trace.dI = r.i32();
    auto count = r.take(4);
    for (std::uint64_t i = 0; i < count; ++i) {
        int day = r.i32();
        m.log_f[day] = std::bit_cast<double>(r.take(8));
    }
    if (r.pos != bytes.size()) throw DataError("message: trailing bytes");
    return m;
}

DeviceNode::DeviceNode(int id, int horizon, const ModelParams& params, std::vector<ContactRecord> contacts,
                       std::vector<TestRecord> tests)
    : id_(id),
      horizon_(horizon),
      params_(params),
      prior_(PriorTables::build(params, horizon)),
      test_tables_(TestTables::build(params, horizon, tests)),
      contacts_(std::move(contacts)),
      tests_(std::move(tests)),
      trace_(InfectionTrace::never_infected(horizon)) {
    for (const auto& c : contacts_) {
        if (c.u != id_ || c.v == id_) throw DataError("device: contact record does not start at the device");
        if (static_cast<int>(c.x.size()) != params_.channels()) throw DataError("device: channel count mismatch");
    }
    for (const auto& t : tests_) {
        if (t.u != id_) throw DataError("device: test record of another individual");
    }
    std::sort(contacts_.begin(), contacts_.end(),
              [](const ContactRecord& a, const ContactRecord& b) { return std::tie(a.t, a.v) < std::tie(b.t, b.v); });
    for (const auto& c : contacts_) {
        log_weight_.push_back(contact_log_weight(c.x, params_.p));
        partners_.push_back(c.v);
    }
    std::sort(partners_.begin(), partners_.end());
    partners_.erase(std::unique(partners_.begin(), partners_.end()), partners_.end());
    for (int v : partners_) cache_[v] = {InfectionTrace::never_infected(horizon_), {}, false};
}

std::vector<int> DeviceNode::drain_inbox() {
    std::vector<int> changed;
    while (!inbox_.empty()) {
        auto m = std::move(inbox_.front());
        inbox_.pop_front();
        auto it = cache_.find(m.sender);
        if (it == cache_.end() || m.receiver != id_) throw DataError("device: message from a non-contact");
        auto z = canonicalize(m.trace, horizon_);
        if (!it->second.heard || !(it->second.trace == z)) changed.push_back(m.sender);
        it->second = {z, std::move(m.log_f), true};
    }
    std::sort(changed.begin(), changed.end());
    changed.erase(std::unique(changed.begin(), changed.end()), changed.end());
    return changed;
}

double DeviceNode::log_f_without(int day, int excluded) const {
    double acc = prior_.log_stay_exogenous;
    auto first = std::lower_bound(contacts_.begin(), contacts_.end(), day,
                                  [](const ContactRecord& c, int d) { return c.t < d; });
    for (auto it = first; it != contacts_.end() && it->t == day; ++it) {
        if (it->v == excluded) continue;
        if (state_at(cache_.at(it->v).trace, day) == InfectionState::I) {
            acc += log_weight_[static_cast<std::size_t>(it - contacts_.begin())];
        }
    }
    return acc;
}

MinimalStatisticsMessage DeviceNode::message_for(int partner) const {
    MinimalStatisticsMessage m{id_, partner, trace_, {}};
    for (const auto& c : contacts_) {
        if (c.v != partner || c.t > trace_.t0 || c.t >= horizon_) continue;
        m.log_f[c.t] = log_f_without(c.t, partner);
    }
    return m;
}

std::vector<MinimalStatisticsMessage> DeviceNode::build_outgoing() const {
    std::vector<MinimalStatisticsMessage> out;
    out.reserve(partners_.size());
    for (int v : partners_) out.push_back(message_for(v));
    return out;
}

TraceScorer DeviceNode::scorer() const {
    std::vector<ContactView> views;
    for (std::size_t k = 0; k < contacts_.size(); ++k) {
        const auto& c = contacts_[k];
        if (c.t >= horizon_) continue;
        const auto& entry = cache_.at(c.v);
        if (!entry.heard) continue;
        ContactView cv;
        cv.day = c.t;
        cv.log_weight = log_weight_[k];
        cv.other = entry.trace;
        if (cv.day == cv.other.t0 && cv.log_weight != 0.0) {
            auto it = entry.log_f.find(c.t);
            if (it == entry.log_f.end()) throw std::logic_error("device: partner message lacks its infection day");
            cv.log_f_without_self = it->second;
        }
        views.push_back(cv);
    }
    DynamicTables dyn;
    build_dynamic(horizon_, views, dyn);
    return TraceScorer(prior_, test_tables_, dyn);
}

std::vector<MinimalStatisticsMessage> DeviceNode::device_step(SamplerRoute route, Rng& rng) {
    drain_inbox();
    trace_ = sample_trace(scorer(), route, rng);
    return build_outgoing();
}

bool DeviceNode::satisfies_locality() const {
    for (const auto& c : contacts_) {
        if (c.u != id_) return false;
    }
    for (const auto& t : tests_) {
        if (t.u != id_) return false;
    }
    for (const auto& [v, entry] : cache_) {
        if (!std::binary_search(partners_.begin(), partners_.end(), v)) return false;
    }
    return true;
}

std::vector<DeviceNode> make_nodes(const ContactLog& contacts, const TestLog& tests, const ModelParams& params,
                                   int horizon) {
    std::vector<DeviceNode> nodes;
    for (int u = 0; u < contacts.population(); ++u) {
        std::vector<ContactRecord> local;
        auto nb = contacts.neighbors(u);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            auto x = contacts.counts(u, k);
            local.push_back({u, nb[k].other, nb[k].day, std::vector<int>(x.begin(), x.end())});
        }
        std::vector<TestRecord> own;
        if (u < tests.population()) {
            auto t = tests.tests_of(u);
            own.assign(t.begin(), t.end());
        }
        nodes.emplace_back(u, horizon, params, std::move(local), std::move(own));
    }
    return nodes;
}

int Schedule::delay(int sender, int receiver) const {
    auto it = edge_delay.find({sender, receiver});
    return it == edge_delay.end() ? default_delay : it->second;
}

FederatedRun run_federated(std::vector<DeviceNode>& nodes, const Schedule& schedule, int rounds, std::uint64_t seed,
                           SamplerRoute route) {
    if (rounds < 0) throw std::invalid_argument("federated: rounds must be >= 0");
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!index.emplace(nodes[i].id(), i).second) throw DataError("federated: duplicate node id");
    }
    if (schedule.kind == ScheduleKind::replay) {
        for (int id : schedule.replay) {
            if (!index.count(id)) throw DataError("federated: schedule names unknown node " + std::to_string(id));
        }
    }
    Rng rng = make_rng(seed);
    FederatedRun run;
    struct Pending {
        int due;
        MinimalStatisticsMessage message;
    };
    std::deque<Pending> pending;
    RoundStats stats;

    std::function<void(MinimalStatisticsMessage, int)> post;
    auto deliver = [&](MinimalStatisticsMessage m, int round) {
        auto it = index.find(m.receiver);
        if (it == index.end()) throw DataError("federated: message to unknown node " + std::to_string(m.receiver));
        auto& node = nodes[it->second];
        int sender = m.sender;
        node.deliver(std::move(m));
        if (node.drain_inbox().empty()) return;
        // partners of this node need log f values that reflect the new trace
        for (int v : node.partners()) {
            if (v != sender) post(node.message_for(v), round);
        }
    };
    post = [&](MinimalStatisticsMessage m, int round) {
        ++stats.messages;
        stats.bytes += encode_message(m).size();
        int d = schedule.delay(m.sender, m.receiver);
        if (d <= 0) {
            deliver(std::move(m), round);
        } else {
            pending.push_back({round + d, std::move(m)});
        }
    };

    for (auto& node : nodes) {
        for (auto& m : node.build_outgoing()) post(std::move(m), 0);
    }
    run.rounds.push_back(stats);

    std::vector<std::size_t> order(nodes.size());
    for (int r = 1; r <= rounds; ++r) {
        stats = {r, 0, 0};
        std::deque<Pending> queued;
        queued.swap(pending);
        for (auto& p : queued) {
            if (p.due <= r) {
                deliver(std::move(p.message), r);
            } else {
                pending.push_back(std::move(p));
            }
        }

        std::vector<std::size_t> active;
        if (schedule.kind == ScheduleKind::replay) {
            for (int id : schedule.replay) active.push_back(index.at(id));
        } else {
            std::iota(order.begin(), order.end(), 0);
            if (schedule.kind == ScheduleKind::random) std::shuffle(order.begin(), order.end(), rng);
            active = order;
        }
        for (std::size_t i : active) {
            auto& node = nodes[i];
            for (auto& m : node.device_step(route, rng)) post(std::move(m), r);
            run.activations.push_back({r, node.id(), node.trace()});
        }
        run.rounds.push_back(stats);
    }
    return run;
}

}  // namespace crisp
