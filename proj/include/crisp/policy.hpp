#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "crisp/contact_gen.hpp"
#include "crisp/data.hpp"
#include "crisp/forward_sim.hpp"
#include "crisp/gibbs.hpp"
#include "crisp/model.hpp"

namespace crisp {

enum class PolicyKind { none, lockdown, symptom, contact_tracing, crisp };

const char* to_string(PolicyKind kind);
/// Throws std::invalid_argument on an unknown name.
PolicyKind policy_kind_from_string(const std::string& name);

struct PolicyParams {
    PolicyKind kind = PolicyKind::none;
    int rho = 14;           // quarantine days (symptom, contact tracing)
    double tau_ei = 0.3;    // crisp: quarantine above this P(E or I)
    double tau_sr = 0.9;    // crisp: release above this P(S or R)
    int budget = 10;        // tests per day
    int start_day = 30;     // no tests or quarantines before this day
    int lookback = 7;       // contact tracing window
    int num_samples = 100;  // crisp
    int burn_in = 10;       // crisp
    double p0_scale = 10.0; // crisp: inflates p0 of the inference model
    bool warm_start = false;  // crisp: chains continue from yesterday's last sample

    /// Throws std::invalid_argument if an invariant is violated.
    void validate() const;
    /// Short label such as "symptom rho=14".
    std::string label() const;
};

/// Currently symptomatic individual and the day its symptoms began.
struct SymptomReport {
    int individual;
    int onset;
    friend bool operator==(const SymptomReport&, const SymptomReport&) = default;
};

/// Everything a policy learns at the end of one day. Outcomes and symptoms are
/// empty before the activation day.
struct Observation {
    int day = 1;
    DayContacts contacts;               // realized contacts, quarantined individuals removed
    std::vector<TestRecord> outcomes;   // tests taken on `day`
    std::vector<SymptomReport> symptomatic;  // symptomatic on day + 1
};

struct Decision {
    std::vector<int> tests;
    std::vector<int> quarantine;  // ascending ids
};

/// Bookkeeping shared by the policies. Built only from observations.
struct PolicyState {
    int population = 0;
    int horizon = 0;
    std::map<int, int> release_day;  // quarantined through this day
    std::set<int> ever_positive;
    std::vector<TestRecord> outcomes;
    std::vector<std::vector<SymptomReport>> symptomatic;  // index day - 1
    ContactLog contacts;

    PolicyState(int population, int horizon, int channels);

    bool quarantined(int u, int day) const;
    std::vector<int> quarantine_set(int day) const;
    void quarantine_until(int u, int last_day);
    void release(int u, int day);
    /// Symptomatic individuals known at the end of `day` that never tested
    /// positive: earliest onset first, ties by ascending id.
    std::vector<int> symptomatic_candidates(int day) const;
};

class Policy {
public:
    virtual ~Policy() = default;
    /// Tests and quarantine set for `day` (called for day >= start_day).
    virtual Decision decide(int day) = 0;
    /// Called at the end of every day.
    virtual void observe(const Observation& obs) = 0;
    virtual const PolicyState& state() const = 0;
    /// Days skipped because the policy could not decide.
    virtual std::vector<std::string> take_warnings() { return {}; }
};

/// `inference` is the model the crisp policy believes in (p0 is scaled by
/// params.p0_scale); the other policies ignore it.
std::unique_ptr<Policy> make_policy(const PolicyParams& params, const ModelParams& inference, int population,
                                    int horizon, std::uint64_t seed);

/// Posterior state probabilities on day `day` of the crisp inference model.
/// Rows are individuals, columns S, E, I, R.
std::vector<std::array<double, kNumStates>> crisp_state_probabilities(const ContactLog& contacts,
                                                                       const TestLog& tests,
                                                                       const ModelParams& params, int day,
                                                                       const GibbsConfig& config,
                                                                       std::vector<InfectionTrace>* chain = nullptr);

/// Quarantine set after one crisp update: individuals outside `current` join
/// when P(E or I) > tau_ei, members leave when P(S or R) > tau_sr.
std::vector<int> crisp_quarantine(std::span<const std::array<double, kNumStates>> probs,
                                  const std::vector<int>& current, double tau_ei, double tau_sr);

/// `symptomatic` first, then individuals never tested positive by descending
/// P(I), ties by ascending id, up to the budget.
std::vector<int> crisp_tests(std::span<const std::array<double, kNumStates>> probs,
                             const std::vector<int>& symptomatic, const std::set<int>& ever_positive, int budget);

/// Carries a trace canonical for an earlier horizon over to a later one.
InfectionTrace extend_horizon(const InfectionTrace& z, int old_horizon, int new_horizon);

struct HarnessConfig {
    int population = 1000;
    int horizon = 150;
    int patient_zero = 0;
    ModelParams truth;  // p0 applies to everyone but the patient zero
    ContactPatternSpec contacts;
    std::uint64_t seed = 0;

    /// Setting used for the policy comparison: 1000 people, 150 days,
    /// R0 = 2.5, p = 0.025, p0 = 1e-4 and one patient zero.
    static HarnessConfig standard(std::uint64_t seed);
    void validate() const;
};

struct RunMetrics {
    double infected_pct = 0.0;  // share that left S by the last day, in percent
    long long quarantine_days = 0;
    std::vector<std::array<int, kNumStates>> quarantined_by_state;  // per day 1..T-1
    std::vector<std::array<int, kNumStates>> counts;                // true counts per day 1..T
    int truncated_days = 0;
    std::vector<std::string> warnings;
};

/// Closed-loop simulation of one policy against a ground truth.
class PolicySimulation {
public:
    PolicySimulation(const HarnessConfig& config, const PolicyParams& params, std::unique_ptr<Policy> policy);
    PolicySimulation(const HarnessConfig& config, const PolicyParams& params);

    int day() const { return truth_.day; }
    bool done() const { return truth_.day >= config_.horizon; }
    /// One day: decide, remove quarantined contacts, test, step, reveal.
    void day_loop();
    void run();

    const PopulationState& truth() const { return truth_; }
    const Decision& last_decision() const { return decision_; }
    const DayContacts& last_contacts() const { return contacts_; }
    const Policy& policy() const { return *policy_; }
    const RunMetrics& metrics() const { return metrics_; }

private:
    HarnessConfig config_;
    PolicyParams params_;
    std::unique_ptr<Policy> policy_;
    PopulationState truth_;
    ExogenousOverrides overrides_;
    std::vector<int> onset_;
    Decision decision_;
    DayContacts contacts_;
    RunMetrics metrics_;
};

RunMetrics run_policy(const HarnessConfig& config, const PolicyParams& params);

struct GridResult {
    PolicyParams params;
    std::vector<std::uint64_t> seeds;
    std::vector<RunMetrics> runs;
    double infected_mean = 0.0, infected_sd = 0.0;
    double quarantine_mean = 0.0, quarantine_sd = 0.0;
};

/// No mitigation, full lockdown, symptom and contact tracing for rho in
/// {2, 7, 14, 21}, crisp for tau_EI in {0.2, 0.3, 0.4, 0.5}.
std::vector<PolicyParams> standard_grid(const PolicyParams& base = {});

/// Runs every grid point with seeds first_seed..first_seed+num_seeds-1 in
/// parallel. Seeds are shared across points.
std::vector<GridResult> evaluate_policy_grid(const HarnessConfig& base, const std::vector<PolicyParams>& points,
                                             int num_seeds, std::uint64_t first_seed);

}  // namespace crisp
