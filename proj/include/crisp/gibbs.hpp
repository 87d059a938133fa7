#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "crisp/data.hpp"
#include "crisp/model.hpp"

namespace crisp {

/// Contact-independent prior terms of the trace score for one horizon.
/// Duration terms are indexed by day count; entries past D_max are -inf.
struct PriorTables {
    int horizon = 0;
    double log_stay_exogenous = 0.0;  // log(1 - p0)
    std::vector<double> log_qE, log_tailE;  // [d], d = 0..horizon
    std::vector<double> log_qI, log_tailI;
    std::vector<double> qE, tailE, qI, tailI;  // linear versions
    int max_dE = 0;  // min(D_max(qE), horizon)
    int max_dI = 0;

    static PriorTables build(const ModelParams& params, int horizon);

    /// log l0(t0) = (t0 - 1) log(1 - p0) + log p0.
    double log_l0(int t0, double p0) const;
    /// Exposure term of a canonical triple ending E on day b (censored at the horizon).
    double log_exposure(int a, int b) const {
        return b < horizon ? log_qE[b - a] : log_tailE[horizon - a];
    }
    double log_infectious(int b, int c) const {
        return c < horizon ? log_qI[c - b] : log_tailI[horizon - b];
    }
    double exposure(int a, int b) const { return b < horizon ? qE[b - a] : tailE[horizon - a]; }
    double infectious(int b, int c) const { return c < horizon ? qI[c - b] : tailI[horizon - b]; }
};

/// Test terms for one individual. Every test is scored as if the individual
/// were not infectious (`base`); infectious days add the per-day difference.
struct TestTables {
    double base = 0.0;
    std::vector<double> delta;  // [t], t = 0..horizon

    static TestTables build(const ModelParams& params, int horizon, std::span<const TestRecord> tests);
    /// log C of a trace, by direct summation.
    double log_likelihood(const InfectionTrace& z) const;
};

struct StaticTables {
    PriorTables prior;
    TestTables tests;
};

StaticTables precompute_static(const ModelParams& params, int horizon, std::span<const TestRecord> tests);

/// One contact of u seen from u: the day, sum_j x_j log(1 - p_j), the other
/// individual's trace and, on the other's infection day, log f of the other
/// with u's own factor removed.
struct ContactView {
    int day = 1;
    double log_weight = 0.0;
    InfectionTrace other;
    double log_f_without_self = 0.0;
};

/// Per-step tables for u given all other traces.
struct DynamicTables {
    int horizon = 0;
    std::vector<double> log_l_infected;  // [t] = log p_{u,t}; zero at t = 0 and t >= horizon
    std::vector<double> log_b_ratio;     // [t] finite part of log B(I)/B(not I); zero outside 1..horizon-1
    std::vector<int> must_be_infectious;  // days on which B(not I) = 0 (only possible with p0 = 0)
};

/// Builds the dynamic tables from u's contacts (any order).
void build_dynamic(int horizon, std::span<const ContactView> contacts, DynamicTables& out);

/// Direct evaluation from the data: p_{u,t} from contacts with an
/// infectious partner and the B ratios from partners' (S,S) / (S,E) days.
DynamicTables precompute_dynamic(int u, std::span<const InfectionTrace> traces, const ContactLog& contacts,
                                 const ModelParams& params, int horizon);

/// Prefix sums over the tables that make any triple's score O(1).
class TraceScorer {
public:
    /// Keeps a reference to the prior tables, which must outlive the scorer.
    TraceScorer(const StaticTables& st, const DynamicTables& dyn);
    TraceScorer(const PriorTables& prior, const TestTables& tests, const DynamicTables& dyn);

    /// Log of the unnormalized conditional probability of the canonical triple.
    double score(const InfectionTrace& z) const;

    int horizon() const { return horizon_; }
    /// Everything depending on t0 alone: S days, the infection day and l0.
    double susceptible_part(int a) const { return s_part_[a]; }
    /// Sum of B ratios and test deltas over the infectious days b+1..c.
    double range(int b, int c) const { return q_prefix_[c] - q_prefix_[b]; }
    double prefix(int t) const { return q_prefix_[t]; }
    /// Whether infectious days b+1..c cover every day u must be infectious on.
    bool allows(int b, int c) const { return b < first_must_ && c >= last_must_; }
    /// Whether a trace without infectious days is possible.
    bool allows_none() const { return last_must_ == 0; }
    int first_must() const { return first_must_; }
    int last_must() const { return last_must_; }
    double test_base() const { return base_; }
    const PriorTables& prior() const { return *prior_; }

private:
    const PriorTables* prior_;
    int horizon_;
    std::vector<double> s_part_;    // [a], a = 1..horizon (a = horizon: never infected)
    std::vector<double> q_prefix_;  // [t], t = 0..horizon
    int first_must_;
    int last_must_;
    double base_;
};

double trace_log_score(const InfectionTrace& z, const StaticTables& st, const DynamicTables& dyn);

enum class SamplerRoute {
    automatic,  // factored
    enumerate,  // scores every admissible triple
    factored,   // exact chain sampler over t0, then the E end day, then the I end day
};

/// Exact conditional over canonical triples with non-zero probability.
std::vector<std::pair<InfectionTrace, double>> conditional_distribution(const TraceScorer& scorer,
                                                                        SamplerRoute route);

/// Draws a triple from the exact conditional. Throws NumericalError when no
/// triple has positive probability.
InfectionTrace sample_trace(const TraceScorer& scorer, SamplerRoute route, Rng& rng);

enum class SweepOrder { permutation, uniform_picks };

struct GibbsConfig {
    int num_samples = 100;
    int burn_in = 10;
    int thinning = 1;
    SweepOrder order = SweepOrder::permutation;
    SamplerRoute route = SamplerRoute::automatic;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Block-Gibbs sampler over all individuals' traces. Contacts on days at or
/// after the horizon are ignored; tests must lie within the horizon.
class GibbsSampler {
public:
    GibbsSampler(const ContactLog& contacts, const TestLog& tests, const ModelParams& params, int horizon);

    int population() const { return population_; }
    int horizon() const { return horizon_; }
    const std::vector<InfectionTrace>& traces() const { return traces_; }
    /// Replaces all traces (canonicalized to the horizon).
    void set_traces(std::span<const InfectionTrace> traces);

    /// Scorer for u's conditional under the current other traces.
    TraceScorer scorer(int u) const;
    DynamicTables dynamic_tables(int u) const;
    const PriorTables& prior() const { return prior_; }
    const TestTables& test_tables(int u) const { return tests_[u]; }

    /// Resamples u's trace in place and returns it.
    InfectionTrace step(int u, SamplerRoute route, Rng& rng);
    /// One pass over the population in the configured order.
    void sweep(SweepOrder order, SamplerRoute route, Rng& rng);

    /// Burn-in, then config.num_samples recorded states, each `thinning`
    /// sweeps apart; on_sample is called with every recorded state.
    void run(const GibbsConfig& config, Rng& rng,
             const std::function<void(const std::vector<InfectionTrace>&)>& on_sample);

private:
    void fill_views(int u, std::vector<ContactView>& views) const;
    /// log f(v, t) without u's own factor.
    double log_f_without(int v, int t, int u) const;

    const ContactLog* contacts_;
    ModelParams params_;
    int population_;
    int horizon_;
    PriorTables prior_;
    std::vector<TestTables> tests_;
    std::vector<std::vector<double>> log_weight_;  // aligned with contacts_->neighbors(u)
    std::vector<std::size_t> active_;              // neighbors(u)[0..active_[u]) fall before the horizon
    std::vector<InfectionTrace> traces_;
    DynamicTables scratch_dyn_;
    std::vector<ContactView> scratch_views_;
};

/// All-S initialization, burn-in, then config.num_samples population samples.
std::vector<std::vector<InfectionTrace>> run_gibbs(const ContactLog& contacts, const TestLog& tests,
                                                   const ModelParams& params, const GibbsConfig& config);

/// Per-individual, per-day state frequencies over a set of samples.
class StateMarginals {
public:
    StateMarginals(int population, int horizon);
    void add(std::span<const InfectionTrace> sample);
    int samples() const { return samples_; }
    int population() const { return population_; }
    int horizon() const { return horizon_; }
    /// P(z_{u,t} = s) for t in 1..horizon.
    double prob(int u, int t, InfectionState s) const;
    std::array<double, kNumStates> probs(int u, int t) const;

private:
    void finalize() const;

    int population_;
    int horizon_;
    int samples_ = 0;
    // per-state interval starts/ends, turned into counts on first read
    std::vector<std::int32_t> diff_;  // [(u * (horizon + 1) + t - 1) * 4 + s]
    mutable std::vector<std::uint32_t> counts_;
    mutable bool dirty_ = true;
};

/// Fraction of samples with u in E or I on day t, for every u.
std::vector<double> risk_scores(std::span<const std::vector<InfectionTrace>> samples, int t);

}  // namespace crisp
