#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crisp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Rng = std::mt19937_64;

/// Builds a generator from a base seed and a list of stream identifiers, so
/// that (seed, day), (seed, sample, day), ... give independent streams.
Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams = {});

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Raised for malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a computation produces an impossible or non-finite result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class InfectionState : std::uint8_t { S = 0, E = 1, I = 2, R = 3 };

inline constexpr int kNumStates = 4;

char to_char(InfectionState s);

/// Compact SEIR trace: t0 days in S, then dE days in E, dI days in I, then R.
/// Days are 1-based, so the individual is S on days 1..t0.
struct InfectionTrace {
    int t0 = 1;
    int dE = 1;
    int dI = 1;

    friend bool operator==(const InfectionTrace&, const InfectionTrace&) = default;

    /// All-S over a horizon of T days.
    static InfectionTrace never_infected(int horizon) { return {horizon, 1, 1}; }

    int last_s_day() const { return t0; }
    int last_e_day() const { return t0 + dE; }
    int last_i_day() const { return t0 + dE + dI; }
};

static_assert(sizeof(InfectionTrace) == 3 * sizeof(int));

/// Unchecked state lookup (three comparisons).
inline InfectionState state_at(const InfectionTrace& z, int t) {
    if (t <= z.t0) return InfectionState::S;
    if (t <= z.t0 + z.dE) return InfectionState::E;
    if (t <= z.t0 + z.dE + z.dI) return InfectionState::I;
    return InfectionState::R;
}

/// State of the trace on day t; throws std::domain_error unless 1 <= t <= horizon.
InfectionState trace_state(const InfectionTrace& z, int t, int horizon);

/// Maps any triple to the unique representative of its state sequence on
/// days 1..horizon. Phases running past the horizon are clipped to end on it.
InfectionTrace canonicalize(const InfectionTrace& z, int horizon);

/// True when `z` is one of the canonical triples enumerated for the horizon.
bool is_canonical(const InfectionTrace& z, int horizon);

/// Every canonical triple for the horizon, in (t0, dE, dI) lexicographic order.
std::vector<InfectionTrace> admissible_traces(int horizon);

/// Finite duration pmf q(1..D_max).
class DurationDistribution {
public:
    DurationDistribution() = default;
    /// pmf[0] is q(1). Throws std::invalid_argument on an invalid table.
    explicit DurationDistribution(std::vector<double> pmf);

    static DurationDistribution geometric(double rate, int max_days);
    /// 1 + NegBin(shape, p) truncated where the tail mass drops below
    /// `tail_eps`, with p tuned so the truncated table has exactly `mean`.
    static DurationDistribution shifted_negative_binomial(double mean, double shape,
                                                          double tail_eps = 1e-4);
    static DurationDistribution default_exposure();
    static DurationDistribution default_infectious();

    int max_days() const { return static_cast<int>(pmf_.size()); }
    double mean() const { return mean_; }
    const std::vector<double>& pmf() const { return pmf_; }

    /// q(n); zero outside 1..D_max.
    double pmf(int n) const { return (n >= 1 && n <= max_days()) ? pmf_[n - 1] : 0.0; }
    /// P(d >= n) = 1 - sum_{i<n} q(i); one for n <= 1, zero past D_max.
    double tail(int n) const;
    double log_pmf(int n) const;
    double log_tail(int n) const;

private:
    std::vector<double> pmf_;
    std::vector<double> tail_;  // tail_[n-1] = P(d >= n)
    double mean_ = 0.0;
};

struct ModelParams {
    double p0 = 1e-4;
    std::vector<double> p{0.025};  // per-channel transmission probabilities
    double alpha = 0.001;          // false-negative rate
    double beta = 0.01;            // false-positive rate
    DurationDistribution qE = DurationDistribution::default_exposure();
    DurationDistribution qI = DurationDistribution::default_infectious();

    int channels() const { return static_cast<int>(p.size()); }
    /// Throws std::invalid_argument if any invariant is violated.
    void validate() const;
};

/// Conditional probability that a duration is exactly n given it is at least n.
double hazard(int n, const DurationDistribution& q);

/// Probability of staying susceptible for one day given the channel counts of
/// all contacts that are currently infectious.
double no_infection_prob(std::span<const std::vector<int>> infectious_contacts,
                         const ModelParams& params);
double log_no_infection_prob(std::span<const std::vector<int>> infectious_contacts,
                             const ModelParams& params);

/// sum_j x_j log(1 - p_j) for one contact's channel counts.
double contact_log_weight(std::span<const int> counts, std::span<const double> p);

/// One-step transition probability. `days_in_E` / `days_in_I` count the days
/// spent in that state up to and including the current day.
double transition_prob(InfectionState from, InfectionState to, double f_val, int days_in_E,
                       int days_in_I, const ModelParams& params);

double test_likelihood(int outcome, InfectionState z, const ModelParams& params);
double log_test_likelihood(int outcome, InfectionState z, const ModelParams& params);

/// log(1 - exp(x)) for x <= 0.
double log1mexp(double x);

}  // namespace crisp
