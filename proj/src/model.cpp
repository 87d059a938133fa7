#include "crisp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crisp {

Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * streams.size());
    auto push = [&](std::uint64_t x) {
        words.push_back(static_cast<std::uint32_t>(x));
        words.push_back(static_cast<std::uint32_t>(x >> 32));
    };
    push(seed);
    for (auto s : streams) push(s);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

char to_char(InfectionState s) {
    switch (s) {
        case InfectionState::S: return 'S';
        case InfectionState::E: return 'E';
        case InfectionState::I: return 'I';
        case InfectionState::R: return 'R';
    }
    return '?';
}

InfectionState trace_state(const InfectionTrace& z, int t, int horizon) {
    if (t < 1 || t > horizon) {
        throw std::domain_error("trace_state: day " + std::to_string(t) + " outside 1.." +
                                std::to_string(horizon));
    }
    return state_at(z, t);
}

InfectionTrace canonicalize(const InfectionTrace& z, int horizon) {
    if (z.t0 >= horizon) return InfectionTrace::never_infected(horizon);
    if (z.t0 + z.dE >= horizon) return {z.t0, horizon - z.t0, 1};
    if (z.t0 + z.dE + z.dI >= horizon) return {z.t0, z.dE, horizon - z.t0 - z.dE};
    return z;
}

bool is_canonical(const InfectionTrace& z, int horizon) {
    if (z.t0 < 1 || z.dE < 1 || z.dI < 1) return false;
    return canonicalize(z, horizon) == z;
}

std::vector<InfectionTrace> admissible_traces(int horizon) {
    std::vector<InfectionTrace> out;
    for (int a = 1; a < horizon; ++a) {
        for (int b = a + 1; b <= horizon; ++b) {
            if (b == horizon) {
                out.push_back({a, b - a, 1});
                continue;
            }
            for (int c = b + 1; c <= horizon; ++c) out.push_back({a, b - a, c - b});
        }
    }
    out.push_back(InfectionTrace::never_infected(horizon));
    return out;
}

DurationDistribution::DurationDistribution(std::vector<double> pmf) : pmf_(std::move(pmf)) {
    if (pmf_.empty()) throw std::invalid_argument("duration pmf is empty");
    double total = 0.0;
    for (double q : pmf_) {
        if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("duration pmf entry outside [0,1]");
        total += q;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("duration pmf sums to " + std::to_string(total));
    }
    if (!(pmf_.back() > 0.0)) throw std::invalid_argument("duration pmf has zero mass at D_max");
    tail_.assign(pmf_.size(), 0.0);
    double acc = 0.0;
    for (std::size_t n = pmf_.size(); n-- > 0;) {
        acc += pmf_[n];
        tail_[n] = acc;
    }
    mean_ = 0.0;
    for (std::size_t n = 0; n < pmf_.size(); ++n) mean_ += static_cast<double>(n + 1) * pmf_[n];
}

double DurationDistribution::tail(int n) const {
    if (n <= 1) return 1.0;
    if (n > max_days()) return 0.0;
    return tail_[n - 1];
}

double DurationDistribution::log_pmf(int n) const {
    double q = pmf(n);
    return q > 0.0 ? std::log(q) : kNegInf;
}

double DurationDistribution::log_tail(int n) const {
    double q = tail(n);
    return q > 0.0 ? std::log(q) : kNegInf;
}

DurationDistribution DurationDistribution::geometric(double rate, int max_days) {
    if (!(rate > 0.0 && rate <= 1.0) || max_days < 1) {
        throw std::invalid_argument("geometric duration needs rate in (0,1] and max_days >= 1");
    }
    std::vector<double> pmf(static_cast<std::size_t>(max_days));
    double survive = 1.0;
    for (int n = 1; n < max_days; ++n) {
        pmf[n - 1] = survive * rate;
        survive *= 1.0 - rate;
    }
    pmf[max_days - 1] = survive;
    return DurationDistribution(std::move(pmf));
}

namespace {

std::vector<double> negbin_table(double shape, double p, int max_days) {
    // d = 1 + k, k ~ NegBin(shape, p) with P(k) = Gamma(k+r)/(k! Gamma(r)) p^r (1-p)^k
    std::vector<double> pmf(static_cast<std::size_t>(max_days));
    double log_p = std::log(p), log_q = std::log1p(-p), lg_r = std::lgamma(shape);
    double total = 0.0;
    for (int k = 0; k < max_days; ++k) {
        double lp = std::lgamma(k + shape) - std::lgamma(k + 1.0) - lg_r + shape * log_p + k * log_q;
        pmf[k] = std::exp(lp);
        total += pmf[k];
    }
    for (double& q : pmf) q /= total;
    return pmf;
}

double table_mean(const std::vector<double>& pmf) {
    double m = 0.0;
    for (std::size_t n = 0; n < pmf.size(); ++n) m += static_cast<double>(n + 1) * pmf[n];
    return m;
}

}  // namespace

DurationDistribution DurationDistribution::shifted_negative_binomial(double mean, double shape,
                                                                     double tail_eps) {
    if (!(mean > 1.0) || !(shape > 0.0) || !(tail_eps > 0.0 && tail_eps < 1.0)) {
        throw std::invalid_argument("shifted negative binomial needs mean > 1, shape > 0");
    }
    double p = shape / (shape + mean - 1.0);
    // Support cut where the untruncated tail falls below tail_eps.
    int max_days = 1;
    {
        double log_p = std::log(p), log_q = std::log1p(-p), lg_r = std::lgamma(shape);
        double cdf = 0.0;
        for (int k = 0; k < 10000; ++k) {
            cdf += std::exp(std::lgamma(k + shape) - std::lgamma(k + 1.0) - lg_r + shape * log_p +
                            k * log_q);
            if (1.0 - cdf < tail_eps) {
                max_days = k + 1;
                break;
            }
        }
    }
    // Re-tune p on the fixed support so the truncated mean is exact.
    double lo = 1e-9, hi = 1.0 - 1e-12;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (table_mean(negbin_table(shape, mid, max_days)) > mean)
            lo = mid;
        else
            hi = mid;
    }
    return DurationDistribution(negbin_table(shape, 0.5 * (lo + hi), max_days));
}

DurationDistribution DurationDistribution::default_exposure() {
    static const DurationDistribution q = shifted_negative_binomial(5.0, 4.0);
    return q;
}

DurationDistribution DurationDistribution::default_infectious() {
    static const DurationDistribution q = shifted_negative_binomial(19.88, 10.0);
    return q;
}

void ModelParams::validate() const {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(p0)) throw std::invalid_argument("p0 outside [0,1]");
    if (p.empty()) throw std::invalid_argument("at least one contact channel is required");
    for (double pj : p) {
        if (!in_unit(pj)) throw std::invalid_argument("channel probability outside [0,1]");
    }
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 0.5)");
    if (!(beta > 0.0 && beta < 0.5)) throw std::invalid_argument("beta must lie in (0, 0.5)");
    if (qE.max_days() < 1 || qI.max_days() < 1) {
        throw std::invalid_argument("duration distributions are empty");
    }
}

double hazard(int n, const DurationDistribution& q) {
    if (n < 1 || n > q.max_days()) {
        throw std::domain_error("hazard: n=" + std::to_string(n) + " outside 1.." +
                                std::to_string(q.max_days()));
    }
    double tail = q.tail(n);
    if (!(tail > 0.0)) throw std::domain_error("hazard: zero tail mass");
    return std::min(1.0, q.pmf(n) / tail);
}

double contact_log_weight(std::span<const int> counts, std::span<const double> p) {
    double acc = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] != 0) acc += counts[j] * std::log1p(-p[j]);
    }
    return acc;
}

double log_no_infection_prob(std::span<const std::vector<int>> infectious_contacts,
                             const ModelParams& params) {
    double acc = std::log1p(-params.p0);
    for (const auto& x : infectious_contacts) {
        if (x.size() != params.p.size()) {
            throw std::invalid_argument("contact channel count does not match model");
        }
        for (int c : x) {
            if (c < 0) throw std::invalid_argument("negative contact count");
        }
        acc += contact_log_weight(x, params.p);
    }
    return acc;
}

double no_infection_prob(std::span<const std::vector<int>> infectious_contacts,
                         const ModelParams& params) {
    return std::exp(log_no_infection_prob(infectious_contacts, params));
}

double transition_prob(InfectionState from, InfectionState to, double f_val, int days_in_E,
                       int days_in_I, const ModelParams& params) {
    using enum InfectionState;
    switch (from) {
        case S:
            if (to == S) return f_val;
            if (to == E) return 1.0 - f_val;
            return 0.0;
        case E: {
            double g = hazard(days_in_E, params.qE);
            if (to == E) return 1.0 - g;
            if (to == I) return g;
            return 0.0;
        }
        case I: {
            double h = hazard(days_in_I, params.qI);
            if (to == I) return 1.0 - h;
            if (to == R) return h;
            return 0.0;
        }
        case R:
            return to == R ? 1.0 : 0.0;
    }
    return 0.0;
}

double test_likelihood(int outcome, InfectionState z, const ModelParams& params) {
    if (z == InfectionState::I) return outcome ? 1.0 - params.alpha : params.alpha;
    return outcome ? params.beta : 1.0 - params.beta;
}

double log_test_likelihood(int outcome, InfectionState z, const ModelParams& params) {
    return std::log(test_likelihood(outcome, z, params));
}

double log1mexp(double x) {
    if (x > -0.693147180559945) return std::log(-std::expm1(x));
    return std::log1p(-std::exp(x));
}

}  // namespace crisp
