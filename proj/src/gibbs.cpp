#include "crisp/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace crisp {

namespace {

double log_or_neg_inf(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// (n) * x with 0 * -inf taken as 0.
double scaled(int n, double x) { return n == 0 ? 0.0 : n * x; }

double log_sum_exp(std::span<const double> xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - m);
    return m + std::log(acc);
}

// Index into weights (non-negative, not all zero) drawn proportionally.
std::size_t draw_index(std::span<const double> weights, double total, Rng& rng) {
    double target = uniform01(rng) * total;
    std::size_t last = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last = i;
        acc += weights[i];
        if (target < acc) return i;
    }
    return last;
}

[[noreturn]] void impossible_evidence() {
    throw NumericalError("no infection trace has positive probability under the current evidence");
}

}  // namespace

PriorTables PriorTables::build(const ModelParams& params, int horizon) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    PriorTables pt;
    pt.horizon = horizon;
    pt.log_stay_exogenous = std::log1p(-params.p0);
    auto n = static_cast<std::size_t>(horizon) + 1;
    pt.log_qE.assign(n, kNegInf);
    pt.log_qI.assign(n, kNegInf);
    pt.log_tailE.assign(n, kNegInf);
    pt.log_tailI.assign(n, kNegInf);
    for (int d = 1; d <= horizon; ++d) {
        pt.log_qE[d] = params.qE.log_pmf(d);
        pt.log_qI[d] = params.qI.log_pmf(d);
        pt.log_tailE[d] = params.qE.log_tail(d);
        pt.log_tailI[d] = params.qI.log_tail(d);
    }
    auto lin = [](const std::vector<double>& v) {
        std::vector<double> out(v.size());
        std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::exp(x); });
        return out;
    };
    pt.qE = lin(pt.log_qE);
    pt.qI = lin(pt.log_qI);
    pt.tailE = lin(pt.log_tailE);
    pt.tailI = lin(pt.log_tailI);
    pt.max_dE = std::min(params.qE.max_days(), horizon);
    pt.max_dI = std::min(params.qI.max_days(), horizon);
    return pt;
}

double PriorTables::log_l0(int t0, double p0) const {
    return scaled(t0 - 1, log_stay_exogenous) + log_or_neg_inf(p0);
}

TestTables TestTables::build(const ModelParams& params, int horizon, std::span<const TestRecord> tests) {
    TestTables tt;
    tt.delta.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
    for (const auto& r : tests) {
        if (r.t < 1 || r.t > horizon) {
            throw DataError("test of individual " + std::to_string(r.u) + " on day " + std::to_string(r.t) +
                            " lies outside the horizon " + std::to_string(horizon));
        }
        double not_inf = log_test_likelihood(r.outcome, InfectionState::S, params);
        double inf = log_test_likelihood(r.outcome, InfectionState::I, params);
        tt.base += not_inf;
        tt.delta[r.t] += inf - not_inf;
    }
    return tt;
}

double TestTables::log_likelihood(const InfectionTrace& z) const {
    double acc = base;
    for (std::size_t t = 1; t < delta.size(); ++t) {
        if (delta[t] != 0.0 && state_at(z, static_cast<int>(t)) == InfectionState::I) acc += delta[t];
    }
    return acc;
}

StaticTables precompute_static(const ModelParams& params, int horizon, std::span<const TestRecord> tests) {
    return {PriorTables::build(params, horizon), TestTables::build(params, horizon, tests)};
}

void build_dynamic(int horizon, std::span<const ContactView> contacts, DynamicTables& out) {
    auto n = static_cast<std::size_t>(horizon) + 1;
    out.horizon = horizon;
    out.log_l_infected.assign(n, 0.0);
    out.log_b_ratio.assign(n, 0.0);
    out.must_be_infectious.clear();
    for (const auto& c : contacts) {
        const int t = c.day;
        if (t < 1 || t >= horizon) continue;
        if (state_at(c.other, t) == InfectionState::I) out.log_l_infected[t] += c.log_weight;
        if (c.log_weight == 0.0) continue;
        if (t < c.other.t0) {
            // partner stays susceptible: u's factor enters f directly
            out.log_b_ratio[t] += c.log_weight;
        } else if (t == c.other.t0) {
            // partner gets exposed: 1 - f with and without u infectious
            double without = log1mexp(c.log_f_without_self);
            if (without == kNegInf) {
                out.must_be_infectious.push_back(t);
            } else {
                out.log_b_ratio[t] += log1mexp(c.log_f_without_self + c.log_weight) - without;
            }
        }
    }
    auto& m = out.must_be_infectious;
    std::sort(m.begin(), m.end());
    m.erase(std::unique(m.begin(), m.end()), m.end());
}

DynamicTables precompute_dynamic(int u, std::span<const InfectionTrace> traces, const ContactLog& contacts,
                                 const ModelParams& params, int horizon) {
    const double stay = std::log1p(-params.p0);
    std::vector<ContactView> views;
    auto nb = contacts.neighbors(u);
    for (std::size_t k = 0; k < nb.size(); ++k) {
        ContactView cv;
        cv.day = nb[k].day;
        cv.log_weight = contact_log_weight(contacts.counts(u, k), params.p);
        cv.other = canonicalize(traces[nb[k].other], horizon);
        if (cv.day == cv.other.t0) {
            // all infectious contacts of the partner that day, except u
            int v = nb[k].other;
            double acc = stay;
            auto vn = contacts.neighbors(v);
            for (std::size_t i = 0; i < vn.size(); ++i) {
                if (vn[i].day != cv.day || vn[i].other == u) continue;
                if (state_at(canonicalize(traces[vn[i].other], horizon), cv.day) == InfectionState::I) {
                    acc += contact_log_weight(contacts.counts(v, i), params.p);
                }
            }
            cv.log_f_without_self = acc;
        }
        views.push_back(cv);
    }
    DynamicTables out;
    build_dynamic(horizon, views, out);
    return out;
}

TraceScorer::TraceScorer(const StaticTables& st, const DynamicTables& dyn)
    : TraceScorer(st.prior, st.tests, dyn) {}

TraceScorer::TraceScorer(const PriorTables& prior, const TestTables& tests, const DynamicTables& dyn)
    : prior_(&prior), horizon_(prior.horizon), base_(tests.base) {
    const int T = horizon_;
    if (dyn.horizon != T || static_cast<int>(tests.delta.size()) != T + 1) {
        throw std::invalid_argument("static and dynamic tables disagree on the horizon");
    }
    const double stay = prior.log_stay_exogenous;
    s_part_.assign(static_cast<std::size_t>(T) + 1, kNegInf);
    double survive = 0.0;  // log prob of staying S on days 1..a-1
    for (int a = 1; a <= T; ++a) {
        double infect = a < T ? log1mexp(stay + dyn.log_l_infected[a]) : 0.0;
        s_part_[a] = survive + infect;
        if (a < T) survive += stay + dyn.log_l_infected[a];
    }
    q_prefix_.assign(static_cast<std::size_t>(T) + 1, 0.0);
    for (int t = 1; t <= T; ++t) q_prefix_[t] = q_prefix_[t - 1] + dyn.log_b_ratio[t] + tests.delta[t];
    if (dyn.must_be_infectious.empty()) {
        first_must_ = std::numeric_limits<int>::max();
        last_must_ = 0;
    } else {
        first_must_ = dyn.must_be_infectious.front();
        last_must_ = dyn.must_be_infectious.back();
    }
}

double TraceScorer::score(const InfectionTrace& z_in) const {
    const int T = horizon_;
    auto z = canonicalize(z_in, T);
    if (z.t0 >= T) return allows_none() ? s_part_[T] + base_ : kNegInf;
    int a = z.t0, b = z.t0 + z.dE;
    if (b >= T) return allows_none() ? s_part_[a] + prior_->log_tailE[T - a] + base_ : kNegInf;
    int c = b + z.dI;
    if (!allows(b, c)) return kNegInf;
    return s_part_[a] + prior_->log_qE[z.dE] + prior_->log_infectious(b, c) + range(b, c) + base_;
}

double trace_log_score(const InfectionTrace& z, const StaticTables& st, const DynamicTables& dyn) {
    return TraceScorer(st, dyn).score(z);
}

namespace {

constexpr double kLinearRange = 600.0;

// Marginalized chain: log_mi[b] sums over the infectious end day given the
// exposure end day b, log_me[a] over b given t0 = a, top[a] is the t0 marginal.
struct Chain {
    int T = 0;
    bool linear_c = false;
    double shift_c = 0.0;
    std::vector<double> w;  // exp(prefix[c] - shift_c)
    std::vector<double> log_mi;
    bool linear_b = false;
    double shift_b = 0.0;
    std::vector<double> y;  // exp(log_mi[b] - shift_b)
    std::vector<double> log_me;
    std::vector<double> top;
    double log_total = kNegInf;
};

int c_low(const TraceScorer& s, int b) { return std::max(b + 1, s.last_must()); }
int c_high(const TraceScorer& s, int b) { return std::min(b + s.prior().max_dI, s.horizon()); }
int b_high(const TraceScorer& s, int a) { return std::min(a + s.prior().max_dE, s.horizon()); }

double log_mi_slow(const TraceScorer& s, int b) {
    double m = kNegInf;
    for (int c = c_low(s, b); c <= c_high(s, b); ++c) {
        m = std::max(m, s.prior().log_infectious(b, c) + s.range(b, c));
    }
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (int c = c_low(s, b); c <= c_high(s, b); ++c) {
        acc += std::exp(s.prior().log_infectious(b, c) + s.range(b, c) - m);
    }
    return m + std::log(acc);
}

double log_me_slow(const TraceScorer& s, const Chain& ch, int a) {
    double m = kNegInf;
    for (int b = a + 1; b <= b_high(s, a); ++b) m = std::max(m, s.prior().log_exposure(a, b) + ch.log_mi[b]);
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (int b = a + 1; b <= b_high(s, a); ++b) {
        acc += std::exp(s.prior().log_exposure(a, b) + ch.log_mi[b] - m);
    }
    return m + std::log(acc);
}

void build_chain(const TraceScorer& s, Chain& ch) {
    const int T = s.horizon();
    const auto& pr = s.prior();
    ch.T = T;
    auto n = static_cast<std::size_t>(T) + 1;

    double lo = s.prefix(0), hi = s.prefix(0);
    for (int t = 1; t <= T; ++t) {
        lo = std::min(lo, s.prefix(t));
        hi = std::max(hi, s.prefix(t));
    }
    ch.linear_c = hi - lo <= kLinearRange;
    ch.shift_c = hi;
    ch.w.resize(n);
    if (ch.linear_c) {
        for (int t = 0; t <= T; ++t) ch.w[t] = std::exp(s.prefix(t) - hi);
    }

    ch.log_mi.assign(n, kNegInf);
    for (int b = 2; b < T; ++b) {
        if (b >= s.first_must()) break;
        if (ch.linear_c) {
            double acc = 0.0;
            const int c1 = c_high(s, b);
            for (int c = c_low(s, b); c <= c1; ++c) acc += pr.infectious(b, c) * ch.w[c];
            if (acc > 0.0) {
                ch.log_mi[b] = std::log(acc) + ch.shift_c - s.prefix(b);
                continue;
            }
        }
        ch.log_mi[b] = log_mi_slow(s, b);
    }
    ch.log_mi[T] = s.allows_none() ? 0.0 : kNegInf;

    double xl = std::numeric_limits<double>::infinity(), xh = kNegInf;
    for (int b = 2; b <= T; ++b) {
        if (ch.log_mi[b] == kNegInf) continue;
        xl = std::min(xl, ch.log_mi[b]);
        xh = std::max(xh, ch.log_mi[b]);
    }
    ch.linear_b = xh != kNegInf && xh - xl <= kLinearRange;
    ch.shift_b = xh;
    ch.y.assign(n, 0.0);
    if (ch.linear_b) {
        for (int b = 2; b <= T; ++b) ch.y[b] = std::exp(ch.log_mi[b] - xh);
    }

    ch.log_me.assign(n, kNegInf);
    ch.top.assign(n, kNegInf);
    if (xh != kNegInf) {
        for (int a = 1; a < T; ++a) {
            double sa = s.susceptible_part(a);
            if (sa == kNegInf) continue;
            if (ch.linear_b) {
                double acc = 0.0;
                const int b1 = b_high(s, a);
                for (int b = a + 1; b <= b1; ++b) acc += pr.exposure(a, b) * ch.y[b];
                if (acc > 0.0) {
                    ch.log_me[a] = std::log(acc) + ch.shift_b;
                    ch.top[a] = sa + ch.log_me[a];
                    continue;
                }
            }
            ch.log_me[a] = log_me_slow(s, ch, a);
            ch.top[a] = sa + ch.log_me[a];
        }
    }
    ch.top[T] = s.allows_none() ? s.susceptible_part(T) : kNegInf;
    ch.log_total = log_sum_exp(std::span<const double>(ch.top).subspan(1));
    if (!(ch.log_total > kNegInf) || std::isnan(ch.log_total)) impossible_evidence();
}

struct Scratch {
    Chain chain;
    std::vector<double> weights;
    std::vector<double> logs;
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

// Draws among ids with log weights via max-shift.
std::size_t draw_log(std::span<const double> logs, std::vector<double>& weights, Rng& rng) {
    double m = kNegInf;
    for (double x : logs) m = std::max(m, x);
    if (m == kNegInf || std::isnan(m)) impossible_evidence();
    weights.resize(logs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        weights[i] = std::exp(logs[i] - m);
        total += weights[i];
    }
    return draw_index(weights, total, rng);
}

InfectionTrace sample_factored(const TraceScorer& s, Rng& rng) {
    auto& sc = scratch();
    auto& ch = sc.chain;
    build_chain(s, ch);
    const int T = ch.T;
    const auto& pr = s.prior();

    sc.weights.resize(static_cast<std::size_t>(T));
    double total = 0.0;
    for (int a = 1; a <= T; ++a) {
        sc.weights[a - 1] = std::exp(ch.top[a] - ch.log_total);
        total += sc.weights[a - 1];
    }
    int a = static_cast<int>(draw_index(sc.weights, total, rng)) + 1;
    if (a == T) return InfectionTrace::never_infected(T);

    const int b1 = b_high(s, a);
    int b;
    total = 0.0;
    if (ch.linear_b) {
        sc.weights.assign(static_cast<std::size_t>(b1 - a), 0.0);
        for (int k = a + 1; k <= b1; ++k) total += sc.weights[k - a - 1] = pr.exposure(a, k) * ch.y[k];
    }
    if (total > 0.0) {
        b = a + 1 + static_cast<int>(draw_index(sc.weights, total, rng));
    } else {
        sc.logs.clear();
        for (int k = a + 1; k <= b1; ++k) sc.logs.push_back(pr.log_exposure(a, k) + ch.log_mi[k]);
        b = a + 1 + static_cast<int>(draw_log(sc.logs, sc.weights, rng));
    }
    if (b == T) return {a, T - a, 1};

    const int c0 = c_low(s, b), c1 = c_high(s, b);
    int c;
    total = 0.0;
    if (ch.linear_c) {
        sc.weights.assign(static_cast<std::size_t>(c1 - c0 + 1), 0.0);
        for (int k = c0; k <= c1; ++k) total += sc.weights[k - c0] = pr.infectious(b, k) * ch.w[k];
    }
    if (total > 0.0) {
        c = c0 + static_cast<int>(draw_index(sc.weights, total, rng));
    } else {
        sc.logs.clear();
        for (int k = c0; k <= c1; ++k) sc.logs.push_back(pr.log_infectious(b, k) + s.range(b, k));
        c = c0 + static_cast<int>(draw_log(sc.logs, sc.weights, rng));
    }
    return {a, b - a, c - b};
}

// Every admissible triple with its log score (without the test base), in
// (t0, dE, dI) order with never-infected last; -inf entries are skipped.
template <class Visit>
void for_each_scored(const TraceScorer& s, Visit visit) {
    const int T = s.horizon();
    const auto& pr = s.prior();
    for (int a = 1; a < T; ++a) {
        double sa = s.susceptible_part(a);
        if (sa == kNegInf) continue;
        for (int b = a + 1; b <= b_high(s, a); ++b) {
            double sb = sa + pr.log_exposure(a, b);
            if (sb == kNegInf) continue;
            if (b == T) {
                if (s.allows_none()) visit(InfectionTrace{a, T - a, 1}, sb);
                continue;
            }
            for (int c = b + 1; c <= c_high(s, b); ++c) {
                if (!s.allows(b, c)) continue;
                double sc = sb + pr.log_infectious(b, c) + s.range(b, c);
                if (sc != kNegInf) visit(InfectionTrace{a, b - a, c - b}, sc);
            }
        }
    }
    if (s.allows_none() && s.susceptible_part(T) != kNegInf) {
        visit(InfectionTrace::never_infected(T), s.susceptible_part(T));
    }
}

}  // namespace

std::vector<std::pair<InfectionTrace, double>> conditional_distribution(const TraceScorer& s,
                                                                        SamplerRoute route) {
    std::vector<std::pair<InfectionTrace, double>> out;
    if (route == SamplerRoute::enumerate) {
        for_each_scored(s, [&](const InfectionTrace& z, double l) { out.emplace_back(z, l); });
        double m = kNegInf;
        for (auto& [z, l] : out) m = std::max(m, l);
        if (m == kNegInf) impossible_evidence();
        double total = 0.0;
        for (auto& [z, l] : out) total += (l = std::exp(l - m));
        for (auto& [z, l] : out) l /= total;
        return out;
    }
    Chain ch;
    build_chain(s, ch);
    const int T = ch.T;
    const auto& pr = s.prior();
    for (int a = 1; a < T; ++a) {
        if (ch.top[a] == kNegInf) continue;
        double pa = ch.top[a] - ch.log_total;
        for (int b = a + 1; b <= b_high(s, a); ++b) {
            double pb = pa + pr.log_exposure(a, b) + ch.log_mi[b] - ch.log_me[a];
            if (pb == kNegInf) continue;
            if (b == T) {
                out.emplace_back(InfectionTrace{a, T - a, 1}, std::exp(pb));
                continue;
            }
            for (int c = c_low(s, b); c <= c_high(s, b); ++c) {
                double pc = pb + pr.log_infectious(b, c) + s.range(b, c) - ch.log_mi[b];
                if (pc != kNegInf) out.emplace_back(InfectionTrace{a, b - a, c - b}, std::exp(pc));
            }
        }
    }
    if (ch.top[T] != kNegInf) out.emplace_back(InfectionTrace::never_infected(T), std::exp(ch.top[T] - ch.log_total));
    return out;
}

InfectionTrace sample_trace(const TraceScorer& s, SamplerRoute route, Rng& rng) {
    if (route != SamplerRoute::enumerate) return sample_factored(s, rng);
    auto& sc = scratch();
    std::vector<InfectionTrace> triples;
    sc.logs.clear();
    for_each_scored(s, [&](const InfectionTrace& z, double l) {
        triples.push_back(z);
        sc.logs.push_back(l);
    });
    if (triples.empty()) impossible_evidence();
    return triples[draw_log(sc.logs, sc.weights, rng)];
}

void GibbsConfig::validate() const {
    if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
    if (thinning < 1) throw std::invalid_argument("thinning must be >= 1");
}

GibbsSampler::GibbsSampler(const ContactLog& contacts, const TestLog& tests, const ModelParams& params,
                           int horizon)
    : contacts_(&contacts), params_(params), population_(contacts.population()), horizon_(horizon) {
    params_.validate();
    for (double pj : params_.p) {
        if (pj >= 1.0) throw std::invalid_argument("channel probabilities must be < 1 for inference");
    }
    if (horizon < 1 || horizon > contacts.horizon()) {
        throw std::invalid_argument("sampler horizon must lie in 1.." + std::to_string(contacts.horizon()));
    }
    if (params_.channels() != contacts.channels()) {
        throw DataError("contact log has " + std::to_string(contacts.channels()) + " channels, model has " +
                        std::to_string(params_.channels()));
    }
    if (tests.population() != 0 && tests.population() != population_) {
        throw DataError("test log and contact log disagree on the population size");
    }
    prior_ = PriorTables::build(params_, horizon_);
    tests_.reserve(static_cast<std::size_t>(population_));
    for (int u = 0; u < population_; ++u) {
        if (tests.population() == 0) {
            tests_.push_back(TestTables::build(params_, horizon_, {}));
        } else {
            tests_.push_back(TestTables::build(params_, horizon_, tests.tests_of(u)));
        }
    }
    log_weight_.resize(static_cast<std::size_t>(population_));
    active_.resize(static_cast<std::size_t>(population_));
    for (int u = 0; u < population_; ++u) {
        auto nb = contacts.neighbors(u);
        auto& lw = log_weight_[u];
        lw.reserve(nb.size());
        std::size_t k = 0;
        for (; k < nb.size() && nb[k].day < horizon_; ++k) {
            lw.push_back(contact_log_weight(contacts.counts(u, k), params_.p));
        }
        active_[u] = k;
    }
    traces_.assign(static_cast<std::size_t>(population_), InfectionTrace::never_infected(horizon_));
}

void GibbsSampler::set_traces(std::span<const InfectionTrace> traces) {
    if (static_cast<int>(traces.size()) != population_) {
        throw std::invalid_argument("set_traces: wrong number of traces");
    }
    for (int u = 0; u < population_; ++u) {
        const auto& z = traces[u];
        if (z.t0 < 1 || z.dE < 1 || z.dI < 1) throw std::invalid_argument("set_traces: invalid triple");
        traces_[u] = canonicalize(z, horizon_);
    }
}

double GibbsSampler::log_f_without(int v, int t, int u) const {
    double acc = prior_.log_stay_exogenous;
    auto nb = contacts_->neighbors(v);
    auto first = std::lower_bound(nb.begin(), nb.begin() + static_cast<std::ptrdiff_t>(active_[v]), t,
                                  [](const ContactLog::Entry& e, int d) { return e.day < d; });
    for (auto it = first; it != nb.end() && it->day == t; ++it) {
        if (it->other == u) continue;
        if (state_at(traces_[it->other], t) == InfectionState::I) {
            acc += log_weight_[v][static_cast<std::size_t>(it - nb.begin())];
        }
    }
    return acc;
}

void GibbsSampler::fill_views(int u, std::vector<ContactView>& views) const {
    views.clear();
    auto nb = contacts_->neighbors(u);
    for (std::size_t k = 0; k < active_[u]; ++k) {
        ContactView cv;
        cv.day = nb[k].day;
        cv.log_weight = log_weight_[u][k];
        cv.other = traces_[nb[k].other];
        if (cv.day == cv.other.t0 && cv.log_weight != 0.0) cv.log_f_without_self = log_f_without(nb[k].other, cv.day, u);
        views.push_back(cv);
    }
}

DynamicTables GibbsSampler::dynamic_tables(int u) const {
    std::vector<ContactView> views;
    fill_views(u, views);
    DynamicTables dyn;
    build_dynamic(horizon_, views, dyn);
    return dyn;
}

TraceScorer GibbsSampler::scorer(int u) const {
    // the dynamic tables are folded into the scorer, so a temporary is fine
    return TraceScorer(prior_, tests_[u], dynamic_tables(u));
}

InfectionTrace GibbsSampler::step(int u, SamplerRoute route, Rng& rng) {
    fill_views(u, scratch_views_);
    build_dynamic(horizon_, scratch_views_, scratch_dyn_);
    TraceScorer s(prior_, tests_[u], scratch_dyn_);
    traces_[u] = sample_trace(s, route, rng);
    return traces_[u];
}

void GibbsSampler::sweep(SweepOrder order, SamplerRoute route, Rng& rng) {
    const int n = population_;
    if (n == 0) return;
    if (order == SweepOrder::uniform_picks) {
        std::uniform_int_distribution<int> pick(0, n - 1);
        for (int i = 0; i < n; ++i) step(pick(rng), route, rng);
        return;
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(perm[i], perm[pick(rng)]);
    }
    for (int u : perm) step(u, route, rng);
}

void GibbsSampler::run(const GibbsConfig& config, Rng& rng,
                       const std::function<void(const std::vector<InfectionTrace>&)>& on_sample) {
    config.validate();
    for (int i = 0; i < config.burn_in; ++i) sweep(config.order, config.route, rng);
    for (int s = 0; s < config.num_samples; ++s) {
        for (int i = 0; i < config.thinning; ++i) sweep(config.order, config.route, rng);
        on_sample(traces_);
    }
}

std::vector<std::vector<InfectionTrace>> run_gibbs(const ContactLog& contacts, const TestLog& tests,
                                                   const ModelParams& params, const GibbsConfig& config) {
    GibbsSampler sampler(contacts, tests, params, contacts.horizon());
    Rng rng = make_rng(config.seed);
    std::vector<std::vector<InfectionTrace>> out;
    out.reserve(static_cast<std::size_t>(config.num_samples));
    sampler.run(config, rng, [&](const std::vector<InfectionTrace>& z) { out.push_back(z); });
    return out;
}

StateMarginals::StateMarginals(int population, int horizon)
    : population_(population),
      horizon_(horizon),
      diff_(static_cast<std::size_t>(population) * static_cast<std::size_t>(horizon + 1) * kNumStates, 0) {}

void StateMarginals::add(std::span<const InfectionTrace> sample) {
    if (static_cast<int>(sample.size()) != population_) {
        throw std::invalid_argument("marginals: sample has the wrong population size");
    }
    const auto stride = static_cast<std::size_t>(horizon_ + 1) * kNumStates;
    for (int u = 0; u < population_; ++u) {
        auto z = canonicalize(sample[u], horizon_);
        // state s holds on days [start, end]
        int bounds[kNumStates + 1] = {1, z.t0 + 1, z.t0 + z.dE + 1, z.t0 + z.dE + z.dI + 1, horizon_ + 1};
        auto* row = diff_.data() + static_cast<std::size_t>(u) * stride;
        for (int s = 0; s < kNumStates; ++s) {
            int start = std::min(bounds[s], horizon_ + 1), end = std::min(bounds[s + 1], horizon_ + 1);
            if (start >= end) continue;
            row[static_cast<std::size_t>(start - 1) * kNumStates + s] += 1;
            row[static_cast<std::size_t>(end - 1) * kNumStates + s] -= 1;
        }
    }
    ++samples_;
    dirty_ = true;
}

void StateMarginals::finalize() const {
    if (!dirty_) return;
    const auto T = static_cast<std::size_t>(horizon_);
    counts_.assign(static_cast<std::size_t>(population_) * T * kNumStates, 0);
    for (std::size_t u = 0; u < static_cast<std::size_t>(population_); ++u) {
        const auto* row = diff_.data() + u * (T + 1) * kNumStates;
        auto* out = counts_.data() + u * T * kNumStates;
        std::int64_t run[kNumStates] = {0, 0, 0, 0};
        for (std::size_t t = 0; t < T; ++t) {
            for (int s = 0; s < kNumStates; ++s) {
                run[s] += row[t * kNumStates + s];
                out[t * kNumStates + s] = static_cast<std::uint32_t>(run[s]);
            }
        }
    }
    dirty_ = false;
}

double StateMarginals::prob(int u, int t, InfectionState s) const {
    if (t < 1 || t > horizon_) throw std::domain_error("marginal day outside the horizon");
    if (samples_ == 0) throw std::logic_error("no samples recorded");
    finalize();
    auto idx = (static_cast<std::size_t>(u) * static_cast<std::size_t>(horizon_) + static_cast<std::size_t>(t - 1)) *
                   kNumStates +
               static_cast<std::size_t>(s);
    return static_cast<double>(counts_[idx]) / samples_;
}

std::array<double, kNumStates> StateMarginals::probs(int u, int t) const {
    std::array<double, kNumStates> out{};
    for (int s = 0; s < kNumStates; ++s) out[s] = prob(u, t, static_cast<InfectionState>(s));
    return out;
}

std::vector<double> risk_scores(std::span<const std::vector<InfectionTrace>> samples, int t) {
    if (samples.empty()) throw std::invalid_argument("risk_scores needs at least one sample");
    std::vector<double> out(samples.front().size(), 0.0);
    for (const auto& smp : samples) {
        for (std::size_t u = 0; u < out.size(); ++u) {
            auto z = state_at(smp[u], t);
            if (z == InfectionState::E || z == InfectionState::I) out[u] += 1.0;
        }
    }
    for (double& r : out) r /= static_cast<double>(samples.size());
    return out;
}

}  // namespace crisp
