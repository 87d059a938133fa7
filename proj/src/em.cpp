#include "crisp/em.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace crisp {

double logistic(double w) {
    if (w >= 0.0) return 1.0 / (1.0 + std::exp(-w));
    double e = std::exp(w);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double softplus(double w) { return w > 0.0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w)); }

std::vector<double> weights_of(const ModelParams& params) {
    std::vector<double> w{logit(params.p0)};
    for (double p : params.p) w.push_back(logit(p));
    return w;
}

ModelParams with_weights(const ModelParams& params, std::span<const double> w) {
    if (w.size() != params.p.size() + 1) throw std::invalid_argument("weight vector does not match the channels");
    ModelParams out = params;
    out.p0 = logistic(w[0]);
    for (std::size_t j = 0; j < out.p.size(); ++j) out.p[j] = logistic(w[j + 1]);
    return out;
}

void EMConfig::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("em: max_iterations must be >= 1");
    if (num_samples < 1) throw std::invalid_argument("em: num_samples must be >= 1");
    if (burn_in < 0) throw std::invalid_argument("em: burn_in must be >= 0");
    if (!(step_size > 0.0)) throw std::invalid_argument("em: step_size must be > 0");
    if (inner_steps < 1) throw std::invalid_argument("em: inner_steps must be >= 1");
    if (!(tolerance >= 0.0)) throw std::invalid_argument("em: tolerance must be >= 0");
}

MStepProblem::MStepProblem(const ContactLog& contacts, std::span<const std::vector<InfectionTrace>> samples,
                           int horizon)
    : channels_(contacts.channels()), num_samples_(static_cast<int>(samples.size())) {
    const int n = contacts.population();
    const int J = channels_;
    start_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& s : samples) {
        if (static_cast<int>(s.size()) != n) throw std::invalid_argument("m-step: sample size does not match contacts");
    }
    std::map<std::pair<std::vector<int>, bool>, double> acc;
    std::vector<int> day_counts(static_cast<std::size_t>(J));
    const std::vector<int> zero(static_cast<std::size_t>(J), 0);
    for (int u = 0; u < n; ++u) {
        acc.clear();
        auto nb = contacts.neighbors(u);
        for (const auto& sample : samples) {
            const int a = canonicalize(sample[u], horizon).t0;
            const int last = std::min(a, horizon - 1);  // transitions out of S run up to day T-1
            int plain_days = last;
            bool infection_day_seen = false;
            std::size_t k = 0;
            while (k < nb.size() && nb[k].day <= last) {
                const int t = nb[k].day;
                std::fill(day_counts.begin(), day_counts.end(), 0);
                bool any = false;
                for (; k < nb.size() && nb[k].day == t; ++k) {
                    if (state_at(canonicalize(sample[nb[k].other], horizon), t) != InfectionState::I) continue;
                    auto x = contacts.counts(u, k);
                    for (int j = 0; j < J; ++j) day_counts[j] += x[j];
                    any = true;
                }
                if (!any) continue;
                --plain_days;
                acc[{day_counts, t == a}] += 1.0;
                infection_day_seen |= t == a;
            }
            if (a <= horizon - 1 && !infection_day_seen) {
                acc[{zero, true}] += 1.0;
                --plain_days;
            }
            if (plain_days > 0) acc[{zero, false}] += plain_days;
        }
        for (const auto& [key, weight] : acc) {
            terms_.push_back({counts_.size(), key.second, weight});
            counts_.insert(counts_.end(), key.first.begin(), key.first.end());
        }
        start_[static_cast<std::size_t>(u) + 1] = terms_.size();
    }
}

template <class Fn>
void MStepProblem::for_terms(std::span<const int> individuals, Fn&& fn) const {
    if (individuals.empty()) {
        for (const auto& term : terms_) fn(term);
        return;
    }
    for (int u : individuals) {
        for (std::size_t i = start_[u]; i < start_[static_cast<std::size_t>(u) + 1]; ++i) fn(terms_[i]);
    }
}

double MStepProblem::objective(std::span<const double> w, std::span<const int> individuals) const {
    std::vector<double> grad(w.size());
    return gradient(w, grad, individuals);
}

double MStepProblem::gradient(std::span<const double> w, std::span<double> grad,
                              std::span<const int> individuals) const {
    const int J = channels_;
    if (static_cast<int>(w.size()) != J + 1 || grad.size() != w.size()) {
        throw std::invalid_argument("m-step: weight vector does not match the channels");
    }
    // s = -log f = softplus(w0) + sum_j n_j softplus(w_j); ds/dw_j = n_j logistic(w_j)
    std::vector<double> sp(w.size()), sg(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        sp[j] = softplus(w[j]);
        sg[j] = logistic(w[j]);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0;
    bool impossible = false;
    for_terms(individuals, [&](const Term& term) {
        const int* n = counts_.data() + term.counts;
        double s = sp[0];
        for (int j = 0; j < J; ++j) s += n[j] * sp[static_cast<std::size_t>(j) + 1];
        double scale;  // d(term)/ds
        if (term.infected) {
            if (s <= 0.0) {
                impossible = true;
                return;
            }
            total += term.weight * log1mexp(-s);
            scale = term.weight / std::expm1(s);
        } else {
            total -= term.weight * s;
            scale = -term.weight;
        }
        grad[0] += scale * sg[0];
        for (int j = 0; j < J; ++j) grad[static_cast<std::size_t>(j) + 1] += scale * n[j] * sg[static_cast<std::size_t>(j) + 1];
    });
    if (impossible) {
        throw DataError("m-step: an infection day has no infectious contact and p0 = 0");
    }
    return total;
}

double mstep_objective(std::span<const std::vector<InfectionTrace>> samples, const ContactLog& contacts,
                       std::span<const double> w, int horizon) {
    return MStepProblem(contacts, samples, horizon).objective(w);
}

namespace {

std::string describe(std::span<const double> w) {
    std::ostringstream os;
    os << "w = (";
    for (std::size_t j = 0; j < w.size(); ++j) os << (j ? ", " : "") << w[j];
    os << ")";
    return os.str();
}

}  // namespace

std::vector<double> mstep_ascent(const MStepProblem& problem, std::vector<double> w, const EMConfig& config,
                                 Rng& rng) {
    const int n = problem.population();
    std::size_t batch = config.minibatch;
    if (batch >= static_cast<std::size_t>(n)) batch = 0;
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) order[u] = u;
    std::vector<double> grad(w.size()), next(w.size());
    const double norm = 1.0 / std::max(1, problem.num_samples());
    std::size_t cursor = order.size();
    for (int step = 0; step < config.inner_steps; ++step) {
        std::span<const int> subset;
        double scale = norm;
        if (batch > 0) {
            if (cursor + batch > order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            subset = std::span<const int>(order).subspan(cursor, batch);
            cursor += batch;
            scale = norm * n / static_cast<double>(batch);
        }
        double current = problem.gradient(w, grad, subset);
        if (!std::isfinite(current)) {
            throw NumericalError("m-step objective is not finite at " + describe(w));
        }
        if (config.freeze_p0) grad[0] = 0.0;
        double eta = config.step_size;
        for (int tries = 0;; ++tries) {
            for (std::size_t j = 0; j < w.size(); ++j) next[j] = w[j] + eta * scale * grad[j];
            double value = problem.objective(next, subset);
            if (std::isnan(value)) throw NumericalError("m-step objective is NaN at " + describe(next));
            if (value >= current - 1e-12 * std::abs(current)) break;
            if (tries == 60) {
                next = w;
                break;
            }
            eta *= 0.5;
        }
        w = next;
    }
    return w;
}

EMResult em_fit(const ContactLog& contacts, const TestLog& tests, const ModelParams& initial,
                const EMConfig& config, const std::function<void(const EMIteration&)>& on_iteration) {
    config.validate();
    initial.validate();
    const int T = contacts.horizon();
    EMConfig cfg = config;
    if (cfg.minibatch == 0 && contacts.directed_size() >= 1000000) {
        cfg.minibatch = std::max<std::size_t>(1, static_cast<std::size_t>(contacts.population()) / 10);
    }
    EMResult result;
    result.params = initial;
    std::vector<double> w = weights_of(initial);
    if (cfg.freeze_p0) w[0] = logit(initial.p0);
    std::vector<InfectionTrace> chain(static_cast<std::size_t>(contacts.population()),
                                      InfectionTrace::never_infected(T));
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        ModelParams current = result.params;
        GibbsSampler sampler(contacts, tests, current, T);
        if (cfg.warm_start) sampler.set_traces(chain);
        GibbsConfig g;
        g.num_samples = cfg.num_samples;
        g.burn_in = cfg.burn_in;
        Rng rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(it)});
        std::vector<std::vector<InfectionTrace>> samples;
        sampler.run(g, rng, [&](const std::vector<InfectionTrace>& z) { samples.push_back(z); });
        chain = samples.back();

        MStepProblem problem(contacts, samples, T);
        Rng batch_rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(it), 1});
        w = mstep_ascent(problem, w, cfg, batch_rng);
        ModelParams next = with_weights(current, w);
        if (cfg.freeze_p0) next.p0 = initial.p0;

        double change = (next.p0 - current.p0) * (next.p0 - current.p0);
        for (std::size_t j = 0; j < next.p.size(); ++j) change += (next.p[j] - current.p[j]) * (next.p[j] - current.p[j]);
        change = std::sqrt(change);
        double objective = problem.objective(w) / static_cast<double>(samples.size());
        if (std::isnan(objective) || std::isnan(change)) {
            throw NumericalError("em diverged at iteration " + std::to_string(it) + ", " + describe(w));
        }
        result.params = next;
        EMIteration rec{it, next, objective, change};
        result.history.push_back(rec);
        if (on_iteration) on_iteration(rec);
        if (change < cfg.tolerance) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace crisp
