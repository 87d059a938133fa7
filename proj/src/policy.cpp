#include "crisp/policy.hpp"

#include <algorithm>
#include <climits>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "crisp/parallel.hpp"

namespace crisp {

const char* to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::none: return "none";
        case PolicyKind::lockdown: return "lockdown";
        case PolicyKind::symptom: return "symptom";
        case PolicyKind::contact_tracing: return "contact_tracing";
        case PolicyKind::crisp: return "crisp";
    }
    return "unknown";
}

PolicyKind policy_kind_from_string(const std::string& name) {
    for (auto k : {PolicyKind::none, PolicyKind::lockdown, PolicyKind::symptom, PolicyKind::contact_tracing,
                   PolicyKind::crisp}) {
        if (name == to_string(k)) return k;
    }
    throw std::invalid_argument("unknown policy kind '" + name + "'");
}

void PolicyParams::validate() const {
    if (rho < 1) throw std::invalid_argument("policy: rho must be >= 1");
    if (!(tau_ei > 0.0 && tau_ei < 1.0)) throw std::invalid_argument("policy: tau_ei must be in (0,1)");
    if (!(tau_sr > 0.0 && tau_sr < 1.0)) throw std::invalid_argument("policy: tau_sr must be in (0,1)");
    if (budget < 0) throw std::invalid_argument("policy: budget must be >= 0");
    if (start_day < 1) throw std::invalid_argument("policy: start_day must be >= 1");
    if (lookback < 1) throw std::invalid_argument("policy: lookback must be >= 1");
    if (num_samples < 1 || burn_in < 0) throw std::invalid_argument("policy: bad sample counts");
    if (!(p0_scale > 0.0)) throw std::invalid_argument("policy: p0_scale must be > 0");
}

std::string PolicyParams::label() const {
    std::string out = to_string(kind);
    char buf[64];
    switch (kind) {
        case PolicyKind::symptom:
        case PolicyKind::contact_tracing:
            std::snprintf(buf, sizeof buf, " rho=%d", rho);
            out += buf;
            break;
        case PolicyKind::crisp:
            std::snprintf(buf, sizeof buf, " tau_ei=%g tau_sr=%g", tau_ei, tau_sr);
            out += buf;
            break;
        default: break;
    }
    return out;
}

PolicyState::PolicyState(int population_, int horizon_, int channels)
    : population(population_), horizon(horizon_), contacts(population_, horizon_, channels) {}

bool PolicyState::quarantined(int u, int day) const {
    auto it = release_day.find(u);
    return it != release_day.end() && it->second >= day;
}

std::vector<int> PolicyState::quarantine_set(int day) const {
    std::vector<int> out;
    for (const auto& [u, last] : release_day) {
        if (last >= day) out.push_back(u);
    }
    return out;
}

void PolicyState::quarantine_until(int u, int last_day) {
    auto [it, inserted] = release_day.emplace(u, last_day);
    if (!inserted) it->second = std::max(it->second, last_day);
}

void PolicyState::release(int u, int day) {
    auto it = release_day.find(u);
    if (it != release_day.end() && it->second > day) it->second = day;
}

std::vector<int> PolicyState::symptomatic_candidates(int day) const {
    if (day < 1 || day > static_cast<int>(symptomatic.size())) return {};
    auto list = symptomatic[static_cast<std::size_t>(day - 1)];
    std::erase_if(list, [&](const SymptomReport& r) { return ever_positive.count(r.individual) > 0; });
    std::sort(list.begin(), list.end(), [](const SymptomReport& a, const SymptomReport& b) {
        return std::pair{a.onset, a.individual} < std::pair{b.onset, b.individual};
    });
    std::vector<int> out;
    for (const auto& r : list) out.push_back(r.individual);
    return out;
}

InfectionTrace extend_horizon(const InfectionTrace& z, int old_horizon, int new_horizon) {
    if (new_horizon < old_horizon) throw std::invalid_argument("extend_horizon: horizon shrinks");
    auto c = canonicalize(z, old_horizon);
    if (c.t0 >= old_horizon) return InfectionTrace::never_infected(new_horizon);
    if (c.t0 + c.dE >= old_horizon) return {c.t0, new_horizon - c.t0, 1};
    if (c.t0 + c.dE + c.dI >= old_horizon) return {c.t0, c.dE, new_horizon - c.t0 - c.dE};
    return c;
}

std::vector<std::array<double, kNumStates>> crisp_state_probabilities(const ContactLog& contacts,
                                                                       const TestLog& tests,
                                                                       const ModelParams& params, int day,
                                                                       const GibbsConfig& config,
                                                                       std::vector<InfectionTrace>* chain) {
    GibbsSampler sampler(contacts, tests, params, day);
    if (chain && static_cast<int>(chain->size()) == sampler.population()) sampler.set_traces(*chain);
    std::vector<std::array<double, kNumStates>> probs(static_cast<std::size_t>(sampler.population()),
                                                      std::array<double, kNumStates>{});
    Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(day)});
    int recorded = 0;
    sampler.run(config, rng, [&](const std::vector<InfectionTrace>& sample) {
        for (std::size_t u = 0; u < sample.size(); ++u) probs[u][static_cast<int>(state_at(sample[u], day))] += 1.0;
        ++recorded;
    });
    for (auto& row : probs) {
        for (double& p : row) p /= recorded;
    }
    if (chain) *chain = sampler.traces();
    return probs;
}

std::vector<int> crisp_quarantine(std::span<const std::array<double, kNumStates>> probs,
                                  const std::vector<int>& current, double tau_ei, double tau_sr) {
    std::vector<char> in(probs.size(), 0);
    for (int u : current) in.at(static_cast<std::size_t>(u)) = 1;
    std::vector<int> out;
    for (std::size_t u = 0; u < probs.size(); ++u) {
        const auto& p = probs[u];
        bool keep = in[u] ? !(p[0] + p[3] > tau_sr) : p[1] + p[2] > tau_ei;
        if (keep) out.push_back(static_cast<int>(u));
    }
    return out;
}

std::vector<int> crisp_tests(std::span<const std::array<double, kNumStates>> probs,
                             const std::vector<int>& symptomatic, const std::set<int>& ever_positive, int budget) {
    std::vector<int> out;
    for (int u : symptomatic) {
        if (static_cast<int>(out.size()) >= budget) return out;
        out.push_back(u);
    }
    std::vector<std::pair<double, int>> ranked;  // (-P(I), id)
    for (std::size_t u = 0; u < probs.size(); ++u) {
        int id = static_cast<int>(u);
        if (ever_positive.count(id) || std::find(out.begin(), out.end(), id) != out.end()) continue;
        ranked.push_back({-probs[u][static_cast<int>(InfectionState::I)], id});
    }
    std::sort(ranked.begin(), ranked.end());
    for (const auto& r : ranked) {
        if (static_cast<int>(out.size()) >= budget) break;
        out.push_back(r.second);
    }
    return out;
}

namespace {

class BasePolicy : public Policy {
public:
    BasePolicy(const PolicyParams& params, int population, int horizon, int channels)
        : params_(params), state_(population, horizon, channels) {}

    void observe(const Observation& obs) override {
        if (obs.day < 1 || obs.day >= state_.horizon) throw std::invalid_argument("policy: observation day out of range");
        // the contact log needs links sorted by (from, to)
        DayContacts day = obs.contacts;
        day.day = obs.day;
        std::vector<std::size_t> idx(day.links.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return std::pair{day.links[a].from, day.links[a].to} < std::pair{day.links[b].from, day.links[b].to};
        });
        DayContacts sorted;
        sorted.day = day.day;
        sorted.channels = day.channels;
        for (auto k : idx) {
            sorted.links.push_back(day.links[k]);
            auto x = day.x(k);
            sorted.counts.insert(sorted.counts.end(), x.begin(), x.end());
        }
        state_.contacts.append_day(sorted);
        state_.outcomes.insert(state_.outcomes.end(), obs.outcomes.begin(), obs.outcomes.end());
        state_.symptomatic.resize(static_cast<std::size_t>(obs.day));
        state_.symptomatic.back() = obs.symptomatic;
        react(obs);
    }

    const PolicyState& state() const override { return state_; }

    std::vector<std::string> take_warnings() override { return std::exchange(warnings_, {}); }

protected:
    virtual void react(const Observation&) {}

    /// Symptomatic individuals from yesterday's list, up to the budget.
    std::vector<int> symptomatic_tests(int day) const {
        auto c = state_.symptomatic_candidates(day - 1);
        if (static_cast<int>(c.size()) > params_.budget) c.resize(static_cast<std::size_t>(params_.budget));
        return c;
    }

    void mark_positives(const Observation& obs) {
        for (const auto& r : obs.outcomes) {
            if (r.outcome == 1) state_.ever_positive.insert(r.u);
        }
    }

    PolicyParams params_;
    PolicyState state_;
    std::vector<std::string> warnings_;
};

class NoPolicy : public BasePolicy {
public:
    using BasePolicy::BasePolicy;
    Decision decide(int) override { return {}; }
};

class LockdownPolicy : public BasePolicy {
public:
    using BasePolicy::BasePolicy;
    Decision decide(int) override {
        Decision d;
        d.quarantine.resize(static_cast<std::size_t>(state_.population));
        std::iota(d.quarantine.begin(), d.quarantine.end(), 0);
        return d;
    }
};

class SymptomPolicy : public BasePolicy {
public:
    using BasePolicy::BasePolicy;
    Decision decide(int day) override { return {symptomatic_tests(day), state_.quarantine_set(day)}; }

protected:
    void react(const Observation& obs) override {
        mark_positives(obs);
        for (const auto& r : obs.outcomes) {
            if (r.outcome == 1) state_.quarantine_until(r.u, obs.day + params_.rho);
        }
    }
};

class ContactTracingPolicy : public BasePolicy {
public:
    using BasePolicy::BasePolicy;

    Decision decide(int day) override {
        Decision d{symptomatic_tests(day), state_.quarantine_set(day)};
        std::vector<std::pair<int, int>> ranked;  // (-count, id)
        for (int u : d.quarantine) {
            if (state_.ever_positive.count(u)) continue;
            if (std::find(d.tests.begin(), d.tests.end(), u) != d.tests.end()) continue;
            ranked.push_back({-positive_contacts(u, day), u});
        }
        std::sort(ranked.begin(), ranked.end());
        for (const auto& [neg, u] : ranked) {
            if (static_cast<int>(d.tests.size()) >= params_.budget) break;
            d.tests.push_back(u);
        }
        return d;
    }

    /// Contacts of u with positive-tested individuals over the lookback window.
    int positive_contacts(int u, int day) const {
        int n = 0;
        for (const auto& e : state_.contacts.neighbors(u)) {
            if (e.day >= day - params_.lookback && e.day <= day - 1 && state_.ever_positive.count(e.other)) ++n;
        }
        return n;
    }

protected:
    void react(const Observation& obs) override {
        mark_positives(obs);
        for (const auto& r : obs.outcomes) {
            if (r.outcome == 0) state_.release(r.u, obs.day);
        }
        int first = obs.day + 1 - params_.lookback;
        for (const auto& r : obs.outcomes) {
            if (r.outcome != 1) continue;
            int until = obs.day + params_.rho;
            state_.quarantine_until(r.u, until);
            for (const auto& e : state_.contacts.neighbors(r.u)) {
                if (e.day >= first && e.day <= obs.day) state_.quarantine_until(e.other, until);
            }
        }
    }
};

class CrispPolicy : public BasePolicy {
public:
    CrispPolicy(const PolicyParams& params, const ModelParams& inference, int population, int horizon,
                std::uint64_t seed)
        : BasePolicy(params, population, horizon, inference.channels()), model_(inference) {
        model_.p0 = std::min(1.0, inference.p0 * params.p0_scale);
        model_.validate();
        config_.num_samples = params.num_samples;
        config_.burn_in = params.burn_in;
        config_.seed = seed;
    }

    Decision decide(int day) override {
        Decision d;
        std::vector<std::array<double, kNumStates>> probs;
        try {
            auto tests = TestLog::from_records(state_.population, day, state_.outcomes);
            std::vector<InfectionTrace>* chain = nullptr;
            if (params_.warm_start) {
                for (auto& z : chain_) z = extend_horizon(z, chain_day_, day);
                chain = &chain_;
            }
            probs = crisp_state_probabilities(state_.contacts, tests, model_, day, config_, chain);
            chain_day_ = day;
        } catch (const std::exception& e) {
            warnings_.push_back("crisp policy skipped day " + std::to_string(day) + ": " + e.what());
            return {{}, state_.quarantine_set(day)};
        }

        d.tests = crisp_tests(probs, symptomatic_tests(day), state_.ever_positive, params_.budget);
        d.quarantine = crisp_quarantine(probs, state_.quarantine_set(day - 1), params_.tau_ei, params_.tau_sr);
        state_.release_day.clear();
        for (int u : d.quarantine) state_.quarantine_until(u, INT_MAX);
        return d;
    }

protected:
    void react(const Observation& obs) override { mark_positives(obs); }

private:
    ModelParams model_;
    GibbsConfig config_;
    std::vector<InfectionTrace> chain_;
    int chain_day_ = 0;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const PolicyParams& params, const ModelParams& inference, int population,
                                    int horizon, std::uint64_t seed) {
    params.validate();
    if (population < 1 || horizon < 2) throw std::invalid_argument("policy: bad population or horizon");
    int channels = inference.channels();
    switch (params.kind) {
        case PolicyKind::none: return std::make_unique<NoPolicy>(params, population, horizon, channels);
        case PolicyKind::lockdown: return std::make_unique<LockdownPolicy>(params, population, horizon, channels);
        case PolicyKind::symptom: return std::make_unique<SymptomPolicy>(params, population, horizon, channels);
        case PolicyKind::contact_tracing:
            return std::make_unique<ContactTracingPolicy>(params, population, horizon, channels);
        case PolicyKind::crisp: return std::make_unique<CrispPolicy>(params, inference, population, horizon, seed);
    }
    throw std::invalid_argument("policy: unknown kind");
}

HarnessConfig HarnessConfig::standard(std::uint64_t seed) {
    HarnessConfig c;
    c.population = 1000;
    c.horizon = 150;
    c.truth.p0 = 1e-4;
    c.truth.p = {0.025};
    c.contacts = ContactPatternSpec::uniform(c.population, c.horizon, 2.5, 0.025, c.truth.qI.mean(), seed);
    c.seed = seed;
    return c;
}

void HarnessConfig::validate() const {
    if (population < 1 || horizon < 2) throw std::invalid_argument("harness: bad population or horizon");
    if (patient_zero < -1 || patient_zero >= population) throw std::invalid_argument("harness: bad patient zero");
    truth.validate();
    contacts.validate();
    if (contacts.population != population || contacts.horizon < horizon - 1) {
        throw std::invalid_argument("harness: contact pattern does not cover the population and horizon");
    }
    if (contacts.channels != truth.channels()) throw std::invalid_argument("harness: channel mismatch");
}

PolicySimulation::PolicySimulation(const HarnessConfig& config, const PolicyParams& params,
                                   std::unique_ptr<Policy> policy)
    : config_(config),
      params_(params),
      policy_(std::move(policy)),
      truth_(PopulationState::all_susceptible(config.population)),
      onset_(static_cast<std::size_t>(config.population), 0) {
    config_.validate();
    params_.validate();
    if (!policy_) throw std::invalid_argument("harness: no policy");
    if (config_.patient_zero >= 0) overrides_.p0[config_.patient_zero] = 1.0;
    metrics_.counts.push_back(truth_.counts());
}

PolicySimulation::PolicySimulation(const HarnessConfig& config, const PolicyParams& params)
    : PolicySimulation(config, params,
                       make_policy(params, config.truth, config.population, config.horizon, config.seed)) {}

void PolicySimulation::day_loop() {
    if (done()) throw std::logic_error("harness: simulation already finished");
    const int t = truth_.day;
    const int n = config_.population;

    decision_ = {};
    if (t >= params_.start_day) {
        decision_ = policy_->decide(t);
        std::vector<int> tests;
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        for (int u : decision_.tests) {
            if (u < 0 || u >= n) throw std::logic_error("harness: policy tested an unknown individual");
            if (!seen[static_cast<std::size_t>(u)]++) tests.push_back(u);
        }
        if (static_cast<int>(tests.size()) > params_.budget) {
            metrics_.warnings.push_back("day " + std::to_string(t) + ": " + std::to_string(tests.size()) +
                                        " tests requested, truncated to " + std::to_string(params_.budget));
            ++metrics_.truncated_days;
            tests.resize(static_cast<std::size_t>(params_.budget));
        }
        decision_.tests = std::move(tests);
        std::sort(decision_.quarantine.begin(), decision_.quarantine.end());
        decision_.quarantine.erase(std::unique(decision_.quarantine.begin(), decision_.quarantine.end()),
                                   decision_.quarantine.end());
        for (int u : decision_.quarantine) {
            if (u < 0 || u >= n) throw std::logic_error("harness: policy quarantined an unknown individual");
        }
    }

    std::vector<char> q(static_cast<std::size_t>(n), 0);
    std::array<int, kNumStates> composition{};
    for (int u : decision_.quarantine) {
        q[static_cast<std::size_t>(u)] = 1;
        ++composition[static_cast<int>(truth_.state[static_cast<std::size_t>(u)])];
    }
    metrics_.quarantined_by_state.push_back(composition);
    metrics_.quarantine_days += static_cast<long long>(decision_.quarantine.size());

    contacts_ = generate_day(config_.contacts, t);
    contacts_.remove_individuals(q);

    Observation obs;
    obs.day = t;
    Rng test_rng = make_rng(config_.seed, {2, static_cast<std::uint64_t>(t)});
    for (int u : decision_.tests) {
        bool infectious = truth_.state[static_cast<std::size_t>(u)] == InfectionState::I;
        double p_positive = infectious ? 1.0 - config_.truth.alpha : config_.truth.beta;
        int o = uniform01(test_rng) < p_positive ? 1 : 0;
        obs.outcomes.push_back({u, t, o});
    }

    Rng step_rng = make_rng(config_.seed, {1, static_cast<std::uint64_t>(t)});
    auto events = step_population(truth_, contacts_, config_.truth, overrides_, step_rng);
    for (int u : events.newly_symptomatic) onset_[static_cast<std::size_t>(u)] = t + 1;
    metrics_.counts.push_back(truth_.counts());

    obs.contacts = contacts_;
    if (t >= params_.start_day) {
        for (int u = 0; u < n; ++u) {
            auto su = static_cast<std::size_t>(u);
            if (truth_.state[su] == InfectionState::I && truth_.symptomatic[su]) obs.symptomatic.push_back({u, onset_[su]});
        }
    } else {
        obs.outcomes.clear();
    }
    policy_->observe(obs);
    for (auto& w : policy_->take_warnings()) metrics_.warnings.push_back(std::move(w));

    if (done()) {
        int infected = 0;
        for (auto s : truth_.state) infected += s != InfectionState::S;
        metrics_.infected_pct = 100.0 * infected / n;
    }
}

void PolicySimulation::run() {
    while (!done()) day_loop();
}

RunMetrics run_policy(const HarnessConfig& config, const PolicyParams& params) {
    PolicySimulation sim(config, params);
    sim.run();
    return sim.metrics();
}

std::vector<PolicyParams> standard_grid(const PolicyParams& base) {
    std::vector<PolicyParams> out;
    auto with = [&](PolicyKind k) {
        PolicyParams p = base;
        p.kind = k;
        return p;
    };
    out.push_back(with(PolicyKind::none));
    out.push_back(with(PolicyKind::lockdown));
    for (auto k : {PolicyKind::symptom, PolicyKind::contact_tracing}) {
        for (int rho : {2, 7, 14, 21}) {
            auto p = with(k);
            p.rho = rho;
            out.push_back(p);
        }
    }
    for (double tau : {0.2, 0.3, 0.4, 0.5}) {
        auto p = with(PolicyKind::crisp);
        p.tau_ei = tau;
        out.push_back(p);
    }
    return out;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

std::vector<GridResult> evaluate_policy_grid(const HarnessConfig& base, const std::vector<PolicyParams>& points,
                                             int num_seeds, std::uint64_t first_seed) {
    if (num_seeds < 1) throw std::invalid_argument("grid: need at least one seed");
    for (const auto& p : points) p.validate();
    auto seeds = static_cast<std::size_t>(num_seeds);
    std::vector<GridResult> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        out[i].params = points[i];
        out[i].runs.resize(seeds);
        for (std::size_t s = 0; s < seeds; ++s) out[i].seeds.push_back(first_seed + s);
    }
    parallel_for(points.size() * seeds, [&](std::size_t job) {
        std::size_t i = job / seeds, s = job % seeds;
        HarnessConfig c = base;
        c.seed = out[i].seeds[s];
        c.contacts.seed = c.seed;
        out[i].runs[s] = run_policy(c, points[i]);
    });
    for (auto& r : out) {
        std::vector<double> inf, qd;
        for (const auto& m : r.runs) {
            inf.push_back(m.infected_pct);
            qd.push_back(static_cast<double>(m.quarantine_days));
        }
        std::tie(r.infected_mean, r.infected_sd) = mean_sd(inf);
        std::tie(r.quarantine_mean, r.quarantine_sd) = mean_sd(qd);
    }
    return out;
}

}  // namespace crisp
