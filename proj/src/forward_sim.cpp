#include "crisp/forward_sim.hpp"

#include <cmath>

#include "crisp/parallel.hpp"

namespace crisp {

PopulationState PopulationState::all_susceptible(int population) {
    PopulationState s;
    auto n = static_cast<std::size_t>(population);
    s.state.assign(n, InfectionState::S);
    s.days_in_state.assign(n, 1);
    s.trace.assign(n, {kOpenDuration, kOpenDuration, kOpenDuration});
    s.symptomatic.assign(n, 0);
    return s;
}

std::array<int, kNumStates> PopulationState::counts() const {
    std::array<int, kNumStates> c{};
    for (auto z : state) ++c[static_cast<int>(z)];
    return c;
}

InfectionTrace PopulationState::trace_of(int u, int horizon) const {
    return canonicalize(trace[u], horizon);
}

StepEvents step_population(PopulationState& s, const DayContacts& contacts_today, const ModelParams& params,
                           const ExogenousOverrides& overrides, Rng& rng) {
    const int n = s.population();
    // log of the contact part of f for every individual, from today's snapshot
    std::vector<double> log_contact(static_cast<std::size_t>(n), 0.0);
    for (std::size_t k = 0; k < contacts_today.size(); ++k) {
        const auto& l = contacts_today.links[k];
        if (s.state[l.from] == InfectionState::S && s.state[l.to] == InfectionState::I) {
            log_contact[l.from] += contact_log_weight(contacts_today.x(k), params.p);
        }
    }

    StepEvents ev;
    const int today = s.day;
    for (int u = 0; u < n; ++u) {
        switch (s.state[u]) {
            case InfectionState::S: {
                double p0 = overrides.for_individual(u, params.p0);
                double f = std::exp(std::log1p(-p0) + log_contact[u]);
                if (uniform01(rng) < 1.0 - f) {
                    s.state[u] = InfectionState::E;
                    s.days_in_state[u] = 1;
                    s.trace[u].t0 = today;
                    ev.newly_exposed.push_back(u);
                } else {
                    ++s.days_in_state[u];
                }
                break;
            }
            case InfectionState::E:
                if (uniform01(rng) < hazard(s.days_in_state[u], params.qE)) {
                    s.trace[u].dE = s.days_in_state[u];
                    s.state[u] = InfectionState::I;
                    s.days_in_state[u] = 1;
                    ev.newly_infectious.push_back(u);
                    s.symptomatic[u] = uniform01(rng) < kSymptomProbability;
                    if (s.symptomatic[u]) ev.newly_symptomatic.push_back(u);
                } else {
                    ++s.days_in_state[u];
                }
                break;
            case InfectionState::I:
                if (uniform01(rng) < hazard(s.days_in_state[u], params.qI)) {
                    s.trace[u].dI = s.days_in_state[u];
                    s.state[u] = InfectionState::R;
                    s.days_in_state[u] = 1;
                    ev.newly_recovered.push_back(u);
                } else {
                    ++s.days_in_state[u];
                }
                break;
            case InfectionState::R:
                ++s.days_in_state[u];
                break;
        }
    }
    s.day = today + 1;
    return ev;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
    if (config.population < 1 || config.horizon < 1 || config.num_samples < 1) {
        throw std::invalid_argument("scenario needs population, horizon and samples >= 1");
    }
    config.params.validate();
    auto spec = config.contacts;
    spec.population = config.population;
    spec.horizon = config.horizon;
    spec.validate();

    const auto samples = static_cast<std::size_t>(config.num_samples);
    std::vector<PopulationState> states(samples, PopulationState::all_susceptible(config.population));
    ScenarioResult out;
    out.horizon = config.horizon;
    out.counts.assign(samples, {});
    for (std::size_t k = 0; k < samples; ++k) out.counts[k].push_back(states[k].counts());

    for (int t = 1; t < config.horizon; ++t) {
        DayContacts today = generate_day(spec, t);
        parallel_for(samples, [&](std::size_t k) {
            Rng rng = make_rng(config.seed, {k, static_cast<std::uint64_t>(t)});
            step_population(states[k], today, config.params, config.overrides, rng);
            out.counts[k].push_back(states[k].counts());
        });
    }

    out.mean.assign(static_cast<std::size_t>(config.horizon), {});
    for (int t = 0; t < config.horizon; ++t) {
        for (int z = 0; z < kNumStates; ++z) {
            double acc = 0.0;
            for (std::size_t k = 0; k < samples; ++k) acc += out.counts[k][t][z];
            out.mean[t][z] = acc / static_cast<double>(samples);
        }
    }
    for (std::size_t k = 0; k < samples; ++k) {
        std::vector<InfectionTrace> traces;
        traces.reserve(static_cast<std::size_t>(config.population));
        for (int u = 0; u < config.population; ++u) traces.push_back(states[k].trace_of(u, config.horizon));
        out.final_traces.push_back(std::move(traces));
    }
    return out;
}

std::vector<InfectionTrace> sample_traces(const ContactLog& contacts, const ModelParams& params,
                                          const ExogenousOverrides& overrides, Rng& rng) {
    auto s = PopulationState::all_susceptible(contacts.population());
    for (int t = 1; t < contacts.horizon(); ++t) {
        step_population(s, contacts.day_contacts(t), params, overrides, rng);
    }
    std::vector<InfectionTrace> out;
    out.reserve(static_cast<std::size_t>(contacts.population()));
    for (int u = 0; u < contacts.population(); ++u) out.push_back(s.trace_of(u, contacts.horizon()));
    return out;
}

}  // namespace crisp
