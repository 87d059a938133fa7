#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "crisp/contact_gen.hpp"
#include "crisp/data.hpp"
#include "crisp/model.hpp"

namespace crisp {

/// Ground-truth population state on one day.
struct PopulationState {
    int day = 1;
    std::vector<InfectionState> state;
    std::vector<int> days_in_state;  // >= 1, counting the current day
    std::vector<InfectionTrace> trace;  // durations not yet known hold kOpenDuration
    std::vector<char> symptomatic;      // drawn on entering I

    static constexpr int kOpenDuration = 1 << 28;

    static PopulationState all_susceptible(int population);
    int population() const { return static_cast<int>(state.size()); }
    std::array<int, kNumStates> counts() const;
    /// Trace of u canonicalized to the given horizon.
    InfectionTrace trace_of(int u, int horizon) const;
};

/// Exogenous infection probability per individual; unset entries use params.p0.
struct ExogenousOverrides {
    std::map<int, double> p0;
    double for_individual(int u, double fallback) const {
        auto it = p0.find(u);
        return it == p0.end() ? fallback : it->second;
    }
};

struct StepEvents {
    std::vector<int> newly_exposed;
    std::vector<int> newly_infectious;  // E -> I transitions in this step
    std::vector<int> newly_symptomatic; // subset of newly_infectious
    std::vector<int> newly_recovered;
};

inline constexpr double kSymptomProbability = 0.5;

/// Advances all individuals from `state.day` to the next day. Infections use
/// the start-of-day snapshot: a contact counts when its source is in I today.
/// Each E -> I transition is flagged symptomatic with kSymptomProbability.
StepEvents step_population(PopulationState& state, const DayContacts& contacts_today,
                           const ModelParams& params, const ExogenousOverrides& overrides, Rng& rng);

struct ScenarioConfig {
    int population = 10000;
    int horizon = 274;
    int num_samples = 10;
    std::uint64_t seed = 0;
    ModelParams params;
    ExogenousOverrides overrides;
    ContactPatternSpec contacts;
};

struct ScenarioResult {
    int horizon = 0;
    // counts[sample][day - 1] = (S, E, I, R)
    std::vector<std::vector<std::array<int, kNumStates>>> counts;
    std::vector<std::array<double, kNumStates>> mean;  // per day
    std::vector<std::vector<InfectionTrace>> final_traces;  // per sample
};

/// Forward samples of the scenario. Contacts are a function of the contact
/// spec alone and identical across samples; sample k uses stream (seed, k).
ScenarioResult run_scenario(const ScenarioConfig& config);

/// Runs one forward sample and returns every individual's canonical trace.
std::vector<InfectionTrace> sample_traces(const ContactLog& contacts, const ModelParams& params,
                                          const ExogenousOverrides& overrides, Rng& rng);

}  // namespace crisp
