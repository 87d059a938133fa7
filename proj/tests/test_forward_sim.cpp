#include <cmath>
#include <map>

#include "crisp/forward_sim.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace crisp;

namespace {

ScenarioConfig small_scenario(double r0, double p1, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.population = 300;
    cfg.horizon = 80;
    cfg.num_samples = 4;
    cfg.seed = seed;
    cfg.params.p0 = 1e-3;
    cfg.params.p = {p1};
    cfg.contacts = ContactPatternSpec::uniform(cfg.population, cfg.horizon, r0, 0.01, 19.88, seed + 1000);
    return cfg;
}

}  // namespace

TEST_CASE("isolated population without exogenous infections stays susceptible") {
    auto s = PopulationState::all_susceptible(50);
    ModelParams p;
    p.p0 = 0.0;
    Rng rng = make_rng(1);
    DayContacts none;
    for (int t = 1; t < 30; ++t) step_population(s, none, p, {}, rng);
    CHECK(s.counts()[0] == 50);
    CHECK(s.day == 30);
}

TEST_CASE("patient zero is exposed on day 2") {
    ModelParams p;
    p.p0 = 0.0;
    ExogenousOverrides ov;
    ov.p0[3] = 1.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = PopulationState::all_susceptible(10);
        Rng rng = make_rng(seed);
        auto ev = step_population(s, {}, p, ov, rng);
        CHECK(s.state[3] == InfectionState::E);
        CHECK(ev.newly_exposed == std::vector<int>{3});
        CHECK(s.trace_of(3, 10).t0 == 1);
    }
}

TEST_CASE("recovered individuals stay recovered") {
    auto s = PopulationState::all_susceptible(1);
    s.state[0] = InfectionState::R;
    ModelParams p;
    p.p0 = 1.0;
    Rng rng = make_rng(2);
    for (int t = 1; t < 20; ++t) step_population(s, {}, p, {}, rng);
    CHECK(s.state[0] == InfectionState::R);
}

TEST_CASE("single individual without infections is always S") {
    ScenarioConfig cfg;
    cfg.population = 1;
    cfg.horizon = 30;
    cfg.num_samples = 2;
    cfg.params.p0 = 0.0;
    cfg.contacts = ContactPatternSpec::uniform(1, 30, 0.0, 0.01, 19.88, 0);
    auto res = run_scenario(cfg);
    for (const auto& day : res.mean) CHECK(day[0] == 1.0);
}

TEST_CASE("scenario time series invariants") {
    auto res = run_scenario(small_scenario(2.5, 0.01, 3));
    for (const auto& series : res.counts) {
        REQUIRE(series.size() == 80);
        for (std::size_t t = 0; t < series.size(); ++t) {
            CHECK(series[t][0] + series[t][1] + series[t][2] + series[t][3] == 300);
            if (t > 0) {
                CHECK(series[t][0] <= series[t - 1][0]);
                CHECK(series[t][3] >= series[t - 1][3]);
            }
        }
    }
}

TEST_CASE("zero transmission keeps everyone susceptible") {
    auto cfg = small_scenario(2.5, 0.0, 4);
    cfg.params.p0 = 0.0;
    auto res = run_scenario(cfg);
    for (const auto& day : res.mean) CHECK(day[0] == 300.0);
}

TEST_CASE("scenarios are reproducible") {
    auto a = run_scenario(small_scenario(2.5, 0.01, 5));
    auto b = run_scenario(small_scenario(2.5, 0.01, 5));
    CHECK(a.counts == b.counts);
    CHECK(a.final_traces == b.final_traces);
}

TEST_CASE("higher transmission does not lower the attack rate") {
    double low = 0.0, high = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto a = small_scenario(2.5, 0.005, seed);
        auto b = small_scenario(2.5, 0.02, seed);
        low += 300.0 - run_scenario(a).mean.back()[0];
        high += 300.0 - run_scenario(b).mean.back()[0];
    }
    CHECK(high >= low);
}

TEST_CASE("forward samples follow the prior of the joint model") {
    std::mt19937_64 gen(17);
    auto inst = oracle::random_instance(gen, 3, 5, 0.5, 0);
    auto exact = oracle::exact_marginals(inst);
    auto log = ContactLog::from_records(3, 5, 1, inst.contacts);

    const int draws = 40000;
    std::vector<std::vector<std::array<double, 4>>> freq(3, std::vector<std::array<double, 4>>(5));
    Rng rng = make_rng(8);
    for (int i = 0; i < draws; ++i) {
        auto traces = sample_traces(log, inst.params, {}, rng);
        for (int u = 0; u < 3; ++u) {
            for (int t = 1; t <= 5; ++t) freq[u][t - 1][static_cast<int>(state_at(traces[u], t))] += 1.0 / draws;
        }
    }
    for (int u = 0; u < 3; ++u) {
        for (int t = 0; t < 5; ++t) {
            double tv = 0.0;
            for (int s = 0; s < 4; ++s) tv += 0.5 * std::abs(freq[u][t][s] - exact[u][t][s]);
            CHECK(tv < 0.02);
        }
    }
}
