#include <algorithm>
#include <numeric>
#include <set>

#include "crisp/policy.hpp"
#include "doctest.h"

using namespace crisp;

namespace {

DayContacts day_of(int day, std::vector<std::pair<int, int>> pairs) {
    DayContacts d;
    d.day = day;
    for (auto [a, b] : pairs) {
        d.links.push_back({a, b});
        d.links.push_back({b, a});
        d.counts.push_back(1);
        d.counts.push_back(1);
    }
    return d;
}

Observation quiet(int day) {
    Observation o;
    o.day = day;
    o.contacts.day = day;
    return o;
}

PolicyParams params_of(PolicyKind kind, int rho = 14) {
    PolicyParams p;
    p.kind = kind;
    p.rho = rho;
    return p;
}

HarnessConfig small_harness(std::uint64_t seed, int population = 200, int horizon = 60) {
    HarnessConfig c;
    c.population = population;
    c.horizon = horizon;
    c.truth.p0 = 1e-3;
    c.truth.p = {0.05};
    c.contacts = ContactPatternSpec::uniform(population, horizon, 2.5, 0.05, c.truth.qI.mean(), seed);
    c.seed = seed;
    return c;
}

/// Forwards to an inner policy and keeps every observation it saw.
class Recorder : public Policy {
public:
    explicit Recorder(std::unique_ptr<Policy> inner) : inner_(std::move(inner)) {}
    Decision decide(int day) override {
        decisions.push_back(inner_->decide(day));
        return decisions.back();
    }
    void observe(const Observation& obs) override {
        seen.push_back(obs);
        inner_->observe(obs);
    }
    const PolicyState& state() const override { return inner_->state(); }

    std::vector<Observation> seen;
    std::vector<Decision> decisions;

private:
    std::unique_ptr<Policy> inner_;
};

class Greedy : public Policy {
public:
    Greedy(int population, int horizon) : state_(population, horizon, 1) {}
    Decision decide(int) override {
        Decision d;
        for (int u = 0; u < 25; ++u) d.tests.push_back(u);
        return d;
    }
    void observe(const Observation&) override {}
    const PolicyState& state() const override { return state_; }

private:
    PolicyState state_;
};

}  // namespace

TEST_CASE("policy params validation and names") {
    PolicyParams p;
    CHECK_NOTHROW(p.validate());
    for (auto mutate : std::vector<void (*)(PolicyParams&)>{
             [](PolicyParams& q) { q.rho = 0; }, [](PolicyParams& q) { q.tau_ei = 1.0; },
             [](PolicyParams& q) { q.tau_sr = 0.0; }, [](PolicyParams& q) { q.budget = -1; }}) {
        PolicyParams q;
        mutate(q);
        CHECK_THROWS_AS(q.validate(), std::invalid_argument);
    }
    CHECK(policy_kind_from_string("contact_tracing") == PolicyKind::contact_tracing);
    CHECK_THROWS_AS(policy_kind_from_string("bogus"), std::invalid_argument);
    CHECK(params_of(PolicyKind::symptom, 7).label() == "symptom rho=7");
}

TEST_CASE("extend horizon keeps finished phases and reopens censored ones") {
    CHECK(extend_horizon(InfectionTrace::never_infected(10), 10, 15) == InfectionTrace::never_infected(15));
    CHECK(extend_horizon({4, 6, 1}, 10, 15) == InfectionTrace{4, 11, 1});
    CHECK(extend_horizon({4, 2, 4}, 10, 15) == InfectionTrace{4, 2, 9});
    CHECK(extend_horizon({2, 2, 3}, 10, 15) == InfectionTrace{2, 2, 3});
    CHECK_THROWS(extend_horizon({2, 2, 3}, 10, 9));
}

TEST_CASE("symptom policy: tests symptomatic only and quarantines positives for rho days") {
    auto policy = make_policy(params_of(PolicyKind::symptom, 5), ModelParams{}, 50, 40, 1);
    auto obs = quiet(9);
    policy->observe(quiet(8));
    policy->observe(obs);
    CHECK(policy->decide(10).tests.empty());  // no symptomatic individuals

    auto o10 = quiet(10);
    o10.symptomatic = {{7, 11}, {3, 11}, {12, 9}};
    policy->observe(o10);
    auto d = policy->decide(11);
    CHECK(d.tests == std::vector<int>{12, 3, 7});  // earliest onset first, then id
    CHECK(d.quarantine.empty());

    auto o11 = quiet(11);
    o11.outcomes = {{12, 11, 1}, {3, 11, 0}, {7, 11, 1}};
    o11.symptomatic = {{7, 11}, {3, 11}, {12, 9}};
    policy->observe(o11);
    for (int day = 12; day <= 16; ++day) {
        CHECK(policy->decide(day).quarantine == std::vector<int>{7, 12});
    }
    // positives are never retested, the negative one still is
    CHECK(policy->decide(12).tests == std::vector<int>{3});
    for (int day = 12; day <= 15; ++day) policy->observe(quiet(day));
    // a repeat positive extends the release day
    auto o16 = quiet(16);
    o16.outcomes = {{7, 16, 1}};
    policy->observe(o16);
    CHECK(policy->decide(17).quarantine == std::vector<int>{7});
    CHECK(policy->decide(21).quarantine == std::vector<int>{7});
    CHECK(policy->decide(22).quarantine.empty());
}

TEST_CASE("symptom policy tests at most the budget") {
    auto policy = make_policy(params_of(PolicyKind::symptom), ModelParams{}, 100, 40, 1);
    auto o = quiet(1);
    for (int u = 0; u < 25; ++u) o.symptomatic.push_back({u, 2});
    policy->observe(o);
    auto d = policy->decide(2);
    CHECK(d.tests.size() == 10u);
    CHECK(d.tests.front() == 0);
    CHECK(d.tests.back() == 9);
}

TEST_CASE("contact tracing: positive quarantines self and contacts of the past 7 days") {
    auto policy = make_policy(params_of(PolicyKind::contact_tracing, 14), ModelParams{}, 40, 60, 1);
    for (int day = 1; day <= 9; ++day) {
        if (day == 2) {
            policy->observe(Observation{2, day_of(2, {{0, 30}}), {}, {}});  // outside the window
            continue;
        }
        if (day >= 3 && day <= 8) {
            std::vector<std::pair<int, int>> pairs;
            for (int k = 0; k < 2; ++k) pairs.push_back({0, 1 + 2 * (day - 3) + k});
            if (day == 8) pairs = {{0, 11}, {0, 12}, {0, 1}};  // 1 again: 12 distinct in total
            policy->observe(Observation{day, day_of(day, pairs), {}, {}});
            continue;
        }
        auto o = Observation{day, day_of(day, {}), {}, {}};
        if (day == 9) o.outcomes = {{0, 9, 1}};
        policy->observe(o);
    }
    // window for the decision on day 10 is days 3..9
    auto d = policy->decide(10);
    std::vector<int> expected(13);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(d.quarantine == expected);
    CHECK(policy->decide(23).quarantine == expected);
    CHECK(policy->decide(24).quarantine.empty());

    // ranking: contact 1 met the positive twice, everyone else once; ties by id
    CHECK(d.tests.size() == 10u);
    CHECK(d.tests[0] == 1);
    CHECK(d.tests[1] == 2);
    CHECK(d.tests[9] == 10);
    CHECK(std::find(d.tests.begin(), d.tests.end(), 0) == d.tests.end());

    // a negative result releases from the next day on
    auto o10 = Observation{10, day_of(10, {}), {{1, 10, 0}, {2, 10, 0}}, {}};
    policy->observe(o10);
    auto d11 = policy->decide(11);
    CHECK(std::find(d11.quarantine.begin(), d11.quarantine.end(), 1) == d11.quarantine.end());
    CHECK(std::find(d11.quarantine.begin(), d11.quarantine.end(), 2) == d11.quarantine.end());
    CHECK(d11.quarantine.size() == 11u);
}

TEST_CASE("contact tracing puts symptomatic individuals first") {
    auto policy = make_policy(params_of(PolicyKind::contact_tracing), ModelParams{}, 40, 60, 1);
    auto o = Observation{1, day_of(1, {{0, 5}, {0, 6}}), {{0, 1, 1}}, {{20, 2}, {21, 2}}};
    policy->observe(o);
    auto d = policy->decide(2);
    CHECK(d.tests == std::vector<int>{20, 21, 5, 6});
    CHECK(d.quarantine == std::vector<int>{0, 5, 6});
}

TEST_CASE("crisp threshold and ranking rules") {
    std::vector<std::array<double, kNumStates>> probs = {
        {0.65, 0.20, 0.15, 0.0},  // E or I 0.35 > 0.3: quarantined
        {0.95, 0.0, 0.05, 0.0},   // S or R 0.95 > 0.9: released
        {0.80, 0.10, 0.10, 0.0},  // member with S or R 0.8: stays
        {0.75, 0.0, 0.25, 0.0},   // outsider below tau_EI
        {0.0, 0.0, 0.9, 0.1},     // highest P(I), but tested positive before
    };
    CHECK(crisp_quarantine(probs, {1, 2}, 0.3, 0.9) == std::vector<int>{0, 2, 4});
    CHECK(crisp_tests(probs, {3}, {4}, 10) == std::vector<int>{3, 0, 2, 1});
    CHECK(crisp_tests(probs, {}, {}, 2) == std::vector<int>{4, 3});
    CHECK(crisp_tests(probs, {1, 2, 3}, {}, 2) == std::vector<int>{1, 2});
}

TEST_CASE("crisp policy uses revealed data and skips a failing day") {
    PolicyParams p = params_of(PolicyKind::crisp);
    p.num_samples = 30;
    p.tau_ei = 0.5;
    ModelParams m;
    m.p = {0.3};
    auto policy = make_policy(p, m, 20, 30, 4);
    for (int day = 1; day <= 9; ++day) {
        auto o = Observation{day, day_of(day, {{0, 1}}), {}, {}};
        if (day >= 8) o.outcomes = {{0, day, 1}};
        policy->observe(o);
    }
    auto d = policy->decide(10);
    CHECK(policy->take_warnings().empty());
    CHECK(std::find(d.quarantine.begin(), d.quarantine.end(), 0) != d.quarantine.end());
    CHECK(std::find(d.tests.begin(), d.tests.end(), 0) == d.tests.end());
    // the frequent contact of a positive ranks first among the rest
    REQUIRE(!d.tests.empty());
    CHECK(d.tests.front() == 1);

    auto bad = quiet(10);
    bad.outcomes = {{25, 10, 1}};  // unknown individual: the engine rejects the test log
    policy->observe(bad);
    auto skipped = policy->decide(11);
    CHECK(skipped.tests.empty());
    CHECK(skipped.quarantine == d.quarantine);
    CHECK(policy->take_warnings().size() == 1u);
}

TEST_CASE("crisp policy warm start runs and stays deterministic") {
    PolicyParams p = params_of(PolicyKind::crisp);
    p.num_samples = 20;
    p.start_day = 10;
    p.warm_start = true;
    auto c = small_harness(3, 100, 40);
    auto a = run_policy(c, p);
    auto b = run_policy(c, p);
    CHECK(a.warnings.empty());
    CHECK(a.infected_pct == b.infected_pct);
    CHECK(a.quarantine_days == b.quarantine_days);
    CHECK(a.quarantined_by_state == b.quarantined_by_state);
}

TEST_CASE("nothing happens before the activation day") {
    auto c = small_harness(5);
    auto p = params_of(PolicyKind::contact_tracing);
    p.start_day = 20;
    auto inner = make_policy(p, c.truth, c.population, c.horizon, c.seed);
    auto rec = std::make_unique<Recorder>(std::move(inner));
    auto* r = rec.get();
    PolicySimulation sim(c, p, std::move(rec));
    while (!sim.done()) {
        int t = sim.day();
        sim.day_loop();
        if (t < 20) {
            CHECK(sim.last_decision().tests.empty());
            CHECK(sim.last_decision().quarantine.empty());
            CHECK(r->seen.back().outcomes.empty());
            CHECK(r->seen.back().symptomatic.empty());
        }
    }
    CHECK(r->decisions.size() == static_cast<std::size_t>(c.horizon - 20));
    CHECK(r->seen.size() == static_cast<std::size_t>(c.horizon - 1));
}

TEST_CASE("quarantined individuals have no contacts that day") {
    auto c = small_harness(6);
    auto p = params_of(PolicyKind::contact_tracing);
    p.start_day = 10;
    PolicySimulation sim(c, p);
    long long seen_quarantine = 0;
    while (!sim.done()) {
        sim.day_loop();
        std::set<int> q(sim.last_decision().quarantine.begin(), sim.last_decision().quarantine.end());
        seen_quarantine += static_cast<long long>(q.size());
        for (const auto& l : sim.last_contacts().links) {
            CHECK(!q.count(l.from));
            CHECK(!q.count(l.to));
        }
    }
    CHECK(seen_quarantine > 0);
    CHECK(sim.metrics().quarantine_days == seen_quarantine);
}

TEST_CASE("over-budget requests are truncated with a warning") {
    auto c = small_harness(7, 60, 40);
    PolicyParams p;
    p.start_day = 35;
    PolicySimulation sim(c, p, std::make_unique<Greedy>(c.population, c.horizon));
    sim.run();
    CHECK(sim.metrics().truncated_days == 5);
    CHECK(sim.metrics().warnings.size() == 5u);
    CHECK(sim.last_decision().tests.size() == 10u);
}

TEST_CASE("decisions depend only on the observation stream") {
    auto c = small_harness(8);
    for (auto kind : {PolicyKind::symptom, PolicyKind::contact_tracing}) {
        auto p = params_of(kind, 7);
        p.start_day = 15;
        auto rec = std::make_unique<Recorder>(make_policy(p, c.truth, c.population, c.horizon, c.seed));
        auto* r = rec.get();
        PolicySimulation sim(c, p, std::move(rec));
        sim.run();

        // replay the same observations into a fresh policy, no simulation behind it
        auto fresh = make_policy(p, c.truth, c.population, c.horizon, c.seed);
        std::size_t k = 0;
        for (int t = 1; t < c.horizon; ++t) {
            if (t >= p.start_day) {
                auto d = fresh->decide(t);
                REQUIRE(k < r->decisions.size());
                CHECK(d.tests == r->decisions[k].tests);
                CHECK(d.quarantine == r->decisions[k].quarantine);
                ++k;
            }
            fresh->observe(r->seen[static_cast<std::size_t>(t - 1)]);
        }
    }
}

TEST_CASE("contact tracing quarantine covers recent positives") {
    auto c = small_harness(9);
    auto p = params_of(PolicyKind::contact_tracing, 7);
    p.start_day = 10;
    PolicySimulation sim(c, p);
    std::map<int, int> positive_day;
    while (!sim.done()) {
        int t = sim.day();
        sim.day_loop();
        const auto& q = sim.last_decision().quarantine;
        for (auto [u, d] : positive_day) {
            if (t >= d + 1 && t <= d + p.rho) CHECK(std::binary_search(q.begin(), q.end(), u));
        }
        for (const auto& r : sim.policy().state().outcomes) {
            if (r.outcome == 1 && r.t == t) positive_day[r.u] = t;
        }
    }
    CHECK(!positive_day.empty());
}

TEST_CASE("baselines: no mitigation and full lockdown") {
    auto c = HarnessConfig::standard(1);
    auto none = run_policy(c, params_of(PolicyKind::none));
    CHECK(none.quarantine_days == 0);
    CHECK(none.counts.size() == 150u);
    CHECK(none.infected_pct > 50.0);

    auto lock = run_policy(c, params_of(PolicyKind::lockdown));
    CHECK(lock.quarantine_days == 120000);
    long long total = 0;
    for (const auto& day : lock.quarantined_by_state) total += std::accumulate(day.begin(), day.end(), 0LL);
    CHECK(total == lock.quarantine_days);
    CHECK(lock.infected_pct < none.infected_pct);
}

TEST_CASE("grid runs are reproducible and summarized") {
    auto c = small_harness(0);
    std::vector<PolicyParams> pts = {params_of(PolicyKind::none), params_of(PolicyKind::symptom, 7)};
    for (auto& p : pts) p.start_day = 10;
    auto a = evaluate_policy_grid(c, pts, 3, 11);
    auto b = evaluate_policy_grid(c, pts, 3, 11);
    REQUIRE(a.size() == 2u);
    CHECK(a[0].seeds == std::vector<std::uint64_t>{11, 12, 13});
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].infected_mean == b[i].infected_mean);
        CHECK(a[i].quarantine_mean == b[i].quarantine_mean);
        double m = 0.0;
        for (const auto& r : a[i].runs) m += r.infected_pct / 3.0;
        CHECK(a[i].infected_mean == doctest::Approx(m));
    }
    CHECK(a[0].quarantine_mean == 0.0);
    CHECK(standard_grid().size() == 14u);
}
