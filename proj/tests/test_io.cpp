#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "crisp/config.hpp"
#include "crisp/contact_gen.hpp"
#include "crisp/io.hpp"
#include "doctest.h"

using namespace crisp;

namespace {

ContactLog parse(const std::string& text, int population = 0, int horizon = 0) {
    std::istringstream in(text);
    return parse_contacts(in, "contacts.csv", population, horizon);
}

TestLog parse_t(const std::string& text, int population = 0, int horizon = 0) {
    std::istringstream in(text);
    return parse_tests(in, "tests.csv", population, horizon);
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("contacts: header only gives an empty log") {
    auto log = parse("u,v,t,x_1\n", 4, 10);
    CHECK(log.directed_size() == 0u);
    CHECK(log.population() == 4);
    CHECK(log.channels() == 1);
}

TEST_CASE("contacts: one direction is closed symmetrically") {
    auto log = parse("# crisp version=0.1.0\nu,v,t,x_1\n1,2,3,1\n");
    auto recs = log.directed_records();
    REQUIRE(recs.size() == 2u);
    CHECK(recs[0] == ContactRecord{1, 2, 3, {1}});
    CHECK(recs[1] == ContactRecord{2, 1, 3, {1}});
    CHECK(log.population() == 3);
    CHECK(log.horizon() == 3);
}

TEST_CASE("contacts: errors carry the line number") {
    CHECK(error_of([] { parse("u,v,t,x_1\n1,2,3,1\n1,2,3,1\n"); }).find("contacts.csv:3: duplicate") == 0);
    CHECK(error_of([] { parse("u,v,t,x_1\n0,1,1,1\n\n4,4,2,1\n"); }).find("contacts.csv:4: self contact") == 0);
    CHECK(error_of([] { parse("u,v,t,x_1\n1,2,x,1\n"); }).find("contacts.csv:2: bad day") == 0);
    CHECK(error_of([] { parse("u,v,t,x_1\n1,2,3\n"); }).find("contacts.csv:2: expected 4 fields") == 0);
    CHECK(error_of([] { parse("u,v,t,x_1\n1,2,3,-1\n"); }).find("contacts.csv:2: negative") == 0);
    CHECK(error_of([] { parse("u,v,t,x_1\n1,2,9,1\n", 0, 5); }).find("contacts.csv:2: day 9") == 0);
    CHECK(error_of([] { parse("u,v,t,x_1\n1,7,2,1\n", 5); }).find("contacts.csv:2: individual outside") == 0);
    CHECK(!error_of([] { parse("u,v,t,y\n"); }).empty());
    CHECK(!error_of([] { parse(""); }).empty());
    // mirrors must agree
    CHECK(error_of([] { parse("u,v,t,x_1\n1,2,3,1\n2,1,3,2\n"); }).find("disagrees") != std::string::npos);
    CHECK_NOTHROW(parse("u,v,t,x_1\n1,2,3,1\n2,1,3,1\n"));
}

TEST_CASE("contacts: missing file names the path") {
    auto msg = error_of([] { load_contacts("/nonexistent/c.csv"); });
    CHECK(msg.find("/nonexistent/c.csv") != std::string::npos);
    CHECK_THROWS_AS(load_contacts("/nonexistent/c.csv"), DataError);
}

TEST_CASE("contacts: write then load reproduces the log") {
    auto spec = ContactPatternSpec::uniform(60, 12, 2.5, 0.1, 5.0, 3);
    auto log = generate_log(spec);
    // a second channel with arbitrary counts
    std::vector<ContactRecord> recs;
    std::mt19937_64 rng(4);
    for (auto r : log.undirected_records()) {
        r.x.push_back(static_cast<int>(rng() % 3));
        recs.push_back(r);
    }
    auto two = ContactLog::from_records(60, 12, 2, recs);
    for (const ContactLog* l : {&log, &two}) {
        std::stringstream ss;
        Provenance prov{1, 2};
        write_contacts(ss, *l, &prov);
        auto back = parse_contacts(ss, "rt", l->population(), l->horizon());
        CHECK(back.directed_records() == l->directed_records());
        std::stringstream again;
        write_contacts(again, back, &prov);
        CHECK(again.str() == ss.str());
    }
}

TEST_CASE("tests: parse, repeats kept, errors") {
    auto log = parse_t("u,t,o\n5,12,1\n5,12,0\n2,3,0\n", 10, 20);
    CHECK(log.size() == 3u);
    REQUIRE(log.tests_of(5).size() == 2u);
    CHECK(log.tests_of(5)[0] == TestRecord{5, 12, 1});
    CHECK(log.tests_of(5)[1] == TestRecord{5, 12, 0});
    CHECK(error_of([] { parse_t("u,t,o\n1,2,2\n"); }).find("tests.csv:2: outcome 2") == 0);
    CHECK(error_of([] { parse_t("u,t,o\n1,30,1\n", 5, 20); }).find("tests.csv:2: day 30") == 0);
    CHECK(!error_of([] { parse_t("u,t\n"); }).empty());

    std::stringstream ss;
    write_tests(ss, log);
    auto back = parse_tests(ss, "rt", 10, 20);
    CHECK(back.records() == log.records());
}

TEST_CASE("number formatting round trips") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        double x = std::ldexp(static_cast<double>(rng() >> 11), -static_cast<int>(rng() % 80));
        CHECK(std::stod(format_double(x)) == x);
    }
    CHECK(format_double(0.25) == "0.25");
    CHECK(format_double(120000.0) == "120000");
}

TEST_CASE("provenance header") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    Provenance p{0xabcULL, 7};
    CHECK(p.line() == std::string("# crisp version=") + kVersion + " config_hash=0000000000000abc seed=7");
}

TEST_CASE("config: defaults and sections") {
    auto c = parse_config("{}");
    CHECK(c.seed == 0u);
    CHECK(c.model.p0 == 1e-4);
    CHECK(c.contacts.phases.size() == 1u);
    CHECK(c.policy.points.empty());

    auto d = parse_config(R"({
        // comments are allowed
        "seed": 7,
        "out": "results",
        "model": {"p0": 0.001, "p": [0.1, 0.2], "qE": [0.5, 0.5], "qI": {"geometric_rate": 0.2, "max_days": 30}},
        "contacts": {"population": 50, "horizon": 40, "channel": 1,
                     "phases": [{"first_day": 1, "last_day": 20, "r0": 2.5},
                                {"first_day": 21, "last_day": 40, "kind": "bubbles", "intra_r0": 1.0, "inter_r0": 0.2}]},
        "gibbs": {"num_samples": 5, "route": "enumerate", "order": "uniform_picks"},
        "em": {"max_iterations": 3, "freeze_p0": true},
        "federated": {"rounds": 9, "schedule": "random", "edge_delays": [[0, 1, 2]]},
        "policy": {"kind": "crisp", "num_seeds": 2, "points": [{"tau_ei": 0.4}, {"kind": "symptom", "rho": 7}]}
    })");
    CHECK(d.seed == 7u);
    CHECK(d.out == "results");
    CHECK(d.model.p == std::vector<double>{0.1, 0.2});
    CHECK(d.model.qE.max_days() == 2);
    CHECK(d.contacts.population == 50);
    CHECK(d.contacts.seed == 7u);
    CHECK(d.contacts.p_channel == 0.2);
    CHECK(d.contacts.channels == 2);
    CHECK(d.contacts.phases.size() == 2u);
    CHECK(d.contacts.phases[1].kind == PatternKind::bubbles);
    CHECK(d.gibbs.route == SamplerRoute::enumerate);
    CHECK(d.gibbs.seed == 7u);
    CHECK(d.em.freeze_p0);
    CHECK(d.federated.schedule.kind == ScheduleKind::random);
    CHECK(d.federated.schedule.delay(0, 1) == 2);
    REQUIRE(d.policy.points.size() == 2u);
    CHECK(d.policy.points[0].kind == PolicyKind::crisp);
    CHECK(d.policy.points[0].tau_ei == 0.4);
    CHECK(d.policy.points[1].rho == 7);
    CHECK(d.hash != c.hash);

    d.set_seed(11);
    CHECK(d.contacts.seed == 11u);
    CHECK(d.em.seed == 11u);
    auto pinned = parse_config(R"({"seed": 1, "contacts": {"seed": 5}})");
    pinned.set_seed(9);
    CHECK(pinned.contacts.seed == 5u);
}

TEST_CASE("config: unknown keys and bad values are rejected") {
    CHECK(error_of([] { parse_config(R"({"sed": 1})"); }).find("unknown key 'sed'") != std::string::npos);
    CHECK(error_of([] { parse_config(R"({"model": {"p1": 0.1}})"); }).find("unknown key 'p1' in 'model'") !=
          std::string::npos);
    CHECK(error_of([] { parse_config(R"({"policy": {"points": [{"rhoo": 2}]}})"); })
              .find("policy.points[0]") != std::string::npos);
    CHECK_THROWS_AS(parse_config(R"({"seed": "x"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"seed": -1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model": {"p0": 2}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"policy": {"rho": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"gibbs": {"route": "fast"}})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config("[]"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent.cfg"), ConfigError);
}

TEST_CASE("config: shipped configs parse") {
    for (const char* name : {"no_mitigation.cfg", "suppression.cfg", "infer.cfg", "em_fit.cfg", "federated.cfg",
                             "policy_grid.cfg"}) {
        CAPTURE(name);
        CHECK_NOTHROW(load_config(std::string(CRISP_CONFIG_DIR) + "/" + name));
    }
}
