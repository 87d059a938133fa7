#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "crisp");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream err;
    int code = crisp::run_cli(static_cast<int>(argv.size()), argv.data(), err);
    return {code, err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("crisp_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& text) const {
        auto p = path / name;
        std::ofstream(p) << text;
        return p.string();
    }
};

const char* kSmall = R"({"seed": 4, "model": {"p": [0.05]}, "contacts": {"population": 120, "horizon": 30},
  "simulate": {"num_samples": 2, "p0": {"0": 1}}, "gibbs": {"num_samples": 20, "burn_in": 5},
  "em": {"max_iterations": 2, "num_samples": 3, "burn_in": 2}, "federated": {"rounds": 8},
  "policy": {"num_seeds": 1, "num_samples": 5, "start_day": 10, "points": [{"kind": "symptom"}, {"kind": "crisp"}]}})";

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"simulate", "--bogus"}).code == 1);
    CHECK(run({"--config", "/nonexistent.cfg", "simulate"}).code == 1);
    TempDir d("usage");
    auto bad = d.file("bad.cfg", R"({"modle": {}})");
    auto r = run({"--config", bad, "simulate"});
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown key 'modle'") != std::string::npos);
    CHECK(run({"infer"}).code == 1);  // no contacts file
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("cli: missing or malformed data exits 2 with the path") {
    auto r = run({"infer", "--contacts", "/nonexistent/contacts.csv"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/nonexistent/contacts.csv") != std::string::npos);

    TempDir d("data");
    auto c = d.file("c.csv", "u,v,t,x_1\n0,1,2,1\n0,1,2,1\n");
    r = run({"--out", d.path.string(), "infer", "--contacts", c});
    CHECK(r.code == 2);
    CHECK(r.err.find("c.csv:3: duplicate") != std::string::npos);
}

TEST_CASE("cli: every subcommand writes its files, reproducibly") {
    TempDir d("all");
    auto cfg = d.file("run.cfg", kSmall);
    auto a = (d.path / "a").string();
    auto b = (d.path / "b").string();
    for (const auto& out : {a, b}) {
        REQUIRE(run({"--config", cfg, "--out", out, "gen-contacts"}).code == 0);
        auto contacts = (fs::path(out) / "contacts.csv").string();
        auto tests = d.file("tests.csv", "u,t,o\n0,10,1\n3,12,0\n");
        CHECK(run({"--config", cfg, "--out", out, "simulate"}).code == 0);
        CHECK(run({"--config", cfg, "--out", out, "infer", "--contacts", contacts, "--tests", tests}).code == 0);
        CHECK(run({"--config", cfg, "--out", out, "em-fit", "--contacts", contacts, "--tests", tests}).code == 0);
        CHECK(run({"--config", cfg, "--out", out, "federated", "--contacts", contacts, "--tests", tests}).code == 0);
        CHECK(run({"--config", cfg, "--out", out, "policy-eval"}).code == 0);
    }
    for (const char* f : {"contacts.csv", "seir_timeseries.csv", "risk_scores.csv", "em_history.csv",
                          "federated_rounds.csv", "federated_risk_scores.csv", "policy_runs.csv",
                          "policy_summary.csv", "quarantine_composition.csv"}) {
        CAPTURE(f);
        auto x = slurp(fs::path(a) / f);
        CHECK(!x.empty());
        CHECK(x.rfind("# crisp version=", 0) == 0);
        CHECK(x == slurp(fs::path(b) / f));
    }
    auto ts = slurp(fs::path(a) / "seir_timeseries.csv");
    CHECK(ts.find("\nday,sample_id,S,E,I,R\n") != std::string::npos);
    auto risk = slurp(fs::path(a) / "risk_scores.csv");
    CHECK(risk.find("\nindividual,day,P_S,P_E,P_I,P_R\n") != std::string::npos);
}

TEST_CASE("cli: --seed changes the output and the header") {
    TempDir d("seed");
    auto cfg = d.file("run.cfg", kSmall);
    auto a = (d.path / "a").string();
    auto b = (d.path / "b").string();
    REQUIRE(run({"--config", cfg, "--out", a, "simulate"}).code == 0);
    REQUIRE(run({"--config", cfg, "--seed", "5", "--out", b, "simulate"}).code == 0);
    auto x = slurp(fs::path(a) / "seir_timeseries.csv");
    auto y = slurp(fs::path(b) / "seir_timeseries.csv");
    CHECK(x != y);
    CHECK(y.find("seed=5\n") != std::string::npos);
}
