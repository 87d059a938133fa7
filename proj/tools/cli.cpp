#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "crisp/config.hpp"
#include "crisp/contact_gen.hpp"
#include "crisp/em.hpp"
#include "crisp/federated.hpp"
#include "crisp/forward_sim.hpp"
#include "crisp/gibbs.hpp"
#include "crisp/io.hpp"
#include "crisp/policy.hpp"

namespace crisp {

namespace {

struct Context {
    RunConfig config;
    Provenance prov;
    std::filesystem::path out;
    std::ostream& err;

    void write(const std::string& name, const std::function<void(std::ostream&)>& fn) const {
        std::filesystem::create_directories(out);
        auto path = out / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw DataError("cannot write " + path.string());
        fn(f);
        f.close();
        if (!f) throw DataError("failed writing " + path.string());
        err << "wrote " << path.string() << '\n';
    }
};

struct DataSet {
    ContactLog contacts;
    TestLog tests;
};

DataSet load_data(const RunConfig& c) {
    if (c.data.contacts.empty()) throw ConfigError("no contacts file: set data.contacts or pass --contacts");
    DataSet d;
    d.contacts = load_contacts(c.data.contacts, c.data.population, c.data.horizon);
    if (d.contacts.channels() != c.model.channels()) {
        throw DataError(c.data.contacts + ": " + std::to_string(d.contacts.channels()) +
                        " contact channels but the model has " + std::to_string(c.model.channels()));
    }
    d.tests = c.data.tests.empty() ? TestLog(d.contacts.population())
                                   : load_tests(c.data.tests, d.contacts.population(), d.contacts.horizon());
    return d;
}

void cmd_gen_contacts(const Context& ctx) {
    auto log = generate_log(ctx.config.contacts);
    ctx.write("contacts.csv", [&](std::ostream& o) { write_contacts(o, log, &ctx.prov); });
}

void cmd_simulate(const Context& ctx) {
    const auto& c = ctx.config;
    ScenarioConfig sc;
    sc.population = c.contacts.population;
    sc.horizon = c.contacts.horizon;
    sc.num_samples = c.simulate.num_samples;
    sc.seed = c.seed;
    sc.params = c.model;
    sc.overrides.p0 = c.simulate.p0;
    sc.contacts = c.contacts;
    for (const auto& [u, p] : sc.overrides.p0) {
        if (u >= sc.population) throw ConfigError("simulate.p0 names individual " + std::to_string(u) + " outside the population");
    }
    auto result = run_scenario(sc);
    ctx.write("seir_timeseries.csv", [&](std::ostream& o) { write_timeseries(o, result, ctx.prov); });
}

void cmd_infer(const Context& ctx) {
    const auto& c = ctx.config;
    auto d = load_data(c);
    int horizon = d.contacts.horizon();
    auto samples = run_gibbs(d.contacts, d.tests, c.model, c.gibbs);
    StateMarginals m(d.contacts.population(), horizon);
    for (const auto& s : samples) m.add(s);
    int last = c.infer.last_day == 0 ? horizon : std::min(c.infer.last_day, horizon);
    ctx.write("risk_scores.csv", [&](std::ostream& o) { write_risk(o, m, c.infer.first_day, last, ctx.prov); });
}

void cmd_em_fit(const Context& ctx) {
    const auto& c = ctx.config;
    auto d = load_data(c);
    auto result = em_fit(d.contacts, d.tests, c.model, c.em, [&](const EMIteration& it) {
        ctx.err << "iteration " << it.iteration << " p0=" << format_double(it.params.p0);
        for (double p : it.params.p) ctx.err << ' ' << format_double(p);
        ctx.err << " change=" << format_double(it.change) << '\n';
    });
    ctx.write("em_history.csv", [&](std::ostream& o) { write_em_history(o, result, ctx.prov); });
}

void cmd_federated(const Context& ctx) {
    const auto& c = ctx.config;
    auto d = load_data(c);
    int horizon = d.contacts.horizon();
    auto nodes = make_nodes(d.contacts, d.tests, c.model, horizon);
    auto run = run_federated(nodes, c.federated.schedule, c.federated.rounds, c.seed, c.federated.route);

    // population state after every round past the burn-in
    std::vector<InfectionTrace> state(nodes.size(), InfectionTrace::never_infected(horizon));
    StateMarginals m(d.contacts.population(), horizon);
    std::size_t k = 0;
    for (int r = 1; r <= c.federated.rounds; ++r) {
        for (; k < run.activations.size() && run.activations[k].round == r; ++k) {
            state[static_cast<std::size_t>(run.activations[k].node)] = run.activations[k].trace;
        }
        if (r > c.gibbs.burn_in) m.add(state);
    }
    ctx.write("federated_rounds.csv", [&](std::ostream& o) { write_federated_rounds(o, run, ctx.prov); });
    if (m.samples() > 0) {
        ctx.write("federated_risk_scores.csv", [&](std::ostream& o) { write_risk(o, m, 1, horizon, ctx.prov); });
    }
}

void cmd_policy_eval(const Context& ctx) {
    const auto& c = ctx.config;
    auto points = c.policy.points.empty() ? standard_grid(c.policy.base) : c.policy.points;
    ctx.err << "evaluating " << points.size() << " policies x " << c.policy.num_seeds << " seeds\n";
    auto grid = evaluate_policy_grid(c.harness(), points, c.policy.num_seeds, c.policy.first_seed);
    for (const auto& g : grid) {
        for (const auto& r : g.runs) {
            for (const auto& w : r.warnings) ctx.err << "warning: " << g.params.label() << ": " << w << '\n';
        }
    }
    ctx.write("policy_runs.csv", [&](std::ostream& o) { write_policy_runs(o, grid, ctx.prov); });
    ctx.write("policy_summary.csv", [&](std::ostream& o) { write_policy_summary(o, grid, ctx.prov); });
    ctx.write("quarantine_composition.csv", [&](std::ostream& o) { write_quarantine_composition(o, grid, ctx.prov); });
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& err) {
    CLI::App app{"Individual-level SEIR simulation and inference"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out, contacts, tests;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", seed, "Seed overriding the configuration");
    app.add_option("--out", out, "Output directory overriding the configuration");

    using Command = void (*)(const Context&);
    std::vector<std::pair<CLI::App*, Command>> commands;
    auto add = [&](const char* name, const char* help, Command fn, bool data) {
        auto* sub = app.add_subcommand(name, help);
        if (data) {
            sub->add_option("--contacts", contacts, "Contact CSV (u,v,t,x_1..x_J)");
            sub->add_option("--tests", tests, "Test CSV (u,t,o)");
        }
        commands.push_back({sub, fn});
    };
    add("gen-contacts", "Generate a contact log", cmd_gen_contacts, false);
    add("simulate", "Forward-sample SEIR time series", cmd_simulate, false);
    add("infer", "Posterior state probabilities by Gibbs sampling", cmd_infer, true);
    add("em-fit", "Estimate p0 and transmission probabilities", cmd_em_fit, true);
    add("federated", "Run the on-device sampling protocol", cmd_federated, true);
    add("policy-eval", "Evaluate testing-and-quarantining policies", cmd_policy_eval, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            err << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        Context ctx{config_path.empty() ? parse_config("{}") : load_config(config_path), {}, {}, err};
        if (seed) ctx.config.set_seed(*seed);
        if (!out.empty()) ctx.config.out = out;
        if (!contacts.empty()) ctx.config.data.contacts = contacts;
        if (!tests.empty()) ctx.config.data.tests = tests;
        ctx.prov = {ctx.config.hash, ctx.config.seed};
        ctx.out = ctx.config.out;
        for (auto& [sub, fn] : commands) {
            if (sub->parsed()) fn(ctx);
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace crisp
