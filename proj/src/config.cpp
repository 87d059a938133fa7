#include "crisp/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "crisp/io.hpp"
#include "json.hpp"

namespace crisp {

namespace {

using nlohmann::json;

/// Typed access to one JSON object that remembers its path for messages.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    /// Rejects keys outside `allowed`.
    void only(std::initializer_list<const char*> allowed) const {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [k, v] : j_.items()) {
            if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where());
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& raw(const char* key) const { return j_.at(key); }
    Section sub(const char* key) const { return Section(j_.at(key), child(key)); }

    template <class T>
    void get(const char* key, T& out) const {
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ConfigError("");
                if constexpr (std::is_unsigned_v<T>) {
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
                        throw ConfigError("");
                    }
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ConfigError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError("");
            }
            out = v.get<T>();
        } catch (const std::exception&) {
            throw ConfigError("bad value for " + child(key) + ": " + v.dump());
        }
    }

    std::vector<double> doubles(const char* key) const {
        const json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(child(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(child(key) + " must be an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::string where() const { return path_.empty() ? "the top level" : "'" + path_ + "'"; }
    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
};

DurationDistribution duration_of(const Section& s, const char* key, DurationDistribution fallback) {
    if (!s.has(key)) return fallback;
    const json& v = s.raw(key);
    if (v.is_string() && v.get<std::string>() == "default") return fallback;
    try {
        if (v.is_array()) return DurationDistribution(s.doubles(key));
        Section d(v, s.child(key));
        d.only({"geometric_rate", "max_days", "mean", "shape"});
        if (d.has("geometric_rate")) {
            double rate = 0.0;
            int max_days = 0;
            d.get("geometric_rate", rate);
            d.get("max_days", max_days);
            return DurationDistribution::geometric(rate, max_days);
        }
        double mean = 0.0, shape = 0.0;
        d.get("mean", mean);
        d.get("shape", shape);
        return DurationDistribution::shifted_negative_binomial(mean, shape);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(s.child(key) + ": " + e.what());
    }
}

SamplerRoute route_of(const std::string& name, const std::string& where) {
    if (name == "automatic") return SamplerRoute::automatic;
    if (name == "enumerate") return SamplerRoute::enumerate;
    if (name == "factored") return SamplerRoute::factored;
    throw ConfigError(where + ": unknown route '" + name + "'");
}

void read_policy(const Section& s, PolicyParams& p) {
    s.only({"kind", "rho", "tau_ei", "tau_sr", "budget", "start_day", "lookback", "num_samples", "burn_in",
            "p0_scale", "warm_start", "points", "num_seeds", "first_seed", "patient_zero"});
    if (s.has("kind")) {
        std::string k;
        s.get("kind", k);
        try {
            p.kind = policy_kind_from_string(k);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(s.child("kind") + ": " + e.what());
        }
    }
    s.get("rho", p.rho);
    s.get("tau_ei", p.tau_ei);
    s.get("tau_sr", p.tau_sr);
    s.get("budget", p.budget);
    s.get("start_day", p.start_day);
    s.get("lookback", p.lookback);
    s.get("num_samples", p.num_samples);
    s.get("burn_in", p.burn_in);
    s.get("p0_scale", p.p0_scale);
    s.get("warm_start", p.warm_start);
}

template <class Fn>
void checked(const std::string& where, Fn&& fn) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
    seed = s;
    if (!contacts_seed_set) contacts.seed = s;
    gibbs.seed = s;
    em.seed = s;
}

HarnessConfig RunConfig::harness() const {
    HarnessConfig h;
    h.population = contacts.population;
    h.horizon = contacts.horizon;
    h.patient_zero = policy.patient_zero;
    h.truth = model;
    h.contacts = contacts;
    h.seed = seed;
    return h;
}

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    Section top(doc, "");
    top.only({"seed", "out", "model", "contacts", "data", "simulate", "infer", "gibbs", "em", "federated", "policy"});
    top.get("seed", c.seed);
    top.get("out", c.out);

    if (top.has("model")) {
        auto s = top.sub("model");
        s.only({"p0", "p", "alpha", "beta", "qE", "qI"});
        s.get("p0", c.model.p0);
        if (s.has("p")) c.model.p = s.doubles("p");
        s.get("alpha", c.model.alpha);
        s.get("beta", c.model.beta);
        c.model.qE = duration_of(s, "qE", c.model.qE);
        c.model.qI = duration_of(s, "qI", c.model.qI);
    }
    checked("model", [&] { c.model.validate(); });

    {
        auto& k = c.contacts;
        k.channels = c.model.channels();
        k.mean_infectious_days = c.model.qI.mean();
        double r0 = 2.5;
        bool phases = false;
        if (top.has("contacts")) {
            auto s = top.sub("contacts");
            s.only({"population", "horizon", "bubble_size", "channel", "channels", "p_channel",
                    "mean_infectious_days", "seed", "r0", "phases"});
            s.get("population", k.population);
            s.get("horizon", k.horizon);
            s.get("bubble_size", k.bubble_size);
            s.get("channel", k.channel);
            s.get("channels", k.channels);
            s.get("p_channel", k.p_channel);
            s.get("mean_infectious_days", k.mean_infectious_days);
            c.contacts_seed_set = s.has("seed");
            s.get("seed", k.seed);
            s.get("r0", r0);
            if (s.has("phases")) {
                phases = true;
                const json& arr = s.raw("phases");
                if (!arr.is_array()) throw ConfigError("contacts.phases must be an array");
                for (std::size_t i = 0; i < arr.size(); ++i) {
                    Section ps(arr[i], "contacts.phases[" + std::to_string(i) + "]");
                    ps.only({"first_day", "last_day", "kind", "r0", "intra_r0", "inter_r0"});
                    ContactPhase ph;
                    ps.get("first_day", ph.first_day);
                    ps.get("last_day", ph.last_day);
                    std::string kind = "uniform";
                    ps.get("kind", kind);
                    if (kind == "uniform") {
                        ph.kind = PatternKind::uniform;
                    } else if (kind == "bubbles") {
                        ph.kind = PatternKind::bubbles;
                    } else {
                        throw ConfigError(ps.child("kind") + ": unknown pattern '" + kind + "'");
                    }
                    ps.get("r0", ph.r0);
                    ps.get("intra_r0", ph.intra_r0);
                    ps.get("inter_r0", ph.inter_r0);
                    k.phases.push_back(ph);
                }
            }
        }
        if (!top.has("contacts") || !top.sub("contacts").has("p_channel")) {
            if (k.channel < 0 || k.channel >= c.model.channels()) throw ConfigError("contacts.channel out of range");
            k.p_channel = c.model.p[static_cast<std::size_t>(k.channel)];
        }
        if (!phases) {
            ContactPhase ph;
            ph.first_day = 1;
            ph.last_day = k.horizon;
            ph.r0 = r0;
            k.phases = {ph};
        }
        if (!c.contacts_seed_set) k.seed = c.seed;
        checked("contacts", [&] { k.validate(); });
    }

    if (top.has("data")) {
        auto s = top.sub("data");
        s.only({"contacts", "tests", "population", "horizon"});
        s.get("contacts", c.data.contacts);
        s.get("tests", c.data.tests);
        s.get("population", c.data.population);
        s.get("horizon", c.data.horizon);
    }

    if (top.has("simulate")) {
        auto s = top.sub("simulate");
        s.only({"num_samples", "p0"});
        s.get("num_samples", c.simulate.num_samples);
        if (s.has("p0")) {
            if (!s.raw("p0").is_object()) throw ConfigError("simulate.p0 must be an object of id: probability");
            for (const auto& [key, v] : s.raw("p0").items()) {
                int id = 0;
                try {
                    std::size_t used = 0;
                    id = std::stoi(key, &used);
                    if (used != key.size() || id < 0) throw std::invalid_argument(key);
                } catch (const std::exception&) {
                    throw ConfigError("simulate.p0 keys must be individual ids, got '" + key + "'");
                }
                if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0) {
                    throw ConfigError("simulate.p0." + key + " must be a probability");
                }
                c.simulate.p0[id] = v.get<double>();
            }
        }
        if (c.simulate.num_samples < 1) throw ConfigError("simulate.num_samples must be >= 1");
    }

    if (top.has("infer")) {
        auto s = top.sub("infer");
        s.only({"first_day", "last_day"});
        s.get("first_day", c.infer.first_day);
        s.get("last_day", c.infer.last_day);
        if (c.infer.first_day < 1 || (c.infer.last_day != 0 && c.infer.last_day < c.infer.first_day)) {
            throw ConfigError("infer: bad day range");
        }
    }

    if (top.has("gibbs")) {
        auto s = top.sub("gibbs");
        s.only({"num_samples", "burn_in", "thinning", "order", "route"});
        s.get("num_samples", c.gibbs.num_samples);
        s.get("burn_in", c.gibbs.burn_in);
        s.get("thinning", c.gibbs.thinning);
        if (s.has("order")) {
            std::string o;
            s.get("order", o);
            if (o == "permutation") {
                c.gibbs.order = SweepOrder::permutation;
            } else if (o == "uniform_picks") {
                c.gibbs.order = SweepOrder::uniform_picks;
            } else {
                throw ConfigError("gibbs.order: unknown order '" + o + "'");
            }
        }
        if (s.has("route")) {
            std::string r;
            s.get("route", r);
            c.gibbs.route = route_of(r, "gibbs.route");
        }
    }
    c.gibbs.seed = c.seed;
    checked("gibbs", [&] { c.gibbs.validate(); });

    if (top.has("em")) {
        auto s = top.sub("em");
        s.only({"max_iterations", "num_samples", "burn_in", "step_size", "inner_steps", "minibatch", "tolerance",
                "freeze_p0", "warm_start"});
        s.get("max_iterations", c.em.max_iterations);
        s.get("num_samples", c.em.num_samples);
        s.get("burn_in", c.em.burn_in);
        s.get("step_size", c.em.step_size);
        s.get("inner_steps", c.em.inner_steps);
        s.get("minibatch", c.em.minibatch);
        s.get("tolerance", c.em.tolerance);
        s.get("freeze_p0", c.em.freeze_p0);
        s.get("warm_start", c.em.warm_start);
    }
    c.em.seed = c.seed;
    checked("em", [&] { c.em.validate(); });

    if (top.has("federated")) {
        auto s = top.sub("federated");
        s.only({"rounds", "schedule", "replay", "default_delay", "edge_delays", "route"});
        s.get("rounds", c.federated.rounds);
        auto& sch = c.federated.schedule;
        if (s.has("schedule")) {
            std::string k;
            s.get("schedule", k);
            if (k == "round_robin") {
                sch.kind = ScheduleKind::round_robin;
            } else if (k == "random") {
                sch.kind = ScheduleKind::random;
            } else if (k == "replay") {
                sch.kind = ScheduleKind::replay;
            } else {
                throw ConfigError("federated.schedule: unknown schedule '" + k + "'");
            }
        }
        if (s.has("replay")) {
            const json& r = s.raw("replay");
            if (!r.is_array()) throw ConfigError("federated.replay must be an array of ids");
            for (const auto& x : r) {
                if (!x.is_number_integer()) throw ConfigError("federated.replay must be an array of ids");
                sch.replay.push_back(x.get<int>());
            }
        }
        s.get("default_delay", sch.default_delay);
        if (s.has("edge_delays")) {
            const json& r = s.raw("edge_delays");
            if (!r.is_array()) throw ConfigError("federated.edge_delays must be an array of [sender, receiver, rounds]");
            for (const auto& e : r) {
                if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer() ||
                    !e[2].is_number_integer() || e[2].get<int>() < 0) {
                    throw ConfigError("federated.edge_delays entries must be [sender, receiver, rounds]");
                }
                sch.edge_delay[{e[0].get<int>(), e[1].get<int>()}] = e[2].get<int>();
            }
        }
        if (s.has("route")) {
            std::string r;
            s.get("route", r);
            c.federated.route = route_of(r, "federated.route");
        }
        if (c.federated.rounds < 0 || sch.default_delay < 0) throw ConfigError("federated: negative rounds or delay");
        if (sch.kind == ScheduleKind::replay && sch.replay.empty()) {
            throw ConfigError("federated: replay schedule needs a replay list");
        }
    }

    if (top.has("policy")) {
        auto s = top.sub("policy");
        read_policy(s, c.policy.base);
        s.get("num_seeds", c.policy.num_seeds);
        s.get("first_seed", c.policy.first_seed);
        s.get("patient_zero", c.policy.patient_zero);
        if (s.has("points")) {
            const json& arr = s.raw("points");
            if (!arr.is_array()) throw ConfigError("policy.points must be an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Section ps(arr[i], "policy.points[" + std::to_string(i) + "]");
                PolicyParams p = c.policy.base;
                read_policy(ps, p);
                for (const char* k : {"points", "num_seeds", "first_seed", "patient_zero"}) {
                    if (ps.has(k)) throw ConfigError("unknown key '" + std::string(k) + "' in " + ps.where());
                }
                c.policy.points.push_back(p);
            }
        }
        if (c.policy.num_seeds < 1) throw ConfigError("policy.num_seeds must be >= 1");
    }
    checked("policy", [&] {
        c.policy.base.validate();
        for (const auto& p : c.policy.points) p.validate();
    });

    c.hash = fnv1a64(doc.dump());
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig c;
    try {
        c = parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    // data files are relative to the config file
    auto base = std::filesystem::path(path).parent_path();
    for (auto* f : {&c.data.contacts, &c.data.tests}) {
        if (!f->empty() && std::filesystem::path(*f).is_relative()) *f = (base / *f).lexically_normal().string();
    }
    return c;
}

}  // namespace crisp
