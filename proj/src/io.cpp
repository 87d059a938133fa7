#include "crisp/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace crisp {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string Provenance::line() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "# crisp version=%s config_hash=%016llx seed=%llu", kVersion,
                  static_cast<unsigned long long>(config_hash), static_cast<unsigned long long>(seed));
    return buf;
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

struct CsvReader {
    std::istream& in;
    std::string name;
    int line_no = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw DataError(name + ":" + std::to_string(line_no) + ": " + msg);
    }

    /// Next non-comment, non-blank line split on commas; false at the end.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            auto first = line.find_first_not_of(" \t");
            if (first == std::string::npos || line[first] == '#') continue;
            fields.clear();
            std::stringstream ss(line);
            std::string f;
            while (std::getline(ss, f, ',')) {
                auto b = f.find_first_not_of(" \t");
                auto e = f.find_last_not_of(" \t");
                fields.push_back(b == std::string::npos ? std::string() : f.substr(b, e - b + 1));
            }
            if (line.back() == ',') fields.emplace_back();
            return true;
        }
        return false;
    }

    int integer(const std::string& field, const char* what) const {
        int v = 0;
        auto res = std::from_chars(field.data(), field.data() + field.size(), v);
        if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
            fail(std::string("bad ") + what + " '" + field + "'");
        }
        return v;
    }
};

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

}  // namespace

ContactLog parse_contacts(std::istream& in, const std::string& name, int population, int horizon) {
    CsvReader r{in, name};
    std::vector<std::string> f;
    if (!r.next(f)) r.fail("missing header u,v,t,x_1,..");
    if (f.size() < 4 || f[0] != "u" || f[1] != "v" || f[2] != "t") r.fail("header must be u,v,t,x_1,..,x_J");
    const int channels = static_cast<int>(f.size()) - 3;
    for (int j = 0; j < channels; ++j) {
        if (f[static_cast<std::size_t>(3 + j)] != "x_" + std::to_string(j + 1)) {
            r.fail("header column " + std::to_string(4 + j) + " must be x_" + std::to_string(j + 1));
        }
    }

    std::vector<ContactRecord> records;
    std::map<std::tuple<int, int, int>, int> seen;  // (u, v, t) -> line
    int max_id = -1, max_day = 0;
    while (r.next(f)) {
        if (static_cast<int>(f.size()) != 3 + channels) {
            r.fail("expected " + std::to_string(3 + channels) + " fields, got " + std::to_string(f.size()));
        }
        ContactRecord rec;
        rec.u = r.integer(f[0], "individual");
        rec.v = r.integer(f[1], "individual");
        rec.t = r.integer(f[2], "day");
        for (int j = 0; j < channels; ++j) {
            int x = r.integer(f[static_cast<std::size_t>(3 + j)], "count");
            if (x < 0) r.fail("negative count");
            rec.x.push_back(x);
        }
        if (rec.u == rec.v) r.fail("self contact of individual " + std::to_string(rec.u));
        if (rec.u < 0 || rec.v < 0) r.fail("negative individual id");
        if (population > 0 && std::max(rec.u, rec.v) >= population) {
            r.fail("individual outside population " + std::to_string(population));
        }
        if (rec.t < 1 || (horizon > 0 && rec.t > horizon)) r.fail("day " + std::to_string(rec.t) + " outside horizon");
        auto [it, inserted] = seen.emplace(std::make_tuple(rec.u, rec.v, rec.t), r.line_no);
        if (!inserted) r.fail("duplicate contact (" + f[0] + "," + f[1] + "," + f[2] + "), first at line " +
                              std::to_string(it->second));
        max_id = std::max({max_id, rec.u, rec.v});
        max_day = std::max(max_day, rec.t);
        records.push_back(std::move(rec));
    }
    if (population <= 0) population = max_id + 1;
    if (horizon <= 0) horizon = std::max(1, max_day);
    try {
        return ContactLog::from_records(population, horizon, channels, records);
    } catch (const DataError& e) {
        throw DataError(name + ": " + e.what());
    }
}

ContactLog load_contacts(const std::string& path, int population, int horizon) {
    auto in = open_input(path);
    return parse_contacts(in, path, population, horizon);
}

TestLog parse_tests(std::istream& in, const std::string& name, int population, int horizon) {
    CsvReader r{in, name};
    std::vector<std::string> f;
    if (!r.next(f)) r.fail("missing header u,t,o");
    if (f != std::vector<std::string>{"u", "t", "o"}) r.fail("header must be u,t,o");
    std::vector<TestRecord> records;
    int max_id = -1;
    while (r.next(f)) {
        if (f.size() != 3) r.fail("expected 3 fields, got " + std::to_string(f.size()));
        TestRecord t{r.integer(f[0], "individual"), r.integer(f[1], "day"), r.integer(f[2], "outcome")};
        if (t.outcome != 0 && t.outcome != 1) r.fail("outcome " + f[2] + " is not 0 or 1");
        if (t.u < 0 || (population > 0 && t.u >= population)) r.fail("individual " + f[0] + " outside population");
        if (t.t < 1 || (horizon > 0 && t.t > horizon)) r.fail("day " + f[1] + " outside horizon");
        max_id = std::max(max_id, t.u);
        records.push_back(t);
    }
    if (population <= 0) population = max_id + 1;
    int max_day = 1;
    for (const auto& t : records) max_day = std::max(max_day, t.t);
    return TestLog::from_records(population, horizon > 0 ? horizon : max_day, records);
}

TestLog load_tests(const std::string& path, int population, int horizon) {
    auto in = open_input(path);
    return parse_tests(in, path, population, horizon);
}

void write_contacts(std::ostream& out, const ContactLog& log, const Provenance* prov) {
    if (prov) out << prov->line() << '\n';
    out << "u,v,t";
    for (int j = 1; j <= log.channels(); ++j) out << ",x_" << j;
    out << '\n';
    for (const auto& r : log.undirected_records()) {
        out << r.u << ',' << r.v << ',' << r.t;
        for (int x : r.x) out << ',' << x;
        out << '\n';
    }
}

void write_tests(std::ostream& out, const TestLog& log, const Provenance* prov) {
    if (prov) out << prov->line() << '\n';
    out << "u,t,o\n";
    for (const auto& r : log.records()) out << r.u << ',' << r.t << ',' << r.outcome << '\n';
}

void write_timeseries(std::ostream& out, const ScenarioResult& result, const Provenance& prov) {
    out << prov.line() << '\n' << "day,sample_id,S,E,I,R\n";
    for (int day = 1; day <= result.horizon; ++day) {
        for (std::size_t k = 0; k < result.counts.size(); ++k) {
            const auto& c = result.counts[k][static_cast<std::size_t>(day - 1)];
            out << day << ',' << k << ',' << c[0] << ',' << c[1] << ',' << c[2] << ',' << c[3] << '\n';
        }
    }
}

void write_risk(std::ostream& out, const StateMarginals& marginals, int first_day, int last_day,
                const Provenance& prov) {
    out << prov.line() << '\n' << "individual,day,P_S,P_E,P_I,P_R\n";
    for (int u = 0; u < marginals.population(); ++u) {
        for (int t = first_day; t <= last_day; ++t) {
            auto p = marginals.probs(u, t);
            out << u << ',' << t;
            for (double x : p) out << ',' << format_double(x);
            out << '\n';
        }
    }
}

void write_em_history(std::ostream& out, const EMResult& result, const Provenance& prov) {
    out << prov.line() << '\n' << "iteration,p0";
    int channels = result.params.channels();
    for (int j = 1; j <= channels; ++j) out << ",p_" << j;
    out << ",objective,change\n";
    for (const auto& it : result.history) {
        out << it.iteration << ',' << format_double(it.params.p0);
        for (double p : it.params.p) out << ',' << format_double(p);
        out << ',' << format_double(it.objective) << ',' << format_double(it.change) << '\n';
    }
}

void write_federated_rounds(std::ostream& out, const FederatedRun& run, const Provenance& prov) {
    out << prov.line() << '\n' << "round,messages,bytes\n";
    for (const auto& r : run.rounds) out << r.round << ',' << r.messages << ',' << r.bytes << '\n';
}

namespace {

void policy_columns(std::ostream& out, const PolicyParams& p) {
    out << to_string(p.kind) << ',';
    bool ct = p.kind == PolicyKind::symptom || p.kind == PolicyKind::contact_tracing;
    bool cr = p.kind == PolicyKind::crisp;
    if (ct) out << p.rho;
    out << ',';
    if (cr) out << format_double(p.tau_ei);
    out << ',';
    if (cr) out << format_double(p.tau_sr);
}

}  // namespace

void write_policy_runs(std::ostream& out, std::span<const GridResult> grid, const Provenance& prov) {
    out << prov.line() << '\n' << "policy,rho,tau_ei,tau_sr,seed,infected_pct,quarantine_days\n";
    for (const auto& g : grid) {
        for (std::size_t s = 0; s < g.runs.size(); ++s) {
            policy_columns(out, g.params);
            out << ',' << g.seeds[s] << ',' << format_double(g.runs[s].infected_pct) << ','
                << g.runs[s].quarantine_days << '\n';
        }
    }
}

void write_policy_summary(std::ostream& out, std::span<const GridResult> grid, const Provenance& prov) {
    out << prov.line() << '\n'
        << "policy,rho,tau_ei,tau_sr,runs,infected_mean,infected_sd,quarantine_mean,quarantine_sd\n";
    for (const auto& g : grid) {
        policy_columns(out, g.params);
        out << ',' << g.runs.size() << ',' << format_double(g.infected_mean) << ',' << format_double(g.infected_sd)
            << ',' << format_double(g.quarantine_mean) << ',' << format_double(g.quarantine_sd) << '\n';
    }
}

void write_quarantine_composition(std::ostream& out, std::span<const GridResult> grid, const Provenance& prov) {
    out << prov.line() << '\n' << "policy,rho,tau_ei,tau_sr,seed,day,S,E,I,R\n";
    for (const auto& g : grid) {
        for (std::size_t s = 0; s < g.runs.size(); ++s) {
            const auto& q = g.runs[s].quarantined_by_state;
            for (std::size_t d = 0; d < q.size(); ++d) {
                policy_columns(out, g.params);
                out << ',' << g.seeds[s] << ',' << d + 1;
                for (int c : q[d]) out << ',' << c;
                out << '\n';
            }
        }
    }
}

}  // namespace crisp
