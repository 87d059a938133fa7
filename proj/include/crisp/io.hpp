#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crisp/data.hpp"
#include "crisp/em.hpp"
#include "crisp/federated.hpp"
#include "crisp/forward_sim.hpp"
#include "crisp/gibbs.hpp"
#include "crisp/policy.hpp"

namespace crisp {

inline constexpr const char* kVersion = "0.1.0";

/// First line of every output file.
struct Provenance {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;

    std::string line() const;  // "# crisp version=... config_hash=... seed=..."
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Parses "u,v,t,x_1,..,x_J" CSV. Lines starting with '#' and blank lines are
/// skipped. A population or horizon of 0 is taken from the largest id or day.
/// Mirrors missing in the file are added. Throws DataError naming the path and
/// line on malformed rows, self contacts and duplicate (u, v, t) rows.
ContactLog load_contacts(const std::string& path, int population = 0, int horizon = 0);
ContactLog parse_contacts(std::istream& in, const std::string& name, int population = 0, int horizon = 0);

/// Parses "u,t,o" CSV; repeated tests are all kept. A horizon of 0 skips the
/// day range check.
TestLog load_tests(const std::string& path, int population = 0, int horizon = 0);
TestLog parse_tests(std::istream& in, const std::string& name, int population = 0, int horizon = 0);

/// Each undirected contact once (u < v), sorted by (t, u, v).
void write_contacts(std::ostream& out, const ContactLog& log, const Provenance* prov = nullptr);
void write_tests(std::ostream& out, const TestLog& log, const Provenance* prov = nullptr);

/// day,sample_id,S,E,I,R
void write_timeseries(std::ostream& out, const ScenarioResult& result, const Provenance& prov);
/// individual,day,P_S,P_E,P_I,P_R for days first_day..last_day.
void write_risk(std::ostream& out, const StateMarginals& marginals, int first_day, int last_day,
                const Provenance& prov);
/// iteration,p0,p_1..p_J,objective,change
void write_em_history(std::ostream& out, const EMResult& result, const Provenance& prov);
/// round,messages,bytes
void write_federated_rounds(std::ostream& out, const FederatedRun& run, const Provenance& prov);
/// policy,rho,tau_ei,tau_sr,seed,infected_pct,quarantine_days
void write_policy_runs(std::ostream& out, std::span<const GridResult> grid, const Provenance& prov);
/// policy,rho,tau_ei,tau_sr,runs,infected_mean,infected_sd,quarantine_mean,quarantine_sd
void write_policy_summary(std::ostream& out, std::span<const GridResult> grid, const Provenance& prov);
/// policy,rho,tau_ei,tau_sr,seed,day,S,E,I,R (quarantined individuals by true state)
void write_quarantine_composition(std::ostream& out, std::span<const GridResult> grid, const Provenance& prov);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

}  // namespace crisp
