#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "crisp/contact_gen.hpp"
#include "crisp/em.hpp"
#include "crisp/federated.hpp"
#include "crisp/gibbs.hpp"
#include "crisp/model.hpp"
#include "crisp/policy.hpp"

namespace crisp {

/// Invalid or unreadable configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataConfig {
    std::string contacts;  // CSV path
    std::string tests;     // CSV path, optional
    int population = 0;    // 0: largest id + 1
    int horizon = 0;       // 0: last contact day
};

struct SimulateConfig {
    int num_samples = 10;
    std::map<int, double> p0;  // per-individual exogenous probability, e.g. a patient zero
};

struct InferConfig {
    int first_day = 1;
    int last_day = 0;  // 0: horizon
};

struct FederatedConfig {
    int rounds = 100;
    Schedule schedule;
    SamplerRoute route = SamplerRoute::automatic;
};

struct PolicyEvalConfig {
    PolicyParams base;
    std::vector<PolicyParams> points;  // empty: the standard grid
    int num_seeds = 20;
    std::uint64_t first_seed = 1;
    int patient_zero = 0;
};

/// Everything a subcommand needs. Contacts generated from `contacts` use
/// contacts.seed, which defaults to `seed`.
struct RunConfig {
    std::uint64_t seed = 0;
    bool contacts_seed_set = false;
    std::string out = ".";
    ModelParams model;
    ContactPatternSpec contacts;
    DataConfig data;
    SimulateConfig simulate;
    InferConfig infer;
    GibbsConfig gibbs;
    EMConfig em;
    FederatedConfig federated;
    PolicyEvalConfig policy;
    std::uint64_t hash = 0;  // of the canonical form of the input document

    /// Applies a new global seed to every place that defaults to it.
    void set_seed(std::uint64_t s);
    HarnessConfig harness() const;
};

/// Parses JSON text (comments allowed). Unknown keys, wrong types and values
/// that break an invariant throw ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace crisp
