#pragma once

// Brute-force reference computations for small instances. Everything here is
// evaluated from full state sequences, without the trace-score shortcuts.

#include <array>
#include <vector>

#include "crisp/data.hpp"
#include "crisp/model.hpp"

namespace oracle {

using crisp::ContactRecord;
using crisp::InfectionState;
using crisp::InfectionTrace;
using crisp::ModelParams;
using crisp::TestRecord;

using Sequence = std::vector<InfectionState>;  // index t-1

Sequence expand(const InfectionTrace& z, int horizon);

struct Instance {
    int population = 0;
    int horizon = 0;
    ModelParams params;
    std::vector<ContactRecord> contacts;  // both directions present
    std::vector<TestRecord> tests;
};

/// log P(Z, O) from the transition table, f and the test model. Each day's
/// duration counters are recounted from the sequence itself.
double joint_log_prob(const Instance& inst, const std::vector<Sequence>& seqs);

/// Per individual, per day (index t-1) state probabilities of the exact
/// posterior, by enumeration of all canonical trace combinations.
std::vector<std::vector<std::array<double, 4>>> exact_marginals(const Instance& inst);

/// Exact conditional of u's trace given the others, over admissible_traces order.
std::vector<double> exact_conditional(const Instance& inst, int u, const std::vector<InfectionTrace>& traces);

/// A random small instance: pairwise contacts with probability `contact_prob`
/// per day, one channel, short durations and 0..max_tests random tests.
template <class Rng>
Instance random_instance(Rng& rng, int population, int horizon, double contact_prob, int max_tests);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace oracle

#include "oracle_impl.hpp"
