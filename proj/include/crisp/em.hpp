#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "crisp/data.hpp"
#include "crisp/gibbs.hpp"
#include "crisp/model.hpp"

namespace crisp {

double logistic(double w);
double logit(double p);
/// log(1 + e^w) without overflow.
double softplus(double w);

/// (w_0, w_1..w_J) with p_j = logistic(w_j); w_0 drives p0.
std::vector<double> weights_of(const ModelParams& params);
ModelParams with_weights(const ModelParams& params, std::span<const double> w);

struct EMConfig {
    int max_iterations = 50;
    int num_samples = 20;  // Gibbs samples per E-step
    int burn_in = 10;
    double step_size = 0.05;
    int inner_steps = 200;
    std::size_t minibatch = 0;  // individuals per SGD step; 0 picks full batch below 1e6 contacts
    double tolerance = 1e-4;    // on the Euclidean change of (p0, p_1..p_J)
    bool freeze_p0 = false;
    bool warm_start = true;  // E-step chains continue from the previous iteration's last sample
    std::uint64_t seed = 0;

    void validate() const;
};

/// The M-step objective over a fixed set of samples, reduced to per-individual
/// sufficient statistics: for every susceptible day t < t0 and the infection
/// day t0, the per-channel counts of contacts with infectious partners.
class MStepProblem {
public:
    MStepProblem(const ContactLog& contacts, std::span<const std::vector<InfectionTrace>> samples, int horizon);

    int population() const { return static_cast<int>(start_.size()) - 1; }
    int num_samples() const { return num_samples_; }
    int channels() const { return channels_; }

    /// Objective summed over the given individuals (all when empty).
    double objective(std::span<const double> w, std::span<const int> individuals = {}) const;
    /// Objective and its gradient in w, summed over the given individuals.
    double gradient(std::span<const double> w, std::span<double> grad, std::span<const int> individuals = {}) const;

private:
    struct Term {
        std::size_t counts;  // offset into counts_
        bool infected;       // log(1 - f) rather than log f
        double weight;       // multiplicity over days and samples
    };
    template <class Fn>
    void for_terms(std::span<const int> individuals, Fn&& fn) const;

    int channels_;
    int num_samples_;
    std::vector<std::size_t> start_;  // terms of u are terms_[start_[u]..start_[u+1])
    std::vector<Term> terms_;
    std::vector<int> counts_;
};

double mstep_objective(std::span<const std::vector<InfectionTrace>> samples, const ContactLog& contacts,
                       std::span<const double> w, int horizon);

struct EMIteration {
    int iteration = 0;
    ModelParams params;
    double objective = 0.0;  // per sample, at the new parameters
    double change = 0.0;
};

struct EMResult {
    ModelParams params;
    std::vector<EMIteration> history;
    bool converged = false;
};

/// Gradient ascent on the per-sample M-step objective starting from w. A step
/// that lowers the objective on its batch is retried with half the step size.
std::vector<double> mstep_ascent(const MStepProblem& problem, std::vector<double> w, const EMConfig& config,
                                 Rng& rng);

/// Monte Carlo EM from `initial`; the horizon is the contact log's horizon.
EMResult em_fit(const ContactLog& contacts, const TestLog& tests, const ModelParams& initial,
                const EMConfig& config, const std::function<void(const EMIteration&)>& on_iteration = {});

}  // namespace crisp
