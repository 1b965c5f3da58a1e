#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unlearn/scrub.hpp"

namespace unlearn {

struct InfoBoundReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed_nats;  // one KL per training seed
  double mean_nats = 0.0;
  std::string method;
  double lambda = 0.0;
  double sigma_h = 1.0;
};

// Seed-averaged information bound: for every seed, train on the full data
// and on the retained data with shared initialization and sampling order,
// scrub both with the same method, and take the closed-form KL divergence
// between the two induced weight Gaussians. Noise methods only.
InfoBoundReport local_bound(const ModelSpec& spec, const ForgetSplit& split,
                            const TrainConfig& train_cfg,
                            const ScrubConfig& scrub_cfg,
                            const std::vector<std::uint64_t>& seeds,
                            int workers = 1);

// Weight samples from repeated seeded trainings on D and on D_r.
struct WeightPopulations {
  std::vector<Vector> full;
  std::vector<Vector> retain;
  std::vector<std::uint64_t> seeds;
};

WeightPopulations train_populations(const ModelSpec& spec,
                                    const ForgetSplit& split,
                                    const TrainConfig& train_cfg, int n_seeds,
                                    int workers = 1);

// The two comparison populations of the scrubbing experiment: every full-data
// model scrubbed, every retained-data model with the method's noise added
// around its own weights (no mean shift; the certificate never sees the
// forgotten cohort).
struct ScrubbedPopulations {
  std::vector<Vector> scrubbed;
  std::vector<Vector> certified;
};

ScrubbedPopulations scrub_populations(const ModelSpec& spec,
                                      const ForgetSplit& split,
                                      const WeightPopulations& pops,
                                      const ScrubConfig& scrub_cfg,
                                      int workers = 1);

// Full-covariance Gaussian fit with trace-scaled shrinkage
// (cov + shrink * trace / p * I). Needs at least two samples.
GaussianParams fit_gaussian(const std::vector<Vector>& sample,
                            double shrink = 1e-4);

struct EmpiricalKl {
  double before;  // KL between raw weight populations
  double after;   // KL between scrubbed and certified populations
};

// Population estimate of the weight-space divergence before and after
// scrubbing. Requires n_seeds >= 20 and parameter count <= 64.
EmpiricalKl empirical_weight_kl(const ModelSpec& spec, const ForgetSplit& split,
                                const TrainConfig& train_cfg,
                                const ScrubConfig& scrub_cfg, int n_seeds,
                                int workers = 1);

// Retained-loss-versus-forgetting objective: the expected retained loss
// under the recorded scrub noise plus lambda times a supplied KL value.
double forgetting_lagrangian(const ModelSpec& spec, const Dataset& ds,
                             Subset retain, const ScrubResult& scrub,
                             double lambda, double kl_term, int n_noise_draws,
                             std::uint64_t seed = 0);

// Closed-form optimal noise covariance sqrt(lambda sigma_h^2) B^{-1/2};
// verifies the stationarity condition Sigma B Sigma = lambda sigma_h^2 I.
SymMatrix optimal_noise_check(const SymMatrix& b, double sigma_h,
                              double lambda);

struct EntropyHistogram {
  Vector edges;  // 31 edges spanning [0, log K]
  std::vector<int> retain;
  std::vector<int> forget;
  std::vector<int> test;
};

struct ReadoutReport {
  double err_test_pct = 0.0;
  double err_forget_pct = 0.0;
  double err_retain_pct = 0.0;
  std::optional<int> relearn_epochs;  // empty = not reached
  EntropyHistogram entropy;
  std::optional<InfoBoundReport> info_bound;
};

ReadoutReport readout(const ModelSpec& spec, const ScrubResult& scrub,
                      const ForgetSplit& split, const Dataset& test_ds,
                      const RelearnConfig& relearn_cfg,
                      std::optional<InfoBoundReport> info_bound = std::nullopt);

}  // namespace unlearn
