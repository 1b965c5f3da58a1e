#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "unlearn/model.hpp"
#include "unlearn/train.hpp"

namespace unlearn {

// Local quadratic picture of the two objectives at a weight point:
// curvatures of the full and retained losses and the Newton displacements
// d = A^-1 grad L_D(w), d_r = B^-1 grad L_Dr(w).
struct QuadraticSurrogate {
  SymMatrix full_curvature;    // A
  SymMatrix retain_curvature;  // B
  Vector full_step;            // d
  Vector retain_step;          // d_r
  Vector at_weights;
};

QuadraticSurrogate make_surrogate(const ModelSpec& spec, const Vector& w,
                                  const ForgetSplit& split,
                                  double eig_floor = 1e-8);
// For a pair of explicit quadratic objectives (full and retained).
QuadraticSurrogate make_surrogate(const ModelSpec& full_spec,
                                  const ModelSpec& retain_spec, const Vector& w,
                                  double eig_floor = 1e-8);

// Deterministic scrubbing map h(w) that transports the gradient-flow iterate
// on the full loss at time t onto the iterate of the retained loss:
//   h(w) = w + e^{-Bt} e^{At} d + e^{-Bt} (d_r - d) - d_r.
// With stabilize the divergence-prone product e^{-Bt} e^{At} is replaced by
// e^{clamp(A - B, 1/t) t}, which is exact when A and B commute and the
// spectrum of A - B stays below 1/t.
Vector quadratic_scrub(const QuadraticSurrogate& s, double t, bool stabilize);

// t -> infinity limit of the map above: the Newton update w - d_r.
Vector newton_target(const QuadraticSurrogate& s);

enum class ScrubMethod {
  Identity,
  Robust,       // time-dependent quadratic map + curvature-shaped noise
  Newton,       // Newton step on the retained loss + curvature-shaped noise
  Fisher,       // diagonal-Fisher noise, h(w) = w
  Variational,  // noise covariance optimized against the retained loss
  Finetune,
  NegGrad,
  RandomLabels,
  Hiding,
};

const char* scrub_method_name(ScrubMethod m);
ScrubMethod parse_scrub_method(const std::string& name);
bool is_noise_method(ScrubMethod m);

struct VariationalConfig {
  int steps = 500;
  int draws = 4;              // noise draws per optimizer step
  double step_size = 0.01;    // on log-stddevs
  double init_scale = 0.01;   // initial stddev = init_scale * (1 + |w_i|)
  double tail_average = 0.25; // fraction of final iterates averaged
};

struct ScrubConfig {
  ScrubMethod method = ScrubMethod::Fisher;
  double lambda = 5e-7;
  double sigma_h = 1.0;
  double exponent = -0.25;  // Fisher noise exponent: -1/4 or -1/2
  std::optional<double> t;  // flow time, Robust only
  bool stabilize = true;
  double eig_floor = 1e-8;
  std::uint64_t seed = 0;
  VariationalConfig variational;
  TrainConfig baseline_train;  // Finetune / NegGrad / RandomLabels
};

struct ScrubResult {
  WeightVector weights;  // mean_weights plus one noise draw
  Vector mean_weights;
  std::optional<Covariance> noise_cov;  // absent for noiseless methods
  std::string method;
  double lambda = 0.0;
  double sigma_h = 1.0;
  std::optional<double> t;
  double exponent = -0.25;
  std::optional<int> hidden_class;  // Hiding only
};

// `retain` indexes the retained samples inside `ds`; empty means all of ds
// is retained (used for certificate models trained without the cohort).
ScrubResult newton_scrub(const ModelSpec& spec, const Vector& w,
                         const Dataset& ds, Subset retain,
                         const ScrubConfig& cfg);
ScrubResult fisher_scrub(const ModelSpec& spec, const Vector& w,
                         const Dataset& ds, Subset retain,
                         const ScrubConfig& cfg);
ScrubResult variational_scrub(const ModelSpec& spec, const Vector& w,
                              const Dataset& ds, Subset retain,
                              const ScrubConfig& cfg);
ScrubResult robust_scrub(const ModelSpec& spec, const Vector& w,
                         const ForgetSplit& split, const ScrubConfig& cfg);
ScrubResult baseline_scrub(const ModelSpec& spec, const Vector& w,
                           const ForgetSplit& split, const ScrubConfig& cfg);

// Dispatch on cfg.method.
ScrubResult apply_scrub(const ModelSpec& spec, const Vector& w,
                        const ForgetSplit& split, const ScrubConfig& cfg);

// The certificate counterpart S0: the same method applied to a model that
// was trained on the retained data only, so its "full" objective already is
// the retained loss. Depends on D_r but never on the forgotten cohort.
ScrubResult certificate_scrub(const ModelSpec& spec, const Vector& w_retrain,
                              const ForgetSplit& split, const ScrubConfig& cfg);

// Cached-Hessian identities valid at a minimum of the full loss:
// grad_r = -grad_f and hessian_r = hessian_D - hessian_f.
struct HessianCache {
  std::variant<SymMatrix, Vector> hessian;  // full matrix or diagonal
  Vector at_weights;
};

struct RetainReconstruction {
  Vector grad_retain;
  SymMatrix hessian_retain;
};

RetainReconstruction subset_identities(const Vector& grad_forget,
                                       const HessianCache& cache,
                                       const SymMatrix& hessian_forget,
                                       double full_grad_inf_norm);

}  // namespace unlearn
