#include "unlearn/scrub.hpp"

#include <cmath>

#include "unlearn/rng.hpp"

namespace unlearn {

namespace {

// Solve M x = b through the eigendecomposition, rejecting eigenvalues below
// the floor instead of regularizing them: the quadratic transport formulas
// are exact and silently flooring would silently break them.
Vector spd_solve(const SymMatrix& m, const Vector& b, double floor,
                 const char* name) {
  const EigenPair eig = sym_eig(m);
  if (eig.values.minCoeff() < floor) {
    raise(Errc::SingularMatrix,
          std::string(name) + " has eigenvalue " +
              std::to_string(eig.values.minCoeff()) + " below floor " +
              std::to_string(floor));
  }
  return eig.vectors *
         (eig.vectors.transpose() * b).cwiseQuotient(eig.values);
}

static const Dataset kNoData{};

ScrubResult base_result(const ModelSpec& spec, Vector mean,
                        const ScrubConfig& cfg) {
  ScrubResult r;
  r.mean_weights = std::move(mean);
  r.weights = make_weights(spec, r.mean_weights);
  r.method = scrub_method_name(cfg.method);
  r.lambda = cfg.lambda;
  r.sigma_h = cfg.sigma_h;
  r.t = cfg.t;
  r.exponent = cfg.exponent;
  return r;
}

// Adds one draw of N(0, cov) to the mean; records the covariance.
void attach_noise(ScrubResult& r, Covariance cov, std::uint64_t seed) {
  Rng rng(seed);
  Vector noise = sample_gaussian(cov, rng);
  r.noise_cov = std::move(cov);
  r.weights.values = r.mean_weights + noise;
}

// Newton mean + sqrt(lambda sigma_h^2) B^{-1/2} noise around an arbitrary
// mean point, shared by the Newton and Robust methods.
ScrubResult curvature_noise_result(const ModelSpec& spec, Vector mean,
                                   const SymMatrix& retain_curvature,
                                   const ScrubConfig& cfg) {
  ScrubResult r = base_result(spec, std::move(mean), cfg);
  if (cfg.lambda > 0.0) {
    const double amplitude = std::sqrt(cfg.lambda * cfg.sigma_h * cfg.sigma_h);
    const SymMatrix half =
        inv_frac_power(retain_curvature, -0.5, cfg.eig_floor);
    attach_noise(r, FullCov{SymMatrix(amplitude * half.mat())}, cfg.seed);
  }
  return r;
}

void check_scrub_config(const ScrubConfig& cfg) {
  if (cfg.lambda < 0.0) raise(Errc::InvalidConfig, "lambda must be >= 0");
  if (!(cfg.sigma_h > 0.0)) raise(Errc::InvalidConfig, "sigma_h must be > 0");
  if (!(cfg.eig_floor > 0.0)) raise(Errc::InvalidFloor, "eig_floor must be > 0");
}

}  // namespace

const char* scrub_method_name(ScrubMethod m) {
  switch (m) {
    case ScrubMethod::Identity: return "identity";
    case ScrubMethod::Robust: return "robust";
    case ScrubMethod::Newton: return "newton";
    case ScrubMethod::Fisher: return "fisher";
    case ScrubMethod::Variational: return "variational";
    case ScrubMethod::Finetune: return "finetune";
    case ScrubMethod::NegGrad: return "neg_grad";
    case ScrubMethod::RandomLabels: return "random_labels";
    case ScrubMethod::Hiding: return "hiding";
  }
  return "unknown";
}

ScrubMethod parse_scrub_method(const std::string& name) {
  for (ScrubMethod m :
       {ScrubMethod::Identity, ScrubMethod::Robust, ScrubMethod::Newton,
        ScrubMethod::Fisher, ScrubMethod::Variational, ScrubMethod::Finetune,
        ScrubMethod::NegGrad, ScrubMethod::RandomLabels, ScrubMethod::Hiding}) {
    if (name == scrub_method_name(m)) return m;
  }
  raise(Errc::InvalidConfig, "unknown scrub method '" + name + "'");
}

bool is_noise_method(ScrubMethod m) {
  return m == ScrubMethod::Robust || m == ScrubMethod::Newton ||
         m == ScrubMethod::Fisher || m == ScrubMethod::Variational;
}

QuadraticSurrogate make_surrogate(const ModelSpec& spec, const Vector& w,
                                  const ForgetSplit& split, double eig_floor) {
  QuadraticSurrogate s;
  s.full_curvature = hessian(spec, w, split.dataset);
  s.retain_curvature =
      hessian(spec, w, split.dataset, split.retain_indices, DecayTerm::Include);
  const Vector g_full = grad(spec, w, split.dataset);
  const Vector g_retain =
      grad(spec, w, split.dataset, split.retain_indices, DecayTerm::Include);
  s.full_step = spd_solve(s.full_curvature, g_full, eig_floor,
                          "full-loss curvature");
  s.retain_step = spd_solve(s.retain_curvature, g_retain, eig_floor,
                            "retained-loss curvature");
  s.at_weights = w;
  return s;
}

QuadraticSurrogate make_surrogate(const ModelSpec& full_spec,
                                  const ModelSpec& retain_spec,
                                  const Vector& w, double eig_floor) {
  QuadraticSurrogate s;
  s.full_curvature = hessian(full_spec, w, kNoData);
  s.retain_curvature = hessian(retain_spec, w, kNoData);
  s.full_step = spd_solve(s.full_curvature, grad(full_spec, w, kNoData),
                          eig_floor, "full-loss curvature");
  s.retain_step = spd_solve(s.retain_curvature, grad(retain_spec, w, kNoData),
                            eig_floor, "retained-loss curvature");
  s.at_weights = w;
  return s;
}

Vector quadratic_scrub(const QuadraticSurrogate& s, double t, bool stabilize) {
  if (!(t > 0.0)) raise(Errc::InvalidSpec, "scrub time must be > 0");
  const SymMatrix exp_minus_bt = mat_exp(s.retain_curvature, -t);
  Vector transported;
  if (stabilize) {
    const SymMatrix gap = SymMatrix(s.full_curvature.mat() -
                                    s.retain_curvature.mat());
    transported = mat_exp(clamp_eigs(gap, 1.0 / t), t).mat() * s.full_step;
  } else {
    // Applied right to left so only matrix-vector magnitudes appear.
    transported = exp_minus_bt.mat() *
                  (mat_exp(s.full_curvature, t).mat() * s.full_step);
  }
  return s.at_weights + transported +
         exp_minus_bt.mat() * (s.retain_step - s.full_step) - s.retain_step;
}

Vector newton_target(const QuadraticSurrogate& s) {
  return s.at_weights - s.retain_step;
}

ScrubResult newton_scrub(const ModelSpec& spec, const Vector& w,
                         const Dataset& ds, Subset retain,
                         const ScrubConfig& cfg) {
  check_scrub_config(cfg);
  if (std::holds_alternative<MlpModel>(spec.kind)) {
    raise(Errc::UnsupportedModel, "no exact Hessian for MLP models");
  }
  const SymMatrix b = hessian(spec, w, ds, retain, DecayTerm::Include);
  const Vector g = grad(spec, w, ds, retain, DecayTerm::Include);
  Vector mean = w - spd_solve(b, g, cfg.eig_floor, "retained-loss curvature");
  return curvature_noise_result(spec, std::move(mean), b, cfg);
}

ScrubResult fisher_scrub(const ModelSpec& spec, const Vector& w,
                         const Dataset& ds, Subset retain,
                         const ScrubConfig& cfg) {
  check_scrub_config(cfg);
  if (!is_classifier(spec)) {
    raise(Errc::UnsupportedModel, "Fisher scrubbing needs a classifier");
  }
  if (cfg.exponent != -0.25 && cfg.exponent != -0.5) {
    raise(Errc::InvalidConfig, "fisher exponent must be -1/4 or -1/2");
  }
  ScrubResult r = base_result(spec, w, cfg);
  if (cfg.lambda == 0.0) return r;

  const FisherEstimate est = fim(spec, w, ds, FisherForm::Diagonal, retain);
  const Vector& diag = std::get<Vector>(est.value);
  const double amplitude =
      std::pow(cfg.lambda * cfg.sigma_h * cfg.sigma_h, 0.25);
  Vector variances(diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    const double stddev =
        amplitude * std::pow(std::max(diag[i], cfg.eig_floor), cfg.exponent);
    variances[i] = stddev * stddev;
  }
  attach_noise(r, DiagonalCov{std::move(variances)}, cfg.seed);
  return r;
}

ScrubResult variational_scrub(const ModelSpec& spec, const Vector& w,
                              const Dataset& ds, Subset retain,
                              const ScrubConfig& cfg) {
  check_scrub_config(cfg);
  if (!(cfg.lambda > 0.0)) {
    raise(Errc::InvalidConfig, "variational scrubbing needs lambda > 0");
  }
  const auto& vc = cfg.variational;
  if (vc.steps < 1 || vc.draws < 1 || !(vc.step_size > 0.0) ||
      !(vc.init_scale > 0.0) || vc.tail_average < 0.0 ||
      vc.tail_average > 1.0) {
    raise(Errc::InvalidConfig, "bad variational optimizer configuration");
  }

  const Eigen::Index p = w.size();
  Rng rng(cfg.seed);
  Vector rho(p);  // log standard deviations
  for (Eigen::Index i = 0; i < p; ++i) {
    rho[i] = std::log(vc.init_scale * (1.0 + std::abs(w[i])));
  }

  // Objective: E_n[L_Dr(w + n)] - lambda log|Sigma| with Sigma = diag(e^2rho).
  // Reparametrized gradient wrt rho_i: E[dL/dw_i * eps_i] * sigma_i - 2 lambda.
  const int tail_start =
      vc.steps - std::max(1, static_cast<int>(vc.steps * vc.tail_average));
  Vector rho_tail_sum = Vector::Zero(p);
  int tail_count = 0;
  Vector eps(p), g_rho(p);
  for (int step = 0; step < vc.steps; ++step) {
    g_rho.setZero();
    const Vector sigma = rho.array().exp();
    for (int k = 0; k < vc.draws; ++k) {
      for (Eigen::Index i = 0; i < p; ++i) eps[i] = rng.gaussian();
      const Vector point = w + sigma.cwiseProduct(eps);
      const Vector g_w = grad(spec, point, ds, retain, DecayTerm::Include);
      g_rho += g_w.cwiseProduct(eps);
    }
    g_rho = (g_rho / vc.draws).cwiseProduct(sigma);
    g_rho.array() -= 2.0 * cfg.lambda;
    if (!g_rho.allFinite()) {
      raise(Errc::Diverged, "variational objective became non-finite at step " +
                                std::to_string(step));
    }
    rho -= vc.step_size * g_rho;
    if (step >= tail_start) {
      rho_tail_sum += rho;
      ++tail_count;
    }
  }
  const Vector rho_final =
      tail_count > 0 ? Vector(rho_tail_sum / tail_count) : rho;

  ScrubResult r = base_result(spec, w, cfg);
  attach_noise(r, DiagonalCov{(2.0 * rho_final).array().exp()},
               Rng::derive(cfg.seed, 1));
  return r;
}

ScrubResult robust_scrub(const ModelSpec& spec, const Vector& w,
                         const ForgetSplit& split, const ScrubConfig& cfg) {
  check_scrub_config(cfg);
  if (!cfg.t) raise(Errc::InvalidConfig, "robust scrubbing needs a time t");
  const QuadraticSurrogate s = make_surrogate(spec, w, split, cfg.eig_floor);
  Vector mean = quadratic_scrub(s, *cfg.t, cfg.stabilize);
  return curvature_noise_result(spec, std::move(mean), s.retain_curvature, cfg);
}

ScrubResult baseline_scrub(const ModelSpec& spec, const Vector& w,
                           const ForgetSplit& split, const ScrubConfig& cfg) {
  const Dataset& ds = split.dataset;
  switch (cfg.method) {
    case ScrubMethod::Finetune: {
      std::vector<SampleRole> roles(ds.size(), SampleRole::Train);
      for (int i : split.forget_indices) roles[i] = SampleRole::Skip;
      TrainTrace trace = sgd_train_roles(spec, ds, cfg.baseline_train, roles, w);
      ScrubResult r = base_result(spec, trace.final_weights.values, cfg);
      return r;
    }
    case ScrubMethod::NegGrad: {
      std::vector<SampleRole> roles(ds.size(), SampleRole::Train);
      for (int i : split.forget_indices) roles[i] = SampleRole::Reverse;
      TrainTrace trace = sgd_train_roles(spec, ds, cfg.baseline_train, roles, w);
      return base_result(spec, trace.final_weights.values, cfg);
    }
    case ScrubMethod::RandomLabels: {
      Dataset relabeled = ds;
      Rng rng(cfg.seed);
      for (int i : split.forget_indices) {
        relabeled.labels[i] =
            static_cast<int>(rng.uniform_int(ds.num_classes));
      }
      TrainTrace trace = sgd_train_roles(
          spec, relabeled, cfg.baseline_train,
          std::vector<SampleRole>(ds.size(), SampleRole::Train), w);
      return base_result(spec, trace.final_weights.values, cfg);
    }
    case ScrubMethod::Hiding: {
      const auto* whole = std::get_if<WholeClass>(&split.rule);
      if (!whole) {
        raise(Errc::HidingRequiresWholeClass,
              "hiding applies only to whole-class splits");
      }
      ScrubResult r = base_result(spec, w, cfg);
      r.hidden_class = whole->label;
      return r;
    }
    default:
      raise(Errc::InvalidConfig, "not a baseline method");
  }
}

ScrubResult apply_scrub(const ModelSpec& spec, const Vector& w,
                        const ForgetSplit& split, const ScrubConfig& cfg) {
  switch (cfg.method) {
    case ScrubMethod::Identity:
      return base_result(spec, w, cfg);
    case ScrubMethod::Robust:
      return robust_scrub(spec, w, split, cfg);
    case ScrubMethod::Newton:
      return newton_scrub(spec, w, split.dataset, split.retain_indices, cfg);
    case ScrubMethod::Fisher:
      return fisher_scrub(spec, w, split.dataset, split.retain_indices, cfg);
    case ScrubMethod::Variational:
      return variational_scrub(spec, w, split.dataset, split.retain_indices,
                               cfg);
    default:
      return baseline_scrub(spec, w, split, cfg);
  }
}

ScrubResult certificate_scrub(const ModelSpec& spec, const Vector& w_retrain,
                              const ForgetSplit& split,
                              const ScrubConfig& cfg) {
  const Dataset& ds = split.dataset;
  const Subset retain = split.retain_indices;
  switch (cfg.method) {
    case ScrubMethod::Identity:
      return base_result(spec, w_retrain, cfg);
    case ScrubMethod::Robust: {
      // With nothing to forget the transport map is the identity; only the
      // curvature noise remains.
      const SymMatrix b =
          hessian(spec, w_retrain, ds, retain, DecayTerm::Include);
      const EigenPair eig = sym_eig(b);
      if (eig.values.minCoeff() < cfg.eig_floor) {
        raise(Errc::SingularMatrix, "retained-loss curvature below floor");
      }
      return curvature_noise_result(spec, w_retrain, b, cfg);
    }
    case ScrubMethod::Newton:
      return newton_scrub(spec, w_retrain, ds, retain, cfg);
    case ScrubMethod::Fisher:
      return fisher_scrub(spec, w_retrain, ds, retain, cfg);
    case ScrubMethod::Variational:
      return variational_scrub(spec, w_retrain, ds, retain, cfg);
    default:
      raise(Errc::NoiselessMethod,
            "no noise certificate for baseline methods");
  }
}

RetainReconstruction subset_identities(const Vector& grad_forget,
                                       const HessianCache& cache,
                                       const SymMatrix& hessian_forget,
                                       double full_grad_inf_norm) {
  const double tolerance =
      1e-3 * (1.0 + cache.at_weights.lpNorm<Eigen::Infinity>());
  if (full_grad_inf_norm > tolerance) {
    raise(Errc::NotAtMinimum,
          "full-loss gradient norm " + std::to_string(full_grad_inf_norm) +
              " exceeds tolerance " + std::to_string(tolerance));
  }
  Matrix full;
  if (const auto* m = std::get_if<SymMatrix>(&cache.hessian)) {
    full = m->mat();
  } else {
    full = Matrix(std::get<Vector>(cache.hessian).asDiagonal());
  }
  if (full.rows() != hessian_forget.dim() ||
      grad_forget.size() != full.rows()) {
    raise(Errc::DimensionMismatch, "cache, gradient and Hessian sizes differ");
  }
  return RetainReconstruction{-grad_forget,
                              SymMatrix(full - hessian_forget.mat())};
}

}  // namespace unlearn
