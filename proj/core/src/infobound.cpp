#include "unlearn/infobound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unlearn/parallel.hpp"

namespace unlearn {

namespace {

void require_noise_method(const ScrubConfig& cfg) {
  if (!is_noise_method(cfg.method) || cfg.lambda <= 0.0) {
    raise(Errc::NoiselessMethod,
          "information bound needs a noise-producing scrub (method " +
              std::string(scrub_method_name(cfg.method)) + ", lambda " +
              std::to_string(cfg.lambda) + ")");
  }
}

ScrubConfig seeded(const ScrubConfig& cfg, std::uint64_t index) {
  ScrubConfig out = cfg;
  out.seed = Rng::derive(cfg.seed, index);
  return out;
}

}  // namespace

InfoBoundReport local_bound(const ModelSpec& spec, const ForgetSplit& split,
                            const TrainConfig& train_cfg,
                            const ScrubConfig& scrub_cfg,
                            const std::vector<std::uint64_t>& seeds,
                            int workers) {
  require_noise_method(scrub_cfg);
  if (seeds.empty()) raise(Errc::InvalidConfig, "need at least one seed");

  InfoBoundReport report;
  report.seeds = seeds;
  report.per_seed_nats.resize(seeds.size());
  report.method = scrub_method_name(scrub_cfg.method);
  report.lambda = scrub_cfg.lambda;
  report.sigma_h = scrub_cfg.sigma_h;

  parallel_for(seeds.size(), workers, [&](std::size_t i) {
    TrainConfig tc = train_cfg;
    tc.seed = seeds[i];
    const Vector w = sgd_train_full(spec, split, tc).final_weights.values;
    const Vector w_target = sgd_train_retain(spec, split, tc).final_weights.values;

    const ScrubConfig cfg_i = seeded(scrub_cfg, i);
    const ScrubResult original = apply_scrub(spec, w, split, cfg_i);
    const ScrubResult target = certificate_scrub(spec, w_target, split, cfg_i);
    report.per_seed_nats[i] =
        gaussian_kl({original.mean_weights, *original.noise_cov},
                    {target.mean_weights, *target.noise_cov});
  });

  double sum = 0.0;
  for (double v : report.per_seed_nats) sum += v;
  report.mean_nats = sum / static_cast<double>(report.per_seed_nats.size());
  return report;
}

WeightPopulations train_populations(const ModelSpec& spec,
                                    const ForgetSplit& split,
                                    const TrainConfig& train_cfg, int n_seeds,
                                    int workers) {
  if (n_seeds < 2) raise(Errc::DegenerateFit, "need at least two seeds");
  WeightPopulations pops;
  pops.full.resize(n_seeds);
  pops.retain.resize(n_seeds);
  pops.seeds.resize(n_seeds);
  parallel_for(n_seeds, workers, [&](std::size_t i) {
    TrainConfig tc = train_cfg;
    tc.seed = Rng::derive(train_cfg.seed, i);
    pops.seeds[i] = tc.seed;
    pops.full[i] = sgd_train_full(spec, split, tc).final_weights.values;
    pops.retain[i] = sgd_train_retain(spec, split, tc).final_weights.values;
  });
  return pops;
}

ScrubbedPopulations scrub_populations(const ModelSpec& spec,
                                      const ForgetSplit& split,
                                      const WeightPopulations& pops,
                                      const ScrubConfig& scrub_cfg,
                                      int workers) {
  ScrubbedPopulations out;
  out.scrubbed.resize(pops.full.size());
  out.certified.resize(pops.retain.size());
  parallel_for(pops.full.size(), workers, [&](std::size_t i) {
    const ScrubConfig cfg_i = seeded(scrub_cfg, 2 * i);
    out.scrubbed[i] = apply_scrub(spec, pops.full[i], split, cfg_i).weights.values;

    const ScrubConfig cfg_cert = seeded(scrub_cfg, 2 * i + 1);
    const ScrubResult cert =
        certificate_scrub(spec, pops.retain[i], split, cfg_cert);
    // Noise only: keep the certificate draw but center it on the retrained
    // weights themselves.
    out.certified[i] =
        pops.retain[i] + (cert.weights.values - cert.mean_weights);
  });
  return out;
}

GaussianParams fit_gaussian(const std::vector<Vector>& sample, double shrink) {
  if (sample.size() < 2) {
    raise(Errc::DegenerateFit, "need at least two weight samples");
  }
  const Eigen::Index p = sample.front().size();
  Vector mean = Vector::Zero(p);
  for (const Vector& x : sample) {
    if (x.size() != p) raise(Errc::DimensionMismatch, "ragged weight samples");
    mean += x;
  }
  mean /= static_cast<double>(sample.size());
  Matrix cov = Matrix::Zero(p, p);
  for (const Vector& x : sample) {
    const Vector diff = x - mean;
    cov.noalias() += diff * diff.transpose();
  }
  cov /= static_cast<double>(sample.size() - 1);
  double delta = shrink * cov.trace() / static_cast<double>(p);
  if (!(delta > 0.0)) delta = shrink;  // all-identical samples
  cov.diagonal().array() += delta;
  return GaussianParams{std::move(mean), FullCov{SymMatrix(cov)}};
}

EmpiricalKl empirical_weight_kl(const ModelSpec& spec, const ForgetSplit& split,
                                const TrainConfig& train_cfg,
                                const ScrubConfig& scrub_cfg, int n_seeds,
                                int workers) {
  if (n_seeds < 20) {
    raise(Errc::InvalidConfig, "population estimate needs at least 20 seeds");
  }
  if (param_count(spec) > 64) {
    raise(Errc::InvalidConfig,
          "population estimate is limited to models with <= 64 parameters");
  }
  const WeightPopulations pops =
      train_populations(spec, split, train_cfg, n_seeds, workers);
  const ScrubbedPopulations scrubbed =
      scrub_populations(spec, split, pops, scrub_cfg, workers);
  EmpiricalKl kl;
  kl.before = gaussian_kl(fit_gaussian(pops.full), fit_gaussian(pops.retain));
  kl.after = gaussian_kl(fit_gaussian(scrubbed.scrubbed),
                         fit_gaussian(scrubbed.certified));
  return kl;
}

double forgetting_lagrangian(const ModelSpec& spec, const Dataset& ds,
                             Subset retain, const ScrubResult& scrub,
                             double lambda, double kl_term, int n_noise_draws,
                             std::uint64_t seed) {
  if (n_noise_draws < 1) raise(Errc::InvalidConfig, "need n_noise_draws >= 1");
  double retained_loss = 0.0;
  if (scrub.noise_cov) {
    Rng rng(seed);
    for (int k = 0; k < n_noise_draws; ++k) {
      const Vector noise = sample_gaussian(*scrub.noise_cov, rng);
      retained_loss += loss(spec, scrub.mean_weights + noise, ds, retain,
                            DecayTerm::Include);
    }
    retained_loss /= n_noise_draws;
  } else {
    retained_loss =
        loss(spec, scrub.weights.values, ds, retain, DecayTerm::Include);
  }
  return retained_loss + lambda * kl_term;
}

SymMatrix optimal_noise_check(const SymMatrix& b, double sigma_h,
                              double lambda) {
  if (!(lambda > 0.0) || !(sigma_h > 0.0)) {
    raise(Errc::InvalidConfig, "lambda and sigma_h must be > 0");
  }
  const EigenPair eig = sym_eig(b);
  if (eig.values.minCoeff() <= 0.0) {
    raise(Errc::SingularMatrix, "curvature must be positive definite");
  }
  const double target = lambda * sigma_h * sigma_h;
  const double amplitude = std::sqrt(target);
  Vector inv_sqrt(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    inv_sqrt[i] = amplitude / std::sqrt(eig.values[i]);
  }
  Matrix sigma_mat =
      eig.vectors * inv_sqrt.asDiagonal() * eig.vectors.transpose();
  const SymMatrix sigma(0.5 * (sigma_mat + sigma_mat.transpose()));

  const Matrix residual = sigma.mat() * b.mat() * sigma.mat() -
                          target * Matrix::Identity(b.dim(), b.dim());
  if (residual.norm() > 1e-8 * target * std::sqrt(double(b.dim()))) {
    raise(Errc::ConvergenceFailure,
          "stationarity residual " + std::to_string(residual.norm()));
  }
  return sigma;
}

namespace {

void fill_histogram(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                    Subset subset, std::optional<int> hidden, double log_k,
                    int bins, std::vector<int>& counts) {
  counts.assign(bins, 0);
  auto add = [&](int i) {
    Vector z = predict_logits(spec, w, ds.features.row(i));
    if (hidden) z[*hidden] = -std::numeric_limits<double>::infinity();
    const double h = entropy_of_logits(z);
    int bin = static_cast<int>(h / log_k * bins);
    bin = std::clamp(bin, 0, bins - 1);
    ++counts[bin];
  };
  if (subset.empty()) {
    for (int i = 0; i < static_cast<int>(ds.size()); ++i) add(i);
  } else {
    for (int i : subset) add(i);
  }
}

}  // namespace

ReadoutReport readout(const ModelSpec& spec, const ScrubResult& scrub,
                      const ForgetSplit& split, const Dataset& test_ds,
                      const RelearnConfig& relearn_cfg,
                      std::optional<InfoBoundReport> info_bound) {
  constexpr int kBins = 30;
  const Vector& w = scrub.weights.values;
  const std::optional<int> hidden = scrub.hidden_class;

  ReadoutReport report;
  report.err_test_pct = 100.0 * error_rate(spec, w, test_ds, {}, hidden);
  report.err_forget_pct =
      100.0 * error_rate(spec, w, split.dataset, split.forget_indices, hidden);
  report.err_retain_pct =
      100.0 * error_rate(spec, w, split.dataset, split.retain_indices, hidden);
  report.relearn_epochs = relearn_time(spec, w, split, relearn_cfg);

  const double log_k = std::log(static_cast<double>(split.dataset.num_classes));
  report.entropy.edges.resize(kBins + 1);
  for (int i = 0; i <= kBins; ++i) {
    report.entropy.edges[i] = log_k * i / kBins;
  }
  fill_histogram(spec, w, split.dataset, split.retain_indices, hidden, log_k,
                 kBins, report.entropy.retain);
  fill_histogram(spec, w, split.dataset, split.forget_indices, hidden, log_k,
                 kBins, report.entropy.forget);
  fill_histogram(spec, w, test_ds, {}, hidden, log_k, kBins,
                 report.entropy.test);
  report.info_bound = std::move(info_bound);
  return report;
}

}  // namespace unlearn
