#include "unlearn/train.hpp"

#include <cmath>

#include "unlearn/rng.hpp"

namespace unlearn {

namespace {

void check_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    raise(Errc::InvalidConfig, "learning_rate must be > 0");
  }
  if (cfg.batch_size < 1) raise(Errc::InvalidConfig, "batch_size must be >= 1");
  if (cfg.epochs < 1) raise(Errc::InvalidConfig, "epochs must be >= 1");
  if (cfg.early_stop_epochs && *cfg.early_stop_epochs < 1) {
    raise(Errc::InvalidConfig, "early_stop_epochs must be >= 1");
  }
  if (const auto* u = std::get_if<UniformInit>(&cfg.init)) {
    if (!(u->scale > 0.0)) raise(Errc::InvalidConfig, "init scale must be > 0");
  } else if (!(std::get<GaussianInit>(cfg.init).stddev > 0.0)) {
    raise(Errc::InvalidConfig, "init stddev must be > 0");
  }
}

Vector draw_init(const InitKind& init, Eigen::Index p, Rng& rng) {
  Vector w(p);
  if (const auto* u = std::get_if<UniformInit>(&init)) {
    for (Eigen::Index i = 0; i < p; ++i) w[i] = rng.uniform(-u->scale, u->scale);
  } else {
    const double s = std::get<GaussianInit>(init).stddev;
    for (Eigen::Index i = 0; i < p; ++i) w[i] = s * rng.gaussian();
  }
  return w;
}

double active_loss(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                   const std::vector<int>& active) {
  if (std::holds_alternative<QuadraticModel>(spec.kind)) {
    return loss(spec, w, ds);
  }
  return loss(spec, w, ds, active, DecayTerm::Include);
}

}  // namespace

TrainTrace sgd_train_roles(
    const ModelSpec& spec, const Dataset& ds, const TrainConfig& cfg,
    const std::vector<SampleRole>& roles, const std::optional<Vector>& start,
    const std::function<bool(int, const Vector&)>& stop_after_epoch) {
  check_config(cfg);
  validate_dataset(ds);
  const int n = static_cast<int>(ds.size());
  if (static_cast<int>(roles.size()) != n) {
    raise(Errc::DimensionMismatch, "one role per sample required");
  }

  const bool quadratic = std::holds_alternative<QuadraticModel>(spec.kind);
  std::vector<int> active;
  for (int i = 0; i < n; ++i) {
    if (roles[i] != SampleRole::Skip) active.push_back(i);
  }
  if (active.empty()) raise(Errc::EmptyRetain, "no trainable samples");
  const double n_active = static_cast<double>(active.size());
  const double chance_loss = std::log(static_cast<double>(ds.num_classes));

  Rng rng(cfg.seed);
  const Eigen::Index p = param_count(spec);
  Vector w = start ? *start : draw_init(cfg.init, p, rng);
  if (w.size() != p) {
    raise(Errc::DimensionMismatch, "start weights do not match model");
  }

  const int epochs =
      std::min(cfg.epochs, cfg.early_stop_epochs.value_or(cfg.epochs));
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;

  TrainTrace trace;
  Vector g(p);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(perm);
    for (int begin = 0; begin < n; begin += cfg.batch_size) {
      const int end = std::min(n, begin + cfg.batch_size);
      g.setZero();
      int in_batch = 0;
      for (int s = begin; s < end; ++s) {
        const int i = perm[s];
        switch (roles[i]) {
          case SampleRole::Skip:
            break;
          case SampleRole::Train:
            ++in_batch;
            if (!quadratic) add_sample_grad(spec, w, ds, i, 1.0, g);
            break;
          case SampleRole::Reverse:
            ++in_batch;
            // Loss clamped at chance level: above it the sample contributes
            // a constant, hence no gradient.
            if (sample_loss(spec, w, ds, i) < chance_loss) {
              add_sample_grad(spec, w, ds, i, -1.0, g);
            }
            break;
        }
      }
      if (in_batch == 0) continue;
      const double fraction = in_batch / n_active;
      if (quadratic) {
        // The quadratic objective has no per-sample decomposition; each
        // batch applies the matching fraction of the full gradient so that
        // one epoch sums to a single full-gradient step of size lr.
        const auto& q = std::get<QuadraticModel>(spec.kind);
        g = fraction * (q.curvature.mat() * (w - q.minimum));
      }
      g += fraction * spec.weight_decay * w;
      w -= cfg.learning_rate * g;
    }
    const double epoch_loss = active_loss(spec, w, ds, active);
    if (!std::isfinite(epoch_loss)) {
      raise(Errc::Diverged,
            "loss became non-finite at epoch " + std::to_string(epoch));
    }
    trace.epoch_losses.push_back(epoch_loss);
    trace.epochs_run = epoch;
    if (stop_after_epoch && stop_after_epoch(epoch, w)) break;
  }
  trace.final_weights = make_weights(spec, std::move(w));
  return trace;
}

TrainTrace sgd_train(const ModelSpec& spec, const Dataset& ds,
                     const TrainConfig& cfg) {
  return sgd_train_roles(spec, ds, cfg,
                         std::vector<SampleRole>(ds.size(), SampleRole::Train));
}

TrainTrace sgd_train_full(const ModelSpec& spec, const ForgetSplit& split,
                          const TrainConfig& cfg) {
  return sgd_train(spec, split.dataset, cfg);
}

TrainTrace sgd_train_retain(const ModelSpec& spec, const ForgetSplit& split,
                            const TrainConfig& cfg) {
  std::vector<SampleRole> roles(split.dataset.size(), SampleRole::Train);
  for (int i : split.forget_indices) roles[i] = SampleRole::Skip;
  return sgd_train_roles(spec, split.dataset, cfg, roles);
}

Vector gradient_flow(const ModelSpec& spec, const Vector& w0, double t) {
  const auto* q = std::get_if<QuadraticModel>(&spec.kind);
  if (!q) raise(Errc::UnsupportedModel, "gradient_flow needs a quadratic model");
  if (w0.size() != q->minimum.size()) {
    raise(Errc::DimensionMismatch, "w0 does not match quadratic dimension");
  }
  if (t < 0.0) raise(Errc::InvalidSpec, "flow time must be >= 0");

  Matrix h = q->curvature.mat();
  h.diagonal().array() += spec.weight_decay;
  const EigenPair eig = sym_eig(SymMatrix(h));
  if (eig.values.minCoeff() < -1e-10) {
    raise(Errc::SingularMatrix, "curvature must be positive semidefinite");
  }
  Vector minimum = q->minimum;
  if (spec.weight_decay > 0.0) {
    // Decay shifts the stationary point: (A + wd I) m' = A m.
    const Vector rhs = q->curvature.mat() * q->minimum;
    minimum = eig.vectors *
              (eig.vectors.transpose() * rhs).cwiseQuotient(eig.values);
  }
  const Vector coords = eig.vectors.transpose() * (w0 - minimum);
  Vector decayed(coords.size());
  for (Eigen::Index i = 0; i < coords.size(); ++i) {
    decayed[i] = std::exp(-eig.values[i] * t) * coords[i];
  }
  return minimum + eig.vectors * decayed;
}

std::optional<int> relearn_time(const ModelSpec& spec, const Vector& start,
                                const ForgetSplit& split,
                                const RelearnConfig& cfg) {
  // A threshold of 0 (or below) is unattainable and reports NotReached.
  const double threshold = cfg.threshold.value_or(
      0.1 * static_cast<double>(split.forget_indices.size()) *
      std::log(static_cast<double>(split.dataset.num_classes)));
  if (std::isnan(threshold)) raise(Errc::InvalidConfig, "threshold is NaN");

  TrainConfig tc;
  tc.seed = cfg.seed;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.max_epochs;

  std::optional<int> reached;
  sgd_train_roles(
      spec, split.dataset, tc,
      std::vector<SampleRole>(split.dataset.size(), SampleRole::Train), start,
      [&](int epoch, const Vector& w) {
        const double forget_loss = loss(spec, w, split.dataset,
                                        split.forget_indices, DecayTerm::Exclude);
        if (forget_loss < threshold) {
          reached = epoch;
          return true;
        }
        return false;
      });
  return reached;
}

std::vector<InterpolationPoint> loss_interpolation(
    const ModelSpec& spec, const Vector& a, const Vector& b, const Dataset& ds,
    const std::vector<double>& grid) {
  if (a.size() != b.size()) {
    raise(Errc::DimensionMismatch, "endpoint weight vectors differ in size");
  }
  std::vector<InterpolationPoint> points;
  points.reserve(grid.size());
  for (double t : grid) {
    const Vector w = (1.0 - t) * a + t * b;
    InterpolationPoint pt;
    pt.t = t;
    pt.loss = loss(spec, w, ds);
    pt.error = is_classifier(spec) ? error_rate(spec, w, ds) : 0.0;
    points.push_back(pt);
  }
  return points;
}

}  // namespace unlearn
