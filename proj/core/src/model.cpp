#include "unlearn/model.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace unlearn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_dims(const ModelSpec& spec, const Vector& w) {
  if (w.size() != param_count(spec)) {
    raise(Errc::DimensionMismatch,
          "weight vector has " + std::to_string(w.size()) +
              " entries, model expects " + std::to_string(param_count(spec)));
  }
}

void check_features(const ModelSpec& spec, const Dataset& ds) {
  int d = 0;
  if (const auto* lg = std::get_if<LogisticModel>(&spec.kind)) {
    d = lg->input_dim;
  } else if (const auto* mlp = std::get_if<MlpModel>(&spec.kind)) {
    d = mlp->input_dim;
  } else {
    return;
  }
  if (ds.dim() != d) {
    raise(Errc::DimensionMismatch, "dataset dimension " +
                                       std::to_string(ds.dim()) +
                                       " != model input " + std::to_string(d));
  }
}

template <typename Fn>
void for_each_row(const Dataset& ds, Subset subset, Fn&& fn) {
  if (subset.empty()) {
    for (int i = 0; i < static_cast<int>(ds.size()); ++i) fn(i);
  } else {
    for (int i : subset) fn(i);
  }
}

double logsumexp(const Vector& z) {
  double m = kNegInf;
  for (Eigen::Index i = 0; i < z.size(); ++i) m = std::max(m, z[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] != kNegInf) s += std::exp(z[i] - m);
  }
  return m + std::log(s);
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + e^z), overflow-safe.
double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

struct MlpLayout {
  std::vector<int> in, out;
  std::vector<Eigen::Index> w_off, b_off;
  Eigen::Index total = 0;
};

MlpLayout mlp_layout(const MlpModel& m) {
  MlpLayout lay;
  int prev = m.input_dim;
  for (int h : m.hidden) {
    lay.in.push_back(prev);
    lay.out.push_back(h);
    prev = h;
  }
  lay.in.push_back(prev);
  lay.out.push_back(m.num_classes);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < lay.in.size(); ++l) {
    lay.w_off.push_back(off);
    off += static_cast<Eigen::Index>(lay.out[l]) * lay.in[l];
    lay.b_off.push_back(off);
    off += lay.out[l];
  }
  lay.total = off;
  return lay;
}

Eigen::Map<const Matrix> layer_w(const Vector& w, const MlpLayout& lay,
                                 std::size_t l) {
  return {w.data() + lay.w_off[l], lay.out[l], lay.in[l]};
}
Eigen::Map<const Vector> layer_b(const Vector& w, const MlpLayout& lay,
                                 std::size_t l) {
  return {w.data() + lay.b_off[l], lay.out[l]};
}

// Forward pass keeping post-activation values for backprop.
std::vector<Vector> mlp_forward(const MlpLayout& lay,
                                const Vector& w, const Vector& x) {
  std::vector<Vector> acts;
  acts.reserve(lay.in.size() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < lay.in.size(); ++l) {
    Vector z = layer_w(w, lay, l) * acts.back() + layer_b(w, lay, l);
    if (l + 1 < lay.in.size()) z = z.array().tanh();
    acts.push_back(std::move(z));
  }
  return acts;
}

// Accumulates scale * dL/dw given dL/dlogits.
void mlp_backward(const MlpLayout& lay, const Vector& w,
                  const std::vector<Vector>& acts, Vector dlogits,
                  double scale, Vector& acc) {
  Vector delta = std::move(dlogits);
  for (std::size_t l = lay.in.size(); l-- > 0;) {
    const Vector& input = acts[l];
    Eigen::Map<Matrix> gw(acc.data() + lay.w_off[l], lay.out[l], lay.in[l]);
    gw.noalias() += scale * delta * input.transpose();
    Eigen::Map<Vector> gb(acc.data() + lay.b_off[l], lay.out[l]);
    gb.noalias() += scale * delta;
    if (l > 0) {
      Vector back = layer_w(w, lay, l).transpose() * delta;
      delta = back.array() * (1.0 - acts[l].array().square());
    }
  }
}

Vector logistic_logits(const LogisticModel& lg, const Vector& w,
                       const Vector& x) {
  const int d = lg.input_dim;
  if (lg.num_classes == 2) {
    const double z = w.head(d).dot(x) + w[d];
    Vector out(2);
    out << 0.0, z;
    return out;
  }
  Vector out(lg.num_classes);
  for (int k = 0; k < lg.num_classes; ++k) {
    const Eigen::Index off = static_cast<Eigen::Index>(k) * (d + 1);
    out[k] = w.segment(off, d).dot(x) + w[off + d];
  }
  return out;
}

// dL/dw for one sample of a linear model given dL/dlogits (sigmoid models
// receive the scalar dL/dz in dlogits[1]).
void logistic_accumulate(const LogisticModel& lg, const Vector& x,
                         const Vector& dlogits, double scale, Vector& acc) {
  const int d = lg.input_dim;
  if (lg.num_classes == 2) {
    const double dz = dlogits[1];
    acc.head(d).noalias() += scale * dz * x;
    acc[d] += scale * dz;
    return;
  }
  for (int k = 0; k < lg.num_classes; ++k) {
    const Eigen::Index off = static_cast<Eigen::Index>(k) * (d + 1);
    acc.segment(off, d).noalias() += scale * dlogits[k] * x;
    acc[off + d] += scale * dlogits[k];
  }
}

}  // namespace

Eigen::Index param_count(const ModelSpec& spec) {
  if (const auto* q = std::get_if<QuadraticModel>(&spec.kind)) {
    return q->minimum.size();
  }
  if (const auto* lg = std::get_if<LogisticModel>(&spec.kind)) {
    return lg->num_classes == 2
               ? lg->input_dim + 1
               : static_cast<Eigen::Index>(lg->num_classes) *
                     (lg->input_dim + 1);
  }
  return mlp_layout(std::get<MlpModel>(spec.kind)).total;
}

std::string model_id(const ModelSpec& spec) {
  std::ostringstream os;
  os.precision(12);
  if (const auto* q = std::get_if<QuadraticModel>(&spec.kind)) {
    os << "quadratic:p=" << q->minimum.size();
  } else if (const auto* lg = std::get_if<LogisticModel>(&spec.kind)) {
    os << "logistic:d=" << lg->input_dim << ":K=" << lg->num_classes;
  } else {
    const auto& m = std::get<MlpModel>(spec.kind);
    os << "mlp:d=" << m.input_dim << ":h=";
    for (std::size_t i = 0; i < m.hidden.size(); ++i) {
      os << (i ? "x" : "") << m.hidden[i];
    }
    os << ":K=" << m.num_classes;
  }
  os << ":wd=" << spec.weight_decay;
  return os.str();
}

bool is_classifier(const ModelSpec& spec) {
  return !std::holds_alternative<QuadraticModel>(spec.kind);
}

WeightVector make_weights(const ModelSpec& spec, Vector values) {
  check_dims(spec, values);
  return WeightVector{std::move(values), model_id(spec)};
}

double sample_loss(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                   int index) {
  const int y = ds.labels[index];
  if (const auto* lg = std::get_if<LogisticModel>(&spec.kind)) {
    const Vector x = ds.features.row(index);
    if (lg->num_classes == 2) {
      const double z = w.head(lg->input_dim).dot(x) + w[lg->input_dim];
      return softplus(z) - y * z;
    }
    const Vector z = logistic_logits(*lg, w, x);
    return logsumexp(z) - z[y];
  }
  if (const auto* mlp = std::get_if<MlpModel>(&spec.kind)) {
    const MlpLayout lay = mlp_layout(*mlp);
    const Vector x = ds.features.row(index);
    const Vector z = mlp_forward(lay, w, x).back();
    return logsumexp(z) - z[y];
  }
  raise(Errc::UnsupportedModel, "quadratic objective has no per-sample loss");
}

void add_sample_grad(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                     int index, double scale, Vector& acc) {
  const int y = ds.labels[index];
  const Vector x = ds.features.row(index);
  if (const auto* lg = std::get_if<LogisticModel>(&spec.kind)) {
    Vector dlogits;
    if (lg->num_classes == 2) {
      const double q = sigmoid(w.head(lg->input_dim).dot(x) + w[lg->input_dim]);
      dlogits.resize(2);
      dlogits << 0.0, q - y;
    } else {
      Vector z = logistic_logits(*lg, w, x);
      const double lse = logsumexp(z);
      dlogits = (z.array() - lse).exp();
      dlogits[y] -= 1.0;
    }
    logistic_accumulate(*lg, x, dlogits, scale, acc);
    return;
  }
  if (const auto* mlp = std::get_if<MlpModel>(&spec.kind)) {
    const MlpLayout lay = mlp_layout(*mlp);
    const auto acts = mlp_forward(lay, w, x);
    const Vector& z = acts.back();
    const double lse = logsumexp(z);
    Vector dlogits = (z.array() - lse).exp();
    dlogits[y] -= 1.0;
    mlp_backward(lay, w, acts, std::move(dlogits), scale, acc);
    return;
  }
  raise(Errc::UnsupportedModel, "quadratic objective has no per-sample grad");
}

double loss(const ModelSpec& spec, const Vector& w, const Dataset& ds,
            Subset subset, DecayTerm decay) {
  check_dims(spec, w);
  double total = 0.0;
  if (const auto* q = std::get_if<QuadraticModel>(&spec.kind)) {
    const Vector diff = w - q->minimum;
    total = 0.5 * diff.dot(q->curvature.mat() * diff);
  } else {
    check_features(spec, ds);
    for_each_row(ds, subset, [&](int i) { total += sample_loss(spec, w, ds, i); });
  }
  if (decay == DecayTerm::Include) {
    total += 0.5 * spec.weight_decay * w.squaredNorm();
  }
  return total;
}

Vector grad(const ModelSpec& spec, const Vector& w, const Dataset& ds,
            Subset subset, DecayTerm decay) {
  check_dims(spec, w);
  Vector g = Vector::Zero(w.size());
  if (const auto* q = std::get_if<QuadraticModel>(&spec.kind)) {
    g = q->curvature.mat() * (w - q->minimum);
  } else {
    check_features(spec, ds);
    for_each_row(ds, subset, [&](int i) { add_sample_grad(spec, w, ds, i, 1.0, g); });
  }
  if (decay == DecayTerm::Include) g += spec.weight_decay * w;
  return g;
}

SymMatrix hessian(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                  Subset subset, DecayTerm decay) {
  check_dims(spec, w);
  const Eigen::Index p = w.size();
  Matrix h = Matrix::Zero(p, p);
  if (const auto* q = std::get_if<QuadraticModel>(&spec.kind)) {
    h = q->curvature.mat();
  } else if (const auto* lg = std::get_if<LogisticModel>(&spec.kind)) {
    check_features(spec, ds);
    const int d = lg->input_dim;
    for_each_row(ds, subset, [&](int i) {
      Vector xa(d + 1);
      xa.head(d) = ds.features.row(i);
      xa[d] = 1.0;
      if (lg->num_classes == 2) {
        const double q2 = sigmoid(w.head(d).dot(xa.head(d)) + w[d]);
        h.noalias() += q2 * (1.0 - q2) * xa * xa.transpose();
      } else {
        Vector z = logistic_logits(*lg, w, ds.features.row(i));
        const double lse = logsumexp(z);
        const Vector prob = (z.array() - lse).exp();
        const Matrix outer = xa * xa.transpose();
        for (int a = 0; a < lg->num_classes; ++a) {
          for (int b = 0; b < lg->num_classes; ++b) {
            const double coef = prob[a] * ((a == b) - prob[b]);
            h.block(a * (d + 1), b * (d + 1), d + 1, d + 1) += coef * outer;
          }
        }
      }
    });
  } else {
    raise(Errc::UnsupportedModel, "no exact Hessian for MLP models");
  }
  if (decay == DecayTerm::Include) {
    h.diagonal().array() += spec.weight_decay;
  }
  return SymMatrix(0.5 * (h + h.transpose()));
}

SplitObjectives split_losses(const ModelSpec& spec, const Vector& w,
                             const ForgetSplit& split) {
  return SplitObjectives{
      loss(spec, w, split.dataset, split.forget_indices, DecayTerm::Exclude),
      loss(spec, w, split.dataset, split.retain_indices, DecayTerm::Include)};
}

FisherEstimate fim(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                   FisherForm form, Subset subset) {
  check_dims(spec, w);
  if (!is_classifier(spec)) {
    raise(Errc::UnsupportedModel,
          "Fisher estimate applies to classification models only");
  }
  check_features(spec, ds);
  const Eigen::Index p = w.size();
  const int num_classes = std::get_if<LogisticModel>(&spec.kind)
                              ? std::get<LogisticModel>(spec.kind).num_classes
                              : std::get<MlpModel>(spec.kind).num_classes;

  Vector diag = Vector::Zero(p);
  Matrix full = form == FisherForm::Full ? Matrix::Zero(p, p) : Matrix();
  Eigen::Index count = 0;

  Dataset scratch;  // reuses the sample-gradient path with a substituted label
  scratch.features.resize(1, ds.dim());
  scratch.labels = {0};
  scratch.num_classes = ds.num_classes;

  for_each_row(ds, subset, [&](int i) {
    ++count;
    const Vector x = ds.features.row(i);
    const Vector z = predict_logits(spec, w, x);
    const double lse = logsumexp(z);
    scratch.features.row(0) = ds.features.row(i);
    for (int y = 0; y < num_classes; ++y) {
      const double py = std::exp(z[y] - lse);
      if (py == 0.0) continue;
      scratch.labels[0] = y;
      Vector g = Vector::Zero(p);
      add_sample_grad(spec, w, scratch, 0, 1.0, g);
      if (form == FisherForm::Diagonal) {
        diag.noalias() += py * g.cwiseAbs2();
      } else {
        full.noalias() += py * g * g.transpose();
      }
    }
  });

  FisherEstimate est;
  est.sample_count = count;
  est.at_weights = w;
  if (form == FisherForm::Diagonal) {
    est.value = std::move(diag);
  } else {
    est.value = SymMatrix(0.5 * (full + full.transpose()));
  }
  return est;
}

Vector predict_logits(const ModelSpec& spec, const Vector& w, const Vector& x) {
  check_dims(spec, w);
  if (const auto* lg = std::get_if<LogisticModel>(&spec.kind)) {
    return logistic_logits(*lg, w, x);
  }
  if (const auto* mlp = std::get_if<MlpModel>(&spec.kind)) {
    const MlpLayout lay = mlp_layout(*mlp);
    return mlp_forward(lay, w, x).back();
  }
  raise(Errc::UnsupportedModel, "quadratic objective has no logits");
}

double entropy_of_logits(const Vector& logits) {
  const double lse = logsumexp(logits);
  double mean_logit = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (logits[i] == kNegInf) continue;
    mean_logit += std::exp(logits[i] - lse) * logits[i];
  }
  return std::max(0.0, lse - mean_logit);
}

double output_entropy(const ModelSpec& spec, const Vector& w, const Vector& x) {
  return entropy_of_logits(predict_logits(spec, w, x));
}

double error_rate(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                  Subset subset, std::optional<int> hidden_class) {
  check_dims(spec, w);
  Eigen::Index total = 0, wrong = 0;
  for_each_row(ds, subset, [&](int i) {
    Vector z = predict_logits(spec, w, ds.features.row(i));
    if (hidden_class) z[*hidden_class] = kNegInf;
    Eigen::Index pred = 0;
    z.maxCoeff(&pred);
    wrong += static_cast<int>(pred) != ds.labels[i];
    ++total;
  });
  if (total == 0) raise(Errc::InvalidSpec, "error_rate over empty subset");
  return static_cast<double>(wrong) / static_cast<double>(total);
}

}  // namespace unlearn
