#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "unlearn/model.hpp"

namespace unlearn {

struct UniformInit {
  double scale = 1.0;  // U(-scale, scale) per coordinate
};
struct GaussianInit {
  double stddev = 1.0;
};
using InitKind = std::variant<UniformInit, GaussianInit>;

struct TrainConfig {
  std::uint64_t seed = 0;
  double learning_rate = 0.1;
  int batch_size = 1;
  int epochs = 1;
  InitKind init = UniformInit{1.0};
  std::optional<int> early_stop_epochs;
};

struct TrainTrace {
  WeightVector final_weights;
  std::vector<double> epoch_losses;  // training objective, end of each epoch
  int epochs_run = 0;
};

// How a sample participates in the SGD objective.
//   Train    normal gradient
//   Skip     excluded, but still occupies its slot in the batch permutation
//   Reverse  sign-flipped gradient, zeroed once the sample's loss reaches
//            chance level log K (ascent that stops at chance)
enum class SampleRole : std::uint8_t { Train, Skip, Reverse };

// Deterministic minibatch SGD. Initialization (when `start` is empty) and
// the per-epoch batch permutation are both drawn from cfg.seed. The
// permutation always covers the full index range; Skip samples are dropped
// in place, so runs on a dataset and on its retained subset share
// initialization and relative sampling order when given the same seed.
TrainTrace sgd_train_roles(
    const ModelSpec& spec, const Dataset& ds, const TrainConfig& cfg,
    const std::vector<SampleRole>& roles,
    const std::optional<Vector>& start = std::nullopt,
    const std::function<bool(int, const Vector&)>& stop_after_epoch = nullptr);

TrainTrace sgd_train(const ModelSpec& spec, const Dataset& ds,
                     const TrainConfig& cfg);
// A(D, eps) and A(D_r, eps) under the shared-seed alignment contract.
TrainTrace sgd_train_full(const ModelSpec& spec, const ForgetSplit& split,
                          const TrainConfig& cfg);
TrainTrace sgd_train_retain(const ModelSpec& spec, const ForgetSplit& split,
                            const TrainConfig& cfg);

// Exact continuous-time gradient-descent path of a quadratic objective,
// w(t) = m + exp(-H t) (w0 - m) with H the full curvature (weight decay
// folded in). Quadratic models only; t >= 0.
Vector gradient_flow(const ModelSpec& spec, const Vector& w0, double t);

struct RelearnConfig {
  double learning_rate = 0.01;
  int batch_size = 10;
  int max_epochs = 50;
  // Forget-set loss to reach; defaults to 0.1 * |D_f| * log K.
  std::optional<double> threshold;
  std::uint64_t seed = 0;
};

// First epoch (1-based) at which the summed forget-cohort loss drops below
// the threshold while retraining on the full dataset; nullopt if it never
// does within max_epochs.
std::optional<int> relearn_time(const ModelSpec& spec, const Vector& start,
                                const ForgetSplit& split,
                                const RelearnConfig& cfg);

struct InterpolationPoint {
  double t;
  double loss;
  double error;  // 0-1 error fraction; 0 for non-classifiers
};

// Loss and error along w(t) = (1-t) a + t b at the given grid of t values.
std::vector<InterpolationPoint> loss_interpolation(const ModelSpec& spec,
                                                   const Vector& a,
                                                   const Vector& b,
                                                   const Dataset& ds,
                                                   const std::vector<double>& grid);

}  // namespace unlearn
