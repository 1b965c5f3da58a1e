#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "unlearn/dataset.hpp"
#include "unlearn/linalg.hpp"

namespace unlearn {

// Pure quadratic objective 1/2 (w - minimum)^T curvature (w - minimum).
// Sample arguments are ignored by every operation on this kind.
struct QuadraticModel {
  SymMatrix curvature;
  Vector minimum;
};

// Linear classifier with bias. K == 2 uses a single-logit sigmoid
// parametrization (p = d + 1); K >= 3 uses softmax rows (p = K * (d + 1)).
struct LogisticModel {
  int input_dim = 0;
  int num_classes = 2;
};

// Fully connected tanh network, softmax output.
struct MlpModel {
  int input_dim = 0;
  std::vector<int> hidden;
  int num_classes = 2;
};

struct ModelSpec {
  std::variant<QuadraticModel, LogisticModel, MlpModel> kind;
  double weight_decay = 0.0;
};

Eigen::Index param_count(const ModelSpec& spec);
std::string model_id(const ModelSpec& spec);
bool is_classifier(const ModelSpec& spec);

struct WeightVector {
  Vector values;
  std::string model_id;
};

WeightVector make_weights(const ModelSpec& spec, Vector values);

// Sample subset; an empty span means "all rows".
using Subset = std::span<const int>;

// Whether the L2 weight-decay term wd/2 * |w|^2 is added. The decay belongs
// to the objective once: full-dataset evaluations include it, and in
// forget/retain decompositions it is attributed to the retained part so that
// loss(D) == loss_forget + loss_retain holds exactly.
enum class DecayTerm { Include, Exclude };

double loss(const ModelSpec& spec, const Vector& w, const Dataset& ds,
            Subset subset = {}, DecayTerm decay = DecayTerm::Include);
Vector grad(const ModelSpec& spec, const Vector& w, const Dataset& ds,
            Subset subset = {}, DecayTerm decay = DecayTerm::Include);

// Exact Hessian; Quadratic and Logistic only.
SymMatrix hessian(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                  Subset subset = {}, DecayTerm decay = DecayTerm::Include);

struct SplitObjectives {
  double forget;  // data term over the forget cohort
  double retain;  // data term over the complement, plus weight decay
};
SplitObjectives split_losses(const ModelSpec& spec, const Vector& w,
                             const ForgetSplit& split);

enum class FisherForm { Diagonal, Full };

struct FisherEstimate {
  std::variant<Vector, SymMatrix> value;  // Diagonal entries or full matrix
  Eigen::Index sample_count = 0;
  Vector at_weights;
};

// Expected outer product of per-sample log-likelihood gradients, with the
// label expectation taken exactly over all classes and summed over samples.
// Classification models only; no weight-decay term.
FisherEstimate fim(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                   FisherForm form, Subset subset = {});

// K-vector of logits; for the sigmoid parametrization this is [0, z].
Vector predict_logits(const ModelSpec& spec, const Vector& w, const Vector& x);

// Entropy of the softmax output, in [0, log K].
double output_entropy(const ModelSpec& spec, const Vector& w, const Vector& x);

double entropy_of_logits(const Vector& logits);

// Fraction of misclassified samples in [0, 1]. `hidden_class`, when set,
// forces that class's logit to -inf before the argmax.
double error_rate(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                  Subset subset = {},
                  std::optional<int> hidden_class = std::nullopt);

// Per-sample pieces used by the SGD loop and the baselines.
double sample_loss(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                   int index);
void add_sample_grad(const ModelSpec& spec, const Vector& w, const Dataset& ds,
                     int index, double scale, Vector& acc);

}  // namespace unlearn
