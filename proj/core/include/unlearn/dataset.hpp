#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "unlearn/linalg.hpp"

namespace unlearn {

// Labeled feature matrix. Immutable after construction in practice; all
// consumers take it by const reference and treat it as shareable.
struct Dataset {
  Matrix features;          // N x d
  std::vector<int> labels;  // size N, values in [0, K)
  int num_classes = 0;
  std::string name;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

// Throws if labels are out of range, N == 0, or features are non-finite.
void validate_dataset(const Dataset& ds);

struct ClusterSpec {
  Vector mean;
  double stddev = 0.0;  // isotropic
  int count = 0;
  int label = 0;
};

// Isotropic Gaussian blobs, deterministic for a fixed (spec, seed).
Dataset gen_clusters(const std::vector<ClusterSpec>& clusters,
                     std::uint64_t seed);

struct WholeClass {
  int label;
};
struct CountFromClass {
  int label;
  int count;
};
struct ExplicitIndices {
  std::vector<int> indices;
};
using SplitRule = std::variant<WholeClass, CountFromClass, ExplicitIndices>;

std::string rule_description(const SplitRule& rule);

// Partition into a forget cohort and its complement.
struct ForgetSplit {
  Dataset dataset;
  std::vector<int> forget_indices;  // sorted
  std::vector<int> retain_indices;  // sorted complement
  SplitRule rule;
};

ForgetSplit make_split(const Dataset& ds, const SplitRule& rule);

// Restriction of a split to its retained samples, as a standalone dataset.
Dataset retain_dataset(const ForgetSplit& split);

// CSV with a `# d=<d> K=<K>` header line; later `#` lines are comments.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& ds, const std::filesystem::path& path,
              const std::vector<std::string>& extra_comments = {});

}  // namespace unlearn
