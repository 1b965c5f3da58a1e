#include "unlearn/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace unlearn {

void validate_dataset(const Dataset& ds) {
  if (ds.size() < 1) raise(Errc::InvalidSpec, "dataset is empty");
  if (ds.num_classes < 1) raise(Errc::InvalidSpec, "num_classes must be >= 1");
  if (static_cast<Eigen::Index>(ds.labels.size()) != ds.size()) {
    raise(Errc::DimensionMismatch, "label count does not match feature rows");
  }
  if (!ds.features.allFinite()) {
    raise(Errc::NonFinite, "dataset features contain NaN or Inf");
  }
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes) {
      raise(Errc::LabelOutOfRange,
            "label " + std::to_string(ds.labels[i]) + " at row " +
                std::to_string(i) + " outside [0, " +
                std::to_string(ds.num_classes) + ")");
    }
  }
}

Dataset gen_clusters(const std::vector<ClusterSpec>& clusters,
                     std::uint64_t seed) {
  if (clusters.empty()) raise(Errc::InvalidSpec, "no clusters given");
  const Eigen::Index d = clusters.front().mean.size();
  std::set<int> labels;
  Eigen::Index total = 0;
  for (const auto& c : clusters) {
    if (c.mean.size() != d) {
      raise(Errc::InvalidSpec, "cluster means differ in dimension");
    }
    if (c.stddev < 0.0) raise(Errc::InvalidSpec, "cluster stddev must be >= 0");
    if (c.count < 1) raise(Errc::InvalidSpec, "cluster count must be >= 1");
    if (c.label < 0) raise(Errc::InvalidSpec, "cluster label must be >= 0");
    labels.insert(c.label);
    total += c.count;
  }
  if (labels.size() < 2) {
    raise(Errc::InvalidSpec, "need at least 2 distinct labels across clusters");
  }

  Dataset ds;
  ds.features.resize(total, d);
  ds.labels.reserve(total);
  ds.num_classes = *labels.rbegin() + 1;
  ds.name = "clusters";
  Rng rng(seed);
  Eigen::Index row = 0;
  for (const auto& c : clusters) {
    for (int i = 0; i < c.count; ++i, ++row) {
      for (Eigen::Index j = 0; j < d; ++j) {
        ds.features(row, j) = c.mean[j] + c.stddev * rng.gaussian();
      }
      ds.labels.push_back(c.label);
    }
  }
  validate_dataset(ds);
  return ds;
}

std::string rule_description(const SplitRule& rule) {
  if (const auto* w = std::get_if<WholeClass>(&rule)) {
    return "whole_class(" + std::to_string(w->label) + ")";
  }
  if (const auto* c = std::get_if<CountFromClass>(&rule)) {
    return "count_from_class(" + std::to_string(c->label) + "," +
           std::to_string(c->count) + ")";
  }
  const auto& e = std::get<ExplicitIndices>(rule);
  return "explicit(" + std::to_string(e.indices.size()) + " indices)";
}

ForgetSplit make_split(const Dataset& ds, const SplitRule& rule) {
  validate_dataset(ds);
  const int n = static_cast<int>(ds.size());
  std::vector<int> forget;

  if (const auto* w = std::get_if<WholeClass>(&rule)) {
    if (w->label < 0 || w->label >= ds.num_classes) {
      raise(Errc::NoSuchClass, "class " + std::to_string(w->label));
    }
    for (int i = 0; i < n; ++i) {
      if (ds.labels[i] == w->label) forget.push_back(i);
    }
    if (forget.empty()) {
      raise(Errc::NoSuchClass,
            "class " + std::to_string(w->label) + " has no samples");
    }
  } else if (const auto* c = std::get_if<CountFromClass>(&rule)) {
    if (c->label < 0 || c->label >= ds.num_classes) {
      raise(Errc::NoSuchClass, "class " + std::to_string(c->label));
    }
    if (c->count < 1) raise(Errc::EmptyForget, "count must be >= 1");
    int available = 0;
    for (int i = 0; i < n; ++i) available += ds.labels[i] == c->label;
    if (available == 0) {
      raise(Errc::NoSuchClass,
            "class " + std::to_string(c->label) + " has no samples");
    }
    if (c->count > available) {
      raise(Errc::EmptyRetain, "requested " + std::to_string(c->count) +
                                   " samples from class " +
                                   std::to_string(c->label) + " but only " +
                                   std::to_string(available) + " exist");
    }
    for (int i = 0; i < n && static_cast<int>(forget.size()) < c->count; ++i) {
      if (ds.labels[i] == c->label) forget.push_back(i);
    }
  } else {
    forget = std::get<ExplicitIndices>(rule).indices;
    std::sort(forget.begin(), forget.end());
    forget.erase(std::unique(forget.begin(), forget.end()), forget.end());
    if (!forget.empty() && (forget.front() < 0 || forget.back() >= n)) {
      raise(Errc::InvalidSpec, "forget index out of range");
    }
  }

  if (forget.empty()) raise(Errc::EmptyForget, "forget set is empty");
  if (static_cast<int>(forget.size()) >= n) {
    raise(Errc::EmptyRetain, "forget set covers the whole dataset");
  }

  ForgetSplit split;
  split.dataset = ds;
  split.forget_indices = std::move(forget);
  split.retain_indices.reserve(n - split.forget_indices.size());
  std::size_t cursor = 0;
  for (int i = 0; i < n; ++i) {
    if (cursor < split.forget_indices.size() &&
        split.forget_indices[cursor] == i) {
      ++cursor;
    } else {
      split.retain_indices.push_back(i);
    }
  }
  split.rule = rule;
  return split;
}

Dataset retain_dataset(const ForgetSplit& split) {
  Dataset out;
  const auto& idx = split.retain_indices;
  out.features.resize(idx.size(), split.dataset.dim());
  out.labels.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.features.row(r) = split.dataset.features.row(idx[r]);
    out.labels.push_back(split.dataset.labels[idx[r]]);
  }
  out.num_classes = split.dataset.num_classes;
  out.name = split.dataset.name + "_retain";
  return out;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) raise(Errc::ParseError, "empty file");
  int d = -1, k = -1;
  if (std::sscanf(line.c_str(), "# d=%d K=%d", &d, &k) != 2 || d < 1 || k < 1) {
    raise(Errc::ParseError, "line 1: expected header '# d=<d> K=<K>'");
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::vector<double> row;
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        raise(Errc::ParseError, "line " + std::to_string(line_no) +
                                    ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(row.size()) != d + 1) {
      raise(Errc::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(d + 1) + " fields, got " +
                                  std::to_string(row.size()));
    }
    const double raw_label = row.back();
    const int label = static_cast<int>(raw_label);
    if (raw_label != label || label < 0 || label >= k) {
      raise(Errc::LabelOutOfRange, "line " + std::to_string(line_no) +
                                       ": label " + std::to_string(raw_label) +
                                       " outside [0, " + std::to_string(k) +
                                       ")");
    }
    row.pop_back();
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) raise(Errc::ParseError, "no data rows (header only)");

  Dataset ds;
  ds.features.resize(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = rows[i][j];
  }
  ds.labels = std::move(labels);
  ds.num_classes = k;
  ds.name = path.stem().string();
  validate_dataset(ds);
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path,
              const std::vector<std::string>& extra_comments) {
  validate_dataset(ds);
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot write " + path.string());
  out << "# d=" << ds.dim() << " K=" << ds.num_classes << "\n";
  for (const auto& comment : extra_comments) out << "# " << comment << "\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) out << ds.features(i, j) << ",";
    out << ds.labels[i] << "\n";
  }
  if (!out) raise(Errc::IoError, "write failed for " + path.string());
}

}  // namespace unlearn
