#include "unlearn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace unlearn {

namespace {

constexpr char kMagic[4] = {'U', 'W', 'V', '1'};

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) raise(Errc::ParseError, "truncated checkpoint " + path.string());
  return value;
}

}  // namespace

void save_weights(const WeightVector& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(w.model_id.size()));
  out.write(w.model_id.data(), w.model_id.size());
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(w.values.size()));
  out.write(reinterpret_cast<const char*>(w.values.data()),
            sizeof(double) * w.values.size());
  if (!out) raise(Errc::IoError, "write failed for " + path.string());
}

WeightVector load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path.string());
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    raise(Errc::ParseError, path.string() + " is not a weight checkpoint");
  }
  const auto id_len = read_pod<std::uint32_t>(in, path);
  std::string id(id_len, '\0');
  in.read(id.data(), id_len);
  const auto p = read_pod<std::uint64_t>(in, path);
  WeightVector w;
  w.model_id = std::move(id);
  w.values.resize(static_cast<Eigen::Index>(p));
  in.read(reinterpret_cast<char*>(w.values.data()), sizeof(double) * p);
  if (!in) raise(Errc::ParseError, "truncated checkpoint " + path.string());
  return w;
}

namespace {

nlohmann::json cov_to_json(const Covariance& cov) {
  nlohmann::json j;
  if (const auto* d = std::get_if<DiagonalCov>(&cov)) {
    j["kind"] = "diagonal";
    j["variances"] = std::vector<double>(
        d->variances.data(), d->variances.data() + d->variances.size());
    return j;
  }
  // Full covariance stored as eigen-factors, which keeps it exactly
  // reconstructible as an SPD matrix.
  const EigenPair eig = sym_eig(std::get<FullCov>(cov).matrix);
  j["kind"] = "eigen";
  j["values"] = std::vector<double>(eig.values.data(),
                                    eig.values.data() + eig.values.size());
  std::vector<std::vector<double>> cols;
  for (Eigen::Index c = 0; c < eig.vectors.cols(); ++c) {
    cols.emplace_back(eig.vectors.col(c).data(),
                      eig.vectors.col(c).data() + eig.vectors.rows());
  }
  j["vectors"] = cols;
  return j;
}

Covariance cov_from_json(const nlohmann::json& j) {
  if (j.at("kind") == "diagonal") {
    const auto v = j.at("variances").get<std::vector<double>>();
    return DiagonalCov{Eigen::Map<const Vector>(v.data(), v.size())};
  }
  const auto values = j.at("values").get<std::vector<double>>();
  const auto cols = j.at("vectors").get<std::vector<std::vector<double>>>();
  const Eigen::Index p = static_cast<Eigen::Index>(values.size());
  Matrix vectors(p, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    vectors.col(c) = Eigen::Map<const Vector>(cols[c].data(), p);
  }
  Matrix m = vectors *
             Eigen::Map<const Vector>(values.data(), p).asDiagonal() *
             vectors.transpose();
  return FullCov{SymMatrix(0.5 * (m + m.transpose()))};
}

std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

nlohmann::json scrub_result_to_json(const ScrubResult& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["lambda"] = r.lambda;
  j["sigma_h"] = r.sigma_h;
  j["exponent"] = r.exponent;
  if (r.t) j["t"] = *r.t;
  if (r.hidden_class) j["hidden_class"] = *r.hidden_class;
  j["model_id"] = r.weights.model_id;
  j["mean_weights"] = to_std(r.mean_weights);
  j["noise_cov"] = r.noise_cov ? cov_to_json(*r.noise_cov) : nlohmann::json();
  return j;
}

ScrubResult scrub_result_from_json(const nlohmann::json& j,
                                   const ModelSpec& spec,
                                   WeightVector weights) {
  ScrubResult r;
  r.method = j.at("method").get<std::string>();
  r.lambda = j.at("lambda").get<double>();
  r.sigma_h = j.at("sigma_h").get<double>();
  r.exponent = j.at("exponent").get<double>();
  if (j.contains("t") && !j.at("t").is_null()) r.t = j.at("t").get<double>();
  if (j.contains("hidden_class") && !j.at("hidden_class").is_null()) {
    r.hidden_class = j.at("hidden_class").get<int>();
  }
  const auto mean = j.at("mean_weights").get<std::vector<double>>();
  r.mean_weights = Eigen::Map<const Vector>(mean.data(), mean.size());
  if (!j.at("noise_cov").is_null()) r.noise_cov = cov_from_json(j.at("noise_cov"));
  if (j.at("model_id").get<std::string>() != model_id(spec)) {
    raise(Errc::InvalidConfig, "scrub result was produced by model '" +
                                   j.at("model_id").get<std::string>() +
                                   "', config declares '" + model_id(spec) +
                                   "'");
  }
  if (weights.values.size() != param_count(spec) ||
      weights.model_id != model_id(spec)) {
    raise(Errc::InvalidConfig, "checkpoint does not match the declared model");
  }
  r.weights = std::move(weights);
  return r;
}

nlohmann::json info_bound_to_json(const InfoBoundReport& r) {
  nlohmann::json j;
  j["seeds"] = r.seeds;
  j["per_seed_nats"] = r.per_seed_nats;
  j["mean_nats"] = r.mean_nats;
  j["method"] = r.method;
  j["lambda"] = r.lambda;
  j["sigma_h"] = r.sigma_h;
  return j;
}

nlohmann::json readout_to_json(const ReadoutReport& r) {
  nlohmann::json j;
  j["err_test_pct"] = r.err_test_pct;
  j["err_forget_pct"] = r.err_forget_pct;
  j["err_retain_pct"] = r.err_retain_pct;
  j["relearn_epochs"] =
      r.relearn_epochs ? nlohmann::json(*r.relearn_epochs) : nlohmann::json();
  j["entropy"] = {{"edges", to_std(r.entropy.edges)},
                  {"retain", r.entropy.retain},
                  {"forget", r.entropy.forget},
                  {"test", r.entropy.test}};
  if (r.info_bound) j["info_bound"] = info_bound_to_json(*r.info_bound);
  return j;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) raise(Errc::IoError, "cannot write " + tmp.string());
    out << content;
    if (!out) raise(Errc::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace unlearn
