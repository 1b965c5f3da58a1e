#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "unlearn/infobound.hpp"
#include "unlearn/scrub.hpp"

namespace unlearn {

// Binary weight checkpoint: "UWV1" magic, u32 model-id length, model id,
// u64 parameter count, then the raw little-endian f64 values.
void save_weights(const WeightVector& w, const std::filesystem::path& path);
WeightVector load_weights(const std::filesystem::path& path);

// ScrubResult sidecar (method, hyperparameters, noise covariance, mean).
// The scrubbed weights themselves live in a checkpoint next to the sidecar
// and are passed back in when reloading.
nlohmann::json scrub_result_to_json(const ScrubResult& r);
ScrubResult scrub_result_from_json(const nlohmann::json& j,
                                   const ModelSpec& spec,
                                   WeightVector weights);

nlohmann::json info_bound_to_json(const InfoBoundReport& r);
nlohmann::json readout_to_json(const ReadoutReport& r);

// Atomic text write (temp file + rename).
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

}  // namespace unlearn
