/**
 * @file config.hpp
 * @brief Experiment configuration: JSON parsing, schema validation with
 *        pointered errors, and the reproducible result envelope.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "pdhjb/bsde.hpp"
#include "pdhjb/model.hpp"
#include "pdhjb/value.hpp"

namespace pdhjb::cli {

using nlohmann::json;

/// Schema violation with a JSON-pointer location; the CLI exits 2 on it.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message) {}
};

struct ExperimentConfig {
  json raw;  // fully resolved (defaults applied)
  std::uint64_t input_hash = 0;  // content hash of the config file bytes

  ControlModel model = make_uncontrolled();
  double dt = 1e-3;
  int n_paths = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  FeatureBasis basis;
  json task;  // subcommand-specific block
};

/// Parse + validate; applies defaults and records them back into raw (no
/// hidden defaults in the envelope). Throws SchemaError with a pointer.
ExperimentConfig load_config(const std::string& filename,
                             std::optional<std::uint64_t> seed_override,
                             std::optional<int> threads_override);

/// Policy / policy-class construction from their config blocks.
Policy policy_from_json(const json& spec, const ControlModel& model);
PolicyClass policy_class_from_json(const json& spec, const ControlModel& model);

std::uint64_t fnv1a(const std::string& s);

/// Envelope = resolved config + hashes + deterministic payload + pass flag.
/// The payload section is byte-identical across reruns of the same config.
json make_envelope(const ExperimentConfig& cfg, const json& payload, bool pass);

/// Serialize and write envelope.json (and report the payload hash).
void write_envelope(const json& envelope, const std::string& out_dir);

}  // namespace pdhjb::cli
