#include "config.hpp"

#include <chrono>
#include <iterator>
#include <filesystem>
#include <fstream>

namespace pdhjb::cli {

namespace {

const json* find(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double require_number(const json& j, const std::string& ptr, const std::string& key) {
  const json* v = find(j, key);
  if (!v) throw SchemaError(ptr + "/" + key, "required field is missing");
  if (!v->is_number()) throw SchemaError(ptr + "/" + key, "must be a number");
  return v->get<double>();
}

double number_or(const json& j, const std::string& ptr, const std::string& key, double dflt) {
  const json* v = find(j, key);
  if (!v) return dflt;
  if (!v->is_number()) throw SchemaError(ptr + "/" + key, "must be a number");
  return v->get<double>();
}

std::string require_string(const json& j, const std::string& ptr, const std::string& key) {
  const json* v = find(j, key);
  if (!v) throw SchemaError(ptr + "/" + key, "required field is missing");
  if (!v->is_string()) throw SchemaError(ptr + "/" + key, "must be a string");
  return v->get<std::string>();
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ExperimentConfig load_config(const std::string& filename,
                             std::optional<std::uint64_t> seed_override,
                             std::optional<int> threads_override) {
  std::ifstream in(filename);
  if (!in) throw SchemaError("", "cannot open config file " + filename);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json raw;
  try {
    raw = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  if (!raw.is_object()) throw SchemaError("", "config root must be an object");

  ExperimentConfig cfg;
  cfg.input_hash = fnv1a(bytes);

  const json* model_block = find(raw, "model");
  if (!model_block || !model_block->is_object())
    throw SchemaError("/model", "required object is missing");

  const json* coeff = find(*model_block, "coefficients");
  if (!coeff || !coeff->is_object())
    throw SchemaError("/model/coefficients", "required object is missing");
  const std::string preset = require_string(*coeff, "/model/coefficients", "preset");

  PresetParams params;
  params.horizon = number_or(*model_block, "/model", "horizon", 1.0);
  if (!(params.horizon > 0.0)) throw SchemaError("/model/horizon", "must be positive");
  params.n_modes = static_cast<int>(number_or(*coeff, "/model/coefficients", "n_modes", 0));
  try {
    cfg.model = make_preset(preset, params);
  } catch (const std::invalid_argument& e) {
    throw SchemaError("/model/coefficients/preset", e.what());
  }

  if (const json* op = find(*model_block, "operator")) {
    if (!op->is_object()) throw SchemaError("/model/operator", "must be an object");
    const std::string op_preset = require_string(*op, "/model/operator", "preset");
    const int n = static_cast<int>(number_or(*op, "/model/operator", "n_modes", cfg.model.dim()));
    if (n != cfg.model.dim())
      throw SchemaError("/model/operator/n_modes",
                        "must match the coefficient preset dimension");
    try {
      cfg.model.op = SpectralOperator::preset(op_preset, n);
    } catch (const std::invalid_argument& e) {
      throw SchemaError("/model/operator/preset", e.what());
    }
  }

  if (const json* ctrl = find(*model_block, "controls")) {
    if (!ctrl->is_object()) throw SchemaError("/model/controls", "must be an object");
    const double lo = require_number(*ctrl, "/model/controls", "lo");
    const double hi = require_number(*ctrl, "/model/controls", "hi");
    const double step = require_number(*ctrl, "/model/controls", "step");
    if (!(step > 0.0) || hi < lo) throw SchemaError("/model/controls", "need lo <= hi, step > 0");
    cfg.model.controls = ControlSet::uniform(lo, hi, step);
  }

  const json* num = find(raw, "numerics");
  if (!num || !num->is_object()) throw SchemaError("/numerics", "required object is missing");
  cfg.dt = require_number(*num, "/numerics", "dt");
  if (!(cfg.dt > 0.0)) throw SchemaError("/numerics/dt", "must be positive");
  {
    const double steps = cfg.model.horizon / cfg.dt;
    if (std::abs(steps - std::lround(steps)) > 1e-9 * std::max(1.0, steps))
      throw SchemaError("/numerics/dt", "must divide the horizon");
  }
  cfg.n_paths = static_cast<int>(require_number(*num, "/numerics", "n_paths"));
  if (cfg.n_paths < 1) throw SchemaError("/numerics/n_paths", "must be at least 1");
  const json* seed = find(*num, "seed");
  if (!seed || !seed->is_number_unsigned())
    throw SchemaError("/numerics/seed", "required unsigned integer is missing");
  cfg.seed = seed->get<std::uint64_t>();
  cfg.threads = static_cast<int>(number_or(*num, "/numerics", "threads", 1));
  if (cfg.threads < 1) throw SchemaError("/numerics/threads", "must be at least 1");
  if (const json* reg = find(*num, "regression")) {
    if (!reg->is_object()) throw SchemaError("/numerics/regression", "must be an object");
    cfg.basis.degree = static_cast<int>(number_or(*reg, "/numerics/regression", "degree", 3));
    if (cfg.basis.degree < 1 || cfg.basis.degree > 7)
      throw SchemaError("/numerics/regression/degree", "must be in 1..7");
    if (const json* rm = find(*reg, "use_runmax")) {
      if (!rm->is_boolean()) throw SchemaError("/numerics/regression/use_runmax", "must be a bool");
      cfg.basis.use_runmax = rm->get<bool>();
    }
  }

  if (const json* task = find(raw, "task")) {
    if (!task->is_object()) throw SchemaError("/task", "must be an object");
    cfg.task = *task;
  } else {
    cfg.task = json::object();
  }

  if (seed_override) cfg.seed = *seed_override;
  if (threads_override) cfg.threads = *threads_override;

  // Resolved config (defaults + overrides made explicit) for the envelope.
  cfg.raw = raw;
  cfg.raw["model"]["horizon"] = cfg.model.horizon;
  cfg.raw["numerics"]["dt"] = cfg.dt;
  cfg.raw["numerics"]["n_paths"] = cfg.n_paths;
  cfg.raw["numerics"]["seed"] = cfg.seed;
  cfg.raw["numerics"]["threads"] = cfg.threads;
  cfg.raw["numerics"]["regression"] = {{"degree", cfg.basis.degree},
                                       {"use_runmax", cfg.basis.use_runmax}};
  cfg.raw["task"] = cfg.task;
  return cfg;
}

Policy policy_from_json(const json& spec, const ControlModel& model) {
  if (!spec.is_object()) throw SchemaError("/task/policy", "must be an object");
  const std::string kind = require_string(spec, "/task/policy", "kind");
  if (kind == "constant") {
    const double u = require_number(spec, "/task/policy", "u");
    if (!model.controls.contains(u))
      throw SchemaError("/task/policy/u", "not a point of the control grid");
    return make_constant_policy(u);
  }
  if (kind == "feedback") {
    const double gain = require_number(spec, "/task/policy", "gain");
    return make_endpoint_feedback_policy(gain, model.controls);
  }
  throw SchemaError("/task/policy/kind", "unknown policy kind: " + kind);
}

PolicyClass policy_class_from_json(const json& spec, const ControlModel& model) {
  if (!spec.is_object()) throw SchemaError("/task/policy_class", "must be an object");
  const std::string kind = require_string(spec, "/task/policy_class", "kind");
  if (kind == "singleton") {
    const double u = number_or(spec, "/task/policy_class", "u", model.controls.values()[0]);
    if (!model.controls.contains(u))
      throw SchemaError("/task/policy_class/u", "not a point of the control grid");
    return make_singleton_class(u);
  }
  if (kind == "feedback") {
    const json* gains = find(spec, "gains");
    if (!gains || !gains->is_array())
      throw SchemaError("/task/policy_class/gains", "required array is missing");
    std::vector<double> g;
    for (const auto& v : *gains) {
      if (!v.is_number()) throw SchemaError("/task/policy_class/gains", "entries must be numbers");
      g.push_back(v.get<double>());
    }
    return make_feedback_class(g, model.controls);
  }
  if (kind == "open-loop") {
    const json* nodes = find(spec, "switch_nodes");
    std::vector<int> sw;
    if (nodes) {
      if (!nodes->is_array())
        throw SchemaError("/task/policy_class/switch_nodes", "must be an array");
      for (const auto& v : *nodes) sw.push_back(v.get<int>());
    }
    return make_open_loop_class(model.controls, sw);
  }
  throw SchemaError("/task/policy_class/kind", "unknown policy class kind: " + kind);
}

json make_envelope(const ExperimentConfig& cfg, const json& payload, bool pass) {
  json env;
  env["config"] = cfg.raw;
  env["config_hash"] = fnv1a(cfg.raw.dump());
  env["input_hash"] = cfg.input_hash;
  env["model_hash"] = model_hash(cfg.model);
  env["payload"] = payload;
  env["payload_hash"] = fnv1a(payload.dump());
  env["pass"] = pass;
  const auto now = std::chrono::system_clock::now();
  env["created_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  return env;
}

void write_envelope(const json& envelope, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/envelope.json");
  if (!out) throw std::runtime_error("cannot write envelope into " + out_dir);
  out << envelope.dump(2) << "\n";
}

}  // namespace pdhjb::cli
