#include "kgqr/config.hpp"

#include <fstream>
#include <set>

namespace kgqr {

RunConfig default_config(const std::string& preset) {
  RunConfig cfg;
  cfg.preset = preset;
  if (preset == "paper") {
    cfg.train.model.dim = 64;
    cfg.train.model.dim_pos = 108;
    cfg.train.model.dim_rol = 108;
    cfg.train.model.dim_type = 108;
    cfg.train.model.context_samples = 120;
    cfg.train.negatives = 128;
    cfg.train.batch_size = 128;
    cfg.train.lr = 1e-4;
  } else if (preset == "desk") {
    cfg.train.model.dim = 16;
    cfg.train.model.dim_pos = 16;
    cfg.train.model.dim_rol = 16;
    cfg.train.model.dim_type = 16;
    cfg.train.model.context_samples = 16;
    cfg.train.negatives = 16;
    cfg.train.batch_size = 32;
    cfg.train.lr = 1e-3;
    cfg.train.max_steps = 500;
  } else {
    throw ConfigError("preset", "expected \"paper\" or \"desk\"");
  }
  cfg.train.gamma = 24.0;
  cfg.train.model.init_range = cfg.train.gamma / cfg.train.model.dim;
  return cfg;
}

namespace {

template <typename T>
T require_type(const nlohmann::json& v, const std::string& key);

template <>
double require_type<double>(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

template <>
long long require_type<long long>(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<long long>();
}

template <>
bool require_type<bool>(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key, "expected a boolean");
  return v.get<bool>();
}

template <>
std::string require_type<std::string>(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

int require_int(const nlohmann::json& v, const std::string& key) {
  return static_cast<int>(require_type<long long>(v, key));
}

}  // namespace

RunConfig parse_config_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  std::string preset = "paper";
  if (doc.contains("preset")) preset = require_type<std::string>(doc["preset"], "preset");
  RunConfig cfg = default_config(preset);

  const std::set<std::string> known = {
      "preset",          "triples_train",   "triples_full",   "queries_train",
      "queries_valid",   "queries_test",    "checkpoint_in",  "checkpoint_out",
      "report_out",      "metrics_out",     "baseline_report", "backend",
      "dim",             "dim_pos",         "dim_rol",        "dim_type",
      "alpha_in",        "K",               "gamma",          "negatives",
      "lr",              "batch_size",      "variance_weight", "max_steps",
      "checkpoint_interval", "seed",        "workers",        "fp32_params",
      "use_position",    "use_role",        "use_type",       "use_relation",
      "use_integration", "queries_per_type", "query_types",   "require_hard",
      "max_tries",       "top_k",           "bench_calls",    "init_range"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ConfigError(key, "unknown key");
  }

  auto str = [&](const char* key, std::string& out) {
    if (doc.contains(key)) out = require_type<std::string>(doc[key], key);
  };
  str("triples_train", cfg.triples_train);
  str("triples_full", cfg.triples_full);
  str("queries_train", cfg.queries_train);
  str("queries_valid", cfg.queries_valid);
  str("queries_test", cfg.queries_test);
  str("checkpoint_in", cfg.checkpoint_in);
  str("checkpoint_out", cfg.checkpoint_out);
  str("report_out", cfg.report_out);
  str("metrics_out", cfg.metrics_out);
  str("baseline_report", cfg.baseline_report);

  bool dim_given = false;
  if (doc.contains("backend")) {
    auto b = backend_from_string(require_type<std::string>(doc["backend"], "backend"));
    if (!b) throw ConfigError("backend", "expected \"box\" or \"beta\"");
    cfg.train.model.backend = *b;
  }
  if (doc.contains("dim")) {
    cfg.train.model.dim = require_int(doc["dim"], "dim");
    if (cfg.train.model.dim < 1) throw ConfigError("dim", "must be positive");
    dim_given = true;
  }
  if (doc.contains("dim_pos")) {
    cfg.train.model.dim_pos = require_int(doc["dim_pos"], "dim_pos");
    if (cfg.train.model.dim_pos < 1) throw ConfigError("dim_pos", "must be positive");
  }
  if (doc.contains("dim_rol")) {
    cfg.train.model.dim_rol = require_int(doc["dim_rol"], "dim_rol");
    if (cfg.train.model.dim_rol < 1) throw ConfigError("dim_rol", "must be positive");
  }
  if (doc.contains("dim_type")) {
    cfg.train.model.dim_type = require_int(doc["dim_type"], "dim_type");
    if (cfg.train.model.dim_type < 1) throw ConfigError("dim_type", "must be positive");
  }
  if (doc.contains("alpha_in")) {
    cfg.train.model.alpha_in = require_type<double>(doc["alpha_in"], "alpha_in");
    if (cfg.train.model.alpha_in < 0) throw ConfigError("alpha_in", "must be nonnegative");
  }
  if (doc.contains("K")) {
    cfg.train.model.context_samples = require_int(doc["K"], "K");
    if (cfg.train.model.context_samples < 0) throw ConfigError("K", "must be nonnegative");
  }
  if (doc.contains("gamma")) {
    cfg.train.gamma = require_type<double>(doc["gamma"], "gamma");
    if (cfg.train.gamma <= 0) throw ConfigError("gamma", "must be positive");
  }
  if (doc.contains("negatives")) {
    cfg.train.negatives = require_int(doc["negatives"], "negatives");
    if (cfg.train.negatives < 1) throw ConfigError("negatives", "must be at least 1");
  }
  if (doc.contains("lr")) {
    cfg.train.lr = require_type<double>(doc["lr"], "lr");
    if (cfg.train.lr <= 0) throw ConfigError("lr", "must be positive");
  }
  if (doc.contains("batch_size")) {
    cfg.train.batch_size = require_int(doc["batch_size"], "batch_size");
    if (cfg.train.batch_size < 1) throw ConfigError("batch_size", "must be positive");
  }
  if (doc.contains("variance_weight")) {
    cfg.train.variance_weight = require_type<double>(doc["variance_weight"], "variance_weight");
    if (cfg.train.variance_weight < 0) throw ConfigError("variance_weight", "must be nonnegative");
  }
  if (doc.contains("max_steps")) {
    cfg.train.max_steps = require_type<long long>(doc["max_steps"], "max_steps");
    if (cfg.train.max_steps < 1) throw ConfigError("max_steps", "must be positive");
  }
  if (doc.contains("checkpoint_interval")) {
    cfg.train.checkpoint_interval =
        require_type<long long>(doc["checkpoint_interval"], "checkpoint_interval");
    if (cfg.train.checkpoint_interval < 0) {
      throw ConfigError("checkpoint_interval", "must be nonnegative");
    }
  }
  if (doc.contains("seed")) {
    long long s = require_type<long long>(doc["seed"], "seed");
    if (s < 0) throw ConfigError("seed", "must be nonnegative");
    cfg.train.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("workers")) {
    cfg.train.workers = require_int(doc["workers"], "workers");
    if (cfg.train.workers < 1) throw ConfigError("workers", "must be at least 1");
  }
  if (doc.contains("fp32_params")) {
    cfg.train.fp32_params = require_type<bool>(doc["fp32_params"], "fp32_params");
  }
  if (doc.contains("init_range")) {
    cfg.train.model.init_range = require_type<double>(doc["init_range"], "init_range");
    if (cfg.train.model.init_range <= 0) throw ConfigError("init_range", "must be positive");
  } else if (dim_given) {
    cfg.train.model.init_range = cfg.train.gamma / cfg.train.model.dim;
  }

  auto flag = [&](const char* key, bool& out) {
    if (doc.contains(key)) out = require_type<bool>(doc[key], key);
  };
  flag("use_position", cfg.train.model.use_position);
  flag("use_role", cfg.train.model.use_role);
  flag("use_type", cfg.train.model.use_type);
  flag("use_relation", cfg.train.model.use_relation);
  flag("use_integration", cfg.train.model.use_integration);

  if (doc.contains("queries_per_type")) {
    cfg.queries_per_type = require_int(doc["queries_per_type"], "queries_per_type");
    if (cfg.queries_per_type < 1) throw ConfigError("queries_per_type", "must be positive");
  }
  if (doc.contains("query_types")) {
    if (!doc["query_types"].is_array()) throw ConfigError("query_types", "expected a list");
    for (const auto& item : doc["query_types"]) {
      std::string name = require_type<std::string>(item, "query_types");
      if (!query_type_from_string(name)) {
        throw ConfigError("query_types", "unknown query type: " + name);
      }
      cfg.query_types.push_back(std::move(name));
    }
  }
  flag("require_hard", cfg.require_hard);
  if (doc.contains("max_tries")) {
    cfg.max_tries = require_int(doc["max_tries"], "max_tries");
    if (cfg.max_tries < 1) throw ConfigError("max_tries", "must be positive");
  }
  if (doc.contains("top_k")) {
    cfg.top_k = require_int(doc["top_k"], "top_k");
    if (cfg.top_k < 1) throw ConfigError("top_k", "must be positive");
  }
  if (doc.contains("bench_calls")) {
    cfg.bench_calls = require_int(doc["bench_calls"], "bench_calls");
    if (cfg.bench_calls < 1) throw ConfigError("bench_calls", "must be positive");
  }

  // The context-sample seed is derived from the run seed unless training
  // resumes from a checkpoint (the checkpoint pins it).
  cfg.train.model.context_seed = Rng(cfg.train.seed).split("context").seed();
  cfg.train.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
  return parse_config_json(doc);
}

nlohmann::ordered_json echo_config(const RunConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["preset"] = cfg.preset;
  doc["triples_train"] = cfg.triples_train;
  doc["triples_full"] = cfg.triples_full;
  doc["queries_train"] = cfg.queries_train;
  doc["queries_valid"] = cfg.queries_valid;
  doc["queries_test"] = cfg.queries_test;
  doc["checkpoint_in"] = cfg.checkpoint_in;
  doc["checkpoint_out"] = cfg.checkpoint_out;
  doc["report_out"] = cfg.report_out;
  doc["metrics_out"] = cfg.metrics_out;
  doc["baseline_report"] = cfg.baseline_report;
  doc["backend"] = std::string(to_string(cfg.train.model.backend));
  doc["dim"] = cfg.train.model.dim;
  doc["dim_pos"] = cfg.train.model.dim_pos;
  doc["dim_rol"] = cfg.train.model.dim_rol;
  doc["dim_type"] = cfg.train.model.dim_type;
  doc["alpha_in"] = cfg.train.model.alpha_in;
  doc["K"] = cfg.train.model.context_samples;
  doc["init_range"] = cfg.train.model.init_range;
  doc["gamma"] = cfg.train.gamma;
  doc["negatives"] = cfg.train.negatives;
  doc["lr"] = cfg.train.lr;
  doc["batch_size"] = cfg.train.batch_size;
  doc["variance_weight"] = cfg.train.variance_weight;
  doc["max_steps"] = cfg.train.max_steps;
  doc["checkpoint_interval"] = cfg.train.checkpoint_interval;
  doc["seed"] = cfg.train.seed;
  doc["workers"] = cfg.train.workers;
  doc["fp32_params"] = cfg.train.fp32_params;
  doc["use_position"] = cfg.train.model.use_position;
  doc["use_role"] = cfg.train.model.use_role;
  doc["use_type"] = cfg.train.model.use_type;
  doc["use_relation"] = cfg.train.model.use_relation;
  doc["use_integration"] = cfg.train.model.use_integration;
  doc["queries_per_type"] = cfg.queries_per_type;
  doc["query_types"] = cfg.query_types;
  doc["require_hard"] = cfg.require_hard;
  doc["max_tries"] = cfg.max_tries;
  doc["top_k"] = cfg.top_k;
  doc["bench_calls"] = cfg.bench_calls;
  return doc;
}

}  // namespace kgqr
