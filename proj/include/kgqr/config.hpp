#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kgqr/trainer.hpp"

namespace kgqr {

// Flat JSON configuration shared by every subcommand. Unknown keys are
// rejected; defaults (including the preset block) are materialized into the
// echoed document.
struct RunConfig {
  std::string preset = "paper";  // "paper" or "desk" default block

  // Paths.
  std::string triples_train;
  std::string triples_full;
  std::string queries_train;
  std::string queries_valid;
  std::string queries_test;
  std::string checkpoint_in;
  std::string checkpoint_out;
  std::string report_out;
  std::string metrics_out;
  std::string baseline_report;

  TrainConfig train;

  // make-queries
  int queries_per_type = 100;
  std::vector<std::string> query_types;  // empty: all 14 for eval, 10 for train
  bool require_hard = true;
  int max_tries = 200;

  // answer
  int top_k = 10;

  // bench-context
  int bench_calls = 1000;
};

RunConfig default_config(const std::string& preset = "paper");
RunConfig parse_config_json(const nlohmann::json& doc);
RunConfig parse_config(const std::string& path);
nlohmann::ordered_json echo_config(const RunConfig& cfg);

}  // namespace kgqr
