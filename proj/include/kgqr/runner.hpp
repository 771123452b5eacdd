#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kgqr/config.hpp"
#include "kgqr/evaluator.hpp"

namespace kgqr {

// Shared back end for the CLI subcommands and the python bindings.

struct KgBundle {
  KnowledgeGraph full;  // vocabulary owner
  std::optional<KnowledgeGraph> train_subset;

  const KnowledgeGraph& train() const { return train_subset ? *train_subset : full; }
};

KgBundle load_kg_bundle(const RunConfig& cfg);

struct MakeQueriesResult {
  std::size_t train_count = 0;
  std::size_t valid_count = 0;
  std::size_t test_count = 0;
};
MakeQueriesResult run_make_queries(const RunConfig& cfg);

struct TrainRunResult {
  long long steps = 0;
  double final_loss = 0.0;
  std::optional<EvalReport> validation;
};
TrainRunResult run_train(const RunConfig& cfg, const MetricsSink& sink = nullptr);

struct EvalRunResult {
  EvalReport report;
  std::optional<EvalReport> baseline;
};
EvalRunResult run_eval(const RunConfig& cfg, const std::string& split);

// Top-k (label, distance) pairs, ascending distance, ties by entity id.
std::vector<std::pair<std::string, double>> run_answer(const RunConfig& cfg,
                                                       const std::string& type_name,
                                                       const std::vector<std::string>& anchors,
                                                       const std::vector<std::string>& relations);

}  // namespace kgqr
