#include "kgqr/runner.hpp"

#include <algorithm>
#include <fstream>

namespace kgqr {

KgBundle load_kg_bundle(const RunConfig& cfg) {
  if (cfg.triples_train.empty() && cfg.triples_full.empty()) {
    throw ConfigError("triples_train", "no triple file configured");
  }
  KgBundle kgs{KnowledgeGraph::load(cfg.triples_full.empty() ? cfg.triples_train
                                                             : cfg.triples_full),
               std::nullopt};
  if (!cfg.triples_full.empty() && !cfg.triples_train.empty() &&
      cfg.triples_train != cfg.triples_full) {
    kgs.train_subset = KnowledgeGraph::load(cfg.triples_train, true, &kgs.full);
  }
  return kgs;
}

namespace {

std::vector<QueryType> parse_type_list(const std::vector<std::string>& names) {
  std::vector<QueryType> out;
  for (const std::string& name : names) {
    auto t = query_type_from_string(name);
    if (!t) throw ConfigError("query_types", "unknown query type: " + name);
    out.push_back(*t);
  }
  return out;
}

}  // namespace

MakeQueriesResult run_make_queries(const RunConfig& cfg) {
  KgBundle kgs = load_kg_bundle(cfg);
  const std::vector<QueryType> train_default = {
      QueryType::k1p,  QueryType::k2p,  QueryType::k3p,  QueryType::k2i,  QueryType::k3i,
      QueryType::k2in, QueryType::k3in, QueryType::kInp, QueryType::kPin, QueryType::kPni};
  std::vector<QueryType> requested = parse_type_list(cfg.query_types);

  MakeQueriesResult result;
  Rng seeds(cfg.train.seed);
  auto emit = [&](const std::string& path, const std::vector<QueryType>& split_types,
                  bool require_hard, std::uint64_t seed) -> std::size_t {
    if (path.empty()) return 0;
    // Training queries are grounded and labeled on the training graph alone;
    // valid/test splits see the full graph so hard answers can exist.
    const KnowledgeGraph& full_kg = require_hard ? kgs.full : kgs.train();
    auto instances = generate_queries(kgs.train(), full_kg, split_types, cfg.queries_per_type,
                                      seed, require_hard, cfg.max_tries);
    write_query_file(path, kgs.full, instances);
    return instances.size();
  };
  const bool split_hard = cfg.require_hard && kgs.train_subset.has_value();
  std::vector<QueryType> eval_types =
      requested.empty()
          ? std::vector<QueryType>(all_query_types().begin(), all_query_types().end())
          : requested;
  result.train_count = emit(cfg.queries_train, requested.empty() ? train_default : requested,
                            false, seeds.split("train").seed());
  result.valid_count = emit(cfg.queries_valid, eval_types, split_hard, seeds.split("valid").seed());
  result.test_count = emit(cfg.queries_test, eval_types, split_hard, seeds.split("test").seed());
  return result;
}

TrainRunResult run_train(const RunConfig& cfg, const MetricsSink& sink) {
  if (cfg.queries_train.empty()) throw ConfigError("queries_train", "train needs a query file");
  KgBundle kgs = load_kg_bundle(cfg);
  auto dataset = read_query_file(cfg.queries_train, kgs.full);

  Model model(&kgs.train(), cfg.train.model);
  if (!cfg.checkpoint_in.empty()) {
    model = load_checkpoint(cfg.checkpoint_in, kgs.train());
  } else {
    model.init(cfg.train.seed);
  }

  TrainResult tr = train_loop(kgs.train(), dataset, model, cfg.train, cfg.checkpoint_out, sink);
  TrainRunResult result;
  result.steps = tr.steps;
  result.final_loss = tr.final_loss;

  if (!cfg.queries_valid.empty()) {
    auto valid = read_query_file(cfg.queries_valid, kgs.full);
    result.validation = evaluate_model(model, valid);
    if (!cfg.report_out.empty()) {
      std::ofstream out(cfg.report_out);
      if (!out) throw DataError("cannot open report file: " + cfg.report_out);
      out << report_json(*result.validation).dump(2) << "\n";
    }
  }
  return result;
}

EvalRunResult run_eval(const RunConfig& cfg, const std::string& split) {
  if (cfg.checkpoint_in.empty()) throw ConfigError("checkpoint_in", "eval needs a checkpoint");
  const std::string queries_path = split == "valid" ? cfg.queries_valid : cfg.queries_test;
  if (queries_path.empty()) {
    throw ConfigError(split == "valid" ? "queries_valid" : "queries_test",
                      "eval needs a query file for the requested split");
  }
  KgBundle kgs = load_kg_bundle(cfg);
  Model model = load_checkpoint(cfg.checkpoint_in, kgs.train());
  auto instances = read_query_file(queries_path, kgs.full);

  EvalRunResult result;
  result.report = evaluate_model(model, instances);
  if (!cfg.baseline_report.empty()) {
    std::ifstream in(cfg.baseline_report);
    if (!in) throw DataError("cannot open baseline report: " + cfg.baseline_report);
    nlohmann::json doc;
    in >> doc;
    result.baseline = report_from_json(doc);
  }
  if (!cfg.report_out.empty()) {
    std::ofstream out(cfg.report_out);
    if (!out) throw DataError("cannot open report file: " + cfg.report_out);
    out << report_json(result.report, result.baseline ? &*result.baseline : nullptr).dump(2)
        << "\n";
  }
  return result;
}

std::vector<std::pair<std::string, double>> run_answer(const RunConfig& cfg,
                                                       const std::string& type_name,
                                                       const std::vector<std::string>& anchors,
                                                       const std::vector<std::string>& relations) {
  if (cfg.checkpoint_in.empty()) throw ConfigError("checkpoint_in", "answer needs a checkpoint");
  auto type = query_type_from_string(type_name);
  if (!type) throw ConfigError("type", "unknown query type: " + type_name);
  KgBundle kgs = load_kg_bundle(cfg);
  Model model = load_checkpoint(cfg.checkpoint_in, kgs.train());

  QueryGraph g = build_query_graph(kgs.full, *type, anchors, relations);
  Tape tape;
  TapeBinding binding = model.bind_params(tape);
  std::vector<Value> disjuncts = model.embed_query(tape, binding, g, true);
  std::vector<std::pair<double, EntityId>> scored;
  scored.reserve(kgs.full.entity_count());
  for (EntityId e = 0; e < kgs.full.entity_count(); ++e) {
    scored.emplace_back(tape.scalar_value(model.query_distance(tape, binding, e, disjuncts)), e);
  }
  std::stable_sort(scored.begin(), scored.end());
  const int k = std::min<int>(cfg.top_k, static_cast<int>(scored.size()));
  std::vector<std::pair<std::string, double>> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    out.emplace_back(kgs.full.entity_label(scored[i].second), scored[i].first);
  }
  return out;
}

}  // namespace kgqr
