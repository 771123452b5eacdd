#include "kgqr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace kgqr {

double EvalReport::avg_mrr() const {
  if (per_type.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& [name, m] : per_type) acc += m.mrr;
  return acc / static_cast<double>(per_type.size());
}

double filtered_rank(const std::vector<double>& distances, EntityId target,
                     const std::vector<EntityId>& filter_out) {
  std::unordered_set<EntityId> filtered(filter_out.begin(), filter_out.end());
  if (filtered.contains(target)) throw TargetFilteredError("target entity is filtered out");
  if (target >= distances.size()) throw IdOutOfRangeError("target id out of range");
  const double target_dist = distances[target];
  long long smaller = 0, equal_others = 0;
  for (EntityId e = 0; e < distances.size(); ++e) {
    if (e == target || filtered.contains(e)) continue;
    if (distances[e] < target_dist) {
      ++smaller;
    } else if (distances[e] == target_dist) {
      ++equal_others;
    }
  }
  return 1.0 + static_cast<double>(smaller) + static_cast<double>(equal_others) / 2.0;
}

EvalReport aggregate_metrics(const std::map<std::string, std::vector<double>>& ranks_by_type) {
  EvalReport report;
  for (const auto& [name, ranks] : ranks_by_type) {
    if (ranks.empty()) throw EmptyGroupError("no ranks for query type " + name);
    TypeMetrics m;
    m.count = static_cast<long long>(ranks.size());
    for (double r : ranks) {
      m.mrr += 1.0 / r;
      m.hits1 += r <= 1.0 ? 1.0 : 0.0;
      m.hits3 += r <= 3.0 ? 1.0 : 0.0;
      m.hits10 += r <= 10.0 ? 1.0 : 0.0;
    }
    const double inv = 1.0 / static_cast<double>(ranks.size());
    m.mrr *= inv;
    m.hits1 *= inv;
    m.hits3 *= inv;
    m.hits10 *= inv;
    report.per_type.emplace(name, m);
  }
  return report;
}

double improvement_percent(const EvalReport& base, const EvalReport& ours) {
  if (base.per_type.size() != ours.per_type.size()) {
    throw CoverageMismatchError("reports cover different query-type sets");
  }
  for (const auto& [name, m] : base.per_type) {
    if (!ours.per_type.contains(name)) {
      throw CoverageMismatchError("reports cover different query-type sets: " + name);
    }
  }
  return 100.0 * (ours.avg_mrr() - base.avg_mrr()) / base.avg_mrr();
}

std::vector<double> all_entity_distances(const Model& model, const QueryInstance& inst) {
  Tape tape;
  TapeBinding binding = model.bind_params(tape);
  std::vector<Value> disjuncts = model.embed_query(tape, binding, inst.graph(), true);
  const std::size_t nv = model.kg().entity_count();
  std::vector<double> out(nv);
  for (EntityId e = 0; e < nv; ++e) {
    out[e] = tape.scalar_value(model.query_distance(tape, binding, e, disjuncts));
  }
  return out;
}

EvalReport evaluate_model(const Model& model, const std::vector<QueryInstance>& instances) {
  std::map<std::string, std::vector<double>> ranks_by_type;
  long long skipped = 0;
  for (const QueryInstance& inst : instances) {
    if (inst.degenerate()) {
      ++skipped;
      continue;
    }
    const std::vector<EntityId>& targets =
        inst.hard_answers.empty() ? inst.easy_answers : inst.hard_answers;
    std::vector<double> distances = all_entity_distances(model, inst);
    std::vector<EntityId> all_answers = inst.easy_answers;
    all_answers.insert(all_answers.end(), inst.hard_answers.begin(), inst.hard_answers.end());
    for (EntityId target : targets) {
      std::vector<EntityId> filter;
      filter.reserve(all_answers.size());
      for (EntityId a : all_answers) {
        if (a != target) filter.push_back(a);
      }
      ranks_by_type[std::string(to_string(inst.type))].push_back(
          filtered_rank(distances, target, filter));
    }
  }
  EvalReport report = aggregate_metrics(ranks_by_type);
  report.skipped_degenerate = skipped;
  return report;
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "type        MRR   Hits@1  Hits@3  Hits@10   n\n";
  char line[128];
  for (const auto& [name, m] : report.per_type) {
    std::snprintf(line, sizeof(line), "%-8s %6.4f  %6.4f  %6.4f  %6.4f  %6lld\n", name.c_str(),
                  m.mrr, m.hits1, m.hits3, m.hits10, m.count);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-8s %6.4f\n", "Avg", report.avg_mrr());
  out << line;
  return out.str();
}

nlohmann::ordered_json report_json(const EvalReport& report, const EvalReport* baseline) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json types;
  for (const auto& [name, m] : report.per_type) {
    types[name] = {{"mrr", m.mrr},
                   {"hits1", m.hits1},
                   {"hits3", m.hits3},
                   {"hits10", m.hits10},
                   {"count", m.count}};
  }
  doc["per_type"] = std::move(types);
  doc["avg_mrr"] = report.avg_mrr();
  doc["skipped_degenerate"] = report.skipped_degenerate;
  if (baseline != nullptr) {
    doc["baseline_avg_mrr"] = baseline->avg_mrr();
    doc["improvement_percent"] = improvement_percent(*baseline, report);
  }
  return doc;
}

EvalReport report_from_json(const nlohmann::json& doc) {
  EvalReport report;
  for (const auto& [name, m] : doc.at("per_type").items()) {
    TypeMetrics tm;
    tm.mrr = m.at("mrr").get<double>();
    tm.hits1 = m.at("hits1").get<double>();
    tm.hits3 = m.at("hits3").get<double>();
    tm.hits10 = m.at("hits10").get<double>();
    tm.count = m.at("count").get<long long>();
    report.per_type.emplace(name, tm);
  }
  if (doc.contains("skipped_degenerate")) {
    report.skipped_degenerate = doc["skipped_degenerate"].get<long long>();
  }
  return report;
}

}  // namespace kgqr
