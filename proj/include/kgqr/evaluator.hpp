#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgqr/model.hpp"
#include "kgqr/oracle.hpp"

namespace kgqr {

struct TypeMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  long long count = 0;
};

struct EvalReport {
  std::map<std::string, TypeMetrics> per_type;  // keyed by query-type name
  long long skipped_degenerate = 0;

  // Unweighted mean over query types.
  double avg_mrr() const;
};

// Filtered rank with mid-rank tie handling:
// 1 + #{strictly smaller} + #{equal, not target} / 2. filter_out entities are
// ignored entirely; the target must not be filtered.
double filtered_rank(const std::vector<double>& distances, EntityId target,
                     const std::vector<EntityId>& filter_out);

// MRR = mean(1/rank); Hits@k = mean(rank <= k); one group per query type.
EvalReport aggregate_metrics(const std::map<std::string, std::vector<double>>& ranks_by_type);

// 100 * (ours.avg - base.avg) / base.avg; both reports must cover the same
// query types.
double improvement_percent(const EvalReport& base, const EvalReport& ours);

// Full protocol: each hard answer (or easy answer when no hard ones exist,
// e.g. training-split evaluation) is ranked against all entities with
// filter_out = (easy ∪ hard) \ {target}.
EvalReport evaluate_model(const Model& model, const std::vector<QueryInstance>& instances);

// Distances from one embedded query to every entity, in entity-id order.
std::vector<double> all_entity_distances(const Model& model, const QueryInstance& inst);

std::string report_table(const EvalReport& report);
nlohmann::ordered_json report_json(const EvalReport& report, const EvalReport* baseline = nullptr);
EvalReport report_from_json(const nlohmann::json& doc);

}  // namespace kgqr
