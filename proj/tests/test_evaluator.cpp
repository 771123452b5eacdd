#include <doctest.h>

#include <algorithm>

#include "kgqr/evaluator.hpp"
#include "kgqr/synthetic.hpp"
#include "test_helpers.hpp"

using namespace kgqr;

TEST_SUITE("evaluator") {

TEST_CASE("filtered rank pinned cases") {
  std::vector<double> d = {5.0, 1.0, 3.0, 3.0, 3.0};
  CHECK(filtered_rank(d, 1, {}) == 1.0);
  // Three-way tie including the target: 1 + 1 (strictly smaller) ... the tie
  // group {2,3,4} shares distance 3; target 2 sees one smaller entry and two
  // equal non-targets -> 1 + 1 + 2/2 = 3.
  CHECK(filtered_rank(d, 2, {}) == 3.0);
  // With the smaller entry filtered the tie resolves to 1 + 0 + 2/2 = 2.
  CHECK(filtered_rank(d, 2, {1}) == 2.0);
  // All non-targets filtered.
  CHECK(filtered_rank(d, 0, {1, 2, 3, 4}) == 1.0);
  CHECK_THROWS_AS(filtered_rank(d, 2, {2}), TargetFilteredError);
}

TEST_CASE("pure three-way tie gives rank 2") {
  std::vector<double> d = {7.0, 7.0, 7.0};
  CHECK(filtered_rank(d, 0, {}) == 2.0);
  CHECK(filtered_rank(d, 1, {}) == 2.0);
  CHECK(filtered_rank(d, 2, {}) == 2.0);
}

TEST_CASE("ranks are invariant under monotone distance transforms") {
  Rng rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> d(20);
    for (double& x : d) x = rng.uniform(0.0, 5.0);
    if (rep % 3 == 0) d[5] = d[7];  // force occasional ties
    std::vector<double> mapped(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) mapped[i] = 2.5 * d[i] + 7.0;
    EntityId target = static_cast<EntityId>(rng.below(d.size()));
    std::vector<EntityId> filter;
    for (EntityId e = 0; e < d.size(); ++e) {
      if (e != target && rng.below(4) == 0) filter.push_back(e);
    }
    CHECK(filtered_rank(d, target, filter) == filtered_rank(mapped, target, filter));
  }
}

TEST_CASE("aggregate metrics pinned values") {
  std::map<std::string, std::vector<double>> ranks;
  ranks["1p"] = {1.0, 2.0, 4.0};
  EvalReport report = aggregate_metrics(ranks);
  CHECK(report.per_type["1p"].mrr == doctest::Approx(0.5833333333333334).epsilon(1e-12));
  CHECK(report.per_type["1p"].hits3 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(report.per_type["1p"].hits1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(report.per_type["1p"].hits10 == 1.0);
  CHECK(report.per_type["1p"].count == 3);
  CHECK(report.avg_mrr() == doctest::Approx(report.per_type["1p"].mrr));

  std::map<std::string, std::vector<double>> perfect;
  perfect["2i"] = {1.0, 1.0};
  EvalReport p = aggregate_metrics(perfect);
  CHECK(p.per_type["2i"].mrr == 1.0);
  CHECK(p.per_type["2i"].hits1 == 1.0);

  std::map<std::string, std::vector<double>> bad;
  bad["2p"] = {};
  CHECK_THROWS_AS(aggregate_metrics(bad), EmptyGroupError);
}

TEST_CASE("aggregation ignores instance order") {
  std::map<std::string, std::vector<double>> a, b;
  a["1p"] = {1.0, 3.0, 7.0, 2.0};
  b["1p"] = {7.0, 2.0, 1.0, 3.0};
  CHECK(aggregate_metrics(a).per_type["1p"].mrr ==
        aggregate_metrics(b).per_type["1p"].mrr);
}

TEST_CASE("improvement percentages match the reported table arithmetic") {
  EvalReport base, ours;
  base.per_type["1p"] = {0.2257, 0, 0, 0, 10};
  ours.per_type["1p"] = {0.2697, 0, 0, 0, 10};
  CHECK(improvement_percent(base, ours) == doctest::Approx(19.5).epsilon(0.01));

  EvalReport b2, o2;
  b2.per_type["1p"] = {0.2331, 0, 0, 0, 10};
  o2.per_type["1p"] = {0.2367, 0, 0, 0, 10};
  CHECK(improvement_percent(b2, o2) == doctest::Approx(1.5).epsilon(0.05));

  CHECK(improvement_percent(base, base) == 0.0);

  EvalReport mismatch;
  mismatch.per_type["2p"] = {0.5, 0, 0, 0, 1};
  CHECK_THROWS_AS(improvement_percent(base, mismatch), CoverageMismatchError);
}

TEST_CASE("evaluate_model ranks hard answers under the filtered protocol") {
  KnowledgeGraph kg = make_random_kg(25, 2, 130, 33);
  ModelConfig mc;
  mc.backend = Backend::kBox;
  mc.dim = 4;
  mc.dim_pos = mc.dim_rol = mc.dim_type = 3;
  mc.context_samples = 4;
  mc.init_range = 0.5;
  Model model(&kg, mc);
  model.init(3);

  auto instances = generate_queries(kg, kg, {QueryType::k1p, QueryType::k2p}, 4, 21, false, 200);
  EvalReport report = evaluate_model(model, instances);
  long long expect_1p = 0, expect_2p = 0;
  for (const QueryInstance& inst : instances) {
    long long n = static_cast<long long>(
        inst.hard_answers.empty() ? inst.easy_answers.size() : inst.hard_answers.size());
    (inst.type == QueryType::k1p ? expect_1p : expect_2p) += n;
  }
  CHECK(report.per_type["1p"].count == expect_1p);
  CHECK(report.per_type["2p"].count == expect_2p);
  CHECK(report.avg_mrr() > 0.0);
  CHECK(report.avg_mrr() <= 1.0);
}

TEST_CASE("degenerate instances are skipped and counted") {
  KnowledgeGraph kg = make_random_kg(25, 2, 130, 34);
  ModelConfig mc;
  mc.backend = Backend::kBox;
  mc.dim = 4;
  mc.dim_pos = mc.dim_rol = mc.dim_type = 3;
  mc.context_samples = 4;
  mc.init_range = 0.5;
  Model model(&kg, mc);
  model.init(4);
  auto instances = generate_queries(kg, kg, {QueryType::k1p}, 3, 22, false, 200);
  QueryInstance dead;
  dead.type = QueryType::k1p;
  dead.anchors = {0};
  dead.relations = {0};
  instances.push_back(dead);  // no answers at all
  EvalReport report = evaluate_model(model, instances);
  CHECK(report.skipped_degenerate == 1);
}

TEST_CASE("reports serialize to json and back") {
  std::map<std::string, std::vector<double>> ranks;
  ranks["1p"] = {1.0, 2.0};
  ranks["2i"] = {4.0};
  EvalReport report = aggregate_metrics(ranks);
  nlohmann::ordered_json doc = report_json(report);
  EvalReport back = report_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back.per_type.size() == 2);
  CHECK(back.per_type["1p"].mrr == report.per_type["1p"].mrr);
  CHECK(back.per_type["2i"].count == 1);
  CHECK(doc["avg_mrr"].get<double>() == doctest::Approx(report.avg_mrr()));

  EvalReport baseline = back;
  nlohmann::ordered_json with_base = report_json(report, &baseline);
  CHECK(with_base["improvement_percent"].get<double>() == doctest::Approx(0.0));
  CHECK(report_table(report).find("Avg") != std::string::npos);
}

}  // TEST_SUITE
