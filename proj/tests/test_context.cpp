#include <doctest.h>

#include <cmath>
#include <cstring>

#include "kgqr/context.hpp"
#include "kgqr/model.hpp"
#include "kgqr/synthetic.hpp"
#include "quadrature.hpp"
#include "test_helpers.hpp"

using namespace kgqr;
using kgqr::testing::beta_variance_by_quadrature;
using kgqr::testing::TempFile;

namespace {

constexpr double kLn2 = 0.6931471805599453;

ModelConfig ctx_config(Backend backend, int dim = 2) {
  ModelConfig cfg;
  cfg.backend = backend;
  cfg.dim = dim;
  cfg.dim_pos = cfg.dim_rol = cfg.dim_type = 3;
  cfg.context_samples = 8;
  cfg.context_seed = 5;
  cfg.init_range = 0.5;
  return cfg;
}

}  // namespace

TEST_SUITE("context") {

TEST_CASE("all nodes of one graph share the type embedding") {
  KnowledgeGraph kg = make_random_kg(10, 2, 40, 1);
  Model m(&kg, ctx_config(Backend::kBox));
  m.init(3);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k2p, {0}, {0, 2});
  ContextBundle c1 = build_structure_context(t, b, m.config(), g, 1);
  ContextBundle c2 = build_structure_context(t, b, m.config(), g, 2);
  CHECK(t.value(c1.type).v == t.value(c2.type).v);
  CHECK(t.value(c1.position).v != t.value(c2.position).v);
  CHECK(t.value(c1.role).v != t.value(c2.role).v);
}

TEST_CASE("zero type map gives a zero type embedding") {
  KnowledgeGraph kg = make_random_kg(10, 2, 40, 2);
  Model m(&kg, ctx_config(Backend::kBox));
  m.init(5);
  m.params().get("type_w") = Tensor(3, 12);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k3i, {0, 1, 2}, {0, 2, 4});
  ContextBundle c = build_structure_context(t, b, m.config(), g, g.answer_node());
  for (double x : t.value(c.type).v) CHECK(x == 0.0);
}

TEST_CASE("1p and 2i answers get distinct type embeddings under a generic map") {
  KnowledgeGraph kg = make_random_kg(10, 2, 40, 3);
  Model m(&kg, ctx_config(Backend::kBox));
  m.init(7);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g1 = build_query_graph(QueryType::k1p, {0}, {0});
  QueryGraph g2 = build_query_graph(QueryType::k2i, {0, 1}, {0, 2});
  ContextBundle c1 = build_structure_context(t, b, m.config(), g1, g1.answer_node());
  ContextBundle c2 = build_structure_context(t, b, m.config(), g2, g2.answer_node());
  double diff = 0.0;
  for (int i = 0; i < 3; ++i) diff += std::fabs(t.value(c1.type).v[i] - t.value(c2.type).v[i]);
  CHECK(diff > 1e-9);
}

TEST_CASE("position overflow surfaces from context building") {
  KnowledgeGraph kg = make_random_kg(10, 2, 40, 4);
  Model m(&kg, ctx_config(Backend::kBox));
  m.init(9);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k1p, {0}, {0});
  g.nodes[1].position = 7;
  CHECK_THROWS_AS(build_structure_context(t, b, m.config(), g, 1), PositionOverflowError);
}

TEST_CASE("relation-induced embedding: one-sided mean") {
  TempFile f("a\tr\te1\n");
  KnowledgeGraph kg = KnowledgeGraph::load(f.path());
  Model m(&kg, ctx_config(Backend::kBox));
  m.init(11);
  Tensor& entity = m.params().get("entity");
  EntityId e1 = *kg.entity_id("e1");
  entity.at(static_cast<int>(e1), 0) = 1.0;
  entity.at(static_cast<int>(e1), 1) = 0.0;

  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(kg, QueryType::k1p, {"a"}, {"r"});
  Value l = relation_induced_embedding(t, b, m.config(), kg, g, g.answer_node());
  CHECK(t.value(l).v == std::vector<double>{1.0, 0.0});
}

TEST_CASE("relation-induced embedding averages the two sides") {
  TempFile f("a\tr1\tx\ny\tr2\tb\n");
  KnowledgeGraph kg = KnowledgeGraph::load(f.path());
  Model m(&kg, ctx_config(Backend::kBox));
  m.init(13);
  Tensor& entity = m.params().get("entity");
  entity = Tensor(static_cast<int>(kg.entity_count()), 2);
  EntityId x = *kg.entity_id("x"), y = *kg.entity_id("y");
  entity.at(static_cast<int>(x), 0) = 1.0;  // tail of r1
  entity.at(static_cast<int>(y), 1) = 1.0;  // head of r2

  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(kg, QueryType::k2p, {"a"}, {"r1", "r2"});
  Value l = relation_induced_embedding(t, b, m.config(), kg, g, 1);
  CHECK(t.value(l).v == std::vector<double>{0.5, 0.5});
}

TEST_CASE("sample sizes above the endpoint count reduce to the full mean") {
  KnowledgeGraph kg = make_random_kg(12, 2, 60, 5);
  ModelConfig small = ctx_config(Backend::kBox);
  small.context_samples = 10000;
  Model m(&kg, small);
  m.init(15);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k1p, {0}, {0});
  Value l = relation_induced_embedding(t, b, m.config(), kg, g, 1);

  auto tails = kg.relation_endpoints(0, EndpointSide::kTail);
  Tensor want(2, 1);
  const Tensor& entity = m.params().get("entity");
  for (EntityId e : tails) {
    want.v[0] += entity.at(static_cast<int>(e), 0);
    want.v[1] += entity.at(static_cast<int>(e), 1);
  }
  for (double& x : want.v) x /= static_cast<double>(tails.size());
  CHECK(t.value(l).v[0] == doctest::Approx(want.v[0]).epsilon(1e-12));
  CHECK(t.value(l).v[1] == doctest::Approx(want.v[1]).epsilon(1e-12));
}

TEST_CASE("relation-induced embedding is deterministic per call") {
  KnowledgeGraph kg = make_random_kg(30, 3, 200, 6);
  Model m(&kg, ctx_config(Backend::kBeta));
  m.init(17);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::kIp, {0, 1}, {0, 2, 4});
  Value l1 = relation_induced_embedding(t, b, m.config(), kg, g, 2);
  Value l2 = relation_induced_embedding(t, b, m.config(), kg, g, 2);
  CHECK(t.value(l1).v == t.value(l2).v);
}

TEST_CASE("integration with zero weights leaves the box validity image") {
  KnowledgeGraph kg = make_random_kg(10, 2, 40, 7);
  Model m(&kg, ctx_config(Backend::kBox));
  m.init(19);
  for (const char* name : {"int_q_w1", "int_q_b1", "int_q_w2", "int_q_b2", "int_c_w1",
                           "int_c_b1", "int_c_w2", "int_c_b2", "int_out_w"}) {
    Tensor& p = m.params().get(name);
    p = Tensor(p.rows, p.cols);
  }
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k1p, {0}, {0});
  ContextBundle bundle = build_structure_context(t, b, m.config(), g, 1);
  Value q = t.constant(Tensor::vec({0.7, -0.3, 1.0, 2.0}));
  const Tensor& out = t.value(integrate(t, b, m.config(), q, bundle));
  CHECK(out.v[0] == 0.0);
  CHECK(out.v[1] == 0.0);
  CHECK(out.v[2] == doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(out.v[3] == doctest::Approx(kLn2).epsilon(1e-15));
}

TEST_CASE("the same branch integrates differently under 1p and 2i") {
  KnowledgeGraph kg = make_random_kg(14, 2, 70, 8);
  int distinct = 0;
  for (int rep = 0; rep < 20; ++rep) {
    // Wide enough that a fully dead relu layer cannot blank the context path.
    Model m(&kg, ctx_config(Backend::kBox, 8));
    m.init(1000 + rep);
    Tape t;
    TapeBinding b = m.bind_params(t);
    QueryGraph g1 = build_query_graph(QueryType::k1p, {0}, {0});
    QueryGraph g2 = build_query_graph(QueryType::k2i, {0, 1}, {0, 2});
    Value q = m.project(t, b, m.entity_query(t, b, 0), 0);
    ContextBundle c1 = build_structure_context(t, b, m.config(), g1, g1.answer_node());
    c1.relation_induced = relation_induced_embedding(t, b, m.config(), kg, g1, g1.answer_node());
    ContextBundle c2 = build_structure_context(t, b, m.config(), g2, g2.answer_node());
    c2.relation_induced = relation_induced_embedding(t, b, m.config(), kg, g2, g2.answer_node());
    Value o1 = integrate(t, b, m.config(), q, c1);
    Value o2 = integrate(t, b, m.config(), q, c2);
    double l2 = 0.0;
    for (int i = 0; i < t.value(o1).size(); ++i) {
      double d = t.value(o1).v[i] - t.value(o2).v[i];
      l2 += d * d;
    }
    if (std::sqrt(l2) > 1e-6) ++distinct;
  }
  CHECK(distinct == 20);
}

TEST_CASE("disabled context slots still integrate with correct shapes") {
  KnowledgeGraph kg = make_random_kg(10, 2, 40, 9);
  ModelConfig cfg = ctx_config(Backend::kBeta);
  cfg.use_position = cfg.use_role = cfg.use_type = cfg.use_relation = false;
  Model m(&kg, cfg);
  m.init(21);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k1p, {0}, {0});
  std::vector<Value> out = m.embed_query(t, b, g, true);
  REQUIRE(out.size() == 1);
  CHECK(t.value(out[0]).rows == 4);  // 2d for dim 2
  for (double x : t.value(out[0]).v) {
    CHECK(x >= 0.05);
    CHECK(x <= 1e9);
  }
}

TEST_CASE("integration output keeps backend validity under random weights") {
  Rng rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    KnowledgeGraph kg = make_random_kg(12, 2, 60, 50 + rep);
    for (Backend backend : {Backend::kBox, Backend::kBeta}) {
      Model m(&kg, ctx_config(backend));
      m.init(rng.next_u64());
      Tape t;
      TapeBinding b = m.bind_params(t);
      QueryGraph g = build_query_graph(QueryType::k2p, {0}, {0, 2});
      Tensor raw(4, 1);
      for (double& x : raw.v) {
        x = backend == Backend::kBox ? rng.uniform(-3, 3) : rng.uniform(0.05, 5.0);
      }
      if (backend == Backend::kBox) {
        raw.v[2] = std::fabs(raw.v[2]);
        raw.v[3] = std::fabs(raw.v[3]);
      }
      ContextBundle bundle = build_structure_context(t, b, m.config(), g, 1);
      bundle.relation_induced = relation_induced_embedding(t, b, m.config(), kg, g, 1);
      const Tensor& out = t.value(integrate(t, b, m.config(), t.constant(raw), bundle));
      for (int i = 0; i < 2; ++i) {
        if (backend == Backend::kBox) {
          CHECK(out.v[2 + i] >= 0.0);
        } else {
          CHECK(out.v[i] >= 0.05);
          CHECK(out.v[2 + i] >= 0.05);
        }
      }
    }
  }
}

TEST_CASE("integrate rejects mismatched query widths") {
  KnowledgeGraph kg = make_random_kg(10, 2, 40, 10);
  Model m(&kg, ctx_config(Backend::kBox));
  m.init(25);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k1p, {0}, {0});
  ContextBundle bundle = build_structure_context(t, b, m.config(), g, 1);
  CHECK_THROWS_AS(integrate(t, b, m.config(), t.constant(Tensor(3, 1)), bundle),
                  DimMismatchError);
}

TEST_CASE("beta variance pinned values") {
  Tape t;
  Value q11 = t.constant(Tensor::vec({1.0, 1.0}));
  CHECK(t.value(beta_variance(t, q11, 1)).v[0] == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  Value q22 = t.constant(Tensor::vec({2.0, 2.0}));
  CHECK(t.value(beta_variance(t, q22, 1)).v[0] == doctest::Approx(0.05).epsilon(1e-14));
  Value q25 = t.constant(Tensor::vec({2.0, 5.0}));
  CHECK(t.value(beta_variance(t, q25, 1)).v[0] ==
        doctest::Approx(beta_variance_by_quadrature(2.0, 5.0)).epsilon(1e-7));
  CHECK(t.value(beta_variance(t, q25, 1)).v[0] ==
        doctest::Approx(0.025510204081632654).epsilon(1e-12));
}

TEST_CASE("beta variance matches the quadrature oracle on random parameters") {
  Rng rng(27);
  Tape t;
  for (int i = 0; i < 25; ++i) {
    double a = rng.uniform(0.6, 8.0);
    double b = rng.uniform(0.6, 8.0);
    Value q = t.constant(Tensor::vec({a, b}));
    double got = t.value(beta_variance(t, q, 1)).v[0];
    CHECK(got == doctest::Approx(beta_variance_by_quadrature(a, b)).epsilon(1e-6));
    CHECK(got > 0.0);
    CHECK(got < 0.25);
  }
}

TEST_CASE("variance loss pinned values and symmetry") {
  Tape t;
  Value a = t.constant(Tensor::vec({1.0, 1.5, 1.0, 2.0, 0.5, 3.0, 1.0, 1.0}));
  CHECK(t.scalar_value(variance_loss(t, a, a, 4)) == 0.0);

  Value ones = t.constant(Tensor::vec({1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0}));
  Value twos = t.constant(Tensor::vec({2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0}));
  CHECK(t.scalar_value(variance_loss(t, ones, twos, 4)) ==
        doctest::Approx(0.06666666666666667).epsilon(1e-12));
  CHECK(t.scalar_value(variance_loss(t, twos, ones, 4)) ==
        t.scalar_value(variance_loss(t, ones, twos, 4)));
}

TEST_CASE("relation-induced timing grows roughly linearly in K") {
  KnowledgeGraph kg = make_random_kg(700, 2, 3200, 11);
  ModelConfig cfg = ctx_config(Backend::kBox, 64);
  double t60 = benchmark_relation_induced(kg, cfg, 60, 300);
  double t480 = benchmark_relation_induced(kg, cfg, 480, 300);
  CHECK(t480 / t60 > 1.5);
  CHECK(t480 / t60 < 24.0);
}

}  // TEST_SUITE
