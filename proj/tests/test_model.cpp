#include <doctest.h>

#include <cmath>
#include <cstring>

#include "kgqr/model.hpp"
#include "kgqr/synthetic.hpp"
#include "test_helpers.hpp"

using namespace kgqr;
using kgqr::testing::TempFile;

namespace {

constexpr double kLn2 = 0.6931471805599453;

ModelConfig small_config(Backend backend, int dim = 4) {
  ModelConfig cfg;
  cfg.backend = backend;
  cfg.dim = dim;
  cfg.dim_pos = cfg.dim_rol = cfg.dim_type = 3;
  cfg.context_samples = 4;
  cfg.context_seed = 3;
  cfg.init_range = 0.5;
  return cfg;
}

Tensor filled(int rows, int cols, double v) {
  Tensor t(rows, cols);
  for (double& x : t.v) x = v;
  return t;
}

// Raw parameter value that the positivity map sends exactly to `target`.
double posmap_preimage(double target) { return std::log(std::expm1(target - 0.05)); }

}  // namespace

TEST_SUITE("model") {

TEST_CASE("box projection with zero relation parameters grows offsets by ln 2") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 1);
  Model m(&kg, small_config(Backend::kBox));
  m.init(7);
  m.params().get("rel_center") = filled(static_cast<int>(kg.relation_count()), 4, 0.0);
  m.params().get("rel_offset") = filled(static_cast<int>(kg.relation_count()), 4, 0.0);

  Tape t;
  TapeBinding b = m.bind_params(t);
  Value anchor = m.entity_query(t, b, 0);
  Value projected = m.project(t, b, anchor, 0);
  const Tensor& before = t.value(anchor);
  const Tensor& after = t.value(projected);
  for (int i = 0; i < 4; ++i) {
    CHECK(after.v[i] == before.v[i]);  // center unchanged
    CHECK(after.v[4 + i] == doctest::Approx(kLn2).epsilon(1e-15));
  }

  // Composing two projections is not one projection with doubled parameters.
  Value twice = m.project(t, b, projected, 0);
  CHECK(t.value(twice).v[4] == doctest::Approx(2 * kLn2).epsilon(1e-12));
  CHECK(t.value(twice).v[4] != doctest::Approx(kLn2).epsilon(1e-3));
}

TEST_CASE("box projection never shrinks offsets") {
  KnowledgeGraph kg = make_random_kg(12, 3, 60, 2);
  Model m(&kg, small_config(Backend::kBox));
  m.init(11);
  Tape t;
  TapeBinding b = m.bind_params(t);
  Value q = t.constant(Tensor::vec({0.1, -0.2, 0.3, 0.0, 0.5, 0.0, 1.25, 2.0}));
  for (RelationId r = 0; r < kg.relation_count(); ++r) {
    const Tensor& out = t.value(m.project(t, b, q, r));
    for (int i = 0; i < 4; ++i) CHECK(out.v[4 + i] >= t.value(q).v[4 + i]);
  }
}

TEST_CASE("box intersection: identical boxes keep the center, offsets shrink") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 3);
  Model m(&kg, small_config(Backend::kBox));
  m.init(13);
  Tape t;
  TapeBinding b = m.bind_params(t);
  Value q = t.constant(Tensor::vec({0.4, -1.0, 0.25, 2.0, 0.3, 0.7, 0.1, 1.5}));
  const Tensor& out = t.value(m.intersect(t, b, {q, q}));
  for (int i = 0; i < 4; ++i) {
    CHECK(out.v[i] == doctest::Approx(t.value(q).v[i]).epsilon(1e-12));
    CHECK(out.v[4 + i] <= t.value(q).v[4 + i]);
    CHECK(out.v[4 + i] >= 0.0);
  }
}

TEST_CASE("intersection is permutation invariant bit for bit") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 4);
  for (Backend backend : {Backend::kBox, Backend::kBeta}) {
    Model m(&kg, small_config(backend));
    m.init(17);
    Tape t;
    TapeBinding b = m.bind_params(t);
    Rng rng(5);
    auto random_q = [&] {
      Tensor v(8, 1);
      for (int i = 0; i < 8; ++i) {
        v.v[i] = backend == Backend::kBox ? rng.uniform(-1, 1) : rng.uniform(0.1, 3.0);
      }
      if (backend == Backend::kBox) {
        for (int i = 4; i < 8; ++i) v.v[i] = std::fabs(v.v[i]);
      }
      return t.constant(v);
    };
    Value a = random_q(), c = random_q(), d = random_q();
    const Tensor& o1 = t.value(m.intersect(t, b, {a, c, d}));
    const Tensor& o2 = t.value(m.intersect(t, b, {d, a, c}));
    const Tensor& o3 = t.value(m.intersect(t, b, {c, d, a}));
    CHECK(std::memcmp(o1.v.data(), o2.v.data(), o1.v.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(o1.v.data(), o3.v.data(), o1.v.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("intersection needs at least two operands") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 5);
  Model m(&kg, small_config(Backend::kBox));
  m.init(19);
  Tape t;
  TapeBinding b = m.bind_params(t);
  Value q = t.constant(Tensor(8, 1));
  CHECK_THROWS_AS(m.intersect(t, b, {q}), FewerThanTwoError);
}

TEST_CASE("box distance pinned geometry") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 6);
  ModelConfig cfg = small_config(Backend::kBox);
  cfg.alpha_in = 0.02;
  Model m(&kg, cfg);
  m.init(23);
  std::vector<double> center = {0.5, -1.0, 2.0, 0.25};
  std::vector<double> offset = {0.5, 0.3, 0.1, 0.7};
  Tensor& entity = m.params().get("entity");
  for (int i = 0; i < 4; ++i) {
    entity.at(0, i) = center[i];               // entity 0 at the center
    entity.at(1, i) = center[i] + offset[i];   // entity 1 on the boundary
  }
  Tape t;
  TapeBinding b = m.bind_params(t);
  std::vector<double> qv = center;
  qv.insert(qv.end(), offset.begin(), offset.end());
  Value q = t.constant(Tensor::vec(qv));
  CHECK(t.scalar_value(m.entity_distance(t, b, 0, q)) == 0.0);

  double offset_l1 = 0.5 + 0.3 + 0.1 + 0.7;
  CHECK(t.scalar_value(m.entity_distance(t, b, 1, q)) ==
        doctest::Approx(0.02 * offset_l1).epsilon(1e-12));

  // Degenerate box: plain L1 distance to the center.
  std::vector<double> pv = center;
  pv.insert(pv.end(), {0.0, 0.0, 0.0, 0.0});
  Value point_box = t.constant(Tensor::vec(pv));
  CHECK(t.scalar_value(m.entity_distance(t, b, 1, point_box)) ==
        doctest::Approx(offset_l1).epsilon(1e-12));
}

TEST_CASE("beta projection stays in range and is deterministic") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 7);
  Model m(&kg, small_config(Backend::kBeta));
  m.init(29);
  Tape t;
  TapeBinding b = m.bind_params(t);
  Value q = m.entity_query(t, b, 1);
  Value p1 = m.project(t, b, q, 0);
  Value p2 = m.project(t, b, q, 0);
  const Tensor& o1 = t.value(p1);
  for (double x : o1.v) {
    CHECK(x >= 0.05);
    CHECK(x <= 1e9);
  }
  CHECK(std::memcmp(o1.v.data(), t.value(p2).v.data(), o1.v.size() * sizeof(double)) == 0);

  // Gradients reach both the query parameters and the relation row.
  Tape t2;
  TapeBinding b2 = m.bind_params(t2);
  Value qp = t2.parameter(Tensor::vec({1.0, 2.0, 0.5, 0.7, 1.5, 0.9, 2.5, 0.3}));
  t2.backward(t2.sum(m.project(t2, b2, qp, 0)));
  double qnorm = 0.0;
  for (double g : t2.grad(qp).v) qnorm += std::fabs(g);
  CHECK(qnorm > 0.0);
  double rnorm = 0.0;
  const Tensor& rel_grad = t2.grad(b2.at("relation"));
  for (int c = 0; c < rel_grad.cols; ++c) rnorm += std::fabs(rel_grad.at(0, c));
  CHECK(rnorm > 0.0);
}

TEST_CASE("beta intersection is a convex combination per coordinate") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 8);
  Model m(&kg, small_config(Backend::kBeta));
  m.init(31);
  Tape t;
  TapeBinding b = m.bind_params(t);
  Value a = t.constant(Tensor::vec({1.0, 2.0, 0.5, 0.7, 1.5, 0.9, 2.5, 0.3}));
  Value c = t.constant(Tensor::vec({0.3, 1.1, 2.5, 0.2, 0.6, 1.7, 0.8, 1.9}));
  const Tensor& out = t.value(m.intersect(t, b, {a, c}));
  for (int i = 0; i < 8; ++i) {
    double lo = std::min(t.value(a).v[i], t.value(c).v[i]);
    double hi = std::max(t.value(a).v[i], t.value(c).v[i]);
    CHECK(out.v[i] >= lo - 1e-12);
    CHECK(out.v[i] <= hi + 1e-12);
  }
  const Tensor& same = t.value(m.intersect(t, b, {a, a}));
  for (int i = 0; i < 8; ++i) CHECK(same.v[i] == doctest::Approx(t.value(a).v[i]).epsilon(1e-12));
}

TEST_CASE("beta negation inverts parameters with a validity clamp") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 9);
  Model m(&kg, small_config(Backend::kBeta, 1));
  m.init(37);
  Tape t;
  TapeBinding b = m.bind_params(t);
  Value onep = t.constant(Tensor::vec({1.0, 1.0}));
  CHECK(t.value(m.negate(t, b, onep)).v == std::vector<double>{1.0, 1.0});

  Value q = t.constant(Tensor::vec({2.0, 5.0}));
  const Tensor& neg = t.value(m.negate(t, b, q));
  CHECK(neg.v[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(neg.v[1] == doctest::Approx(0.2).epsilon(1e-15));
  const Tensor& back = t.value(m.negate(t, b, m.negate(t, b, q)));
  CHECK(back.v[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(back.v[1] == doctest::Approx(5.0).epsilon(1e-12));

  // Box backends refuse negation.
  Model box(&kg, small_config(Backend::kBox, 1));
  box.init(37);
  Tape t2;
  TapeBinding b2 = box.bind_params(t2);
  CHECK_THROWS_AS(box.negate(t2, b2, t2.constant(Tensor::vec({1.0, 1.0}))), NegationUnsupportedError);
}

TEST_CASE("beta distance is a per-dimension KL divergence") {
  KnowledgeGraph kg = make_random_kg(12, 2, 50, 10);
  Model m(&kg, small_config(Backend::kBeta, 1));
  m.init(41);
  Tensor& entity = m.params().get("entity");
  entity.at(0, 0) = posmap_preimage(2.0);  // entity 0 maps to Beta(2, 2)
  entity.at(0, 1) = posmap_preimage(2.0);

  Tape t;
  TapeBinding b = m.bind_params(t);
  // Distance to its own parameters is exactly zero.
  Value self_q = m.entity_query(t, b, 0);
  CHECK(t.scalar_value(m.entity_distance(t, b, 0, self_q)) == 0.0);

  // KL(Beta(2,2) || Beta(1,1)), frozen from numeric integration of the
  // KL integrand: 0.125092802561388334.
  Value uniform_q = t.constant(Tensor::vec({1.0, 1.0}));
  CHECK(t.scalar_value(m.entity_distance(t, b, 0, uniform_q)) ==
        doctest::Approx(0.125092802561388334).epsilon(1e-9));

  // Asymmetry: KL(p||q) != KL(q||p) for a generic pair.
  entity.at(1, 0) = posmap_preimage(1.0);
  entity.at(1, 1) = posmap_preimage(1.0);
  Tape t2;
  TapeBinding b2 = m.bind_params(t2);
  Value q22 = t2.constant(Tensor::vec({2.0, 2.0}));
  Value q11 = t2.constant(Tensor::vec({1.0, 1.0}));
  double forward = t2.scalar_value(m.entity_distance(t2, b2, 0, q11));
  double reverse = t2.scalar_value(m.entity_distance(t2, b2, 1, q22));
  CHECK(forward != doctest::Approx(reverse).epsilon(1e-6));
}

TEST_CASE("query distance dispatches over disjuncts by minimum") {
  KnowledgeGraph kg = make_random_kg(16, 2, 70, 11);
  Model m(&kg, small_config(Backend::kBox));
  m.init(43);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k1p, {0}, {0});
  std::vector<Value> one = m.embed_query(t, b, g, true);
  REQUIRE(one.size() == 1);
  double single = t.scalar_value(m.query_distance(t, b, 3, one));
  CHECK(single == t.scalar_value(m.entity_distance(t, b, 3, one[0])));
  std::vector<Value> dup = {one[0], one[0]};
  CHECK(t.scalar_value(m.query_distance(t, b, 3, dup)) == single);
  CHECK_THROWS_AS(m.query_distance(t, b, 3, {}), EmptyDisjunctsError);
}

TEST_CASE("box backend rejects negation queries end to end") {
  KnowledgeGraph kg = make_random_kg(16, 2, 70, 12);
  Model m(&kg, small_config(Backend::kBox));
  m.init(47);
  Tape t;
  TapeBinding b = m.bind_params(t);
  QueryGraph g = build_query_graph(QueryType::k2in, {0, 1}, {0, 2});
  CHECK_THROWS_AS(m.embed_query(t, b, g, true), NegationUnsupportedError);
  CHECK_FALSE(m.supports(QueryType::k2in));
  CHECK(m.supports(QueryType::k2u));
  Model beta(&kg, small_config(Backend::kBeta));
  CHECK(beta.supports(QueryType::k2in));
}

TEST_CASE("operator outputs satisfy validity invariants under random weights") {
  Rng rng(53);
  for (int rep = 0; rep < 10; ++rep) {
    KnowledgeGraph kg = make_random_kg(20, 3, 120, 100 + rep);
    for (Backend backend : {Backend::kBox, Backend::kBeta}) {
      Model m(&kg, small_config(backend));
      m.init(rng.next_u64());
      Tape t;
      TapeBinding b = m.bind_params(t);
      for (QueryType type : {QueryType::k2p, QueryType::k2i, QueryType::kIp, QueryType::kPni}) {
        if (!m.supports(type)) continue;
        Rng ground(rng.next_u64());
        QueryInstance inst;
        try {
          inst = ground_query(kg, kg, type, ground, 200, false);
        } catch (const GroundingFailedError&) {
          continue;
        }
        for (Value q : m.embed_query(t, b, inst.graph(), true)) {
          const Tensor& v = t.value(q);
          for (int i = 0; i < 4; ++i) {
            if (backend == Backend::kBox) {
              CHECK(v.v[4 + i] >= 0.0);
            } else {
              CHECK(v.v[i] >= 0.05);
              CHECK(v.v[i] <= 1e9);
              CHECK(v.v[4 + i] >= 0.05);
              CHECK(v.v[4 + i] <= 1e9);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("checkpoints round-trip bit-exactly at float32") {
  KnowledgeGraph kg = make_random_kg(18, 2, 90, 13);
  Model m(&kg, small_config(Backend::kBeta));
  m.init(59);
  TempFile ckpt("", ".ckpt");
  save_checkpoint(ckpt.path(), m);
  Model loaded = load_checkpoint(ckpt.path(), kg);
  CHECK(loaded.config().backend == Backend::kBeta);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const Tensor& orig = m.params().at(i);
    const Tensor& got = loaded.params().at(i);
    REQUIRE(orig.size() == got.size());
    for (int j = 0; j < orig.size(); ++j) {
      CHECK(got.v[j] == static_cast<double>(static_cast<float>(orig.v[j])));
    }
  }

  // Distances reproduce bit-exactly across a save/load cycle of the loaded model.
  auto distances = [&](const Model& model) {
    Tape t;
    TapeBinding b = model.bind_params(t);
    QueryGraph g = build_query_graph(QueryType::k2p, {0}, {0, 2});
    std::vector<Value> dis = model.embed_query(t, b, g, true);
    std::vector<double> out;
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
      out.push_back(t.scalar_value(model.query_distance(t, b, e, dis)));
    }
    return out;
  };
  std::vector<double> d1 = distances(loaded);
  TempFile ckpt2("", ".ckpt");
  save_checkpoint(ckpt2.path(), loaded);
  Model reloaded = load_checkpoint(ckpt2.path(), kg);
  std::vector<double> d2 = distances(reloaded);
  CHECK(std::memcmp(d1.data(), d2.data(), d1.size() * sizeof(double)) == 0);

  // And the serialized bytes themselves are stable.
  std::ifstream f1(ckpt.path(), std::ios::binary), f2(ckpt2.path(), std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);

  KnowledgeGraph other = make_random_kg(19, 2, 90, 14);
  CHECK_THROWS_AS(load_checkpoint(ckpt.path(), other), CheckpointError);
}

}  // TEST_SUITE
