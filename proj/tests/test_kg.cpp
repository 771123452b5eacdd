#include <doctest.h>

#include <algorithm>

#include "kgqr/kg.hpp"
#include "kgqr/rng.hpp"
#include "kgqr/synthetic.hpp"
#include "test_helpers.hpp"

using namespace kgqr;
using kgqr::testing::TempFile;

TEST_SUITE("kg") {

TEST_CASE("load counts entities, relations and mirrored triples") {
  TempFile f("a\tr\tb\nb\tr\tc\n");
  KnowledgeGraph kg = KnowledgeGraph::load(f.path());
  CHECK(kg.entity_count() == 3);
  CHECK(kg.relation_count() == 2);  // r and its inverse
  CHECK(kg.triple_count() == 4);
  CHECK(kg.relation_label(kg.inverse(*kg.relation_id("r"))) == std::string("r") + std::string(kInverseSuffix));
}

TEST_CASE("duplicate lines deduplicate") {
  TempFile f("a\tr\tb\na\tr\tb\n");
  KnowledgeGraph kg = KnowledgeGraph::load(f.path());
  CHECK(kg.triple_count() == 2);  // forward + inverse
}

TEST_CASE("malformed line raises ParseError with its line number") {
  TempFile f("a\tr\n");
  CHECK_THROWS_AS(KnowledgeGraph::load(f.path()), ParseError);
  try {
    KnowledgeGraph::load(f.path());
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
  }
  TempFile g("a\tr\tb\nx\ty\tz\tw\n");
  try {
    KnowledgeGraph::load(g.path());
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("comments and blank lines are skipped") {
  TempFile f("# header\n\na\tr\tb\n# tail\n");
  KnowledgeGraph kg = KnowledgeGraph::load(f.path());
  CHECK(kg.triple_count() == 2);
}

TEST_CASE("reserved inverse suffix is rejected in input") {
  TempFile f(std::string("a\tr") + std::string(kInverseSuffix) + "\tb\n");
  CHECK_THROWS_AS(KnowledgeGraph::load(f.path()), ParseError);
}

TEST_CASE("empty input raises EmptyGraph") {
  TempFile f("# nothing here\n");
  CHECK_THROWS_AS(KnowledgeGraph::load(f.path()), EmptyGraphError);
}

TEST_CASE("neighbors follows edges and inverse edges") {
  TempFile f("a\tr\tb\na\tr\tc\n");
  KnowledgeGraph kg = KnowledgeGraph::load(f.path());
  EntityId a = *kg.entity_id("a"), b = *kg.entity_id("b"), c = *kg.entity_id("c");
  RelationId r = *kg.relation_id("r");
  auto nb = kg.neighbors(a, r);
  CHECK(std::vector<EntityId>(nb.begin(), nb.end()) == std::vector<EntityId>{b, c});
  CHECK(kg.neighbors(b, r).empty());
  auto inv = kg.neighbors(b, kg.inverse(r));
  CHECK(std::vector<EntityId>(inv.begin(), inv.end()) == std::vector<EntityId>{a});
  CHECK_THROWS_AS(kg.neighbors(99, r), IdOutOfRangeError);
  CHECK_THROWS_AS(kg.neighbors(a, 99), IdOutOfRangeError);
}

TEST_CASE("relation endpoints are deduplicated sets per side") {
  TempFile f("a\tr\tb\nc\tr\tb\n");
  KnowledgeGraph kg = KnowledgeGraph::load(f.path());
  RelationId r = *kg.relation_id("r");
  auto tails = kg.relation_endpoints(r, EndpointSide::kTail);
  CHECK(tails.size() == 1);
  CHECK(tails[0] == *kg.entity_id("b"));
  auto heads = kg.relation_endpoints(r, EndpointSide::kHead);
  CHECK(std::vector<EntityId>(heads.begin(), heads.end()) ==
        std::vector<EntityId>{*kg.entity_id("a"), *kg.entity_id("c")});
}

TEST_CASE("vocabulary-only relation has empty endpoints") {
  TempFile full("a\tr\tb\nc\ts\td\n");
  TempFile train("a\tr\tb\n");
  KnowledgeGraph kg_full = KnowledgeGraph::load(full.path());
  KnowledgeGraph kg_train = KnowledgeGraph::load(train.path(), true, &kg_full);
  CHECK(kg_train.relation_count() == kg_full.relation_count());
  RelationId s = *kg_train.relation_id("s");
  CHECK(kg_train.relation_endpoints(s, EndpointSide::kHead).empty());
  CHECK(kg_train.relation_endpoints(s, EndpointSide::kTail).empty());
  CHECK(kg_train.neighbors(*kg_train.entity_id("c"), s).empty());
}

TEST_CASE("context sampling honors K, caches, and stays deterministic") {
  TempFile f("a\tr\tb\n");
  KnowledgeGraph kg = KnowledgeGraph::load(f.path());
  RelationId r = *kg.relation_id("r");
  auto& all = kg.sample_context_ids(r, EndpointSide::kTail, 120, 9);
  CHECK(all == std::vector<EntityId>{*kg.entity_id("b")});
  CHECK(kg.sample_context_ids(r, EndpointSide::kTail, 0, 9).empty());

  KnowledgeGraph big = make_random_kg(60, 2, 300, 5);
  auto& s1 = big.sample_context_ids(0, EndpointSide::kTail, 7, 13);
  auto& s2 = big.sample_context_ids(0, EndpointSide::kTail, 7, 13);
  CHECK(s1 == s2);
  CHECK(s1.size() == 7);
  CHECK(std::is_sorted(s1.begin(), s1.end()));
  CHECK(std::adjacent_find(s1.begin(), s1.end()) == s1.end());
  auto pool = big.relation_endpoints(0, EndpointSide::kTail);
  for (EntityId e : s1) {
    CHECK(std::binary_search(pool.begin(), pool.end(), e));
  }
  // A different seed gives a different sample with overwhelming probability.
  auto& s3 = big.sample_context_ids(0, EndpointSide::kTail, 7, 14);
  CHECK(s1 != s3);
}

TEST_CASE("indexes agree with a full scan of the triple list") {
  KnowledgeGraph kg = make_random_kg(40, 3, 220, 77);
  for (const Triple& t : kg.triples()) {
    auto nb = kg.neighbors(t.head, t.relation);
    CHECK(std::binary_search(nb.begin(), nb.end(), t.tail));
    auto back = kg.neighbors(t.tail, kg.inverse(t.relation));
    CHECK(std::binary_search(back.begin(), back.end(), t.head));
  }
  for (RelationId r = 0; r < kg.relation_count(); ++r) {
    std::vector<EntityId> tails_scan;
    for (const Triple& t : kg.triples()) {
      if (t.relation == r) tails_scan.push_back(t.tail);
    }
    std::sort(tails_scan.begin(), tails_scan.end());
    tails_scan.erase(std::unique(tails_scan.begin(), tails_scan.end()), tails_scan.end());
    auto tails = kg.relation_endpoints(r, EndpointSide::kTail);
    CHECK(std::vector<EntityId>(tails.begin(), tails.end()) == tails_scan);
  }
}

TEST_CASE("label maps are bijective") {
  KnowledgeGraph kg = make_random_kg(25, 2, 90, 3);
  for (EntityId e = 0; e < kg.entity_count(); ++e) {
    CHECK(*kg.entity_id(kg.entity_label(e)) == e);
  }
  for (RelationId r = 0; r < kg.relation_count(); ++r) {
    CHECK(*kg.relation_id(kg.relation_label(r)) == r);
    CHECK(kg.inverse(kg.inverse(r)) == r);
  }
}

}  // TEST_SUITE
