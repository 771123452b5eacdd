#pragma once

#include <string>
#include <vector>

#include "kgqr/query.hpp"
#include "kgqr/rng.hpp"

namespace kgqr {

struct QueryInstance {
  QueryType type;
  std::vector<EntityId> anchors;
  std::vector<RelationId> relations;
  std::vector<EntityId> easy_answers;  // sorted: answers on the training KG
  std::vector<EntityId> hard_answers;  // sorted: answers only the full KG yields

  bool degenerate() const { return easy_answers.empty() && hard_answers.empty(); }
  QueryGraph graph() const { return build_query_graph(type, anchors, relations); }
};

// Exact set-semantics evaluation: projection unions neighbor sets,
// intersection/union are set operations, negation complements against the
// full entity set. Result is sorted.
std::vector<EntityId> evaluate_answers(const KnowledgeGraph& kg, const ComputationGraph& cg);

// Samples an instance by backward walks on kg_full so the full-KG answer set
// is nonempty. easy = answers on kg_train, hard = answers on kg_full minus
// easy; with require_hard the hard set must be nonempty. Negated branches are
// grounded so their answer set is a nonempty strict subset of the sibling
// intersection (otherwise the negation is vacuous in the instance).
// Precondition: kg_train shares kg_full's vocabulary and its triples are a
// subset of kg_full's.
QueryInstance ground_query(const KnowledgeGraph& kg_train, const KnowledgeGraph& kg_full,
                           QueryType t, Rng& rng, int max_tries, bool require_hard);

// Recomputes easy/hard via evaluate_answers on each KG; idempotent.
QueryInstance label_easy_hard(const KnowledgeGraph& kg_train, const KnowledgeGraph& kg_full,
                              QueryInstance inst);

// count_per_type instances per requested type, deduplicated by
// (type, anchors, relations); independent PRNG stream per (type, index).
std::vector<QueryInstance> generate_queries(const KnowledgeGraph& kg_train,
                                            const KnowledgeGraph& kg_full,
                                            const std::vector<QueryType>& types,
                                            int count_per_type, std::uint64_t seed,
                                            bool require_hard, int max_tries = 200);

// Query instance files: one JSON record per line with field order
// {type, anchors, relations, easy_answers, hard_answers}; labels resolved
// against the KG vocabulary.
void write_query_file(const std::string& path, const KnowledgeGraph& kg,
                      const std::vector<QueryInstance>& instances);
std::vector<QueryInstance> read_query_file(const std::string& path, const KnowledgeGraph& kg);

}  // namespace kgqr
