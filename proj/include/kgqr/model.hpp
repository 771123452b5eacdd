#pragma once

#include <span>
#include <string>
#include <vector>

#include "kgqr/context.hpp"
#include "kgqr/kg.hpp"
#include "kgqr/params.hpp"
#include "kgqr/query.hpp"

namespace kgqr {

// One reasoning model: backend operator parameters, entity/relation tables,
// and the context tables + integration network. Query embeddings live on a
// Tape as single column vectors of width 2d (box: center || offset, Beta:
// alpha || beta after the positivity map).
class Model {
 public:
  Model(const KnowledgeGraph* kg, ModelConfig cfg);

  void init(std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const KnowledgeGraph& kg() const { return *kg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::uint64_t init_seed() const { return init_seed_; }

  TapeBinding bind_params(Tape& tape) const { return bind(tape, params_); }

  // Base operators.
  Value entity_query(Tape& t, const TapeBinding& b, EntityId e) const;
  Value project(Tape& t, const TapeBinding& b, Value q, RelationId r) const;
  // Aggregation order is canonicalized on the operand values, so permuting
  // the input list yields bit-identical results.
  Value intersect(Tape& t, const TapeBinding& b, const std::vector<Value>& qs) const;
  Value negate(Tape& t, const TapeBinding& b, Value q) const;  // Beta only
  Value entity_distance(Tape& t, const TapeBinding& b, EntityId e, Value q) const;

  // Embeds one union-free operator tree; with integrated=true every
  // projection output is fused with its target node's context bundle.
  Value embed_tree(Tape& t, const TapeBinding& b, const QueryGraph& g,
                   const ComputationGraph& cg, bool integrated) const;
  // DNF disjunct embeddings of a full query. Box backends reject negation.
  std::vector<Value> embed_query(Tape& t, const TapeBinding& b, const QueryGraph& g,
                                 bool integrated) const;

  // min over disjuncts of the backend entity-query distance.
  Value query_distance(Tape& t, const TapeBinding& b, EntityId e,
                       const std::vector<Value>& disjuncts) const;

  bool supports(QueryType type) const;

 private:
  Value box_intersect(Tape& t, const TapeBinding& b, const std::vector<Value>& qs) const;
  Value beta_intersect(Tape& t, const TapeBinding& b, const std::vector<Value>& qs) const;

  const KnowledgeGraph* kg_;
  ModelConfig cfg_;
  ParamStore params_;
  std::uint64_t init_seed_ = 0;
};

// Checkpoint file: text manifest (key-value lines, then one line per tensor
// with name/rows/cols/byte-offset, then "end"), followed by raw little-endian
// float32 arrays in manifest order.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path, const KnowledgeGraph& kg);

}  // namespace kgqr
