#pragma once

#include "kgqr/kg.hpp"
#include "kgqr/params.hpp"
#include "kgqr/query.hpp"

namespace kgqr {

// Per-node context inputs for the integration network. Slots disabled by the
// ablation flags are zero vectors of the configured width.
struct ContextBundle {
  Value position;          // d_pos
  Value role;              // d_rol
  Value type;              // d_type (shared across all nodes of one graph)
  Value relation_induced;  // entity-embedding width (d for box, 2d for Beta)
};

// Lookups for (position, role) plus the type embedding W_g . type_vector.
// Throws PositionOverflow when the node sits deeper than position 3.
ContextBundle build_structure_context(Tape& tape, const TapeBinding& binding,
                                      const ModelConfig& cfg, const QueryGraph& g, int node);

// Mean embedding of sampled endpoint entities of the node's incident
// relations: tails of incoming relations and heads of outgoing ones, the two
// side means averaged (or the defined side alone when one is empty). Sample
// id sets are frozen per (relation, side, K, seed) by the KG cache; the mean
// itself is recomputed on tape so gradients reach the entity table.
Value relation_induced_embedding(Tape& tape, const TapeBinding& binding, const ModelConfig& cfg,
                                 const KnowledgeGraph& kg, const QueryGraph& g, int node);

// q' = W' . (MLP_q(q) || MLP_I(p || r || g || l)), then the backend validity
// mapping (softplus on the box offset half, positivity map for Beta).
Value integrate(Tape& tape, const TapeBinding& binding, const ModelConfig& cfg, Value q,
                const ContextBundle& bundle);

// Per-dimension Beta variance alpha*beta / ((alpha+beta)^2 (alpha+beta+1)).
Value beta_variance(Tape& tape, Value beta_params, int dim);

// || Var(q) - Var(q') ||_2
Value variance_loss(Tape& tape, Value q, Value q_integrated, int dim);

// Mean seconds per relation_induced_embedding call at sample size K, measured
// on a 2p variable node (one incoming and one outgoing relation). The sample
// cache is warmed before timing; tape resets are excluded from the clock.
double benchmark_relation_induced(const KnowledgeGraph& kg, const ModelConfig& cfg, int k,
                                  int calls);

}  // namespace kgqr
