#include "kgqr/context.hpp"

#include <algorithm>
#include <chrono>

namespace kgqr {

namespace {

Value zeros(Tape& tape, int n) { return tape.constant(Tensor(n, 1)); }

Value mlp2(Tape& tape, const TapeBinding& b, const std::string& prefix, Value x) {
  Value h = tape.relu(tape.add(tape.matvec(b.at(prefix + "_w1"), x), b.at(prefix + "_b1")));
  return tape.add(tape.matvec(b.at(prefix + "_w2"), h), b.at(prefix + "_b2"));
}

// Mean embedding over the union of frozen endpoint samples of `relations`.
// Empty unions (K = 0 or relations without endpoints) contribute nothing.
Value side_mean(Tape& tape, const TapeBinding& binding, const ModelConfig& cfg,
                const KnowledgeGraph& kg, const std::vector<RelationId>& relations,
                EndpointSide side, bool* defined) {
  std::vector<int> ids;
  for (RelationId r : relations) {
    const auto& sample = kg.sample_context_ids(r, side, cfg.context_samples, cfg.context_seed);
    ids.insert(ids.end(), sample.begin(), sample.end());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.empty()) {
    *defined = false;
    return zeros(tape, cfg.context_entity_width());
  }
  *defined = true;
  const bool mapped = cfg.backend == Backend::kBeta;
  return tape.rows_mean(binding.at("entity"), ids, mapped, cfg.beta_floor, cfg.beta_cap);
}

}  // namespace

ContextBundle build_structure_context(Tape& tape, const TapeBinding& binding,
                                      const ModelConfig& cfg, const QueryGraph& g, int node) {
  if (node < 0 || node >= static_cast<int>(g.nodes.size())) {
    throw NodeNotFoundError("context node out of range");
  }
  const QueryNode& n = g.nodes[node];
  if (n.position < 0 || n.position > kMaxPosition) {
    throw PositionOverflowError("node position exceeds " + std::to_string(kMaxPosition));
  }
  ContextBundle bundle;
  bundle.position = cfg.use_position ? tape.gather_row(binding.at("pos_table"), n.position)
                                     : zeros(tape, cfg.dim_pos);
  bundle.role = cfg.use_role
                    ? tape.gather_row(binding.at("rol_table"), static_cast<int>(n.role))
                    : zeros(tape, cfg.dim_rol);
  if (cfg.use_type) {
    auto tv = type_vector(count_table(g));
    bundle.type = tape.matvec(binding.at("type_w"),
                              tape.constant(Tensor::vec({tv.begin(), tv.end()})));
  } else {
    bundle.type = zeros(tape, cfg.dim_type);
  }
  bundle.relation_induced = zeros(tape, cfg.context_entity_width());
  return bundle;
}

Value relation_induced_embedding(Tape& tape, const TapeBinding& binding, const ModelConfig& cfg,
                                 const KnowledgeGraph& kg, const QueryGraph& g, int node) {
  auto [in_rels, out_rels] = node_relation_sets(g, node);
  if (in_rels.empty() && out_rels.empty()) {
    throw DataError("relation-induced context of a node with no incident relations");
  }
  bool in_defined = false, out_defined = false;
  Value in_mean = side_mean(tape, binding, cfg, kg, in_rels, EndpointSide::kTail, &in_defined);
  Value out_mean = side_mean(tape, binding, cfg, kg, out_rels, EndpointSide::kHead, &out_defined);
  if (in_defined && out_defined) return tape.mean_list({in_mean, out_mean});
  if (in_defined) return in_mean;
  if (out_defined) return out_mean;
  return zeros(tape, cfg.context_entity_width());
}

Value integrate(Tape& tape, const TapeBinding& binding, const ModelConfig& cfg, Value q,
                const ContextBundle& bundle) {
  const int width = cfg.query_width();
  if (tape.value(q).rows != width || tape.value(q).cols != 1) {
    throw DimMismatchError("query embedding width does not match the backend");
  }
  Value mq = mlp2(tape, binding, "int_q", q);
  Value ctx = tape.concat({bundle.position, bundle.role, bundle.type, bundle.relation_induced});
  Value mc = mlp2(tape, binding, "int_c", ctx);
  Value out = tape.matvec(binding.at("int_out_w"), tape.concat({mq, mc}));
  if (cfg.backend == Backend::kBox) {
    Value center = tape.slice(out, 0, cfg.dim);
    Value offset = tape.softplus(tape.slice(out, cfg.dim, cfg.dim));
    return tape.concat({center, offset});
  }
  return tape.posmap(out, cfg.beta_floor, cfg.beta_cap);
}

Value beta_variance(Tape& tape, Value beta_params, int dim) {
  Value a = tape.slice(beta_params, 0, dim);
  Value b = tape.slice(beta_params, dim, dim);
  Value s = tape.add(a, b);
  Value s1 = tape.add(s, tape.constant_scalar(1.0));
  return tape.div(tape.mul(a, b), tape.mul(tape.mul(s, s), s1));
}

Value variance_loss(Tape& tape, Value q, Value q_integrated, int dim) {
  return tape.l2_norm(tape.sub(beta_variance(tape, q, dim), beta_variance(tape, q_integrated, dim)));
}

double benchmark_relation_induced(const KnowledgeGraph& kg, const ModelConfig& cfg, int k,
                                  int calls) {
  if (kg.relation_count() < 4) throw DataError("benchmark needs at least two base relations");
  ModelConfig bench_cfg = cfg;
  bench_cfg.context_samples = k;

  ParamStore store;
  store.add("entity", Tensor(static_cast<int>(kg.entity_count()), cfg.context_entity_width()));
  QueryGraph g = build_query_graph(QueryType::k2p, {0}, {0, 2});
  const int node = 1;  // the 2p variable: in = {r0}, out = {r2}

  // Warm the per-(relation, side, K, seed) sample cache.
  {
    Tape warm;
    TapeBinding b = bind(warm, store);
    relation_induced_embedding(warm, b, bench_cfg, kg, g, node);
  }

  auto now = [] { return std::chrono::steady_clock::now(); };
  double total = 0.0;
  Tape tape;
  TapeBinding binding = bind(tape, store);
  for (int i = 0; i < calls; ++i) {
    if (i % 64 == 63) {  // keep the tape small; rebind off the clock
      tape.reset();
      binding = bind(tape, store);
    }
    auto start = now();
    relation_induced_embedding(tape, binding, bench_cfg, kg, g, node);
    total += std::chrono::duration<double>(now() - start).count();
  }
  return total / static_cast<double>(calls);
}

}  // namespace kgqr
