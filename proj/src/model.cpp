#include "kgqr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "kgqr/rng.hpp"

namespace kgqr {

namespace {

void fill_uniform(Tensor& t, Rng rng, double bound) {
  for (double& x : t.v) x = rng.uniform(-bound, bound);
}

double fan_in_bound(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

Model::Model(const KnowledgeGraph* kg, ModelConfig cfg) : kg_(kg), cfg_(std::move(cfg)) {
  if (cfg_.dim <= 0 || cfg_.dim_pos <= 0 || cfg_.dim_rol <= 0 || cfg_.dim_type <= 0) {
    throw ConfigError("dim", "embedding dimensions must be positive");
  }
}

void Model::init(std::uint64_t seed) {
  init_seed_ = seed;
  params_ = ParamStore();
  const int d = cfg_.dim;
  const int w = cfg_.query_width();
  const int nv = static_cast<int>(kg_->entity_count());
  const int nr = static_cast<int>(kg_->relation_count());

  struct Spec {
    std::string name;
    int rows, cols;
    double bound;
  };
  std::vector<Spec> specs;
  if (cfg_.backend == Backend::kBox) {
    specs.push_back({"entity", nv, d, cfg_.init_range});
    specs.push_back({"rel_center", nr, d, cfg_.init_range});
    specs.push_back({"rel_offset", nr, d, cfg_.init_range});
    specs.push_back({"box_att_w1", d, d, fan_in_bound(d)});
    specs.push_back({"box_att_b1", d, 1, fan_in_bound(d)});
    specs.push_back({"box_att_w2", 1, d, fan_in_bound(d)});
    specs.push_back({"box_att_b2", 1, 1, fan_in_bound(d)});
    specs.push_back({"box_shrink_w1", w, w, fan_in_bound(w)});
    specs.push_back({"box_shrink_b1", w, 1, fan_in_bound(w)});
    specs.push_back({"box_shrink_w2", d, w, fan_in_bound(w)});
    specs.push_back({"box_shrink_b2", d, 1, fan_in_bound(w)});
  } else {
    specs.push_back({"entity", nv, w, cfg_.init_range});
    specs.push_back({"relation", nr, w, cfg_.init_range});
    specs.push_back({"beta_proj_w1", w, 2 * w, fan_in_bound(2 * w)});
    specs.push_back({"beta_proj_b1", w, 1, fan_in_bound(2 * w)});
    specs.push_back({"beta_proj_w2", w, w, fan_in_bound(w)});
    specs.push_back({"beta_proj_b2", w, 1, fan_in_bound(w)});
    specs.push_back({"beta_att_w1", w, w, fan_in_bound(w)});
    specs.push_back({"beta_att_b1", w, 1, fan_in_bound(w)});
    specs.push_back({"beta_att_w2", 1, w, fan_in_bound(w)});
    specs.push_back({"beta_att_b2", 1, 1, fan_in_bound(w)});
  }
  const int ldim = cfg_.context_entity_width();
  const int cdim = cfg_.dim_pos + cfg_.dim_rol + cfg_.dim_type + ldim;
  specs.push_back({"pos_table", 4, cfg_.dim_pos, cfg_.init_range});
  specs.push_back({"rol_table", 3, cfg_.dim_rol, cfg_.init_range});
  specs.push_back({"type_w", cfg_.dim_type, 12, fan_in_bound(12)});
  specs.push_back({"int_q_w1", w, w, fan_in_bound(w)});
  specs.push_back({"int_q_b1", w, 1, fan_in_bound(w)});
  specs.push_back({"int_q_w2", w, w, fan_in_bound(w)});
  specs.push_back({"int_q_b2", w, 1, fan_in_bound(w)});
  specs.push_back({"int_c_w1", w, cdim, fan_in_bound(cdim)});
  specs.push_back({"int_c_b1", w, 1, fan_in_bound(cdim)});
  specs.push_back({"int_c_w2", w, w, fan_in_bound(w)});
  specs.push_back({"int_c_b2", w, 1, fan_in_bound(w)});
  specs.push_back({"int_out_w", w, 2 * w, fan_in_bound(2 * w)});

  Rng root(seed);
  for (const Spec& s : specs) {
    Tensor t(s.rows, s.cols);
    if (s.bound > 0.0) fill_uniform(t, root.split(s.name), s.bound);
    params_.add(s.name, std::move(t));
  }
}

bool Model::supports(QueryType type) const {
  return cfg_.backend == Backend::kBeta || !template_arity(type).has_negation;
}

Value Model::entity_query(Tape& t, const TapeBinding& b, EntityId e) const {
  if (e >= kg_->entity_count()) throw IdOutOfRangeError("entity id out of range");
  Value row = t.gather_row(b.at("entity"), static_cast<int>(e));
  if (cfg_.backend == Backend::kBox) {
    return t.concat({row, t.constant(Tensor(cfg_.dim, 1))});  // anchors are points
  }
  return t.posmap(row, cfg_.beta_floor, cfg_.beta_cap);
}

Value Model::project(Tape& t, const TapeBinding& b, Value q, RelationId r) const {
  if (r >= kg_->relation_count()) throw UnknownRelationError("relation id out of range");
  const int d = cfg_.dim;
  if (cfg_.backend == Backend::kBox) {
    Value center = t.add(t.slice(q, 0, d), t.gather_row(b.at("rel_center"), static_cast<int>(r)));
    Value offset = t.add(t.slice(q, d, d),
                         t.softplus(t.gather_row(b.at("rel_offset"), static_cast<int>(r))));
    return t.concat({center, offset});
  }
  Value x = t.concat({q, t.gather_row(b.at("relation"), static_cast<int>(r))});
  Value h = t.relu(t.add(t.matvec(b.at("beta_proj_w1"), x), b.at("beta_proj_b1")));
  Value out = t.add(t.matvec(b.at("beta_proj_w2"), h), b.at("beta_proj_b2"));
  return t.posmap(out, cfg_.beta_floor, cfg_.beta_cap);
}

namespace {

// Canonical operand order: lexicographic on the forward values. Identical
// inputs compare equal, so any permutation of the list aggregates in the
// same order bit for bit.
std::vector<Value> canonical_order(const Tape& t, const std::vector<Value>& qs) {
  std::vector<Value> sorted = qs;
  std::stable_sort(sorted.begin(), sorted.end(), [&](Value a, Value b) {
    const Tensor& ta = t.value(a);
    const Tensor& tb = t.value(b);
    return std::lexicographical_compare(ta.v.begin(), ta.v.end(), tb.v.begin(), tb.v.end());
  });
  return sorted;
}

}  // namespace

Value Model::box_intersect(Tape& t, const TapeBinding& b, const std::vector<Value>& qs) const {
  const int d = cfg_.dim;
  std::vector<Value> centers, offsets, scores;
  for (Value q : qs) {
    Value c = t.slice(q, 0, d);
    centers.push_back(c);
    offsets.push_back(t.slice(q, d, d));
    Value h = t.relu(t.add(t.matvec(b.at("box_att_w1"), c), b.at("box_att_b1")));
    scores.push_back(t.add(t.matvec(b.at("box_att_w2"), h), b.at("box_att_b2")));
  }
  Value weights = t.softmax(t.concat(scores));
  Value center;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    Value term = t.mul(t.slice(weights, static_cast<int>(i), 1), centers[i]);
    center = i == 0 ? term : t.add(center, term);
  }
  Value pooled = t.mean_list(qs);
  Value h = t.relu(t.add(t.matvec(b.at("box_shrink_w1"), pooled), b.at("box_shrink_b1")));
  Value shrink = t.sigmoid(t.add(t.matvec(b.at("box_shrink_w2"), h), b.at("box_shrink_b2")));
  Value offset = t.mul(t.min_list(offsets), shrink);
  return t.concat({center, offset});
}

Value Model::beta_intersect(Tape& t, const TapeBinding& b, const std::vector<Value>& qs) const {
  std::vector<Value> scores;
  for (Value q : qs) {
    Value h = t.relu(t.add(t.matvec(b.at("beta_att_w1"), q), b.at("beta_att_b1")));
    scores.push_back(t.add(t.matvec(b.at("beta_att_w2"), h), b.at("beta_att_b2")));
  }
  Value weights = t.softmax(t.concat(scores));
  Value out;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    Value term = t.mul(t.slice(weights, static_cast<int>(i), 1), qs[i]);
    out = i == 0 ? term : t.add(out, term);
  }
  return out;  // convex combination of valid parameters stays valid
}

Value Model::intersect(Tape& t, const TapeBinding& b, const std::vector<Value>& qs) const {
  if (qs.size() < 2) throw FewerThanTwoError("intersection needs at least two inputs");
  std::vector<Value> ordered = canonical_order(t, qs);
  return cfg_.backend == Backend::kBox ? box_intersect(t, b, ordered)
                                       : beta_intersect(t, b, ordered);
}

Value Model::negate(Tape& t, const TapeBinding& b, Value q) const {
  (void)b;
  if (cfg_.backend == Backend::kBox) {
    throw NegationUnsupportedError("the box backend cannot address negations");
  }
  Value inv = t.div(t.constant_scalar(1.0), q);
  return t.clamp(inv, cfg_.beta_floor, cfg_.beta_cap);
}

Value Model::entity_distance(Tape& t, const TapeBinding& b, EntityId e, Value q) const {
  if (e >= kg_->entity_count()) throw IdOutOfRangeError("entity id out of range");
  const int d = cfg_.dim;
  if (cfg_.backend == Backend::kBox) {
    Value point = t.gather_row(b.at("entity"), static_cast<int>(e));
    Value diff = t.abs(t.sub(point, t.slice(q, 0, d)));
    Value offset = t.slice(q, d, d);
    Value outside = t.l1_norm(t.relu(t.sub(diff, offset)));
    Value inside = t.l1_norm(t.min_list({diff, offset}));
    return t.add(outside, t.mul(t.constant_scalar(cfg_.alpha_in), inside));
  }
  Value ep = t.posmap(t.gather_row(b.at("entity"), static_cast<int>(e)), cfg_.beta_floor,
                      cfg_.beta_cap);
  Value a1 = t.slice(ep, 0, d), b1 = t.slice(ep, d, d);
  Value a2 = t.slice(q, 0, d), b2 = t.slice(q, d, d);
  Value s1 = t.add(a1, b1);
  Value log_beta_q = t.sub(t.add(t.lgamma(a2), t.lgamma(b2)), t.lgamma(t.add(a2, b2)));
  Value log_beta_e = t.sub(t.add(t.lgamma(a1), t.lgamma(b1)), t.lgamma(s1));
  Value kl = t.sub(log_beta_q, log_beta_e);
  kl = t.add(kl, t.mul(t.sub(a1, a2), t.digamma(a1)));
  kl = t.add(kl, t.mul(t.sub(b1, b2), t.digamma(b1)));
  kl = t.add(kl, t.mul(t.add(t.sub(a2, a1), t.sub(b2, b1)), t.digamma(s1)));
  return t.sum(kl);
}

Value Model::embed_tree(Tape& t, const TapeBinding& b, const QueryGraph& g,
                        const ComputationGraph& cg, bool integrated) const {
  const bool integrating = integrated && cfg_.use_integration;
  // g_G and l_v are shared across every projection of the tree; memoize per call.
  Value type_cached;
  std::vector<Value> l_cached(g.nodes.size());
  std::vector<bool> l_known(g.nodes.size(), false);

  auto embed = [&](auto&& self, int idx) -> Value {
    const ComputationNode& node = cg.nodes[idx];
    switch (node.kind) {
      case ComputationNode::Kind::kAnchor:
        return entity_query(t, b, node.entity);
      case ComputationNode::Kind::kProjection: {
        Value q = project(t, b, self(self, node.children[0]), node.relation);
        if (!integrating) return q;
        ContextBundle bundle = build_structure_context(t, b, cfg_, g, node.graph_node);
        if (cfg_.use_type) {
          if (!type_cached.valid()) type_cached = bundle.type;
          bundle.type = type_cached;
        }
        if (cfg_.use_relation) {
          if (!l_known[node.graph_node]) {
            l_cached[node.graph_node] =
                relation_induced_embedding(t, b, cfg_, *kg_, g, node.graph_node);
            l_known[node.graph_node] = true;
          }
          bundle.relation_induced = l_cached[node.graph_node];
        }
        return integrate(t, b, cfg_, q, bundle);
      }
      case ComputationNode::Kind::kIntersection: {
        std::vector<Value> parts;
        parts.reserve(node.children.size());
        for (int c : node.children) parts.push_back(self(self, c));
        return intersect(t, b, parts);
      }
      case ComputationNode::Kind::kNegation:
        return negate(t, b, self(self, node.children[0]));
      case ComputationNode::Kind::kUnion:
        throw UnsupportedUnionShapeError("embed_tree expects a union-free tree (run to_dnf)");
    }
    throw NodeNotFoundError("invalid computation node kind");
  };
  return embed(embed, cg.root);
}

std::vector<Value> Model::embed_query(Tape& t, const TapeBinding& b, const QueryGraph& g,
                                      bool integrated) const {
  ComputationGraph cg = to_computation_graph(g);
  if (cfg_.backend == Backend::kBox && cg.has_negation()) {
    throw NegationUnsupportedError("the box backend cannot address negations");
  }
  std::vector<Value> out;
  for (const ComputationGraph& disjunct : to_dnf(cg)) {
    out.push_back(embed_tree(t, b, g, disjunct, integrated));
  }
  return out;
}

Value Model::query_distance(Tape& t, const TapeBinding& b, EntityId e,
                            const std::vector<Value>& disjuncts) const {
  if (disjuncts.empty()) throw EmptyDisjunctsError("query distance over zero disjuncts");
  std::vector<Value> dists;
  dists.reserve(disjuncts.size());
  for (Value q : disjuncts) dists.push_back(entity_distance(t, b, e, q));
  return dists.size() == 1 ? dists[0] : t.min_list(dists);
}

// ---------------------------------------------------------------------------
// Checkpoints.

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  const ModelConfig& cfg = model.config();
  std::ostringstream manifest;
  manifest.precision(17);
  manifest << "kgqr-checkpoint 1\n";
  manifest << "backend " << to_string(cfg.backend) << "\n";
  manifest << "dim " << cfg.dim << "\n";
  manifest << "dim_pos " << cfg.dim_pos << "\n";
  manifest << "dim_rol " << cfg.dim_rol << "\n";
  manifest << "dim_type " << cfg.dim_type << "\n";
  manifest << "alpha_in " << cfg.alpha_in << "\n";
  manifest << "beta_floor " << cfg.beta_floor << "\n";
  manifest << "beta_cap " << cfg.beta_cap << "\n";
  manifest << "use_position " << cfg.use_position << "\n";
  manifest << "use_role " << cfg.use_role << "\n";
  manifest << "use_type " << cfg.use_type << "\n";
  manifest << "use_relation " << cfg.use_relation << "\n";
  manifest << "use_integration " << cfg.use_integration << "\n";
  manifest << "context_samples " << cfg.context_samples << "\n";
  manifest << "context_seed " << cfg.context_seed << "\n";
  manifest << "init_seed " << model.init_seed() << "\n";
  manifest << "init_range " << cfg.init_range << "\n";
  manifest << "entities " << model.kg().entity_count() << "\n";
  manifest << "relations " << model.kg().relation_count() << "\n";
  std::size_t offset = 0;
  const ParamStore& params = model.params();
  for (const std::string& name : params.names()) {
    const Tensor& t = params.get(name);
    manifest << "tensor " << name << " " << t.rows << " " << t.cols << " " << offset << "\n";
    offset += static_cast<std::size_t>(t.size()) * sizeof(float);
  }
  manifest << "end\n";
  out << manifest.str();
  for (const std::string& name : params.names()) {
    const Tensor& t = params.get(name);
    std::vector<float> data(t.v.begin(), t.v.end());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
  }
  if (!out) throw DataError("failed to write checkpoint: " + path);
}

Model load_checkpoint(const std::string& path, const KnowledgeGraph& kg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "kgqr-checkpoint 1") {
    throw CheckpointError("unrecognized checkpoint header");
  }
  ModelConfig cfg;
  std::uint64_t init_seed = 0;
  std::size_t entities = 0, relations = 0;
  struct TensorEntry {
    std::string name;
    int rows, cols;
    std::size_t offset;
  };
  std::vector<TensorEntry> tensors;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "tensor") {
      TensorEntry e;
      ls >> e.name >> e.rows >> e.cols >> e.offset;
      if (!ls) throw CheckpointError("malformed tensor line: " + line);
      tensors.push_back(std::move(e));
      continue;
    }
    std::string value;
    ls >> value;
    if (!ls) throw CheckpointError("malformed manifest line: " + line);
    if (key == "backend") {
      auto b = backend_from_string(value);
      if (!b) throw CheckpointError("unknown backend: " + value);
      cfg.backend = *b;
    } else if (key == "dim") {
      cfg.dim = std::stoi(value);
    } else if (key == "dim_pos") {
      cfg.dim_pos = std::stoi(value);
    } else if (key == "dim_rol") {
      cfg.dim_rol = std::stoi(value);
    } else if (key == "dim_type") {
      cfg.dim_type = std::stoi(value);
    } else if (key == "alpha_in") {
      cfg.alpha_in = std::stod(value);
    } else if (key == "beta_floor") {
      cfg.beta_floor = std::stod(value);
    } else if (key == "beta_cap") {
      cfg.beta_cap = std::stod(value);
    } else if (key == "use_position") {
      cfg.use_position = value == "1";
    } else if (key == "use_role") {
      cfg.use_role = value == "1";
    } else if (key == "use_type") {
      cfg.use_type = value == "1";
    } else if (key == "use_relation") {
      cfg.use_relation = value == "1";
    } else if (key == "use_integration") {
      cfg.use_integration = value == "1";
    } else if (key == "context_samples") {
      cfg.context_samples = std::stoi(value);
    } else if (key == "context_seed") {
      cfg.context_seed = std::stoull(value);
    } else if (key == "init_seed") {
      init_seed = std::stoull(value);
    } else if (key == "init_range") {
      cfg.init_range = std::stod(value);
    } else if (key == "entities") {
      entities = std::stoull(value);
    } else if (key == "relations") {
      relations = std::stoull(value);
    } else {
      throw CheckpointError("unknown manifest key: " + key);
    }
  }
  if (entities != kg.entity_count() || relations != kg.relation_count()) {
    throw CheckpointError("checkpoint vocabulary does not match the knowledge graph");
  }
  Model model(&kg, cfg);
  model.init(init_seed);
  std::streampos blob_start = in.tellg();
  for (const TensorEntry& e : tensors) {
    if (!model.params().has(e.name)) {
      throw CheckpointError("checkpoint tensor not in model: " + e.name);
    }
    Tensor& t = model.params().get(e.name);
    if (t.rows != e.rows || t.cols != e.cols) {
      throw CheckpointError("tensor shape mismatch for " + e.name);
    }
    std::vector<float> data(static_cast<std::size_t>(t.size()));
    in.seekg(blob_start + static_cast<std::streamoff>(e.offset));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!in) throw CheckpointError("truncated checkpoint blob at tensor " + e.name);
    for (std::size_t i = 0; i < data.size(); ++i) t.v[i] = static_cast<double>(data[i]);
  }
  return model;
}

}  // namespace kgqr
