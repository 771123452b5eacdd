#include "kgqr/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

#include <json.hpp>

namespace kgqr {

namespace {

using IdSet = std::vector<EntityId>;  // sorted, unique

IdSet set_union(const IdSet& a, const IdSet& b) {
  IdSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

IdSet set_intersect(const IdSet& a, const IdSet& b) {
  IdSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

IdSet set_difference(const IdSet& a, const IdSet& b) {
  IdSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

IdSet complement(const KnowledgeGraph& kg, const IdSet& s) {
  IdSet out;
  out.reserve(kg.entity_count() - s.size());
  std::size_t at = 0;
  for (EntityId e = 0; e < kg.entity_count(); ++e) {
    if (at < s.size() && s[at] == e) {
      ++at;
    } else {
      out.push_back(e);
    }
  }
  return out;
}

bool contains_id(const IdSet& s, EntityId e) {
  return std::binary_search(s.begin(), s.end(), e);
}

bool strict_subset(const IdSet& inner, const IdSet& outer) {
  return !inner.empty() && inner.size() < outer.size() &&
         std::includes(outer.begin(), outer.end(), inner.begin(), inner.end());
}

IdSet project(const KnowledgeGraph& kg, const IdSet& s, RelationId r) {
  IdSet out;
  for (EntityId e : s) {
    auto nb = kg.neighbors(e, r);
    out.insert(out.end(), nb.begin(), nb.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

IdSet eval_node(const KnowledgeGraph& kg, const ComputationGraph& cg, int idx) {
  const ComputationNode& n = cg.nodes[idx];
  switch (n.kind) {
    case ComputationNode::Kind::kAnchor:
      return {n.entity};
    case ComputationNode::Kind::kProjection:
      return project(kg, eval_node(kg, cg, n.children[0]), n.relation);
    case ComputationNode::Kind::kIntersection: {
      IdSet acc = eval_node(kg, cg, n.children[0]);
      for (std::size_t i = 1; i < n.children.size(); ++i) {
        acc = set_intersect(acc, eval_node(kg, cg, n.children[i]));
      }
      return acc;
    }
    case ComputationNode::Kind::kUnion: {
      IdSet acc;
      for (int c : n.children) acc = set_union(acc, eval_node(kg, cg, c));
      return acc;
    }
    case ComputationNode::Kind::kNegation:
      return complement(kg, eval_node(kg, cg, n.children[0]));
  }
  throw NodeNotFoundError("invalid computation node kind");
}

// ---------------------------------------------------------------------------
// Backward grounding machinery.

struct Grounding {
  const KnowledgeGraph& kg;
  const QueryGraph& tmpl;  // unbound template instance (relations placeholder)
  std::vector<EntityId> node_entity;
  std::vector<bool> node_assigned;
  std::vector<RelationId> edge_relation;
  std::vector<bool> edge_grounded;
};

std::vector<int> in_edges_of(const QueryGraph& g, int v) {
  std::vector<int> out;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (g.edges[i].dst == v) out.push_back(static_cast<int>(i));
  }
  return out;
}

// Entity set produced by the (grounded) branch arriving through edge ei,
// negation flag ignored (the raw projected set).
IdSet branch_set(const Grounding& gr, int ei) {
  const QueryEdge& e = gr.tmpl.edges[ei];
  IdSet src_set;
  auto feeders = in_edges_of(gr.tmpl, e.src);
  if (feeders.empty()) {
    src_set = {gr.node_entity[e.src]};
  } else {
    // Within the 14 templates, a negated edge's source has at most one
    // plain feeder chain (pni); evaluate it recursively.
    IdSet acc;
    bool first = true;
    for (int f : feeders) {
      IdSet fs = branch_set(gr, f);
      acc = first ? fs : set_intersect(acc, fs);
      first = false;
    }
    src_set = acc;
  }
  return project(gr.kg, src_set, gr.edge_relation[ei]);
}

// Picks a uniformly random incoming KG edge (h, r, e); requires inverse
// relations (an in-edge of e is an out-edge of e through the inverse).
bool random_in_edge(const KnowledgeGraph& kg, EntityId e, Rng& rng, EntityId* h, RelationId* r) {
  auto edges = kg.out_edges(e);
  if (edges.empty()) return false;
  const Triple& t = edges[static_cast<std::size_t>(rng.below(edges.size()))];
  *h = t.tail;
  *r = kg.inverse(t.relation);
  return true;
}

EntityId random_answer_entity(const KnowledgeGraph& kg, Rng& rng) {
  const auto& triples = kg.triples();
  return triples[static_cast<std::size_t>(rng.below(triples.size()))].tail;
}

// Grounds the plain backbone backward from node v (already assigned).
// Returns false when the walk dead-ends.
bool ground_plain(Grounding& gr, int v, Rng& rng) {
  const QueryGraph& g = gr.tmpl;
  auto in_edges = in_edges_of(g, v);
  const bool is_union = g.is_union_node(v);
  std::vector<std::pair<EntityId, RelationId>> signatures;
  bool first_branch = true;
  for (int ei : in_edges) {
    const QueryEdge& e = g.edges[ei];
    if (e.negated) continue;  // phase 2
    EntityId target;
    if (is_union && !first_branch) {
      target = random_answer_entity(gr.kg, rng);  // union: branches independent
    } else {
      target = gr.node_entity[v];
    }
    first_branch = false;
    bool ok = false;
    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
      EntityId h;
      RelationId r;
      if (!random_in_edge(gr.kg, target, rng, &h, &r)) return false;
      // Distinct (source, relation) pairs keep intersection branches
      // from collapsing into copies of each other.
      bool dup = false;
      for (auto& sig : signatures) {
        if (sig.first == h && sig.second == r) dup = true;
      }
      if (dup) continue;
      gr.edge_relation[ei] = r;
      gr.edge_grounded[ei] = true;
      gr.node_entity[e.src] = h;
      gr.node_assigned[e.src] = true;
      signatures.emplace_back(h, r);
      ok = true;
    }
    if (!ok) return false;
    if (!ground_plain(gr, e.src, rng)) return false;
  }
  return true;
}

// Grounds one negated edge so that the negated branch's answer set is a
// nonempty strict subset of the sibling intersection, and keeps the already
// assigned target entity outside it.
bool ground_negated(Grounding& gr, int ei, Rng& rng) {
  const QueryGraph& g = gr.tmpl;
  const QueryEdge& edge = g.edges[ei];
  const EntityId kept = gr.node_entity[edge.dst];

  IdSet sibling;
  bool first = true;
  for (int other : in_edges_of(g, edge.dst)) {
    if (other == ei) continue;
    IdSet s = branch_set(gr, other);
    sibling = first ? s : set_intersect(sibling, s);
    first = false;
  }
  if (sibling.size() < 2) return false;  // no room for a strict subset

  auto feeders = in_edges_of(g, edge.src);
  const std::size_t nr = gr.kg.relation_count();
  std::vector<RelationId> rel_order(nr);
  for (std::size_t i = 0; i < nr; ++i) rel_order[i] = static_cast<RelationId>(i);
  rng.shuffle(rel_order);

  for (RelationId r : rel_order) {
    auto heads = gr.kg.relation_endpoints(r, EndpointSide::kHead);
    if (heads.empty()) continue;
    std::vector<EntityId> head_order(heads.begin(), heads.end());
    rng.shuffle(head_order);
    for (EntityId h : head_order) {
      auto nb = gr.kg.neighbors(h, r);
      IdSet direct(nb.begin(), nb.end());
      if (direct.empty() || contains_id(direct, kept)) continue;
      if (feeders.empty()) {
        if (!strict_subset(direct, sibling)) continue;
        gr.edge_relation[ei] = r;
        gr.edge_grounded[ei] = true;
        gr.node_entity[edge.src] = h;
        gr.node_assigned[edge.src] = true;
        return true;
      }
      // pni: edge.src is a variable with one plain feeder; the full branch
      // set unions projections over every feeder answer, so ground the
      // feeder and check the whole chain.
      if (!strict_subset(direct, sibling)) continue;
      gr.node_entity[edge.src] = h;
      gr.node_assigned[edge.src] = true;
      gr.edge_relation[ei] = r;
      gr.edge_grounded[ei] = true;
      for (int attempt = 0; attempt < 8; ++attempt) {
        EntityId fh;
        RelationId fr;
        if (!random_in_edge(gr.kg, h, rng, &fh, &fr)) break;
        const int fe = feeders[0];
        gr.edge_relation[fe] = fr;
        gr.edge_grounded[fe] = true;
        gr.node_entity[g.edges[fe].src] = fh;
        gr.node_assigned[g.edges[fe].src] = true;
        IdSet full = branch_set(gr, ei);
        if (strict_subset(full, sibling) && !contains_id(full, kept)) return true;
      }
      gr.edge_grounded[ei] = false;
      gr.node_assigned[edge.src] = false;
    }
  }
  return false;
}

}  // namespace

std::vector<EntityId> evaluate_answers(const KnowledgeGraph& kg, const ComputationGraph& cg) {
  return eval_node(kg, cg, cg.root);
}

QueryInstance ground_query(const KnowledgeGraph& kg_train, const KnowledgeGraph& kg_full,
                           QueryType t, Rng& rng, int max_tries, bool require_hard) {
  const TemplateArity& arity = template_arity(t);
  std::vector<EntityId> zero_anchors(arity.anchors, 0);
  std::vector<RelationId> zero_relations(arity.relations, 0);
  const QueryGraph tmpl = build_query_graph(t, zero_anchors, zero_relations);

  for (int attempt = 0; attempt < max_tries; ++attempt) {
    Grounding gr{kg_full, tmpl,
                 std::vector<EntityId>(tmpl.nodes.size(), 0),
                 std::vector<bool>(tmpl.nodes.size(), false),
                 std::vector<RelationId>(tmpl.edges.size(), 0),
                 std::vector<bool>(tmpl.edges.size(), false)};
    const int answer = tmpl.answer_node();
    gr.node_entity[answer] = random_answer_entity(kg_full, rng);
    gr.node_assigned[answer] = true;
    if (!ground_plain(gr, answer, rng)) continue;

    bool ok = true;
    for (std::size_t ei = 0; ei < tmpl.edges.size(); ++ei) {
      if (tmpl.edges[ei].negated && !ground_negated(gr, static_cast<int>(ei), rng)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    QueryInstance inst;
    inst.type = t;
    for (std::size_t i = 0; i < tmpl.nodes.size(); ++i) {
      if (tmpl.nodes[i].role == NodeRole::kAnchor) inst.anchors.push_back(gr.node_entity[i]);
    }
    inst.relations = gr.edge_relation;

    inst = label_easy_hard(kg_train, kg_full, std::move(inst));
    if (inst.degenerate()) continue;
    if (require_hard && inst.hard_answers.empty()) continue;
    return inst;
  }
  throw GroundingFailedError("could not ground a " + std::string(to_string(t)) + " query after " +
                             std::to_string(max_tries) + " tries");
}

QueryInstance label_easy_hard(const KnowledgeGraph& kg_train, const KnowledgeGraph& kg_full,
                              QueryInstance inst) {
  const ComputationGraph cg = to_computation_graph(inst.graph());
  IdSet easy = evaluate_answers(kg_train, cg);
  IdSet full = evaluate_answers(kg_full, cg);
  inst.easy_answers = std::move(easy);
  inst.hard_answers = set_difference(full, inst.easy_answers);
  return inst;
}

std::vector<QueryInstance> generate_queries(const KnowledgeGraph& kg_train,
                                            const KnowledgeGraph& kg_full,
                                            const std::vector<QueryType>& types,
                                            int count_per_type, std::uint64_t seed,
                                            bool require_hard, int max_tries) {
  std::vector<QueryInstance> out;
  std::set<std::tuple<QueryType, std::vector<EntityId>, std::vector<RelationId>>> seen;
  Rng root(seed);
  for (QueryType t : types) {
    for (int i = 0; i < count_per_type; ++i) {
      Rng stream = root.split(static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i));
      bool placed = false;
      for (int dedup_try = 0; dedup_try < 50 && !placed; ++dedup_try) {
        QueryInstance inst = ground_query(kg_train, kg_full, t, stream, max_tries, require_hard);
        auto key = std::make_tuple(inst.type, inst.anchors, inst.relations);
        if (seen.insert(std::move(key)).second) {
          out.push_back(std::move(inst));
          placed = true;
        }
      }
      if (!placed) {
        throw GroundingFailedError("could not produce " + std::to_string(count_per_type) +
                                   " distinct " + std::string(to_string(t)) + " queries");
      }
    }
  }
  return out;
}

void write_query_file(const std::string& path, const KnowledgeGraph& kg,
                      const std::vector<QueryInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open query file for writing: " + path);
  for (const QueryInstance& inst : instances) {
    nlohmann::ordered_json rec;
    rec["type"] = std::string(to_string(inst.type));
    auto entity_labels = [&](const std::vector<EntityId>& ids) {
      std::vector<std::string> labels;
      labels.reserve(ids.size());
      for (EntityId e : ids) labels.push_back(kg.entity_label(e));
      return labels;
    };
    rec["anchors"] = entity_labels(inst.anchors);
    std::vector<std::string> rel_labels;
    rel_labels.reserve(inst.relations.size());
    for (RelationId r : inst.relations) rel_labels.push_back(kg.relation_label(r));
    rec["relations"] = rel_labels;
    rec["easy_answers"] = entity_labels(inst.easy_answers);
    rec["hard_answers"] = entity_labels(inst.hard_answers);
    out << rec.dump() << '\n';
  }
}

std::vector<QueryInstance> read_query_file(const std::string& path, const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open query file: " + path);
  std::vector<QueryInstance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    for (const char* key : {"type", "anchors", "relations", "easy_answers", "hard_answers"}) {
      if (!rec.contains(key)) {
        throw ParseError(line_no, std::string("missing field: ") + key);
      }
    }
    QueryInstance inst;
    auto type = query_type_from_string(rec["type"].get<std::string>());
    if (!type) throw ParseError(line_no, "unknown query type: " + rec["type"].get<std::string>());
    inst.type = *type;
    auto resolve_entities = [&](const nlohmann::json& arr) {
      std::vector<EntityId> ids;
      for (const auto& label : arr) {
        auto id = kg.entity_id(label.get<std::string>());
        if (!id) throw UnknownEntityError("unknown entity label: " + label.get<std::string>());
        ids.push_back(*id);
      }
      return ids;
    };
    inst.anchors = resolve_entities(rec["anchors"]);
    for (const auto& label : rec["relations"]) {
      auto id = kg.relation_id(label.get<std::string>());
      if (!id) throw UnknownRelationError("unknown relation label: " + label.get<std::string>());
      inst.relations.push_back(*id);
    }
    inst.easy_answers = resolve_entities(rec["easy_answers"]);
    inst.hard_answers = resolve_entities(rec["hard_answers"]);
    std::sort(inst.easy_answers.begin(), inst.easy_answers.end());
    std::sort(inst.hard_answers.begin(), inst.hard_answers.end());
    (void)inst.graph();  // validates arity against the template
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace kgqr
