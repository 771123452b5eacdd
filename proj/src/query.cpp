#include "kgqr/query.hpp"

#include <algorithm>

namespace kgqr {

namespace {

struct TemplateDef {
  std::string_view name;
  std::vector<NodeRole> roles;
  // (src, dst, negated); relations are assigned to edges in this order.
  std::vector<std::tuple<int, int, bool>> edges;
  std::vector<int> union_nodes;
};

const std::vector<TemplateDef>& template_defs() {
  static const std::vector<TemplateDef> defs = [] {
    using R = NodeRole;
    constexpr auto A = R::kAnchor;
    constexpr auto V = R::kVariable;
    constexpr auto S = R::kAnswer;
    std::vector<TemplateDef> d(kNumQueryTypes);
    d[static_cast<int>(QueryType::k1p)] = {"1p", {A, S}, {{0, 1, false}}, {}};
    d[static_cast<int>(QueryType::k2p)] = {"2p", {A, V, S}, {{0, 1, false}, {1, 2, false}}, {}};
    d[static_cast<int>(QueryType::k3p)] = {
        "3p", {A, V, V, S}, {{0, 1, false}, {1, 2, false}, {2, 3, false}}, {}};
    d[static_cast<int>(QueryType::k2i)] = {"2i", {A, A, S}, {{0, 2, false}, {1, 2, false}}, {}};
    d[static_cast<int>(QueryType::k3i)] = {
        "3i", {A, A, A, S}, {{0, 3, false}, {1, 3, false}, {2, 3, false}}, {}};
    d[static_cast<int>(QueryType::kPi)] = {
        "pi", {A, V, A, S}, {{0, 1, false}, {1, 3, false}, {2, 3, false}}, {}};
    d[static_cast<int>(QueryType::kIp)] = {
        "ip", {A, A, V, S}, {{0, 2, false}, {1, 2, false}, {2, 3, false}}, {}};
    d[static_cast<int>(QueryType::k2u)] = {"2u", {A, A, S}, {{0, 2, false}, {1, 2, false}}, {2}};
    d[static_cast<int>(QueryType::kUp)] = {
        "up", {A, A, V, S}, {{0, 2, false}, {1, 2, false}, {2, 3, false}}, {2}};
    d[static_cast<int>(QueryType::k2in)] = {"2in", {A, A, S}, {{0, 2, false}, {1, 2, true}}, {}};
    d[static_cast<int>(QueryType::k3in)] = {
        "3in", {A, A, A, S}, {{0, 3, false}, {1, 3, false}, {2, 3, true}}, {}};
    d[static_cast<int>(QueryType::kInp)] = {
        "inp", {A, A, V, S}, {{0, 2, false}, {1, 2, true}, {2, 3, false}}, {}};
    d[static_cast<int>(QueryType::kPin)] = {
        "pin", {A, V, A, S}, {{0, 1, false}, {1, 3, false}, {2, 3, true}}, {}};
    d[static_cast<int>(QueryType::kPni)] = {
        "pni", {A, V, A, S}, {{0, 1, false}, {1, 3, true}, {2, 3, false}}, {}};
    return d;
  }();
  return defs;
}

}  // namespace

const std::array<QueryType, kNumQueryTypes>& all_query_types() {
  static const std::array<QueryType, kNumQueryTypes> types = {
      QueryType::k1p,  QueryType::k2p,  QueryType::k3p, QueryType::k2i,  QueryType::k3i,
      QueryType::kPi,  QueryType::kIp,  QueryType::k2u, QueryType::kUp,  QueryType::k2in,
      QueryType::k3in, QueryType::kInp, QueryType::kPin, QueryType::kPni};
  return types;
}

std::string_view to_string(QueryType t) { return template_defs()[static_cast<int>(t)].name; }

std::optional<QueryType> query_type_from_string(std::string_view name) {
  for (QueryType t : all_query_types()) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

const TemplateArity& template_arity(QueryType t) {
  static const std::array<TemplateArity, kNumQueryTypes> table = [] {
    std::array<TemplateArity, kNumQueryTypes> out{};
    for (int i = 0; i < kNumQueryTypes; ++i) {
      const TemplateDef& def = template_defs()[i];
      TemplateArity a{};
      a.nodes = static_cast<int>(def.roles.size());
      a.relations = static_cast<int>(def.edges.size());
      a.anchors = static_cast<int>(
          std::count(def.roles.begin(), def.roles.end(), NodeRole::kAnchor));
      a.has_union = !def.union_nodes.empty();
      for (const auto& [s, d, neg] : def.edges) a.has_negation |= neg;
      out[i] = a;
    }
    return out;
  }();
  return table[static_cast<int>(t)];
}

int QueryGraph::answer_node() const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].role == NodeRole::kAnswer) return static_cast<int>(i);
  }
  throw NodeNotFoundError("query graph has no answer node");
}

bool QueryGraph::is_union_node(int v) const {
  return std::find(union_nodes.begin(), union_nodes.end(), v) != union_nodes.end();
}

QueryGraph build_query_graph(QueryType t, const std::vector<EntityId>& anchors,
                             const std::vector<RelationId>& relations) {
  const TemplateDef& def = template_defs()[static_cast<int>(t)];
  const TemplateArity& arity = template_arity(t);
  if (static_cast<int>(anchors.size()) != arity.anchors ||
      static_cast<int>(relations.size()) != arity.relations) {
    throw ArityMismatchError(std::string(def.name) + " expects " +
                             std::to_string(arity.anchors) + " anchors and " +
                             std::to_string(arity.relations) + " relations");
  }

  QueryGraph g;
  g.type = t;
  g.union_nodes = def.union_nodes;
  std::size_t next_anchor = 0;
  for (NodeRole role : def.roles) {
    QueryNode n{role, 0, std::nullopt};
    if (role == NodeRole::kAnchor) n.anchor = anchors[next_anchor++];
    g.nodes.push_back(n);
  }
  for (std::size_t i = 0; i < def.edges.size(); ++i) {
    const auto& [src, dst, negated] = def.edges[i];
    g.edges.push_back({src, dst, relations[i], negated});
  }

  // position(v) = maximum edge count over anchor->v paths; edges are listed
  // in topological order for every template, so one pass suffices.
  for (const QueryEdge& e : g.edges) {
    g.nodes[e.dst].position = std::max(g.nodes[e.dst].position, g.nodes[e.src].position + 1);
  }
  return g;
}

QueryGraph build_query_graph(const KnowledgeGraph& kg, QueryType t,
                             const std::vector<std::string>& anchor_labels,
                             const std::vector<std::string>& relation_labels) {
  std::vector<EntityId> anchors;
  anchors.reserve(anchor_labels.size());
  for (const std::string& label : anchor_labels) {
    auto id = kg.entity_id(label);
    if (!id) throw UnknownEntityError("unknown entity label: " + label);
    anchors.push_back(*id);
  }
  std::vector<RelationId> relations;
  relations.reserve(relation_labels.size());
  for (const std::string& label : relation_labels) {
    auto id = kg.relation_id(label);
    if (!id) throw UnknownRelationError("unknown relation label: " + label);
    relations.push_back(*id);
  }
  return build_query_graph(t, anchors, relations);
}

int CountTable::total() const {
  int acc = 0;
  for (const auto& row : counts) {
    for (int c : row) acc += c;
  }
  return acc;
}

CountTable count_table(const QueryGraph& g) {
  CountTable table;
  for (const QueryNode& n : g.nodes) {
    if (n.position < 0 || n.position > kMaxPosition) {
      throw PositionOverflowError("node position exceeds " + std::to_string(kMaxPosition));
    }
    ++table.counts[static_cast<int>(n.role)][n.position];
  }
  return table;
}

std::array<double, 12> type_vector(const CountTable& c) {
  std::array<double, 12> out{};
  for (int r = 0; r < 3; ++r) {
    for (int p = 0; p < 4; ++p) out[r * 4 + p] = c.counts[r][p] / 4.0;
  }
  return out;
}

bool ComputationGraph::has_negation() const {
  for (const ComputationNode& n : nodes) {
    if (n.kind == ComputationNode::Kind::kNegation) return true;
  }
  return false;
}

bool ComputationGraph::has_union() const {
  for (const ComputationNode& n : nodes) {
    if (n.kind == ComputationNode::Kind::kUnion) return true;
  }
  return false;
}

ComputationGraph to_computation_graph(const QueryGraph& g) {
  ComputationGraph cg;
  // subtree(v) materializes the operator tree producing node v's entity set.
  // Templates are trees toward the answer, so plain recursion cannot share.
  auto subtree = [&](auto&& self, int v) -> int {
    const QueryNode& node = g.nodes[v];
    if (node.role == NodeRole::kAnchor) {
      cg.nodes.push_back({ComputationNode::Kind::kAnchor, *node.anchor, 0, {}, v});
      return static_cast<int>(cg.nodes.size() - 1);
    }
    std::vector<int> branches;
    for (const QueryEdge& e : g.edges) {
      if (e.dst != v) continue;
      int child = self(self, e.src);
      cg.nodes.push_back({ComputationNode::Kind::kProjection, 0, e.relation, {child}, v});
      int proj = static_cast<int>(cg.nodes.size() - 1);
      if (e.negated) {
        cg.nodes.push_back({ComputationNode::Kind::kNegation, 0, 0, {proj}, v});
        proj = static_cast<int>(cg.nodes.size() - 1);
      }
      branches.push_back(proj);
    }
    if (branches.size() == 1) return branches[0];
    auto kind = g.is_union_node(v) ? ComputationNode::Kind::kUnion
                                   : ComputationNode::Kind::kIntersection;
    cg.nodes.push_back({kind, 0, 0, std::move(branches), v});
    return static_cast<int>(cg.nodes.size() - 1);
  };
  cg.root = subtree(subtree, g.answer_node());
  return cg;
}

namespace {

// Copies the subtree rooted at src_idx of src into dst, returns new root index.
int copy_subtree(const ComputationGraph& src, int src_idx, ComputationGraph& dst) {
  const ComputationNode& n = src.nodes[src_idx];
  std::vector<int> children;
  children.reserve(n.children.size());
  for (int c : n.children) children.push_back(copy_subtree(src, c, dst));
  ComputationNode out = n;
  out.children = std::move(children);
  dst.nodes.push_back(std::move(out));
  return static_cast<int>(dst.nodes.size() - 1);
}

// Returns the list of union-free disjunct roots for the subtree, each grown
// into `out` as an independent tree.
std::vector<int> dnf_subtree(const ComputationGraph& src, int src_idx, ComputationGraph& out);

std::vector<int> dnf_children_product(const ComputationGraph& src,
                                      const ComputationNode& node, ComputationGraph& out,
                                      ComputationNode::Kind kind) {
  // Cartesian product over per-child disjunct lists.
  std::vector<std::vector<int>> per_child;
  for (int c : node.children) per_child.push_back(dnf_subtree(src, c, out));
  std::vector<std::vector<int>> combos{{}};
  for (const auto& options : per_child) {
    std::vector<std::vector<int>> next;
    for (const auto& combo : combos) {
      for (int opt : options) {
        auto grown = combo;
        grown.push_back(opt);
        next.push_back(std::move(grown));
      }
    }
    combos = std::move(next);
  }
  std::vector<int> roots;
  for (auto& combo : combos) {
    if (combo.size() == 1) {
      roots.push_back(combo[0]);
      continue;
    }
    ComputationNode merged;
    merged.kind = kind;
    merged.children = std::move(combo);
    merged.graph_node = node.graph_node;
    out.nodes.push_back(std::move(merged));
    roots.push_back(static_cast<int>(out.nodes.size() - 1));
  }
  return roots;
}

std::vector<int> dnf_subtree(const ComputationGraph& src, int src_idx, ComputationGraph& out) {
  const ComputationNode& n = src.nodes[src_idx];
  switch (n.kind) {
    case ComputationNode::Kind::kAnchor: {
      out.nodes.push_back(n);
      return {static_cast<int>(out.nodes.size() - 1)};
    }
    case ComputationNode::Kind::kProjection: {
      std::vector<int> roots;
      for (int child_root : dnf_subtree(src, n.children[0], out)) {
        ComputationNode proj = n;
        proj.children = {child_root};
        out.nodes.push_back(std::move(proj));
        roots.push_back(static_cast<int>(out.nodes.size() - 1));
      }
      return roots;
    }
    case ComputationNode::Kind::kNegation: {
      std::vector<int> inner = dnf_subtree(src, n.children[0], out);
      if (inner.size() != 1) {
        throw UnsupportedUnionShapeError("union underneath a negation");
      }
      ComputationNode neg = n;
      neg.children = {inner[0]};
      out.nodes.push_back(std::move(neg));
      return {static_cast<int>(out.nodes.size() - 1)};
    }
    case ComputationNode::Kind::kIntersection:
      return dnf_children_product(src, n, out, ComputationNode::Kind::kIntersection);
    case ComputationNode::Kind::kUnion: {
      std::vector<int> roots;
      for (int c : n.children) {
        for (int r : dnf_subtree(src, c, out)) roots.push_back(r);
      }
      return roots;
    }
  }
  throw NodeNotFoundError("invalid computation node kind");
}

}  // namespace

std::vector<ComputationGraph> to_dnf(const ComputationGraph& cg) {
  if (!cg.has_union()) {
    ComputationGraph copy;
    copy.root = copy_subtree(cg, cg.root, copy);
    return {std::move(copy)};
  }
  ComputationGraph pool;
  std::vector<int> roots = dnf_subtree(cg, cg.root, pool);
  std::vector<ComputationGraph> out;
  out.reserve(roots.size());
  for (int r : roots) {
    ComputationGraph tree;
    tree.root = copy_subtree(pool, r, tree);
    out.push_back(std::move(tree));
  }
  return out;
}

std::pair<std::vector<RelationId>, std::vector<RelationId>> node_relation_sets(
    const QueryGraph& g, int v) {
  if (v < 0 || v >= static_cast<int>(g.nodes.size())) {
    throw NodeNotFoundError("node index out of range");
  }
  std::vector<RelationId> in, out;
  for (const QueryEdge& e : g.edges) {
    if (e.dst == v) in.push_back(e.relation);
    if (e.src == v) out.push_back(e.relation);
  }
  auto uniq = [](std::vector<RelationId>& xs) {
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  };
  uniq(in);
  uniq(out);
  return {std::move(in), std::move(out)};
}

}  // namespace kgqr
