#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "kgqr/kg.hpp"

namespace kgqr {

// The 14 benchmark query templates.
enum class QueryType {
  k1p,
  k2p,
  k3p,
  k2i,
  k3i,
  kPi,
  kIp,
  k2u,
  kUp,
  k2in,
  k3in,
  kInp,
  kPin,
  kPni,
};

inline constexpr int kNumQueryTypes = 14;
inline constexpr int kMaxPosition = 3;

const std::array<QueryType, kNumQueryTypes>& all_query_types();
std::string_view to_string(QueryType t);
std::optional<QueryType> query_type_from_string(std::string_view name);

enum class NodeRole { kAnchor = 0, kVariable = 1, kAnswer = 2 };

struct QueryNode {
  NodeRole role;
  int position = 0;
  std::optional<EntityId> anchor;  // bound entity, anchors only
};

struct QueryEdge {
  int src;
  int dst;
  RelationId relation;
  bool negated = false;
};

// Rooted DAG toward a single answer node. Anchors have in-degree 0, the
// answer has out-degree 0, variables have both. position is the maximum
// edge count over anchor-to-node paths; roles/positions never depend on
// negation flags.
struct QueryGraph {
  QueryType type;
  std::vector<QueryNode> nodes;
  std::vector<QueryEdge> edges;
  std::vector<int> union_nodes;  // nodes whose in-edges merge by union (2u/up)

  int answer_node() const;
  bool is_union_node(int v) const;
};

struct TemplateArity {
  int anchors;
  int relations;
  int nodes;
  bool has_negation;
  bool has_union;
};

const TemplateArity& template_arity(QueryType t);

// Instantiate a template; anchors/relations are consumed in template order.
QueryGraph build_query_graph(QueryType t, const std::vector<EntityId>& anchors,
                             const std::vector<RelationId>& relations);
// Label-resolving overload; throws UnknownEntityError/UnknownRelationError.
QueryGraph build_query_graph(const KnowledgeGraph& kg, QueryType t,
                             const std::vector<std::string>& anchor_labels,
                             const std::vector<std::string>& relation_labels);

// 3x4 grid: rows are roles (anchor, variable, answer), columns positions 0..3.
struct CountTable {
  std::array<std::array<int, 4>, 3> counts{};
  int total() const;
  friend bool operator==(const CountTable&, const CountTable&) = default;
};

CountTable count_table(const QueryGraph& g);

// Row-major flatten of the count table divided by 4 (the maximum node count).
std::array<double, 12> type_vector(const CountTable& c);

// Operator tree; evaluation order is children first, root last.
struct ComputationNode {
  enum class Kind { kAnchor, kProjection, kIntersection, kUnion, kNegation };
  Kind kind;
  EntityId entity = 0;      // kAnchor
  RelationId relation = 0;  // kProjection
  std::vector<int> children;
  int graph_node = -1;  // query-graph node this operator's output stands for
};

struct ComputationGraph {
  std::vector<ComputationNode> nodes;
  int root = -1;
  bool has_negation() const;
  bool has_union() const;
};

ComputationGraph to_computation_graph(const QueryGraph& g);

// Union-free disjuncts with identical set semantics. Graph-node annotations
// refer to the original query graph throughout. A union below a negation is
// rejected (UnsupportedUnionShape).
std::vector<ComputationGraph> to_dnf(const ComputationGraph& cg);

// Sorted distinct relation ids on incoming / outgoing edges of node v.
std::pair<std::vector<RelationId>, std::vector<RelationId>> node_relation_sets(
    const QueryGraph& g, int v);

}  // namespace kgqr
