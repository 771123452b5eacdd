#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgqr/errors.hpp"

namespace kgqr {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

enum class EndpointSide { kHead, kTail };

// Suffix appended to a relation label for its materialized inverse.
// Reserved: input files must not use it.
inline constexpr std::string_view kInverseSuffix = "⁻¹";

// Indexed triple store. Immutable after construction; all read paths
// (including the sample cache behind its mutex) are safe for concurrent use.
class KnowledgeGraph {
 public:
  // Triple file: UTF-8, one triple per line, exactly 3 TAB-separated fields,
  // '#'-prefixed lines ignored. With add_inverses every relation r gains a
  // paired relation r⁻¹ with mirrored triples; ids interleave so that
  // inverse(r) == r ^ 1. With a vocabulary KG given, its label maps are
  // adopted verbatim (same ids), and unseen labels are rejected.
  static KnowledgeGraph load(const std::string& path, bool add_inverses = true,
                             const KnowledgeGraph* vocabulary = nullptr);
  static KnowledgeGraph from_rows(const std::vector<std::array<std::string, 3>>& rows,
                                  bool add_inverses = true,
                                  const KnowledgeGraph* vocabulary = nullptr);

  std::size_t entity_count() const { return entity_labels_.size(); }
  std::size_t relation_count() const { return relation_labels_.size(); }
  std::size_t triple_count() const { return triples_.size(); }
  bool has_inverses() const { return has_inverses_; }

  const std::string& entity_label(EntityId e) const;
  const std::string& relation_label(RelationId r) const;
  std::optional<EntityId> entity_id(std::string_view label) const;
  std::optional<RelationId> relation_id(std::string_view label) const;
  RelationId inverse(RelationId r) const;

  // Exactly { t | (e, r, t) in KG }, sorted.
  std::span<const EntityId> neighbors(EntityId e, RelationId r) const;
  // All heads (or tails) of r over the whole KG, sorted and deduplicated.
  std::span<const EntityId> relation_endpoints(RelationId r, EndpointSide side) const;
  // Up to K endpoint entities, sampled without replacement, deterministic and
  // cached per (r, side, K, seed). Returns the full (sorted) endpoint set when
  // it has at most K members.
  const std::vector<EntityId>& sample_context_ids(RelationId r, EndpointSide side,
                                                  std::size_t k, std::uint64_t seed) const;

  // All triples with head e, sorted by (relation, tail); with inverses
  // materialized this doubles as the incoming-edge index.
  std::span<const Triple> out_edges(EntityId e) const;

  bool contains(EntityId h, RelationId r, EntityId t) const;
  const std::vector<Triple>& triples() const { return triples_; }

 private:
  void build_indexes();
  void check_entity(EntityId e) const;
  void check_relation(RelationId r) const;

  std::vector<std::string> entity_labels_;
  std::vector<std::string> relation_labels_;
  std::unordered_map<std::string, EntityId> entity_ids_;
  std::unordered_map<std::string, RelationId> relation_ids_;
  bool has_inverses_ = true;

  std::vector<Triple> triples_;  // sorted by (head, relation, tail), deduplicated, inverses included

  std::vector<std::size_t> entity_offsets_;  // per-head segments in triples_
  std::vector<EntityId> tails_flat_;         // tails_flat_[i] == triples_[i].tail

  // Per-relation CSR of distinct heads / tails.
  std::vector<std::size_t> head_offsets_, tail_offsets_;
  std::vector<EntityId> head_ids_, tail_ids_;

  struct SampleKey {
    RelationId relation;
    int side;
    std::size_t k;
    std::uint64_t seed;
    bool operator==(const SampleKey&) const = default;
  };
  struct SampleKeyHash {
    std::size_t operator()(const SampleKey& k) const;
  };
  // Behind a pointer so the graph stays movable; reads lock, the indexes
  // themselves are immutable after construction.
  mutable std::unique_ptr<std::mutex> sample_mutex_ = std::make_unique<std::mutex>();
  mutable std::unordered_map<SampleKey, std::vector<EntityId>, SampleKeyHash> sample_cache_;
};

}  // namespace kgqr
