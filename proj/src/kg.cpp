#include "kgqr/kg.hpp"

#include <algorithm>
#include <fstream>

#include "kgqr/rng.hpp"

namespace kgqr {

namespace {

bool ends_with_inverse_suffix(std::string_view label) {
  return label.size() >= kInverseSuffix.size() &&
         label.substr(label.size() - kInverseSuffix.size()) == kInverseSuffix;
}

}  // namespace

std::size_t KnowledgeGraph::SampleKeyHash::operator()(const SampleKey& k) const {
  std::uint64_t h = Rng::mix(k.seed, k.relation);
  h = Rng::mix(h, static_cast<std::uint64_t>(k.side));
  h = Rng::mix(h, k.k);
  return static_cast<std::size_t>(h);
}

KnowledgeGraph KnowledgeGraph::load(const std::string& path, bool add_inverses,
                                    const KnowledgeGraph* vocabulary) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triple file: " + path);
  std::vector<std::array<std::string, 3>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::array<std::string, 3> fields;
    std::size_t field = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        if (field >= 3) throw ParseError(line_no, "more than 3 fields");
        fields[field++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (field != 3) throw ParseError(line_no, "expected 3 tab-separated fields");
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError(line_no, "empty field");
    }
    if (ends_with_inverse_suffix(fields[1])) {
      throw ParseError(line_no, "relation label uses the reserved inverse suffix");
    }
    rows.push_back(std::move(fields));
  }
  return from_rows(rows, add_inverses, vocabulary);
}

KnowledgeGraph KnowledgeGraph::from_rows(const std::vector<std::array<std::string, 3>>& rows,
                                         bool add_inverses,
                                         const KnowledgeGraph* vocabulary) {
  KnowledgeGraph kg;
  kg.has_inverses_ = add_inverses;
  if (vocabulary != nullptr) {
    kg.entity_labels_ = vocabulary->entity_labels_;
    kg.relation_labels_ = vocabulary->relation_labels_;
    kg.entity_ids_ = vocabulary->entity_ids_;
    kg.relation_ids_ = vocabulary->relation_ids_;
    kg.has_inverses_ = vocabulary->has_inverses_;
    add_inverses = kg.has_inverses_;
  }

  auto entity_of = [&](const std::string& label) -> EntityId {
    auto it = kg.entity_ids_.find(label);
    if (it != kg.entity_ids_.end()) return it->second;
    if (vocabulary != nullptr) throw DataError("entity label not in vocabulary: " + label);
    EntityId id = static_cast<EntityId>(kg.entity_labels_.size());
    kg.entity_labels_.push_back(label);
    kg.entity_ids_.emplace(label, id);
    return id;
  };
  auto relation_of = [&](const std::string& label) -> RelationId {
    auto it = kg.relation_ids_.find(label);
    if (it != kg.relation_ids_.end()) return it->second;
    if (vocabulary != nullptr) throw DataError("relation label not in vocabulary: " + label);
    RelationId id = static_cast<RelationId>(kg.relation_labels_.size());
    kg.relation_labels_.push_back(label);
    kg.relation_ids_.emplace(label, id);
    if (add_inverses) {
      std::string inv_label = label + std::string(kInverseSuffix);
      kg.relation_labels_.push_back(inv_label);
      kg.relation_ids_.emplace(std::move(inv_label), id + 1);
    }
    return id;
  };

  for (const auto& row : rows) {
    EntityId h = entity_of(row[0]);
    RelationId r = relation_of(row[1]);
    EntityId t = entity_of(row[2]);
    kg.triples_.push_back({h, r, t});
    if (add_inverses) kg.triples_.push_back({t, kg.inverse(r), h});
  }
  std::sort(kg.triples_.begin(), kg.triples_.end());
  kg.triples_.erase(std::unique(kg.triples_.begin(), kg.triples_.end()), kg.triples_.end());
  if (kg.triples_.empty()) throw EmptyGraphError("no triples loaded");
  kg.build_indexes();
  return kg;
}

void KnowledgeGraph::build_indexes() {
  const std::size_t ne = entity_labels_.size();
  const std::size_t nr = relation_labels_.size();

  entity_offsets_.assign(ne + 1, 0);
  for (const Triple& t : triples_) ++entity_offsets_[t.head + 1];
  for (std::size_t i = 1; i <= ne; ++i) entity_offsets_[i] += entity_offsets_[i - 1];
  tails_flat_.resize(triples_.size());
  for (std::size_t i = 0; i < triples_.size(); ++i) tails_flat_[i] = triples_[i].tail;

  std::vector<std::vector<EntityId>> heads(nr), tails(nr);
  for (const Triple& t : triples_) {
    heads[t.relation].push_back(t.head);
    tails[t.relation].push_back(t.tail);
  }
  head_offsets_.assign(nr + 1, 0);
  tail_offsets_.assign(nr + 1, 0);
  for (std::size_t r = 0; r < nr; ++r) {
    auto uniq = [](std::vector<EntityId>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(heads[r]);
    uniq(tails[r]);
    head_offsets_[r + 1] = head_offsets_[r] + heads[r].size();
    tail_offsets_[r + 1] = tail_offsets_[r] + tails[r].size();
  }
  head_ids_.reserve(head_offsets_[nr]);
  tail_ids_.reserve(tail_offsets_[nr]);
  for (std::size_t r = 0; r < nr; ++r) {
    head_ids_.insert(head_ids_.end(), heads[r].begin(), heads[r].end());
    tail_ids_.insert(tail_ids_.end(), tails[r].begin(), tails[r].end());
  }
}

void KnowledgeGraph::check_entity(EntityId e) const {
  if (e >= entity_labels_.size()) throw IdOutOfRangeError("entity id out of range");
}

void KnowledgeGraph::check_relation(RelationId r) const {
  if (r >= relation_labels_.size()) throw IdOutOfRangeError("relation id out of range");
}

const std::string& KnowledgeGraph::entity_label(EntityId e) const {
  check_entity(e);
  return entity_labels_[e];
}

const std::string& KnowledgeGraph::relation_label(RelationId r) const {
  check_relation(r);
  return relation_labels_[r];
}

std::optional<EntityId> KnowledgeGraph::entity_id(std::string_view label) const {
  auto it = entity_ids_.find(std::string(label));
  if (it == entity_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::relation_id(std::string_view label) const {
  auto it = relation_ids_.find(std::string(label));
  if (it == relation_ids_.end()) return std::nullopt;
  return it->second;
}

RelationId KnowledgeGraph::inverse(RelationId r) const {
  if (!has_inverses_) throw DataError("inverse relations were not materialized");
  return r ^ 1u;
}

std::span<const EntityId> KnowledgeGraph::neighbors(EntityId e, RelationId r) const {
  check_entity(e);
  check_relation(r);
  auto begin = triples_.begin() + entity_offsets_[e];
  auto end = triples_.begin() + entity_offsets_[e + 1];
  auto cmp = [](const Triple& t, const Triple& probe) {
    return std::pair{t.head, t.relation} < std::pair{probe.head, probe.relation};
  };
  auto lo = std::lower_bound(begin, end, Triple{e, r, 0}, cmp);
  auto hi = std::lower_bound(lo, end, Triple{e, r + 1, 0}, cmp);
  const std::size_t at = static_cast<std::size_t>(lo - triples_.begin());
  return {tails_flat_.data() + at, static_cast<std::size_t>(hi - lo)};
}

std::span<const Triple> KnowledgeGraph::out_edges(EntityId e) const {
  check_entity(e);
  return {triples_.data() + entity_offsets_[e], entity_offsets_[e + 1] - entity_offsets_[e]};
}

std::span<const EntityId> KnowledgeGraph::relation_endpoints(RelationId r,
                                                             EndpointSide side) const {
  check_relation(r);
  if (side == EndpointSide::kHead) {
    return {head_ids_.data() + head_offsets_[r], head_offsets_[r + 1] - head_offsets_[r]};
  }
  return {tail_ids_.data() + tail_offsets_[r], tail_offsets_[r + 1] - tail_offsets_[r]};
}

const std::vector<EntityId>& KnowledgeGraph::sample_context_ids(RelationId r, EndpointSide side,
                                                                std::size_t k,
                                                                std::uint64_t seed) const {
  check_relation(r);
  SampleKey key{r, side == EndpointSide::kHead ? 0 : 1, k, seed};
  std::lock_guard<std::mutex> lock(*sample_mutex_);
  auto it = sample_cache_.find(key);
  if (it != sample_cache_.end()) return it->second;

  auto pool = relation_endpoints(r, side);
  std::vector<EntityId> ids;
  if (pool.size() <= k) {
    ids.assign(pool.begin(), pool.end());
  } else {
    Rng rng = Rng(seed).split(r, static_cast<std::uint64_t>(key.side)).split(k);
    for (std::uint64_t idx : rng.sample_indices(pool.size(), k)) {
      ids.push_back(pool[static_cast<std::size_t>(idx)]);
    }
  }
  return sample_cache_.emplace(key, std::move(ids)).first->second;
}

bool KnowledgeGraph::contains(EntityId h, RelationId r, EntityId t) const {
  check_entity(h);
  check_relation(r);
  check_entity(t);
  return std::binary_search(triples_.begin(), triples_.end(), Triple{h, r, t});
}

}  // namespace kgqr
