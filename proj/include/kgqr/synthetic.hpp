#pragma once

#include <cstdint>

#include "kgqr/kg.hpp"

namespace kgqr {

// Random multigraph over labels e0..e{n-1} / r0..r{m-1}, deduplicated, with
// inverse relations materialized. Self-loops are excluded; the graph is
// dense enough for backward grounding when triples >> entities.
KnowledgeGraph make_random_kg(int entities, int base_relations, int triples, std::uint64_t seed);

}  // namespace kgqr
