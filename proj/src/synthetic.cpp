#include "kgqr/synthetic.hpp"

#include <array>
#include <set>
#include <string>
#include <vector>

#include "kgqr/rng.hpp"

namespace kgqr {

KnowledgeGraph make_random_kg(int entities, int base_relations, int triples, std::uint64_t seed) {
  Rng rng = Rng(seed).split("synthetic-kg");
  std::set<std::array<int, 3>> seen;
  std::vector<std::array<std::string, 3>> rows;
  int guard = triples * 50;
  while (static_cast<int>(rows.size()) < triples && guard-- > 0) {
    int h = static_cast<int>(rng.below(static_cast<std::uint64_t>(entities)));
    int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(entities)));
    if (h == t) continue;
    int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(base_relations)));
    if (!seen.insert({h, r, t}).second) continue;
    rows.push_back({"e" + std::to_string(h), "r" + std::to_string(r), "e" + std::to_string(t)});
  }
  return KnowledgeGraph::from_rows(rows, /*add_inverses=*/true);
}

}  // namespace kgqr
