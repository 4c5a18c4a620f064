#pragma once

#include "bvq/calculus.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace bvq {

enum class System : unsigned char { BVQ, SBVQ };

// 10^7, or the value of BVQ_MAX_VISITED when set.
std::size_t default_max_visited();

struct SearchConfig {
  std::size_t max_steps = 64;
  std::size_t max_visited = default_max_visited();
  System system = System::BVQ;
  // SBVQ only: how far above the query's size the search may climb.
  std::size_t max_size_increase = 2;
  bool decompose = true;
  // BVQ only. false: expand the smallest structures first, which reaches
  // proofs sooner but not necessarily the shortest one.
  bool shortest = true;
};

enum class Status : unsigned char { Proved, Refuted, BoundExceeded };
std::string status_name(Status s);

struct SearchStats {
  std::size_t visited = 0;
  std::size_t frontier_peak = 0;
};

struct SearchResult {
  Status status = Status::Refuted;
  std::optional<Derivation> proof; // premise ≈ 1, conclusion ≈ query
  SearchStats stats;
};

RuleSet system_rules(System s);

SearchResult prove(const Structure& r, const SearchConfig& cfg = {});

// Cheap necessary condition for BVQ provability: every atom pairs with a dual
// one under a Par, after splitting off Seq, CoPar and binder components. False
// means unprovable.
bool plausibly_provable(const Structure& r);

// One round of the provability decomposition on canonicalize(r): the two
// sides of a Seq or CoPar, the body of a binder with a fresh name, or {r}.
std::vector<Structure> decompose(const Structure& r);

// Plain breadth-first backward search in BVQ. Throws std::length_error when
// size(r) exceeds max_size or the visited set outgrows max_visited.
constexpr std::size_t kOracleSizeBound = 12;
bool oracle_provable(const Structure& r, std::size_t max_size = kOracleSizeBound,
                     std::size_t max_visited = default_max_visited());

// Breadth-first walk over every Q with Q ⊢ target in BVQ, starting at the
// target itself. Stops at the first Q that `accept` takes and returns the
// derivation from it down to the target. Structures smaller than min_size
// are not explored.
struct ClimbResult {
  std::optional<Derivation> derivation;
  std::size_t visited = 0;
  bool exhausted = false; // false when max_visited cut the walk short
};
ClimbResult climb(const Structure& target, const std::function<bool(const Structure&)>& accept,
                  std::size_t max_visited, std::size_t min_size = 0);

// A BVQ derivation premise ⊢ conclusion, shortest first.
std::optional<Derivation> find_derivation(const Structure& premise, const Structure& conclusion,
                                          std::size_t max_visited);

} // namespace bvq
