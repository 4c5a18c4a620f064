#pragma once

#include "bvq/calculus.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace bvq {

// Killers are found by walking the upward closure of the structure to be
// split; this caps the walk.
constexpr std::size_t kSplitSearchBound = 200'000;

// Thrown when a killer search runs out of room. The splitting statements
// guarantee the killers exist, so this only happens on inputs too large for
// the search bound.
struct SplitSearchExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SplitSeqResult {
  Structure p1, p2;
  Derivation glue;  // <P1; P2> ⊢ P
  Derivation left;  // ⊢ [R, P1]
  Derivation right; // ⊢ [T, P2]
};

struct SplitParResult {
  Structure p1, p2;
  Derivation glue;  // [P1, P2] ⊢ P
  Derivation left;  // ⊢ [R, P1]
  Derivation right; // ⊢ [T, P2]
};

struct SplitSdqResult {
  std::string atom;
  Structure t;
  Derivation glue;    // ∀a.T ⊢ P
  Derivation witness; // ⊢ [R, T]
};

// `proof` must be a BVQ proof of [<R; T>, P] (resp. [(R, T), P], [∀a.R, P]).
SplitSeqResult shallow_split_seq(const Derivation& proof, const Structure& r, const Structure& t,
                                 const Structure& p);
SplitParResult shallow_split_copar(const Derivation& proof, const Structure& r, const Structure& t,
                                   const Structure& p);
// a must not be free in P.
SplitSdqResult shallow_split_sdq(const Derivation& proof, const std::string& a, const Structure& r,
                                 const Structure& p);
// `proof` proves [R0, R1, P] where [R0, R1] is a Par of atoms no two of which
// are dual. Returns R̄1 ⊢ [R0, P].
Derivation shallow_split_atoms(const Derivation& proof, const Structure& r0, const Structure& r1,
                               const Structure& p);

struct ContextReduction {
  Structure u;
  std::vector<std::string> binders; // outermost first
  // V ↦ ∀binders.[V, U] ⊢ S{V}. Requires FN(V) ∩ BN(R) = ∅.
  std::function<Derivation(const Structure&)> builder;
  Derivation witness; // ⊢ [R, U]
};

// `proof` proves S{R}. Binders on the hole path of S must be pairwise distinct
// and must not occur free anywhere in S{R}; freshen_hole_path arranges that.
ContextReduction context_reduce(const Derivation& proof, const Context& s, const Structure& r);

// Renames the binders on the hole path apart from each other and from every
// name in S{R}, applying the same renaming to `r`.
std::pair<Context, Structure> freshen_hole_path(const Context& s, const Structure& r);

enum class SplitShape { Seq, CoPar, Sdq };
std::string shape_name(SplitShape s);

struct Splitting {
  SplitShape shape = SplitShape::Seq;
  Structure r, t;   // the two sides of K; for Sdq, r is the body and t the unit
  std::string atom; // Sdq only, the binder of K as the pieces read it
  Structure k1, k2; // for Sdq, k1 is the single killer and k2 the unit
  std::vector<std::string> binders;
  // Seq:   V ↦ ∀binders.[V, <K1; K2>] ⊢ S{V}
  // CoPar: V ↦ ∀binders.[V, K1, K2] ⊢ S{V}
  // Sdq:   V ↦ ∀binders.[V, K1] ⊢ S{V}, binders ending in atom
  std::function<Derivation(const Structure&)> builder;
  Derivation left;  // ⊢ [R, K1]
  Derivation right; // ⊢ [T, K2]; identity on 1 for Sdq
};

// `proof` proves S{K}; K is <R; T> with R its first component, (R, T) likewise,
// or ∀a.R.
Splitting split(const Derivation& proof, const Context& s, const Structure& k);

struct EliminationRound {
  Rule rule = Rule::AiUp;
  std::size_t link = 0;      // index of the eliminated instance in the input of the round
  std::size_t up_before = 0; // up instances before the round
  std::size_t length = 0;    // length of the proof after the round
};

struct Elimination {
  Derivation proof;
  std::vector<EliminationRound> rounds;
};

// Rewrites an SBVQ proof into a BVQ proof of the same conclusion, one up
// instance per round, topmost first.
Elimination eliminate_up(const Derivation& proof);

std::size_t count_up(const Derivation& d);

} // namespace bvq
