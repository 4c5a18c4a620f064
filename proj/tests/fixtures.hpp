#pragma once

#include "bvq/calculus.hpp"

#include <string>
#include <vector>

namespace bvq::testing {

// A BVQ proof found by the prover; throws when there is none.
Derivation proof_of(const Structure& s);

// ⊢ [X, Y] through a cut on A: i↑ on (A, Ā), two switches, then proofs of
// [A, X] and [Ā, Y].
Derivation cut_fixture(const Structure& x, const Structure& y, const Structure& a);
// ⊢ [<(R, T); (U, V)>, ~<R; U>, ~<T; V>] with one q↑ at the bottom.
Derivation qup_fixture(const Structure& r, const Structure& u, const Structure& t, const Structure& v);
// ⊢ [∀a.(R, T), ~∀a.R, ~∀a.T] with one u↑ at the bottom.
Derivation uup_fixture(const std::string& a, const Structure& r, const Structure& t);

struct Fixture {
  std::string name;
  Derivation proof;
};

// Fifty SBVQ proofs, each with at least one up instance.
std::vector<Fixture> elimination_fixtures();

} // namespace bvq::testing
