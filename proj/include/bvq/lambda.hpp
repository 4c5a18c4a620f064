#pragma once

#include "bvq/calculus.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace bvq {

// Immutable, cheaply copyable linear λ-term.
class LambdaTerm {
public:
  enum class Kind : unsigned char { Var, Abs, App };

  static LambdaTerm var(std::string x);
  static LambdaTerm abs(std::string x, LambdaTerm body);
  static LambdaTerm app(LambdaTerm fun, LambdaTerm arg);

  Kind kind() const { return n_->kind; }
  bool is(Kind k) const { return n_->kind == k; }
  const std::string& name() const { return n_->name; } // Var and Abs
  const LambdaTerm& body() const { return n_->kids.at(0); }
  const LambdaTerm& fun() const { return n_->kids.at(0); }
  const LambdaTerm& arg() const { return n_->kids.at(1); }

private:
  struct Node {
    Kind kind;
    std::string name;
    std::vector<LambdaTerm> kids;
  };
  explicit LambdaTerm(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  std::shared_ptr<const Node> n_;
};

// `\x. M` (or `λx. M`), left-associative juxtaposition, parentheses.
// Variables follow the structure ident syntax. The capitalised names Not,
// True and False expand to the boolean combinators. Throws ParseError.
LambdaTerm parse_term(std::string_view text);
std::string render(const LambdaTerm& m);

// Not = \z. \x. \y. z y x, True = \w. \z. w z, False = \w. \z. z w.
LambdaTerm named_term(const std::string& name);

std::set<std::string> free_vars(const LambdaTerm& m);
std::set<std::string> all_vars(const LambdaTerm& m);
std::size_t abstractions(const LambdaTerm& m);
bool alpha_equal(const LambdaTerm& a, const LambdaTerm& b);

struct LinearityReport {
  bool ok = true;
  std::vector<std::string> problems;
  explicit operator bool() const { return ok; }
};
LinearityReport check_linear(const LambdaTerm& m);
// Throws std::invalid_argument listing the problems.
void require_linear(const LambdaTerm& m, const std::string& what);

// M{N/x}, renaming binders of M that would capture a free variable of N.
LambdaTerm substitute(const LambdaTerm& m, const std::string& x, const LambdaTerm& n);

// Renames every binder to a name used nowhere else in the term and distinct
// from `avoid`.
LambdaTerm separate_binders(const LambdaTerm& m, const std::set<std::string>& avoid = {});

// One contextual step: the moves from the root to the redex. F enters an
// abstraction body, AL the function of an application, AR its argument.
enum class Move : unsigned char { F, AL, AR };
using TermPath = std::vector<Move>;
std::string render(const TermPath& p);
TermPath parse_term_path(std::string_view text);

struct ReductionStep {
  TermPath path;
  LambdaTerm before, after;
};

struct ReductionTrace {
  LambdaTerm from, to;
  std::vector<ReductionStep> steps;
};

// Rule tags of one step, outermost first, ending in "beta".
std::vector<std::string> step_rules(const ReductionStep& s);
// "refl" for the empty trace, otherwise the steps joined by "tra".
std::string trace_rules(const ReductionTrace& t);

std::vector<TermPath> redexes(const LambdaTerm& m); // leftmost-outermost first
LambdaTerm contract(const LambdaTerm& m, const TermPath& at);

constexpr std::size_t kUnboundedSteps = static_cast<std::size_t>(-1);
// Leftmost-outermost reduction, at most max_steps steps.
ReductionTrace reduce(const LambdaTerm& m, std::size_t max_steps = kUnboundedSteps);
// Replays the given redex positions; throws std::invalid_argument when one
// does not address a redex.
ReductionTrace replay(const LambdaTerm& m, const std::vector<TermPath>& at);
// Checks that every step contracts the redex it names.
bool valid_trace(const ReductionTrace& t);

// ⟦M⟧o. Channels p, q are drawn fresh from every name in M and o.
Structure encode(const LambdaTerm& m, const std::string& o);

// Inverse of encode on raw structures of the exact encoded shape.
std::optional<LambdaTerm> decode_term(const Structure& s, const std::string& o);
// The output channel of an encoding: its only free name with a negative occurrence.
std::optional<std::string> output_channel(const Structure& s);

// ⟦M⟧o ⊢ [⟦M⟧r, <r; ō>]
Derivation derive_mt_down(const LambdaTerm& m, const std::string& o, const std::string& r);
// ⟦M{N/x}⟧o ⊢ [⟦M⟧o, ⟦N⟧x]; requires x ∈ FV(M).
Derivation derive_ore(const LambdaTerm& m, const LambdaTerm& n, const std::string& x, const std::string& o);
// ⟦M{N/x}⟧o ⊢ ⟦(\x. M) N⟧o, tagged as one "beta" macro.
Derivation derive_beta(const LambdaTerm& m, const LambdaTerm& n, const std::string& x, const std::string& o);

// ⟦N⟧o ⊢ ⟦M⟧o for a trace M →* N; one "beta" block per step. Each block
// boundary is an encoding of the matching trace term at o, up to the names of
// internal channels.
Derivation compile_reduction(const ReductionTrace& t, const std::string& o);

struct BetaChainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Reads a derivation built only from "beta" blocks back into the reduction it
// simulates. Throws BetaChainError otherwise.
ReductionTrace decode_beta_chain(const Derivation& d);

// A BVQ derivation ⟦(M{Q/x}) P⟧o ⊢ ⟦((\x. M) P) Q⟧o. It moves Q next to the
// abstraction and substitutes it for x, which is not a reduction of the
// conclusion's term.
Derivation derive_misplaced_argument(const std::string& x, const LambdaTerm& m, const LambdaTerm& p,
                                     const LambdaTerm& q, const std::string& o);

// Random linear term with at most max_abs abstractions and at least one redex
// when max_abs > 0.
LambdaTerm random_linear_term(std::mt19937_64& rng, std::size_t max_abs);

} // namespace bvq
