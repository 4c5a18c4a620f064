#pragma once

#include "bvq/structure.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace bvq {

enum class Rule : unsigned char { AiDown, AiUp, Switch, QDown, QUp, UDown, UUp };
enum class Direction : unsigned char { Up, Down };

// How the redex sits next to the rest K of the node it lives in.
// Par and CoPar: W(X) = [X, K] / (X, K). Seq: W(X) = <K; X; K2>.
enum class Wrap : unsigned char { Par, CoPar, Seq };

using RuleSet = std::set<Rule>;

const std::vector<Rule>& all_rules();
std::string rule_name(Rule r);
std::optional<Rule> parse_rule(std::string_view name);
bool is_down(Rule r);
Rule dual_rule(Rule r);

RuleSet bvq_rules();
RuleSet sbvq_rules();
// "bvq", "sbvq", "down", "up" or a comma-separated list of rule names.
RuleSet parse_rule_set(std::string_view text);
std::string rule_set_name(const RuleSet& rs);

struct Binding {
  // Schema metavariables R, T, U, V plus the context remainders K and K2.
  // Absent entries read as the unit.
  std::map<std::string, Structure> vars;
  std::string atom; // a of ai and u rules
  Wrap wrap = Wrap::Par;
  // Binders sitting between the addressed node and W, outermost first.
  std::vector<std::string> outer;

  Structure get(const std::string& key) const;
  Binding& set(const std::string& key, Structure s);
};

struct RuleInstance {
  Rule rule = Rule::AiDown;
  Path path;
  Binding binding;
};

// The subterm at inst.path before (premise) and after (conclusion) the rule.
Structure instance_premise(const RuleInstance& inst);
Structure instance_conclusion(const RuleInstance& inst);

// A structure with one hole; the hole position holds a placeholder unit.
struct Context {
  Structure shape;
  Path hole;
};
Context hole_context();
Context make_context(Structure shape, Path hole);
Structure plug(const Context& c, const Structure& r);
// c_outer{c_inner}
Context nest(const Context& outer, const Context& inner);

// Instances at every node of canonicalize(r); paths address that canonical form.
// Up: the conclusion pattern matches (backward search). Down: the premise does.
// Rules that introduce a dual pair draw atoms from `pool` (default: the free
// names of r) plus the binders in scope.
std::vector<RuleInstance> find_redexes(const Structure& r, Rule rule, Direction dir,
                                       const std::vector<std::string>& pool = {});

// Rewrites r (paths address r as given). Result is canonical.
// Throws std::invalid_argument when the instance does not match.
Structure apply(const Structure& r, const RuleInstance& inst, Direction dir);
// As apply, without the match check; for instances find_redexes returned on
// the canonical r.
Structure apply_found(const Structure& r, const RuleInstance& inst, Direction dir);

struct MacroSpan {
  std::string name;
  std::size_t first = 0; // link index range [first, last)
  std::size_t last = 0;
  std::map<std::string, std::string> info;
};

struct Derivation {
  std::vector<Structure> steps; // top-down; steps[0] is the premise
  std::vector<RuleInstance> links;
  std::vector<MacroSpan> macros;

  static Derivation identity(Structure s);
  const Structure& premise() const { return steps.front(); }
  const Structure& conclusion() const { return steps.back(); }
  std::size_t length() const { return links.size(); }
  bool is_proof() const;
};

struct CheckReport {
  bool ok = true;
  std::size_t link = 0;
  std::string message;
  explicit operator bool() const { return ok; }
};

CheckReport check_link(const Structure& premise, const Structure& conclusion, const RuleInstance& inst);
CheckReport check(const Derivation& d, const RuleSet& allowed);
// Throws std::logic_error carrying the report when check fails.
void require_valid(const Derivation& d, const RuleSet& allowed, const std::string& what);

Derivation compose(const Derivation& d1, const Derivation& d2);
Derivation compose(std::initializer_list<Derivation> ds);
Derivation plug(const Context& c, const Derivation& d);
// Replaces the premise by an equivalent raw form. The conclusion has no
// counterpart: the last link's path addresses its raw shape.
Derivation with_premise(Derivation d, const Structure& p);
// Wraps the whole derivation in one macro span.
Derivation tag_macro(Derivation d, const std::string& name, std::map<std::string, std::string> info = {});

// Builds a derivation upward from its conclusion, the way the displays read.
class UpBuilder {
public:
  explicit UpBuilder(Structure conclusion);
  // Applies inst backwards at the current top; path addresses the current top.
  UpBuilder& up(Rule rule, Path path, Binding b);
  // Replaces the current top by an equivalent raw form.
  UpBuilder& as(const Structure& equivalent);
  // Places d above the current top (d's conclusion must be equivalent to it).
  UpBuilder& above(const Derivation& d);
  const Structure& top() const;
  Derivation done() const;

private:
  std::vector<Structure> rsteps_;
  std::vector<RuleInstance> rlinks_;
  std::vector<MacroSpan> pending_; // link indices counted from the bottom
};

// Negation dual: an R -> T derivation becomes T̄ -> R̄ with each rule dualized.
Derivation dualize(const Derivation& d);

// Derived rules.
Derivation derive_i_down(const Structure& r);                       // 1 ⊢ [R, R̄]
Derivation derive_i_up(const Structure& r);                         // (R, R̄) ⊢ 1
Derivation derive_t_down(const Context& s, const Structure& r, const Structure& t,
                         const std::string& a);                     // S<R;T> ⊢ [S<R;ā>, <a;T>]
Derivation derive_mix(const Structure& r, const Structure& t);      // (R, T) ⊢ [R, T]
Derivation derive_pmix(const Structure& r, const Structure& t);     // <R; T> ⊢ [R, T]
Derivation context_extrusion(const Context& s, const Structure& r, const Structure& t); // S[R,T] ⊢ [S{R}, T]
Derivation strip_binder(const Derivation& d, const std::string& a);

// Affinity counterexamples in a derivation: indices of down links whose
// conclusion is smaller than their premise.
std::vector<std::size_t> affinity_violations(const Derivation& d);

// JSON wire format.
nlohmann::json to_json(const Derivation& d, const RuleSet& allowed);
Derivation derivation_from_json(const nlohmann::json& j, RuleSet* allowed = nullptr);

} // namespace bvq
