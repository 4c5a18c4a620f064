#include "bvq/calculus.hpp"

#include <doctest.h>

#include <algorithm>

using namespace bvq;
using S = Structure;

namespace {

S P(const char* t) { return parse_structure(t); }

void valid(const Derivation& d, const RuleSet& rules, const S& premise, const S& conclusion) {
  CheckReport r = check(d, rules);
  INFO(r.message);
  CHECK(r.ok);
  CHECK_MESSAGE(equiv(d.premise(), premise), render(d.premise()));
  CHECK_MESSAGE(equiv(d.conclusion(), conclusion), render(d.conclusion()));
  CHECK(affinity_violations(d).empty());
}

} // namespace

TEST_CASE("rule names and sets") {
  for (Rule r : all_rules()) {
    CHECK(parse_rule(rule_name(r)) == r);
    CHECK(dual_rule(dual_rule(r)) == r);
    CHECK((is_down(r) != is_down(dual_rule(r)) || r == Rule::Switch));
  }
  CHECK(bvq_rules() == RuleSet{Rule::AiDown, Rule::Switch, Rule::QDown, Rule::UDown});
  CHECK(sbvq_rules().size() == 7);
  CHECK(parse_rule_set("bvq") == bvq_rules());
  CHECK(parse_rule_set("ai↓,s") == RuleSet{Rule::AiDown, Rule::Switch});
  CHECK_THROWS_AS(parse_rule_set("nope"), std::invalid_argument);
}

TEST_CASE("plugging a context") {
  CHECK(equiv(plug(hole_context(), P("<a; b>")), P("<a; b>")));
  CHECK(equiv(plug(make_context(P("[1, ~a]"), {0}), P("a")), P("[a, ~a]")));
  S s = plug(make_context(P("all a. 1"), {0}), P("<a; ~o>"));
  CHECK(render(s) == render(P("all a.<a; ~o>")));
  Context n = nest(make_context(P("[1, b]"), {0}), make_context(P("(1, c)"), {0}));
  CHECK(equiv(plug(n, P("a")), P("[(a, c), b]")));
}

TEST_CASE("redexes: forced atomic interaction") {
  auto found = find_redexes(P("[a, ~a]"), Rule::AiDown, Direction::Up);
  REQUIRE(found.size() == 1);
  CHECK(found[0].path.empty());
  CHECK(found[0].binding.atom == "a");
  CHECK(apply(P("[a, ~a]"), found[0], Direction::Up).is_unit());
}

TEST_CASE("redexes: q↓ pairs two Seqs") {
  S s = P("[<a; b>, <~a; ~b>]");
  auto found = find_redexes(s, Rule::QDown, Direction::Up);
  bool paired = std::any_of(found.begin(), found.end(), [&](const RuleInstance& i) {
    return i.path.empty() && equiv(apply(s, i, Direction::Up), P("<[a, ~a]; [b, ~b]>"));
  });
  CHECK(paired);
}

TEST_CASE("redexes: nothing to switch in the unit") {
  CHECK(find_redexes(S::unit(), Rule::Switch, Direction::Up).empty());
}

TEST_CASE("apply: u↓ and switch read downward") {
  RuleInstance u;
  u.rule = Rule::UDown;
  u.binding.atom = "a";
  u.binding.set("R", P("<a; b>")).set("T", P("~a"));
  CHECK(equiv(apply(P("all a.[<a; b>, ~a]"), u, Direction::Down), P("[all a.<a; b>, all a.~a]")));

  RuleInstance s;
  s.rule = Rule::Switch;
  s.binding.set("R", P("b")).set("U", P("c")).set("T", P("a"));
  CHECK(equiv(apply(P("(a, [b, c])"), s, Direction::Down), P("[(a, b), c]")));
  s.binding.set("T", P("b")).set("R", P("a"));
  CHECK_THROWS_AS(apply(P("(a, [b, c])"), s, Direction::Down), std::invalid_argument);
}

TEST_CASE("checker: single steps") {
  CHECK(check(Derivation::identity(P("[a, ~a]")), bvq_rules()).ok);

  Derivation d;
  d.steps = {P("1"), P("[1, [a, ~a]]")};
  RuleInstance i;
  i.rule = Rule::AiDown;
  i.path = {};
  i.binding.atom = "a";
  d.links = {i};
  CHECK(check(d, {Rule::AiDown}).ok);
  CHECK(d.is_proof());

  d.links[0].rule = Rule::AiUp;
  CheckReport r = check(d, sbvq_rules());
  CHECK_FALSE(r.ok);
  CHECK(r.message.find("rule not applicable") != std::string::npos);

  d.links[0].rule = Rule::AiDown;
  CHECK_FALSE(check(d, {Rule::Switch}).ok);
  d.steps[1] = P("[a, ~b]");
  CHECK_FALSE(check(d, bvq_rules()).ok);
}

TEST_CASE("composition with identities") {
  Derivation d = derive_i_down(P("<a; b>"));
  Derivation left = compose(Derivation::identity(d.premise()), d);
  Derivation right = compose(d, Derivation::identity(d.conclusion()));
  CHECK(left.length() == d.length());
  CHECK(right.length() == d.length());
  CHECK(check(left, bvq_rules()).ok);
  CHECK(check(right, bvq_rules()).ok);
}

TEST_CASE("i↓ and i↑ for every connective") {
  for (const char* t : {"a", "~a", "<a; b>", "[a, (b, ~c)]", "all a.<a; b>", "all a. all b.[<a; b>, ~a]", "1"}) {
    INFO(t);
    S r = P(t);
    valid(derive_i_down(r), bvq_rules(), S::unit(), S::par({r, negate(r)}));
    valid(derive_i_up(r), sbvq_rules(), S::copar({r, negate(r)}), S::unit());
  }
  CHECK(derive_i_down(P("a")).length() == 1);
  CHECK(derive_i_down(P("a")).links[0].rule == Rule::AiDown);
  CHECK(derive_i_up(P("a")).links[0].rule == Rule::AiUp);
  Derivation down = derive_i_down(P("<a; b>"));
  for (const auto& l : down.links) CHECK(is_down(l.rule));
}

TEST_CASE("t↓ through a hole, a CoPar and a binder") {
  S r = P("b"), t = P("c");
  for (auto [shape, hole] : std::vector<std::pair<const char*, Path>>{
           {"1", {}}, {"(1, d)", {0}}, {"all p.[1, <p; d>]", {0, 0}}, {"<d; (1, e)>", {1, 0}}}) {
    INFO(shape);
    Context s = make_context(P(shape), hole);
    Derivation d = derive_t_down(s, r, t, "x");
    valid(d, bvq_rules(), plug(s, S::seq({r, t})),
          S::par({plug(s, S::seq({r, P("~x")})), S::seq({P("x"), t})}));
  }
  CHECK_THROWS_AS(derive_t_down(make_context(P("all x. 1"), {0}), r, t, "x"), std::invalid_argument);
}

TEST_CASE("mix and pmix") {
  valid(derive_pmix(P("[a, b]"), P("[c, d]")), bvq_rules(), P("<[a, b]; [c, d]>"), P("[a, b, c, d]"));
  valid(derive_pmix(S::unit(), S::unit()), bvq_rules(), S::unit(), S::unit());
  valid(derive_mix(P("a"), P("b")), sbvq_rules(), P("(a, b)"), P("[a, b]"));
}

TEST_CASE("context extrusion") {
  S r = P("a"), t = P("<b; c>");
  for (auto [shape, hole] : std::vector<std::pair<const char*, Path>>{
           {"1", {}}, {"<1; d>", {0}}, {"(d, 1)", {1}}, {"all y.[1, y]", {0, 0}}, {"all b.<1; ~b>", {0, 0}}}) {
    INFO(std::string(shape));
    Context s = make_context(P(shape), hole);
    Derivation d = context_extrusion(s, r, t);
    INFO(render(d.premise()));
    CheckReport rep = check(d, bvq_rules());
    INFO(rep.message);
    CHECK(rep.ok);
    if (std::string(shape) == "all b.<1; ~b>")
      CHECK(equiv(d.premise(), P("all d.<[a, <b; c>]; ~d>"))); // the binder is renamed, not capturing b
    else
      CHECK(equiv(d.premise(), plug(s, S::par({r, t}))));
    CHECK(equiv(d.conclusion(), S::par({plug(s, r), t})));
  }
  CHECK(context_extrusion(hole_context(), r, t).length() == 0);
}

TEST_CASE("stripping an outer binder") {
  Derivation id = strip_binder(Derivation::identity(P("all a.<a; b>")), "a");
  CHECK(id.length() == 0);
  CHECK(equiv(id.premise(), P("<a; b>")));

  Derivation inner = derive_i_down(P("c"));
  Derivation under = plug(make_context(P("all a. [<a; b>, 1]"), {0, 1}), inner);
  REQUIRE(check(under, bvq_rules()).ok);
  Derivation out = strip_binder(under, "a");
  CHECK(check(out, bvq_rules()).ok);
  REQUIRE(out.length() == under.length());
  CHECK(out.links[0].path.size() + 1 == under.links[0].path.size());
}

TEST_CASE("dualizing a derivation") {
  Derivation d = derive_i_down(P("<a; b>"));
  Derivation n = dualize(d);
  valid(n, sbvq_rules(), negate(d.conclusion()), negate(d.premise()));
  for (const auto& l : n.links) CHECK_FALSE(is_down(l.rule));
}

TEST_CASE("derivations survive JSON") {
  Derivation d = tag_macro(derive_i_down(P("all a.<a; ~b>")), "demo", {{"k", "v"}});
  nlohmann::json j = to_json(d, bvq_rules());
  RuleSet allowed;
  Derivation back = derivation_from_json(j, &allowed);
  CHECK(allowed == bvq_rules());
  CHECK(back.length() == d.length());
  CHECK(check(back, bvq_rules()).ok);
  REQUIRE(back.macros.size() == 1);
  CHECK(back.macros[0].name == "demo");
  CHECK(back.macros[0].info.at("k") == "v");
  for (std::size_t i = 0; i < d.steps.size(); ++i) CHECK(render(back.steps[i]) == render(d.steps[i]));
  CHECK(to_json(back, bvq_rules()).dump() == j.dump());
}

TEST_CASE("building upward from a conclusion") {
  UpBuilder ub(P("[<a; b>, <~a; ~b>]"));
  Binding q;
  q.set("R", P("a")).set("T", P("b")).set("U", P("~a")).set("V", P("~b"));
  ub.up(Rule::QDown, {}, q);
  CHECK(equiv(ub.top(), P("<[a, ~a]; [b, ~b]>")));
  ub.above(plug(make_context(P("<1; [b, ~b]>"), {0}), derive_i_down(P("a"))));
  ub.above(plug(make_context(P("<1; 1>"), {1}), derive_i_down(P("b"))));
  Derivation d = with_premise(ub.done(), S::unit());
  valid(d, bvq_rules(), S::unit(), P("[<a; b>, <~a; ~b>]"));
  CHECK(d.length() == 3);
  CHECK_THROWS_AS(UpBuilder(P("a")).as(P("b")), std::invalid_argument);
}
