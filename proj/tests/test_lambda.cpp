#include "bvq/lambda.hpp"

#include <doctest.h>

#include <algorithm>

using namespace bvq;
using S = Structure;

namespace {

LambdaTerm T(const char* t) { return parse_term(t); }
S P(const char* t) { return parse_structure(t); }

void valid(const Derivation& d, const S& premise, const S& conclusion) {
  CheckReport r = check(d, bvq_rules());
  INFO(r.message);
  CHECK(r.ok);
  CHECK_MESSAGE(equiv(d.premise(), premise), (render(d.premise()) + " vs " + render(premise)));
  CHECK_MESSAGE(equiv(d.conclusion(), conclusion), (render(d.conclusion()) + " vs " + render(conclusion)));
}

std::size_t occurrences(const S& s, const std::string& x) {
  if (s.is_atom()) return s.name() == x;
  std::size_t n = s.is(Kind::Sdq) && s.name() == x;
  for (const S& k : s.kids()) n += occurrences(k, x);
  return n;
}

} // namespace

TEST_CASE("term syntax") {
  CHECK(render(T("\\x. x")) == render(T("λx. x")));
  CHECK(T("f x y").is(LambdaTerm::Kind::App));
  CHECK(T("f x y").fun().is(LambdaTerm::Kind::App));
  CHECK(alpha_equal(T("\\x. x"), T("\\y. y")));
  CHECK_FALSE(alpha_equal(T("\\x. y"), T("\\y. y")));
  CHECK(alpha_equal(T("True"), T("\\w. \\z. w z")));
  CHECK(alpha_equal(T("Not"), T("\\z. \\x. \\y. z y x")));
  CHECK(alpha_equal(T(render(T("Not True")).c_str()), T("Not True")));
  CHECK_THROWS_AS(T("\\x."), ParseError);
  CHECK_THROWS_AS(T("(x"), ParseError);
}

TEST_CASE("linearity") {
  CHECK(check_linear(T("\\x. \\y. y x")));
  CHECK_FALSE(check_linear(T("\\x. x x")));
  CHECK_FALSE(check_linear(T("\\x. y")));
  CHECK_FALSE(check_linear(T("x x")));
  CHECK_THROWS_AS(require_linear(T("\\x. x x"), "term"), std::invalid_argument);
  CHECK(free_vars(T("\\x. x y")) == std::set<std::string>{"y"});
  CHECK(abstractions(T("Not True")) == 5);
}

TEST_CASE("substitution avoids capture") {
  LambdaTerm m = substitute(T("\\y. x y"), "x", T("y"));
  CHECK(m.is(LambdaTerm::Kind::Abs));
  CHECK(m.name() != "y");
  CHECK(alpha_equal(m, T("\\z. y z")));
}

TEST_CASE("reduction") {
  ReductionTrace t = reduce(T("(\\x. x) y"));
  REQUIRE(t.steps.size() == 1);
  CHECK(alpha_equal(t.to, T("y")));
  CHECK(trace_rules(t) == "beta");
  CHECK(trace_rules(reduce(T("y"))) == "refl");

  t = reduce(T("Not True"));
  CHECK(alpha_equal(t.to, T("\\x. \\y. y x")));
  CHECK(alpha_equal(t.to, T("False")));
  CHECK(valid_trace(t));
  CHECK(t.steps.size() == 3);

  t = reduce(T("Not True"), 1);
  CHECK(alpha_equal(t.to, T("\\x. \\y. True y x")));

  auto rs = redexes(T("(\\x. x) ((\\y. y) z)"));
  REQUIRE(rs.size() == 2);
  CHECK(rs[0].empty());
  CHECK(render(rs[1]) == render(TermPath{Move::AR}));
  CHECK(parse_term_path(render(TermPath{Move::F, Move::AL})) == TermPath{Move::F, Move::AL});

  t = replay(T("(\\x. x) ((\\y. y) z)"), {{Move::AR}, {}});
  CHECK(alpha_equal(t.to, T("z")));
  CHECK_THROWS_AS(replay(T("x y"), {{}}), std::invalid_argument);
}

TEST_CASE("step tags name the context") {
  ReductionTrace t = reduce(T("\\w. (\\x. x) w"));
  REQUIRE(t.steps.size() == 1);
  std::vector<std::string> tags = step_rules(t.steps[0]);
  REQUIRE(!tags.empty());
  CHECK(tags.back() == "beta");
  CHECK(tags.size() == 2);
}

TEST_CASE("encoding clauses") {
  CHECK(equiv(encode(T("x"), "o"), P("<x; ~o>")));
  CHECK(equiv(encode(T("\\x. x"), "o"), P("all x.<x; ~o>")));
  CHECK(equiv(encode(T("True"), "o"), P("all w. all z. all p.[<w; ~p>, all q.<z; ~q>, <p; ~o>]")));
  CHECK_THROWS_AS(encode(T("\\x. x x"), "o"), std::invalid_argument);
  CHECK_THROWS_AS(encode(T("o"), "o"), std::invalid_argument);
}

TEST_CASE("encodings decode back") {
  for (const char* t : {"x", "\\x. x", "f a", "Not True", "\\x. \\y. y x"}) {
    INFO(t);
    S e = encode(T(t), "o");
    auto back = decode_term(e, "o");
    REQUIRE(back);
    CHECK(alpha_equal(*back, T(t)));
    CHECK(output_channel(e) == std::optional<std::string>("o"));
    CHECK(occurrences(e, "o") == 1);
    std::set<std::string> fn = free_vars(T(t));
    fn.insert("o");
    CHECK(free_names(e) == fn);
  }
  CHECK_FALSE(decode_term(P("[a, ~a]"), "o"));
}

TEST_CASE("derived rules of the encoding") {
  valid(derive_mt_down(T("x"), "o", "r"), encode(T("x"), "o"), P("[<x; ~r>, <r; ~o>]"));
  valid(derive_mt_down(T("\\x. x"), "o", "r"), encode(T("\\x. x"), "o"),
        S::par({encode(T("\\x. x"), "r"), P("<r; ~o>")}));
  valid(derive_mt_down(T("f a"), "o", "r"), encode(T("f a"), "o"), S::par({encode(T("f a"), "r"), P("<r; ~o>")}));

  struct Case {
    const char *m, *n;
  };
  for (const Case& c : std::initializer_list<Case>{
           {"x", "y"}, {"x", "\\z. z"}, {"x", "f a"}, {"\\y. x y", "g"}, {"x b", "\\z. z"}, {"b x", "c d"}}) {
    INFO(c.m, " / ", c.n);
    LambdaTerm m = T(c.m), n = T(c.n);
    valid(derive_ore(m, n, "x", "o"), encode(substitute(m, "x", n), "o"),
          S::par({encode(m, "o"), encode(n, "x")}));
  }
  CHECK_THROWS_AS(derive_ore(T("y"), T("z"), "x", "o"), std::invalid_argument);
}

TEST_CASE("one beta step") {
  Derivation d = derive_beta(T("x"), T("y"), "x", "o");
  valid(d, P("<y; ~o>"), encode(T("(\\x. x) y"), "o"));
  REQUIRE(d.macros.size() == 1);
  CHECK(d.macros[0].name == "beta");
  CHECK(affinity_violations(d).empty());
}

TEST_CASE("compiling and decoding reductions") {
  for (const char* t : {"Not True", "(\\x. x) y", "(\\f. f a) (\\x. x)", "\\w. (\\x. x) w", "y"}) {
    INFO(t);
    ReductionTrace tr = reduce(T(t));
    Derivation d = compile_reduction(tr, "o");
    valid(d, encode(tr.to, "o"), encode(tr.from, "o"));
    CHECK(std::count_if(d.macros.begin(), d.macros.end(), [](const MacroSpan& m) { return m.name == "beta"; }) ==
          static_cast<long>(tr.steps.size()));
    ReductionTrace back = decode_beta_chain(d);
    CHECK(alpha_equal(back.from, tr.from));
    CHECK(alpha_equal(back.to, tr.to));
    CHECK(back.steps.size() == tr.steps.size());
    CHECK(trace_rules(back) == trace_rules(tr));
    CHECK(valid_trace(back));
  }
}

TEST_CASE("an empty chain decodes to the reflexive trace") {
  ReductionTrace back = decode_beta_chain(Derivation::identity(encode(T("\\x. x"), "o")));
  CHECK(back.steps.empty());
  CHECK(trace_rules(back) == "refl");
}

TEST_CASE("a derivation that is not a reduction is rejected") {
  LambdaTerm x = T("x"), u = T("u"), v = T("v");
  Derivation d = derive_misplaced_argument("x", x, u, v, "o");
  CHECK(check(d, bvq_rules()).ok);
  CHECK(equiv(d.conclusion(), encode(T("((\\x. x) u) v"), "o")));
  CHECK_THROWS_AS(decode_beta_chain(d), BetaChainError);
  CHECK_THROWS_AS(decode_beta_chain(tag_macro(d, "beta")), BetaChainError);

  Derivation ok = compile_reduction(reduce(T("(\\x. x) y")), "o");
  ok.macros.clear();
  CHECK_THROWS_AS(decode_beta_chain(ok), BetaChainError);
}

TEST_CASE("random terms are linear and reducible") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 30; ++i) {
    LambdaTerm m = random_linear_term(rng, 5);
    INFO(render(m));
    CHECK(check_linear(m));
    CHECK(abstractions(m) <= 5);
    CHECK(!redexes(m).empty());
  }
}
