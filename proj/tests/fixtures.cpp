#include "fixtures.hpp"

#include "bvq/prover.hpp"

#include <stdexcept>

namespace bvq::testing {

using S = Structure;

namespace {
S P(const std::string& t) { return parse_structure(t); }
} // namespace

Derivation proof_of(const Structure& s) {
  SearchResult r = prove(s);
  if (!r.proof) throw std::runtime_error("no proof of " + render(s));
  return *r.proof;
}

Derivation cut_fixture(const Structure& x, const Structure& y, const Structure& a) {
  S na = negate(a);
  UpBuilder ub(S::par({x, y}));
  ub.above(plug(make_context(S::par({S::unit(), x, y}), {0}), derive_i_up(a)));
  Binding b1;
  b1.set("R", na).set("T", a).set("U", y).set("K", x);
  ub.up(Rule::Switch, {}, b1);
  Binding b2;
  b2.set("R", a).set("T", S::par({na, y})).set("U", x);
  ub.up(Rule::Switch, {}, b2);
  ub.above(plug(make_context(S::copar({S::unit(), S::par({na, y})}), {0}), proof_of(S::par({a, x}))));
  ub.above(plug(make_context(S::copar({S::unit(), S::unit()}), {1}), proof_of(S::par({na, y}))));
  return with_premise(ub.done(), S::unit());
}

Derivation qup_fixture(const Structure& r, const Structure& u, const Structure& t, const Structure& v) {
  S concl = S::par({S::seq({S::copar({r, t}), S::copar({u, v})}), negate(S::seq({r, u})), negate(S::seq({t, v}))});
  UpBuilder ub(concl);
  Binding b;
  b.set("R", r).set("U", u).set("T", t).set("V", v);
  ub.up(Rule::QUp, {0}, b);
  ub.above(proof_of(ub.top()));
  return with_premise(ub.done(), S::unit());
}

Derivation uup_fixture(const std::string& a, const Structure& r, const Structure& t) {
  S concl = S::par({S::sdq(a, S::copar({r, t})), negate(S::sdq(a, r)), negate(S::sdq(a, t))});
  UpBuilder ub(concl);
  Binding b;
  b.atom = a;
  b.set("R", r).set("T", t);
  ub.up(Rule::UUp, {0}, b);
  ub.above(proof_of(ub.top()));
  return with_premise(ub.done(), S::unit());
}

std::vector<Fixture> elimination_fixtures() {
  std::vector<Fixture> out;
  auto add = [&](std::string name, Derivation d) { out.push_back({std::move(name), std::move(d)}); };

  add("cut ~a | a | a", cut_fixture(P("~a"), P("a"), P("a")));
  add("cut <~a;~b> | <a;b> | <a;b>", cut_fixture(P("<~a;~b>"), P("<a;b>"), P("<a;b>")));
  add("cut [~a,~b] | (a,b) | (a,b)", cut_fixture(P("[~a,~b]"), P("(a,b)"), P("(a,b)")));
  add("cut all a.<~a;~b> | all c.<c;b> | all a.<a;b>",
      cut_fixture(P("all a.<~a;~b>"), P("all c.<c;b>"), P("all a.<a;b>")));
  add("cut [~a,c,~c] | [a,b,~b] | a", cut_fixture(P("[~a, c, ~c]"), P("[a, b, ~b]"), P("a")));
  // Cuts on A between Ā and A.
  for (const char* a : {"~a", "[a,b]", "<a;~b>", "(a,~b)", "[a,~b]", "all a.[a,b]", "<a;<b;c>>", "(a,[b,c])",
                        "all a.(a,b)", "<(a,b);c>", "[<a;b>,c]", "all a.<a;~a>", "<a;a>", "(a,a)", "all a.all b.<a;b>"}) {
    S s = P(a);
    add(std::string("cut on ") + a, cut_fixture(negate(s), s, s));
  }

  struct Q {
    const char *r, *u, *t, *v;
  };
  for (const Q& q : std::initializer_list<Q>{{"a", "b", "c", "d"},
                                             {"[a,b]", "c", "d", "1"},
                                             {"a", "1", "b", "c"},
                                             {"1", "a", "b", "1"},
                                             {"a", "b", "1", "c"},
                                             {"<a;b>", "c", "d", "e"},
                                             {"(a,b)", "c", "1", "d"},
                                             {"a", "a", "b", "b"},
                                             {"a", "~a", "b", "~b"},
                                             {"a", "b", "a", "b"},
                                             {"[a,b]", "[c,d]", "1", "1"},
                                             {"all x.<x;a>", "b", "c", "1"},
                                             {"a", "[b,c]", "d", "1"},
                                             {"a", "b", "c", "<d;e>"},
                                             {"(a,b)", "(c,d)", "1", "1"}}) {
    add(std::string("q↑ ") + q.r + " " + q.u + " " + q.t + " " + q.v, qup_fixture(P(q.r), P(q.u), P(q.t), P(q.v)));
  }

  struct U {
    const char *a, *r, *t;
  };
  for (const U& u : std::initializer_list<U>{{"a", "<a;b>", "<~a;c>"},
                                             {"a", "a", "~a"},
                                             {"a", "a", "b"},
                                             {"a", "[a,b]", "~a"},
                                             {"a", "(a,b)", "c"},
                                             {"a", "<a;a>", "1"},
                                             {"a", "b", "c"},
                                             {"a", "a", "a"},
                                             {"a", "<b;a>", "<a;c>"},
                                             {"a", "[a,~a]", "b"},
                                             {"a", "all b.<a;b>", "c"},
                                             {"b", "<a;b>", "~b"},
                                             {"a", "(a,~a)", "1"},
                                             {"a", "<a;b;c>", "~a"},
                                             {"c", "[c,a]", "<c;b>"}}) {
    add(std::string("u↑ ") + u.a + " " + u.r + " " + u.t, uup_fixture(u.a, P(u.r), P(u.t)));
  }
  return out;
}

} // namespace bvq::testing
