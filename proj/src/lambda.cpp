#include "bvq/lambda.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace bvq {

using S = Structure;
using L = LambdaTerm;

LambdaTerm LambdaTerm::var(std::string x) {
  if (!valid_ident(x)) throw std::invalid_argument("bad λ-variable '" + x + "'");
  return L(std::make_shared<const Node>(Node{Kind::Var, std::move(x), {}}));
}

LambdaTerm LambdaTerm::abs(std::string x, LambdaTerm body) {
  if (!valid_ident(x)) throw std::invalid_argument("bad λ-variable '" + x + "'");
  return L(std::make_shared<const Node>(Node{Kind::Abs, std::move(x), {std::move(body)}}));
}

LambdaTerm LambdaTerm::app(LambdaTerm fun, LambdaTerm arg) {
  return L(std::make_shared<const Node>(Node{Kind::App, {}, {std::move(fun), std::move(arg)}}));
}

// ---------------------------------------------------------------------------
// Syntax

LambdaTerm named_term(const std::string& name) {
  if (name == "Not") return parse_term("\\z. \\x. \\y. z y x");
  if (name == "True") return parse_term("\\w. \\z. w z");
  if (name == "False") return parse_term("\\w. \\z. z w");
  throw std::invalid_argument("unknown term name '" + name + "'");
}

namespace {

class TermParser {
public:
  explicit TermParser(std::string_view t) : t_(t) {}

  L parse() {
    L m = term();
    skip();
    if (i_ != t_.size()) fail("unexpected '" + std::string(1, t_[i_]) + "'");
    return m;
  }

private:
  std::string_view t_;
  std::size_t i_ = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(i_, msg); }

  void skip() {
    while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_]))) ++i_;
  }

  bool lambda() {
    skip();
    if (i_ < t_.size() && t_[i_] == '\\') {
      ++i_;
      return true;
    }
    if (t_.substr(i_, 2) == "\xCE\xBB") {
      i_ += 2;
      return true;
    }
    return false;
  }

  std::string word() {
    skip();
    std::size_t s = i_;
    while (i_ < t_.size() && (std::isalnum(static_cast<unsigned char>(t_[i_])) || t_[i_] == '_')) ++i_;
    return std::string(t_.substr(s, i_ - s));
  }

  L term() {
    if (lambda()) {
      std::vector<std::string> xs;
      while (true) {
        skip();
        if (i_ < t_.size() && t_[i_] == '.') break;
        std::string x = word();
        if (!valid_ident(x)) fail(x.empty() ? "expected a variable after λ" : "bad variable '" + x + "'");
        xs.push_back(x);
      }
      if (xs.empty()) fail("λ binds no variable");
      ++i_;
      L body = term();
      for (auto it = xs.rbegin(); it != xs.rend(); ++it) body = L::abs(*it, body);
      return body;
    }
    std::optional<L> acc;
    while (true) {
      skip();
      if (i_ >= t_.size() || t_[i_] == ')') break;
      L next = [&] {
        std::size_t save = i_;
        if (lambda()) {
          i_ = save;
          return term(); // an abstraction runs to the end of the application
        }
        return atom();
      }();
      acc = acc ? L::app(*acc, next) : next;
    }
    if (!acc) fail("expected a term");
    return *acc;
  }

  L atom() {
    skip();
    if (t_[i_] == '(') {
      ++i_;
      L m = term();
      skip();
      if (i_ >= t_.size() || t_[i_] != ')') fail("expected ')'");
      ++i_;
      return m;
    }
    std::size_t at = i_;
    std::string w = word();
    if (w.empty()) fail("unexpected '" + std::string(1, t_[i_]) + "'");
    if (std::isupper(static_cast<unsigned char>(w[0]))) {
      try {
        return named_term(w);
      } catch (const std::invalid_argument&) {
        i_ = at;
        fail("unknown term name '" + w + "'");
      }
    }
    if (!valid_ident(w)) {
      i_ = at;
      fail("bad variable '" + w + "'");
    }
    return L::var(w);
  }
};

std::string show(const L& m, bool fun_pos, bool arg_pos) {
  switch (m.kind()) {
  case L::Kind::Var:
    return m.name();
  case L::Kind::Abs: {
    std::string s = "\\" + m.name() + ". " + show(m.body(), false, false);
    return fun_pos || arg_pos ? "(" + s + ")" : s;
  }
  case L::Kind::App: {
    std::string s = show(m.fun(), true, false) + " " + show(m.arg(), false, true);
    return arg_pos ? "(" + s + ")" : s;
  }
  }
  return {};
}

} // namespace

LambdaTerm parse_term(std::string_view text) { return TermParser(text).parse(); }

// An abstraction in argument position at the end of an application needs no
// parentheses, but they are kept for readability.
std::string render(const LambdaTerm& m) { return show(m, false, false); }

// ---------------------------------------------------------------------------
// Variables, linearity, substitution

namespace {

void collect_free(const L& m, std::set<std::string>& bound, std::set<std::string>& out) {
  switch (m.kind()) {
  case L::Kind::Var:
    if (!bound.count(m.name())) {
      out.insert(m.name());
    }
    return;
  case L::Kind::Abs: {
    bool had = bound.count(m.name());
    bound.insert(m.name());
    collect_free(m.body(), bound, out);
    if (!had) bound.erase(m.name());
    return;
  }
  case L::Kind::App:
    collect_free(m.fun(), bound, out);
    collect_free(m.arg(), bound, out);
    return;
  }
}

} // namespace

std::set<std::string> free_vars(const LambdaTerm& m) {
  std::set<std::string> bound, out;
  collect_free(m, bound, out);
  return out;
}

std::set<std::string> all_vars(const LambdaTerm& m) {
  std::set<std::string> out;
  std::function<void(const L&)> go = [&](const L& n) {
    if (!n.is(L::Kind::App)) out.insert(n.name());
    if (n.is(L::Kind::Abs)) go(n.body());
    if (n.is(L::Kind::App)) {
      go(n.fun());
      go(n.arg());
    }
  };
  go(m);
  return out;
}

std::size_t abstractions(const LambdaTerm& m) {
  switch (m.kind()) {
  case L::Kind::Var:
    return 0;
  case L::Kind::Abs:
    return 1 + abstractions(m.body());
  case L::Kind::App:
    return abstractions(m.fun()) + abstractions(m.arg());
  }
  return 0;
}

bool alpha_equal(const LambdaTerm& a, const LambdaTerm& b) {
  std::function<bool(const L&, const L&, std::map<std::string, int>&, std::map<std::string, int>&, int)> eq =
      [&](const L& x, const L& y, std::map<std::string, int>& ex, std::map<std::string, int>& ey, int depth) {
        if (x.kind() != y.kind()) return false;
        switch (x.kind()) {
        case L::Kind::Var: {
          auto ix = ex.find(x.name());
          auto iy = ey.find(y.name());
          if ((ix == ex.end()) != (iy == ey.end())) return false;
          if (ix == ex.end()) return x.name() == y.name();
          return ix->second == iy->second;
        }
        case L::Kind::Abs: {
          auto sx = ex, sy = ey;
          sx[x.name()] = depth;
          sy[y.name()] = depth;
          return eq(x.body(), y.body(), sx, sy, depth + 1);
        }
        case L::Kind::App:
          return eq(x.fun(), y.fun(), ex, ey, depth) && eq(x.arg(), y.arg(), ex, ey, depth);
        }
        return false;
      };
  std::map<std::string, int> ea, eb;
  return eq(a, b, ea, eb, 0);
}

LinearityReport check_linear(const LambdaTerm& m) {
  LinearityReport rep;
  std::function<std::map<std::string, int>(const L&)> go = [&](const L& n) -> std::map<std::string, int> {
    switch (n.kind()) {
    case L::Kind::Var:
      return {{n.name(), 1}};
    case L::Kind::Abs: {
      auto c = go(n.body());
      auto it = c.find(n.name());
      int k = it == c.end() ? 0 : it->second;
      if (k == 0) rep.problems.push_back("\\" + n.name() + " does not use " + n.name());
      if (k > 1) rep.problems.push_back("\\" + n.name() + " uses " + n.name() + " " + std::to_string(k) + " times");
      if (it != c.end()) c.erase(it);
      return c;
    }
    case L::Kind::App: {
      auto c = go(n.fun());
      auto d = go(n.arg());
      for (const auto& [x, k] : d) {
        if (c.count(x))
          rep.problems.push_back(x + " is free in both " + render(n.fun()) + " and " + render(n.arg()) +
                                 " (X ∩ Y ≠ ∅)");
        c[x] += k;
      }
      return c;
    }
    }
    return {};
  };
  for (const auto& [x, k] : go(m))
    if (k > 1) rep.problems.push_back(x + " occurs free " + std::to_string(k) + " times");
  // The App clause reports the same clash once per enclosing node; keep one.
  std::sort(rep.problems.begin(), rep.problems.end());
  rep.problems.erase(std::unique(rep.problems.begin(), rep.problems.end()), rep.problems.end());
  rep.ok = rep.problems.empty();
  return rep;
}

void require_linear(const LambdaTerm& m, const std::string& what) {
  LinearityReport r = check_linear(m);
  if (r.ok) return;
  std::string msg = what + ": " + render(m) + " is not linear:";
  for (const auto& p : r.problems) msg += " " + p + ";";
  msg.pop_back();
  throw std::invalid_argument(msg);
}

LambdaTerm substitute(const LambdaTerm& m, const std::string& x, const LambdaTerm& n) {
  switch (m.kind()) {
  case L::Kind::Var:
    return m.name() == x ? n : m;
  case L::Kind::App:
    return L::app(substitute(m.fun(), x, n), substitute(m.arg(), x, n));
  case L::Kind::Abs: {
    if (m.name() == x) return m;
    auto fv = free_vars(n);
    if (!fv.count(m.name()) || !free_vars(m.body()).count(x))
      return L::abs(m.name(), substitute(m.body(), x, n));
    std::set<std::string> avoid = fv;
    for (const auto& v : all_vars(m.body())) avoid.insert(v);
    avoid.insert(x);
    std::string y = fresh_ident(m.name(), avoid);
    L body = substitute(m.body(), m.name(), L::var(y));
    return L::abs(y, substitute(body, x, n));
  }
  }
  return m;
}

LambdaTerm separate_binders(const LambdaTerm& m, const std::set<std::string>& avoid) {
  std::set<std::string> used = all_vars(m);
  used.insert(avoid.begin(), avoid.end());
  std::set<std::string> taken = free_vars(m);
  taken.insert(avoid.begin(), avoid.end());
  std::function<L(const L&, const std::map<std::string, std::string>&)> go =
      [&](const L& n, const std::map<std::string, std::string>& env) -> L {
    switch (n.kind()) {
    case L::Kind::Var: {
      auto it = env.find(n.name());
      return it == env.end() ? n : L::var(it->second);
    }
    case L::Kind::App:
      return L::app(go(n.fun(), env), go(n.arg(), env));
    case L::Kind::Abs: {
      std::string y = n.name();
      if (taken.count(y)) {
        y = fresh_ident(y, used);
        used.insert(y);
      }
      taken.insert(y);
      auto inner = env;
      inner[n.name()] = y;
      return L::abs(y, go(n.body(), inner));
    }
    }
    return n;
  };
  return go(m, {});
}

// ---------------------------------------------------------------------------
// Reduction

std::string render(const TermPath& p) {
  if (p.empty()) return "-";
  std::string out;
  for (Move mv : p) {
    if (!out.empty()) out += ',';
    out += mv == Move::F ? "f" : mv == Move::AL ? "al" : "ar";
  }
  return out;
}

TermPath parse_term_path(std::string_view text) {
  TermPath p;
  if (text.empty() || text == "-") return p;
  std::stringstream in{std::string(text)};
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok == "f") p.push_back(Move::F);
    else if (tok == "al") p.push_back(Move::AL);
    else if (tok == "ar") p.push_back(Move::AR);
    else throw std::invalid_argument("bad term path step '" + tok + "'");
  }
  return p;
}

std::vector<std::string> step_rules(const ReductionStep& s) {
  std::vector<std::string> out;
  for (Move mv : s.path) out.push_back(mv == Move::F ? "f" : mv == Move::AL ? "al" : "ar");
  out.push_back("beta");
  return out;
}

std::string trace_rules(const ReductionTrace& t) {
  if (t.steps.empty()) return "refl";
  auto one = [](const ReductionStep& s) {
    auto r = step_rules(s);
    std::string out = r.back();
    for (auto it = r.rbegin() + 1; it != r.rend(); ++it) out = *it + "(" + out + ")";
    return out;
  };
  if (t.steps.size() == 1) return one(t.steps[0]);
  std::string out = "tra(";
  for (std::size_t i = 0; i < t.steps.size(); ++i) out += (i ? ", " : "") + one(t.steps[i]);
  return out + ")";
}

namespace {

bool is_redex(const L& m) { return m.is(L::Kind::App) && m.fun().is(L::Kind::Abs); }

void find_redexes(const L& m, TermPath& at, std::vector<TermPath>& out) {
  if (is_redex(m)) out.push_back(at);
  switch (m.kind()) {
  case L::Kind::Var:
    return;
  case L::Kind::Abs:
    at.push_back(Move::F);
    find_redexes(m.body(), at, out);
    at.pop_back();
    return;
  case L::Kind::App:
    at.push_back(Move::AL);
    find_redexes(m.fun(), at, out);
    at.back() = Move::AR;
    find_redexes(m.arg(), at, out);
    at.pop_back();
    return;
  }
}

} // namespace

std::vector<TermPath> redexes(const LambdaTerm& m) {
  std::vector<TermPath> out;
  TermPath at;
  find_redexes(m, at, out);
  return out;
}

LambdaTerm contract(const LambdaTerm& m, const TermPath& at) {
  std::function<L(const L&, std::size_t)> go = [&](const L& n, std::size_t i) -> L {
    if (i == at.size()) {
      if (!is_redex(n)) throw std::invalid_argument("no redex at " + render(at) + " in " + render(m));
      return substitute(n.fun().body(), n.fun().name(), n.arg());
    }
    switch (at[i]) {
    case Move::F:
      if (!n.is(L::Kind::Abs)) break;
      return L::abs(n.name(), go(n.body(), i + 1));
    case Move::AL:
      if (!n.is(L::Kind::App)) break;
      return L::app(go(n.fun(), i + 1), n.arg());
    case Move::AR:
      if (!n.is(L::Kind::App)) break;
      return L::app(n.fun(), go(n.arg(), i + 1));
    }
    throw std::invalid_argument("path " + render(at) + " does not fit " + render(m));
  };
  return go(m, 0);
}

ReductionTrace reduce(const LambdaTerm& m, std::size_t max_steps) {
  require_linear(m, "reduce");
  ReductionTrace t{m, m, {}};
  while (t.steps.size() < max_steps) {
    auto rs = redexes(t.to);
    if (rs.empty()) break;
    L next = contract(t.to, rs.front());
    t.steps.push_back({rs.front(), t.to, next});
    t.to = next;
  }
  return t;
}

ReductionTrace replay(const LambdaTerm& m, const std::vector<TermPath>& at) {
  require_linear(m, "replay");
  ReductionTrace t{m, m, {}};
  for (const auto& p : at) {
    L next = contract(t.to, p);
    t.steps.push_back({p, t.to, next});
    t.to = next;
  }
  return t;
}

bool valid_trace(const ReductionTrace& t) {
  L cur = t.from;
  for (const auto& s : t.steps) {
    if (!alpha_equal(cur, s.before)) return false;
    try {
      if (!alpha_equal(contract(s.before, s.path), s.after)) return false;
    } catch (const std::invalid_argument&) {
      return false;
    }
    cur = s.after;
  }
  return alpha_equal(cur, t.to);
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

S par2(S a, S b) { return S::par({std::move(a), std::move(b)}); }
S fwd(const std::string& in, const std::string& out) { return S::seq({S::atom(in), S::atom(out, true)}); }

struct Namer {
  std::set<std::string> used;
  std::string fresh(const std::string& base) {
    std::string n = fresh_ident(base, used);
    used.insert(n);
    return n;
  }
};

S enc(Namer& nm, const L& m, const std::string& o) {
  switch (m.kind()) {
  case L::Kind::Var:
    return fwd(m.name(), o);
  case L::Kind::Abs:
    return S::sdq(m.name(), enc(nm, m.body(), o));
  case L::Kind::App: {
    std::string p = nm.fresh("p");
    std::string q = nm.fresh("q");
    return S::sdq(p, S::par({enc(nm, m.fun(), p), S::sdq(q, enc(nm, m.arg(), q)), fwd(p, o)}));
  }
  }
  return {};
}

Namer namer_for(std::initializer_list<const L*> terms, std::initializer_list<std::string> names) {
  Namer nm;
  for (const L* t : terms)
    for (const auto& v : all_vars(*t)) nm.used.insert(v);
  nm.used.insert(names.begin(), names.end());
  return nm;
}

void require_channel(const std::string& o, const L& m, const std::string& what) {
  if (!valid_ident(o)) throw std::invalid_argument(what + ": bad channel name '" + o + "'");
  if (free_vars(m).count(o))
    throw std::invalid_argument(what + ": channel " + o + " is free in " + render(m));
}

} // namespace

Structure encode(const LambdaTerm& m, const std::string& o) {
  require_linear(m, "encode");
  require_channel(o, m, "encode");
  // A binder named o would capture the output channel.
  L t = all_vars(m).count(o) ? separate_binders(m, {o}) : m;
  Namer nm = namer_for({&t}, {o});
  return enc(nm, t, o);
}

std::optional<std::string> output_channel(const Structure& s) {
  std::set<std::string> neg;
  std::vector<std::string> scope;
  std::function<void(const S&)> go = [&](const S& n) {
    if (n.is_atom()) {
      if (n.negative() && std::find(scope.begin(), scope.end(), n.name()) == scope.end()) neg.insert(n.name());
      return;
    }
    if (n.is(Kind::Sdq)) scope.push_back(n.name());
    for (const auto& k : n.kids()) go(k);
    if (n.is(Kind::Sdq)) scope.pop_back();
  };
  go(push_negations(s));
  if (neg.size() != 1) return std::nullopt;
  return *neg.begin();
}

namespace {

bool is_fwd(const S& s, const std::string& in, const std::string& out) {
  return s.is(Kind::Seq) && s.kids().size() == 2 && s.kid(0).is_atom() && !s.kid(0).negative() &&
         s.kid(0).name() == in && s.kid(1).is_atom() && s.kid(1).negative() && s.kid(1).name() == out;
}

void flatten_par(const S& s, std::vector<S>& out) {
  for (const auto& k : s.kids()) {
    if (k.is(Kind::Par)) flatten_par(k, out);
    else if (!k.is_unit()) out.push_back(k);
  }
}

std::optional<L> dec(const S& s, const std::string& o) {
  if (s.is(Kind::Seq) && s.kids().size() == 2 && s.kid(0).is_atom() && !s.kid(0).negative() &&
      s.kid(0).name() != o && is_fwd(s, s.kid(0).name(), o))
    return L::var(s.kid(0).name());
  if (!s.is(Kind::Sdq)) return std::nullopt;
  const std::string& v = s.name();
  if (s.body().is(Kind::Par)) {
    std::vector<S> ks;
    flatten_par(s.body(), ks);
    if (ks.size() != 3) return std::nullopt;
    for (std::size_t f = 0; f < 3; ++f) {
      if (!is_fwd(ks[f], v, o)) continue;
      for (std::size_t a = 0; a < 3; ++a) {
        if (a == f || !ks[a].is(Kind::Sdq)) continue;
        std::size_t m = 3 - f - a;
        auto fun = dec(ks[m], v);
        if (!fun) continue;
        auto arg = dec(ks[a].body(), ks[a].name());
        if (!arg) continue;
        return L::app(*fun, *arg);
      }
    }
    return std::nullopt;
  }
  if (v == o) return std::nullopt;
  auto body = dec(s.body(), o);
  if (!body) return std::nullopt;
  return L::abs(v, *body);
}

} // namespace

std::optional<LambdaTerm> decode_term(const Structure& s, const std::string& o) {
  auto m = dec(push_negations(s), o);
  if (!m || !check_linear(*m).ok || free_vars(*m).count(o)) return std::nullopt;
  if (!equiv(encode(*m, o), s)) return std::nullopt;
  return m;
}

// ---------------------------------------------------------------------------
// Derived rules. The internal builders assume every binder of the terms is
// distinct from every other name in play, and take channels from the namer.

namespace {

void ensure(const Derivation& d, const S& premise, const S& conclusion, const std::string& what) {
  require_valid(d, bvq_rules(), what);
  if (!equiv(d.premise(), premise))
    throw std::logic_error(what + ": premise " + render(d.premise()) + " should be " + render(premise));
  if (!equiv(d.conclusion(), conclusion))
    throw std::logic_error(what + ": conclusion " + render(d.conclusion()) + " should be " + render(conclusion));
}

Binding u_binding(const std::string& a, S r, S t, S k = S::unit()) {
  Binding b;
  b.atom = a;
  b.set("R", std::move(r)).set("T", std::move(t));
  if (!k.is_unit()) b.set("K", std::move(k));
  return b;
}

// ⟦M⟧o ⊢ [⟦M⟧r, <r; ō>]
Derivation mt(Namer& nm, const L& m, const std::string& o, const std::string& r) {
  switch (m.kind()) {
  case L::Kind::Var:
    return derive_t_down(hole_context(), S::atom(m.name()), S::atom(o, true), r);
  case L::Kind::App: {
    // t↓ inside the channel binder; the extrusion of <r; ō> supplies the u↓.
    std::string p = nm.fresh("p");
    std::string q = nm.fresh("q");
    S shape = S::sdq(p, S::par({enc(nm, m.fun(), p), S::sdq(q, enc(nm, m.arg(), q)), S::unit()}));
    return derive_t_down(make_context(shape, {0, 2}), S::atom(p), S::atom(o, true), r);
  }
  case L::Kind::Abs: {
    const std::string& y = m.name();
    S inner = enc(nm, m.body(), r);
    UpBuilder ub(par2(S::sdq(y, inner), fwd(r, o)));
    ub.as(par2(S::sdq(y, inner), S::sdq(y, fwd(r, o))));
    ub.up(Rule::UDown, {}, u_binding(y, inner, fwd(r, o)));
    ub.above(plug(make_context(S::sdq(y, S::unit()), {0}), mt(nm, m.body(), o, r)));
    return ub.done();
  }
  }
  throw std::logic_error("mt: bad term");
}

// ⟦M{N/x}⟧o ⊢ [⟦M⟧o, ⟦N⟧x]
Derivation ore(Namer& nm, const L& m, const L& n, const std::string& x, const std::string& o) {
  switch (m.kind()) {
  case L::Kind::Var:
    // The three cases on the shape of N are the three cases of mt↓ with r = x.
    return mt(nm, n, o, x);
  case L::Kind::Abs: {
    const std::string& y = m.name();
    S left = enc(nm, m.body(), o);
    S right = enc(nm, n, x);
    UpBuilder ub(par2(S::sdq(y, left), right));
    ub.as(par2(S::sdq(y, left), S::sdq(y, right)));
    ub.up(Rule::UDown, {}, u_binding(y, left, right));
    ub.above(plug(make_context(S::sdq(y, S::unit()), {0}), ore(nm, m.body(), n, x, o)));
    return ub.done();
  }
  case L::Kind::App: {
    std::string p = nm.fresh("p");
    std::string q = nm.fresh("q");
    S f = enc(nm, m.fun(), p);
    S a = enc(nm, m.arg(), q);
    S nx = enc(nm, n, x);
    S app = S::par({f, S::sdq(q, a), fwd(p, o)});
    UpBuilder ub(par2(S::sdq(p, app), nx));
    ub.as(par2(S::sdq(p, app), S::sdq(p, nx)));
    ub.up(Rule::UDown, {}, u_binding(p, app, nx));
    if (free_vars(m.fun()).count(x)) {
      ub.as(S::sdq(p, S::par({par2(f, nx), S::sdq(q, a), fwd(p, o)})));
      Context c = make_context(S::sdq(p, S::par({S::unit(), S::sdq(q, a), fwd(p, o)})), {0, 0});
      ub.above(plug(c, ore(nm, m.fun(), n, x, p)));
    } else {
      ub.as(S::sdq(p, S::par({f, par2(S::sdq(q, a), S::sdq(q, nx)), fwd(p, o)})));
      ub.up(Rule::UDown, {0, 1}, u_binding(q, a, nx));
      Context c = make_context(S::sdq(p, S::par({f, S::sdq(q, S::unit()), fwd(p, o)})), {0, 1, 0});
      ub.above(plug(c, ore(nm, m.arg(), n, x, q)));
    }
    return ub.done();
  }
  }
  throw std::logic_error("ore: bad term");
}

// ⟦M{N/x}⟧o ⊢ ⟦(\x. M) N⟧o
Derivation beta(Namer& nm, const L& m, const L& n, const std::string& x, const std::string& o) {
  std::string p = nm.fresh("p");
  std::string q = nm.fresh("q");
  S mp = enc(nm, m, p);
  UpBuilder ub(S::sdq(p, S::par({S::sdq(x, mp), S::sdq(q, enc(nm, n, q)), fwd(p, o)})));
  // Rename the argument's output channel q to x.
  S nx = enc(nm, n, x);
  ub.as(S::sdq(p, S::par({S::sdq(x, mp), S::sdq(x, nx), fwd(p, o)})));
  // Identify the input channel x with the output channel x.
  ub.up(Rule::UDown, {0}, u_binding(x, mp, nx, fwd(p, o)));
  ub.above(plug(make_context(S::sdq(p, S::par({S::sdq(x, S::unit()), fwd(p, o)})), {0, 0, 0}),
                ore(nm, m, n, x, p)));
  L sub = substitute(m, x, n);
  S subp = enc(nm, sub, p);
  ub.as(S::sdq(p, par2(subp, fwd(p, o))));
  ub.above(plug(make_context(S::sdq(p, S::unit()), {0}), mt(nm, sub, o, p)));
  ub.as(enc(nm, sub, o));
  return ub.done();
}

// Renames the binders of m and then n apart from everything else in play.
std::pair<L, L> separate_pair(const L& m, const L& n, std::set<std::string> avoid) {
  for (const auto& v : free_vars(m)) avoid.insert(v);
  for (const auto& v : free_vars(n)) avoid.insert(v);
  L m2 = separate_binders(m, avoid);
  for (const auto& v : all_vars(m2)) avoid.insert(v);
  return {m2, separate_binders(n, avoid)};
}

} // namespace

Derivation derive_mt_down(const LambdaTerm& m, const std::string& o, const std::string& r) {
  require_linear(m, "mt↓");
  require_channel(o, m, "mt↓");
  require_channel(r, m, "mt↓");
  if (o == r) throw std::invalid_argument("mt↓: the two channels must differ");
  L t = separate_binders(m, {o, r});
  Namer nm = namer_for({&t}, {o, r});
  Derivation d = with_premise(mt(nm, t, o, r), encode(m, o));
  ensure(d, encode(m, o), par2(encode(m, r), fwd(r, o)), "mt↓");
  return tag_macro(d, "mt", {{"channel", o}, {"to", r}});
}

Derivation derive_ore(const LambdaTerm& m, const LambdaTerm& n, const std::string& x, const std::string& o) {
  require_linear(m, "ore");
  require_linear(n, "ore");
  if (!free_vars(m).count(x)) throw std::invalid_argument("ore: " + x + " is not free in " + render(m));
  if (free_vars(n).count(x)) throw std::invalid_argument("ore: " + x + " is free in " + render(n));
  for (const auto& v : free_vars(n))
    if (free_vars(m).count(v))
      throw std::invalid_argument("ore: " + v + " is free in both " + render(m) + " and " + render(n));
  require_channel(o, m, "ore");
  require_channel(o, n, "ore");
  if (o == x) throw std::invalid_argument("ore: channel and variable coincide");
  auto [m2, n2] = separate_pair(m, n, {x, o});
  Namer nm = namer_for({&m2, &n2}, {x, o});
  S premise = encode(substitute(m, x, n), o);
  Derivation d = with_premise(ore(nm, m2, n2, x, o), premise);
  ensure(d, premise, par2(encode(m, o), encode(n, x)), "ore");
  return tag_macro(d, "ore", {{"channel", o}, {"variable", x}});
}

Derivation derive_beta(const LambdaTerm& m, const LambdaTerm& n, const std::string& x, const std::string& o) {
  L redex = L::app(L::abs(x, m), n);
  require_linear(redex, "beta");
  require_channel(o, redex, "beta");
  L t = separate_binders(redex, {o});
  Namer nm = namer_for({&t}, {o});
  S premise = encode(substitute(m, x, n), o);
  Derivation d = with_premise(beta(nm, t.fun().body(), t.arg(), t.fun().name(), o), premise);
  ensure(d, premise, encode(redex, o), "beta");
  return tag_macro(d, "beta", {{"channel", o}, {"redex", render(redex)}});
}

namespace {

// ⟦after⟧o ⊢ ⟦before⟧o for the redex at `at`.
Derivation step_block(Namer& nm, const L& m, const TermPath& at, std::size_t i, const std::string& o) {
  if (i == at.size()) {
    if (!is_redex(m)) throw std::invalid_argument("compile: no redex at " + render(at));
    return beta(nm, m.fun().body(), m.arg(), m.fun().name(), o);
  }
  switch (at[i]) {
  case Move::F:
    if (!m.is(L::Kind::Abs)) break;
    return plug(make_context(S::sdq(m.name(), S::unit()), {0}), step_block(nm, m.body(), at, i + 1, o));
  case Move::AL:
  case Move::AR: {
    if (!m.is(L::Kind::App)) break;
    std::string p = nm.fresh("p");
    std::string q = nm.fresh("q");
    if (at[i] == Move::AL) {
      Context c = make_context(S::sdq(p, S::par({S::unit(), S::sdq(q, enc(nm, m.arg(), q)), fwd(p, o)})), {0, 0});
      return plug(c, step_block(nm, m.fun(), at, i + 1, p));
    }
    Context c = make_context(S::sdq(p, S::par({enc(nm, m.fun(), p), S::sdq(q, S::unit()), fwd(p, o)})), {0, 1, 0});
    return plug(c, step_block(nm, m.arg(), at, i + 1, q));
  }
  }
  throw std::invalid_argument("compile: path " + render(at) + " does not fit " + render(m));
}

} // namespace

Derivation compile_reduction(const ReductionTrace& t, const std::string& o) {
  if (!valid_trace(t)) throw std::invalid_argument("compile: the trace does not replay");
  require_linear(t.from, "compile");
  require_channel(o, t.from, "compile");
  Derivation out = Derivation::identity(encode(t.from, o));
  // Build bottom-up: each block goes above what is already there.
  for (const auto& s : t.steps) {
    L m = separate_binders(s.before, {o});
    Namer nm = namer_for({&m}, {o});
    Derivation block = step_block(nm, m, s.path, 0, o);
    block = with_premise(block, encode(s.after, o));
    ensure(block, encode(s.after, o), encode(s.before, o), "compile");
    block.macros.clear();
    block = tag_macro(block, "beta",
                      {{"channel", o}, {"path", render(s.path)}, {"from", render(s.before)}, {"to", render(s.after)}});
    out = compose(block, out);
  }
  require_valid(out, bvq_rules(), "compile");
  return out;
}

ReductionTrace decode_beta_chain(const Derivation& d) {
  CheckReport rep = check(d, bvq_rules());
  if (!rep.ok) throw BetaChainError("not a BVQ derivation: link " + std::to_string(rep.link) + ": " + rep.message);
  auto o = output_channel(d.conclusion());
  if (!o) throw BetaChainError("conclusion is not an encoding: no single output channel");
  auto m = decode_term(d.conclusion(), *o);
  if (!m) throw BetaChainError("conclusion is not an encoding: " + render(d.conclusion()));
  auto top = decode_term(d.premise(), *o);
  if (!top) throw BetaChainError("premise is not an encoding: " + render(d.premise()));

  // Outermost beta spans, which must tile the links.
  std::vector<MacroSpan> spans;
  for (const auto& s : d.macros)
    if (s.name == "beta") spans.push_back(s);
  std::sort(spans.begin(), spans.end(), [](const MacroSpan& a, const MacroSpan& b) {
    return a.first != b.first ? a.first < b.first : a.last > b.last;
  });
  std::vector<MacroSpan> blocks;
  for (const auto& s : spans)
    if (blocks.empty() || s.first >= blocks.back().last) blocks.push_back(s);
  std::size_t at = 0;
  for (const auto& b : blocks) {
    if (b.first != at || b.first == b.last)
      throw BetaChainError("not a beta chain: link " + std::to_string(at) + " lies outside every beta block");
    at = b.last;
  }
  if (at != d.links.size())
    throw BetaChainError("not a beta chain: link " + std::to_string(at) + " lies outside every beta block");

  ReductionTrace t{*m, *m, {}};
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
    auto next = decode_term(d.steps[it->first], *o);
    if (!next) throw BetaChainError("not a beta chain: step " + std::to_string(it->first) + " is not an encoding");
    std::optional<ReductionStep> found;
    for (const auto& p : redexes(t.to)) {
      L r = contract(t.to, p);
      if (alpha_equal(r, *next)) {
        found = ReductionStep{p, t.to, r};
        break;
      }
    }
    if (!found)
      throw BetaChainError("not a beta chain: block [" + std::to_string(it->first) + ", " + std::to_string(it->last) +
                           ") takes " + render(t.to) + " to " + render(*next) + ", which is not a beta step");
    t.steps.push_back(*found);
    t.to = found->after;
  }
  return t;
}

Derivation derive_misplaced_argument(const std::string& x, const LambdaTerm& m, const LambdaTerm& p,
                                     const LambdaTerm& q, const std::string& o) {
  L whole = L::app(L::app(L::abs(x, m), p), q);
  require_linear(whole, "misplaced argument");
  require_channel(o, whole, "misplaced argument");
  L t = separate_binders(whole, {o});
  const L& tm = t.fun().fun().body();
  const L& tp = t.fun().arg();
  const L& tq = t.arg();
  const std::string& tx = t.fun().fun().name();
  Namer nm = namer_for({&t}, {o});
  std::string r = nm.fresh("r");
  std::string s = nm.fresh("s");
  std::string pc = nm.fresh("p");
  std::string qc = nm.fresh("q");
  S em = enc(nm, tm, s);
  S ep = S::sdq(pc, enc(nm, tp, pc));
  S eq = S::sdq(qc, enc(nm, tq, qc));
  S inner = S::par({S::sdq(tx, em), ep, fwd(s, r)});
  UpBuilder ub(S::sdq(r, S::par({S::sdq(s, inner), eq, fwd(r, o)})));
  // ∀s binds vacuously over Q, so u↓ applies to the encoding as it stands.
  ub.up(Rule::UDown, {0}, u_binding(s, inner, eq, fwd(r, o)));
  // Q now sits next to the abstraction, as if it were its argument.
  S qx = enc(nm, tq, tx);
  ub.as(S::sdq(r, S::par({S::sdq(s, S::par({par2(S::sdq(tx, em), S::sdq(tx, qx)), ep, fwd(s, r)})), fwd(r, o)})));
  ub.up(Rule::UDown, {0, 0, 0, 0}, u_binding(tx, em, qx));
  Context c = make_context(S::sdq(r, S::par({S::sdq(s, S::par({S::sdq(tx, S::unit()), ep, fwd(s, r)})), fwd(r, o)})),
                           {0, 0, 0, 0, 0});
  ub.above(plug(c, ore(nm, tm, tq, tx, s)));
  L wrong = L::app(substitute(tm, tx, tq), tp);
  ub.as(S::sdq(r, par2(enc(nm, wrong, r), fwd(r, o))));
  ub.above(plug(make_context(S::sdq(r, S::unit()), {0}), mt(nm, wrong, o, r)));
  L shown = L::app(substitute(m, x, q), p);
  Derivation d = with_premise(ub.done(), encode(shown, o));
  ensure(d, encode(shown, o), encode(whole, o), "misplaced argument");
  return d;
}

// ---------------------------------------------------------------------------
// Random terms

namespace {

struct Gen {
  std::mt19937_64& rng;
  std::size_t budget;
  int names = 0;
  int frees = 0;

  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }
  std::string fresh() { return "v" + std::to_string(names++); }

  // A term using each of `need` exactly once.
  L go(std::vector<std::string> need, int depth) {
    if (need.empty()) {
      if (budget > 0 && depth < 6 && coin(0.6)) {
        --budget;
        std::string y = fresh();
        return L::abs(y, go({y}, depth + 1));
      }
      return L::var("f" + std::to_string(frees++));
    }
    if (need.size() == 1 && (depth >= 6 || coin(0.3))) return L::var(need[0]);
    if (budget > 0 && depth < 6 && coin(0.4)) {
      --budget;
      std::string y = fresh();
      need.push_back(y);
      return L::abs(y, go(need, depth + 1));
    }
    std::shuffle(need.begin(), need.end(), rng);
    std::size_t cut = std::uniform_int_distribution<std::size_t>(0, need.size())(rng);
    std::vector<std::string> left(need.begin(), need.begin() + static_cast<long>(cut));
    std::vector<std::string> right(need.begin() + static_cast<long>(cut), need.end());
    L fun = [&] {
      if (budget > 0 && coin(0.5)) { // a redex
        --budget;
        std::string y = fresh();
        left.push_back(y);
        return L::abs(y, go(left, depth + 1));
      }
      return go(left, depth + 1);
    }();
    return L::app(fun, go(right, depth + 1));
  }
};

} // namespace

LambdaTerm random_linear_term(std::mt19937_64& rng, std::size_t max_abs) {
  while (true) {
    Gen g{rng, max_abs};
    L m = g.go({}, 0);
    if (max_abs == 0 || !redexes(m).empty()) return m;
  }
}

} // namespace bvq
