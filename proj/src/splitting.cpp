#include "bvq/splitting.hpp"

#include "bvq/prover.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_map>

namespace bvq {

namespace {

using S = Structure;

S par2(S a, S b) { return S::par({std::move(a), std::move(b)}); }
S copar2(S a, S b) { return S::copar({std::move(a), std::move(b)}); }
S seq2(S a, S b) { return S::seq({std::move(a), std::move(b)}); }

S of(Kind k, std::vector<S> v) {
  if (v.empty()) return S::unit();
  if (v.size() == 1) return v[0];
  return S::make(k, std::move(v));
}

std::vector<S> slice(const std::vector<S>& v, std::size_t from, std::size_t to) {
  return {v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(to)};
}

std::vector<S> without(const std::vector<S>& v, std::size_t i) {
  std::vector<S> out;
  for (std::size_t k = 0; k < v.size(); ++k)
    if (k != i) out.push_back(v[k]);
  return out;
}

Path cat(Path a, const Path& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

Path tail(const Path& p) { return {p.begin() + 1, p.end()}; }

S under(const std::vector<std::string>& binders, S s) {
  for (auto it = binders.rbegin(); it != binders.rend(); ++it) s = S::sdq(*it, s);
  return s;
}

Path zeros(std::size_t n) { return Path(n, 0); }

std::set<std::string> all_names(const S& s) {
  NameSets ns = name_sets(s, NameReading::Syntactic);
  ns.free.insert(ns.bound.begin(), ns.bound.end());
  return ns.free;
}

void expect_proof(const Derivation& proof, const S& shape, const std::string& what) {
  CheckReport r = check(proof, bvq_rules());
  if (!r.ok) throw std::invalid_argument(what + ": input is not a BVQ derivation: " + r.message);
  if (!proof.is_proof()) throw std::invalid_argument(what + ": input derivation has premise " + render(proof.premise()));
  if (!equiv(proof.conclusion(), shape))
    throw std::invalid_argument(what + ": input proves " + render(proof.conclusion()) + ", expected " + render(shape));
}

// Post-condition: a failure here is a bug in this module.
void ensure(const Derivation& d, const S& premise, const S& conclusion, const std::string& what) {
  require_valid(d, bvq_rules(), what);
  if (!equiv(d.premise(), premise))
    throw std::logic_error(what + ": premise " + render(d.premise()) + " should be " + render(premise));
  if (!equiv(d.conclusion(), conclusion))
    throw std::logic_error(what + ": conclusion " + render(d.conclusion()) + " should be " + render(conclusion));
}

// Proofs of the small side goals a killer candidate raises, memoized by
// canonical text.
std::optional<Derivation> proof_of(const S& s) {
  thread_local std::unordered_map<std::string, std::optional<Derivation>> cache;
  std::string key = canonical_text(s);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  SearchConfig cfg;
  cfg.max_visited = kSplitSearchBound;
  cfg.shortest = false;
  SearchResult r = prove(s, cfg);
  std::optional<Derivation> out;
  if (r.status == Status::Proved) out = std::move(r.proof);
  if (cache.size() > 50'000) cache.clear();
  cache.emplace(key, out);
  return out;
}

Derivation need_proof(const S& s, const std::string& what) {
  auto p = proof_of(s);
  if (!p) throw SplitSearchExhausted(what + ": no BVQ proof found for " + render(s));
  return *p;
}

// Proofs of both side goals or nothing; the cheap filter runs on both before
// either search, and the smaller goal is searched first.
std::optional<std::pair<Derivation, Derivation>> prove_both(const S& x, const S& y) {
  if (!plausibly_provable(x) || !plausibly_provable(y)) return std::nullopt;
  bool swap = size(y) < size(x);
  auto first = proof_of(swap ? y : x);
  if (!first) return std::nullopt;
  auto second = proof_of(swap ? x : y);
  if (!second) return std::nullopt;
  if (swap) return std::pair{*second, *first};
  return std::pair{*first, *second};
}

// Climbs from p until `pick` accepts a candidate; returns the glue derivation
// with its premise set to the accepted raw form.
template <class Pick>
Derivation climb_for(const S& p, Pick&& pick, const std::string& what) {
  S chosen;
  ClimbResult r = climb(
      p,
      [&](const S& q) {
        auto c = pick(q);
        if (!c) return false;
        chosen = *c;
        return true;
      },
      kSplitSearchBound);
  if (!r.derivation) {
    if (r.exhausted) throw std::logic_error(what + ": no killers exist for " + render(p));
    throw SplitSearchExhausted(what + ": killer search bound exceeded");
  }
  return with_premise(*r.derivation, chosen);
}

} // namespace

// ---------------------------------------------------------------------------
// Shallow splitting

SplitSeqResult shallow_split_seq(const Derivation& proof, const Structure& r, const Structure& t,
                                 const Structure& p) {
  expect_proof(proof, par2(seq2(r, t), p), "shallow_split_seq");
  SplitSeqResult out;
  auto pick = [&](const S& q) -> std::optional<S> {
    std::vector<std::pair<S, S>> cands;
    if (q.is(Kind::Seq)) {
      const auto& k = q.kids();
      for (std::size_t i = 0; i <= k.size(); ++i)
        cands.emplace_back(of(Kind::Seq, slice(k, 0, i)), of(Kind::Seq, slice(k, i, k.size())));
    } else {
      cands = {{q, S::unit()}, {S::unit(), q}};
    }
    for (const auto& [p1, p2] : cands) {
      auto sides = prove_both(par2(r, p1), par2(t, p2));
      if (!sides) continue;
      auto& [l, rr] = *sides;
      out.p1 = p1;
      out.p2 = p2;
      out.left = l;
      out.right = rr;
      return seq2(p1, p2);
    }
    return std::nullopt;
  };
  out.glue = climb_for(p, pick, "shallow_split_seq");
  ensure(out.glue, seq2(out.p1, out.p2), p, "shallow_split_seq glue");
  ensure(out.left, S::unit(), par2(r, out.p1), "shallow_split_seq left");
  ensure(out.right, S::unit(), par2(t, out.p2), "shallow_split_seq right");
  return out;
}

SplitParResult shallow_split_copar(const Derivation& proof, const Structure& r, const Structure& t,
                                   const Structure& p) {
  expect_proof(proof, par2(copar2(r, t), p), "shallow_split_copar");
  SplitParResult out;
  auto pick = [&](const S& q) -> std::optional<S> {
    std::vector<std::pair<S, S>> cands;
    if (q.is(Kind::Par) && q.kids().size() < 16) {
      const auto& k = q.kids();
      for (unsigned long m = 0; m < (1ul << k.size()); ++m) {
        std::vector<S> a, b;
        for (std::size_t i = 0; i < k.size(); ++i) ((m >> i) & 1 ? b : a).push_back(k[i]);
        cands.emplace_back(of(Kind::Par, a), of(Kind::Par, b));
      }
    } else {
      cands = {{q, S::unit()}, {S::unit(), q}};
    }
    for (const auto& [p1, p2] : cands) {
      auto sides = prove_both(par2(r, p1), par2(t, p2));
      if (!sides) continue;
      auto& [l, rr] = *sides;
      out.p1 = p1;
      out.p2 = p2;
      out.left = l;
      out.right = rr;
      return par2(p1, p2);
    }
    return std::nullopt;
  };
  out.glue = climb_for(p, pick, "shallow_split_copar");
  ensure(out.glue, par2(out.p1, out.p2), p, "shallow_split_copar glue");
  ensure(out.left, S::unit(), par2(r, out.p1), "shallow_split_copar left");
  ensure(out.right, S::unit(), par2(t, out.p2), "shallow_split_copar right");
  return out;
}

SplitSdqResult shallow_split_sdq(const Derivation& proof, const std::string& a, const Structure& r,
                                 const Structure& p) {
  if (!valid_ident(a)) throw std::invalid_argument("shallow_split_sdq: bad binder '" + a + "'");
  if (occurs_free(p, a)) throw std::invalid_argument("shallow_split_sdq: " + a + " is free in " + render(p));
  expect_proof(proof, par2(S::sdq(a, r), p), "shallow_split_sdq");
  SplitSdqResult out;
  out.atom = a;
  auto pick = [&](const S& q) -> std::optional<S> {
    std::vector<S> cands;
    // Peel one binder of the outermost block and call it a.
    std::vector<std::string> block;
    S body = q;
    while (body.is(Kind::Sdq)) {
      block.push_back(body.name());
      body = body.body();
    }
    if (!occurs_free(q, a))
      for (std::size_t i = 0; i < block.size(); ++i) {
        std::vector<std::string> rest = block;
        rest.erase(rest.begin() + static_cast<long>(i));
        cands.push_back(substitute(under(rest, body), block[i], a));
      }
    if (!occurs_free(q, a)) cands.push_back(q);
    for (const auto& c : cands) {
      auto w = proof_of(par2(r, c));
      if (!w) continue;
      out.t = c;
      out.witness = *w;
      return S::sdq(a, c);
    }
    return std::nullopt;
  };
  out.glue = climb_for(p, pick, "shallow_split_sdq");
  ensure(out.glue, S::sdq(a, out.t), p, "shallow_split_sdq glue");
  ensure(out.witness, S::unit(), par2(r, out.t), "shallow_split_sdq witness");
  return out;
}

Derivation shallow_split_atoms(const Derivation& proof, const Structure& r0, const Structure& r1,
                               const Structure& p) {
  S whole = canonicalize(par2(r0, r1));
  std::vector<S> atoms = whole.is(Kind::Par) ? whole.kids() : std::vector<S>{whole};
  if (whole.is_unit()) throw std::invalid_argument("shallow_split_atoms: no atoms to split");
  for (const auto& l : atoms)
    if (!l.is_atom()) throw std::invalid_argument("shallow_split_atoms: " + render(l) + " is not an atom");
  for (std::size_t i = 0; i < atoms.size(); ++i)
    for (std::size_t j = i + 1; j < atoms.size(); ++j)
      if (atoms[i].name() == atoms[j].name() && atoms[i].negative() != atoms[j].negative())
        throw std::invalid_argument("shallow_split_atoms: " + render(atoms[i]) + " and " + render(atoms[j]) +
                                    " are dual");
  expect_proof(proof, par2(whole, p), "shallow_split_atoms");
  S from = negate(r1), to = par2(r0, p);
  std::string want = canonical_text(from);
  // Accept the atom itself, or the atom beside a provable remainder, which the
  // atom reaches by plugging that proof into a unit.
  S slot;
  std::optional<Derivation> fill;
  Path hole;
  auto pick = [&](const S& q) -> bool {
    if (canonical_text(q) == want) {
      slot = q;
      fill.reset();
      return true;
    }
    if (!q.is(Kind::Par) && !q.is(Kind::CoPar) && !q.is(Kind::Seq)) return false;
    const auto& k = q.kids();
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (q.is(Kind::Seq) && i != 0 && i + 1 != k.size()) continue;
      if (canonical_text(k[i]) != want) continue;
      S rest = of(q.kind(), without(k, i));
      auto pr = proof_of(rest);
      if (!pr) continue;
      std::vector<S> two{from, S::unit()};
      hole = {1};
      if (q.is(Kind::Seq) && i != 0) {
        std::swap(two[0], two[1]);
        hole = {0};
      }
      slot = S::make(q.kind(), two);
      fill = *pr;
      return true;
    }
    return false;
  };
  ClimbResult cr = climb(to, pick, kSplitSearchBound, size(from));
  if (!cr.derivation)
    throw SplitSearchExhausted("shallow_split_atoms: no derivation " + render(from) + " ⊢ " + render(to));
  Derivation d = *cr.derivation;
  if (fill) {
    Derivation top = plug(make_context(slot, hole), *fill);
    d = compose(with_premise(top, from), with_premise(d, top.conclusion()));
  } else {
    d = with_premise(d, from);
  }
  ensure(d, from, to, "shallow_split_atoms");
  return d;
}

// ---------------------------------------------------------------------------
// Context reduction

std::pair<Context, Structure> freshen_hole_path(const Context& s, const Structure& r) {
  std::set<std::string> avoid = all_names(plug(s, r));
  Context c = s;
  S rr = r;
  std::set<std::string> seen;
  auto free_all = free_names(plug(s, r));
  for (std::size_t depth = 0; depth < c.hole.size(); ++depth) {
    Path at(c.hole.begin(), c.hole.begin() + static_cast<long>(depth));
    const S& node = subterm(c.shape, at);
    if (!node.is(Kind::Sdq)) continue;
    const std::string& a = node.name();
    if (!seen.count(a) && !free_all.count(a)) {
      seen.insert(a);
      continue;
    }
    std::string fresh = fresh_ident(a, avoid);
    avoid.insert(fresh);
    seen.insert(fresh);
    // The hole holds a unit placeholder, so the renaming reaches r separately.
    c.shape = replace_at(c.shape, at, S::sdq(fresh, substitute(node.body(), a, fresh)));
    rr = substitute(rr, a, fresh);
  }
  return {c, rr};
}

namespace {

// Merges same-kind nesting and drops single-child connectives along the hole
// path.
Context flatten_path(const Context& c) {
  if (c.hole.empty()) return c;
  const S& n = c.shape;
  auto i = static_cast<std::size_t>(c.hole[0]);
  if (n.is(Kind::Not)) throw std::invalid_argument("context: the hole sits under a negation");
  if (!n.is(Kind::Par) && !n.is(Kind::CoPar) && !n.is(Kind::Seq) && !n.is(Kind::Sdq))
    throw std::invalid_argument("context: bad hole path");
  Context inner = flatten_path({n.kid(i), tail(c.hole)});
  if (n.is(Kind::Sdq)) return {S::sdq(n.name(), inner.shape), cat({0}, inner.hole)};
  if (n.kids().size() == 1) return inner;
  std::vector<S> kids = n.kids();
  if (inner.shape.kind() == n.kind() && !inner.hole.empty()) {
    std::vector<S> merged = slice(kids, 0, i);
    const auto& ik = inner.shape.kids();
    merged.insert(merged.end(), ik.begin(), ik.end());
    auto rest = slice(kids, i + 1, kids.size());
    merged.insert(merged.end(), rest.begin(), rest.end());
    int at = static_cast<int>(i) + inner.hole[0];
    return {S::make(n.kind(), merged), cat({at}, tail(inner.hole))};
  }
  kids[i] = inner.shape;
  return {S::make(n.kind(), kids), cat({static_cast<int>(i)}, inner.hole)};
}

using Builder = std::function<Derivation(const S&)>;

ContextReduction reduce(const Derivation& proof, const Context& s, const S& r);

// S = [S'', P] with the hole in S''.
ContextReduction reduce_par(const Derivation& proof, const Context& inner, const S& r, const S& p) {
  if (inner.hole.empty()) {
    ContextReduction out;
    out.u = p;
    out.builder = [p](const S& v) { return Derivation::identity(par2(v, p)); };
    out.witness = proof;
    return out;
  }
  const S& node = inner.shape;
  auto j = static_cast<std::size_t>(inner.hole[0]);
  Context below{node.kid(j), tail(inner.hole)};
  switch (node.kind()) {
  case Kind::Par: {
    // A Par reached through a split side: fold its other kids into P.
    std::vector<S> rest = without(node.kids(), j);
    rest.push_back(p);
    return reduce_par(proof, below, r, of(Kind::Par, rest));
  }
  case Kind::Seq: {
    const auto& l = node.kids();
    if (j == 0) {
      S y = of(Kind::Seq, slice(l, 1, l.size()));
      SplitSeqResult sp = shallow_split_seq(proof, plug(below, r), y, p);
      ContextReduction rec = reduce(sp.left, {par2(below.shape, sp.p1), cat({0}, below.hole)}, r);
      ContextReduction out = rec;
      out.builder = [below, y, sp, sub = rec.builder, p](const S& v) {
        S xv = plug(below, v);
        UpBuilder ub(par2(seq2(xv, y), p));
        ub.above(plug(make_context(par2(seq2(xv, y), S::unit()), {1}), sp.glue));
        Binding b;
        b.set("R", xv).set("T", y).set("U", sp.p1).set("V", sp.p2);
        ub.up(Rule::QDown, {}, b);
        ub.above(plug(make_context(seq2(par2(xv, sp.p1), S::unit()), {1}), sp.right));
        ub.above(sub(v));
        return ub.done();
      };
      return out;
    }
    S x = of(Kind::Seq, slice(l, 0, j));
    Context yc = j + 1 == l.size() ? below : Context{of(Kind::Seq, slice(l, j, l.size())), cat({0}, below.hole)};
    SplitSeqResult sp = shallow_split_seq(proof, x, plug(yc, r), p);
    ContextReduction rec = reduce(sp.right, {par2(yc.shape, sp.p2), cat({0}, yc.hole)}, r);
    ContextReduction out = rec;
    out.builder = [yc, x, sp, sub = rec.builder, p](const S& v) {
      S yv = plug(yc, v);
      UpBuilder ub(par2(seq2(x, yv), p));
      ub.above(plug(make_context(par2(seq2(x, yv), S::unit()), {1}), sp.glue));
      Binding b;
      b.set("R", x).set("T", yv).set("U", sp.p1).set("V", sp.p2);
      ub.up(Rule::QDown, {}, b);
      ub.above(plug(make_context(seq2(S::unit(), par2(yv, sp.p2)), {0}), sp.left));
      ub.above(sub(v));
      return ub.done();
    };
    return out;
  }
  case Kind::CoPar: {
    S y = of(Kind::CoPar, without(node.kids(), j));
    SplitParResult sp = shallow_split_copar(proof, plug(below, r), y, p);
    ContextReduction rec = reduce(sp.left, {par2(below.shape, sp.p1), cat({0}, below.hole)}, r);
    ContextReduction out = rec;
    out.builder = [below, y, sp, sub = rec.builder, p](const S& v) {
      S xv = plug(below, v);
      UpBuilder ub(par2(copar2(xv, y), p));
      ub.above(plug(make_context(par2(copar2(xv, y), S::unit()), {1}), sp.glue));
      Binding b1;
      b1.set("R", xv).set("T", y).set("U", sp.p1).set("K", sp.p2);
      ub.up(Rule::Switch, {}, b1);
      Binding b2;
      b2.set("R", y).set("T", par2(xv, sp.p1)).set("U", sp.p2);
      ub.up(Rule::Switch, {}, b2);
      ub.above(plug(make_context(copar2(S::unit(), par2(xv, sp.p1)), {0}), sp.right));
      ub.above(sub(v));
      return ub.done();
    };
    return out;
  }
  case Kind::Sdq: {
    std::string a = node.name();
    SplitSdqResult sp = shallow_split_sdq(proof, a, plug(below, r), p);
    ContextReduction rec = reduce(sp.witness, {par2(below.shape, sp.t), cat({0}, below.hole)}, r);
    ContextReduction out = rec;
    out.binders.insert(out.binders.begin(), a);
    out.builder = [below, a, sp, sub = rec.builder, p](const S& v) {
      S xv = plug(below, v);
      UpBuilder ub(par2(S::sdq(a, xv), p));
      ub.above(plug(make_context(par2(S::sdq(a, xv), S::unit()), {1}), sp.glue));
      Binding b;
      b.atom = a;
      b.set("R", xv).set("T", sp.t);
      ub.up(Rule::UDown, {}, b);
      ub.above(plug(make_context(S::sdq(a, S::unit()), {0}), sub(v)));
      return ub.done();
    };
    return out;
  }
  default:
    break;
  }
  throw std::invalid_argument("context_reduce: unexpected node " + render(node) + " on the hole path");
}

ContextReduction reduce(const Derivation& proof, const Context& s, const S& r) {
  if (s.hole.empty()) {
    ContextReduction out;
    out.builder = [](const S& v) { return Derivation::identity(v); };
    out.witness = proof;
    return out;
  }
  const S& node = s.shape;
  auto i = static_cast<std::size_t>(s.hole[0]);
  Context inner{node.kid(i), tail(s.hole)};
  switch (node.kind()) {
  case Kind::Par:
    return reduce_par(proof, inner, r, of(Kind::Par, without(node.kids(), i)));
  case Kind::Seq:
  case Kind::CoPar: {
    // Every component of a provable Seq or CoPar is provable on its own.
    std::vector<std::pair<std::size_t, Derivation>> sides;
    for (std::size_t k = 0; k < node.kids().size(); ++k)
      if (k != i) sides.emplace_back(k, need_proof(node.kid(k), "context_reduce"));
    ContextReduction rec = reduce(need_proof(plug(inner, r), "context_reduce"), inner, r);
    ContextReduction out = rec;
    out.builder = [node, i, inner, sides, sub = rec.builder](const S& v) {
      Derivation d = sub(v);
      std::vector<S> kids(node.kids().size(), S::unit());
      kids[i] = d.conclusion();
      for (const auto& [k, pk] : sides) {
        Derivation fill = plug(make_context(S::make(node.kind(), kids), {static_cast<int>(k)}), pk);
        d = compose(d, fill);
        kids[k] = pk.conclusion();
      }
      return d;
    };
    return out;
  }
  case Kind::Sdq: {
    ContextReduction rec = reduce(need_proof(plug(inner, r), "context_reduce"), inner, r);
    ContextReduction out = rec;
    std::string b = node.name();
    out.binders.insert(out.binders.begin(), b);
    out.builder = [b, sub = rec.builder](const S& v) {
      return plug(make_context(S::sdq(b, S::unit()), {0}), sub(v));
    };
    return out;
  }
  default:
    break;
  }
  throw std::invalid_argument("context_reduce: unexpected node " + render(node) + " on the hole path");
}

} // namespace

ContextReduction context_reduce(const Derivation& proof, const Context& s, const Structure& r) {
  S whole = plug(s, r);
  expect_proof(proof, whole, "context_reduce");
  Context c = flatten_path(s);
  auto fn = free_names(whole);
  std::set<std::string> seen;
  for (std::size_t depth = 0; depth < c.hole.size(); ++depth) {
    const S& node = subterm(c.shape, Path(c.hole.begin(), c.hole.begin() + static_cast<long>(depth)));
    if (!node.is(Kind::Sdq)) continue;
    if (fn.count(node.name()) || !seen.insert(node.name()).second)
      throw std::invalid_argument("context_reduce: binder " + node.name() +
                                  " on the hole path clashes; freshen the hole path first");
  }
  ContextReduction out = reduce(proof, c, r);
  ensure(out.witness, S::unit(), par2(r, out.u), "context_reduce witness");
  auto bn = binder_names(r);
  out.builder = [c, bn, u = out.u, binders = out.binders, raw = out.builder](const S& v) {
    for (const auto& n : free_names(v))
      if (bn.count(n)) throw std::invalid_argument("context_reduce: " + n + " is free in V and bound in R");
    Derivation d = raw(v);
    ensure(d, under(binders, par2(v, u)), plug(c, v), "context_reduce builder");
    return d;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

std::string shape_name(SplitShape s) {
  switch (s) {
  case SplitShape::Seq: return "seq";
  case SplitShape::CoPar: return "copar";
  case SplitShape::Sdq: return "sdq";
  }
  return "?";
}

Splitting split(const Derivation& proof, const Context& s, const Structure& k) {
  Splitting out;
  switch (k.kind()) {
  case Kind::Seq:
  case Kind::CoPar:
    if (k.kids().size() < 2) throw std::invalid_argument("split: " + render(k) + " has one component");
    out.shape = k.is(Kind::Seq) ? SplitShape::Seq : SplitShape::CoPar;
    out.r = k.kid(0);
    out.t = of(k.kind(), slice(k.kids(), 1, k.kids().size()));
    break;
  case Kind::Sdq:
    out.shape = SplitShape::Sdq;
    out.atom = k.name();
    out.r = k.body();
    break;
  default:
    throw std::invalid_argument("split: " + render(k) + " is not a Seq, CoPar or binder");
  }
  ContextReduction cr = context_reduce(proof, s, k);
  out.binders = cr.binders;
  std::vector<std::string> bs = cr.binders;
  Context c = s;
  switch (out.shape) {
  case SplitShape::Seq: {
    SplitSeqResult sp = shallow_split_seq(cr.witness, out.r, out.t, cr.u);
    out.k1 = sp.p1;
    out.k2 = sp.p2;
    out.left = sp.left;
    out.right = sp.right;
    out.builder = [bs, sp, outer = cr.builder](const S& v) {
      Context at = make_context(under(bs, par2(v, S::unit())), cat(zeros(bs.size()), {1}));
      return compose(plug(at, sp.glue), outer(v));
    };
    break;
  }
  case SplitShape::CoPar: {
    SplitParResult sp = shallow_split_copar(cr.witness, out.r, out.t, cr.u);
    out.k1 = sp.p1;
    out.k2 = sp.p2;
    out.left = sp.left;
    out.right = sp.right;
    out.builder = [bs, sp, outer = cr.builder](const S& v) {
      Context at = make_context(under(bs, par2(v, S::unit())), cat(zeros(bs.size()), {1}));
      return compose(plug(at, sp.glue), outer(v));
    };
    break;
  }
  case SplitShape::Sdq: {
    std::string a = out.atom;
    S body = out.r;
    if (occurs_free(cr.u, a)) {
      auto avoid = all_names(plug(s, k));
      for (const auto& n : all_names(cr.u)) avoid.insert(n);
      std::string fresh = fresh_ident(a, avoid);
      body = substitute(body, a, fresh);
      a = fresh;
    }
    SplitSdqResult sp = shallow_split_sdq(cr.witness, a, body, cr.u);
    out.atom = a;
    out.r = body;
    out.k1 = sp.t;
    out.left = sp.witness;
    out.right = Derivation::identity(S::unit());
    out.binders.push_back(a);
    out.builder = [bs, a, sp, outer = cr.builder](const S& v) {
      if (occurs_free(v, a)) throw std::invalid_argument("split: " + a + " is free in V");
      Path z = zeros(bs.size());
      UpBuilder ub(under(bs, par2(v, S::sdq(a, sp.t))));
      Binding b;
      b.atom = a;
      b.set("R", v).set("T", sp.t);
      ub.up(Rule::UDown, z, b);
      Derivation top = ub.done();
      Context at = make_context(under(bs, par2(v, S::unit())), cat(z, {1}));
      return compose({top, plug(at, sp.glue), outer(v)});
    };
    break;
  }
  }
  ensure(out.left, S::unit(), par2(out.r, out.k1), "split left");
  ensure(out.right, S::unit(), par2(out.t, out.k2), "split right");
  return out;
}

// ---------------------------------------------------------------------------
// Up-fragment elimination

std::size_t count_up(const Derivation& d) {
  return static_cast<std::size_t>(
      std::count_if(d.links.begin(), d.links.end(), [](const RuleInstance& l) { return !is_down(l.rule); }));
}

namespace {

// Fills each slot of `ub`'s top, in order, with the matching proof.
void fill_slots(UpBuilder& ub, const std::vector<std::pair<Path, Derivation>>& slots) {
  for (const auto& [path, pr] : slots) {
    Context at = make_context(replace_at(ub.top(), path, S::unit()), path);
    ub.above(plug(at, pr));
  }
}

// Each case receives the premise redex of the up instance as a raw schema
// instance: (a, ā), (<R; U>, <T; V>) or (∀a.R, ∀a.T).
Derivation eliminate_ai_up(const Derivation& above, const Context& s, const S& redex) {
  const std::string& a = redex.kid(0).name();
  S pos = S::atom(a), neg = S::atom(a, true);
  Splitting sp = split(above, s, copar2(pos, neg));
  Derivation e1 = shallow_split_atoms(sp.left, S::unit(), pos, sp.k1);
  Derivation e2 = shallow_split_atoms(sp.right, S::unit(), neg, sp.k2);
  const auto& bs = sp.binders;
  Path z = zeros(bs.size());
  UpBuilder ub(under(bs, par2(sp.k1, sp.k2)));
  ub.above(plug(make_context(under(bs, par2(S::unit(), sp.k2)), cat(z, {0})), e1));
  ub.above(plug(make_context(under(bs, par2(neg, S::unit())), cat(z, {1})), e2));
  Binding b;
  b.atom = a;
  ub.up(Rule::AiDown, z, b);
  Derivation top = with_premise(ub.done(), S::unit());
  return compose(top, sp.builder(S::unit()));
}

Derivation eliminate_q_up(const Derivation& above, const Context& s, const S& redex) {
  S R = redex.kid(0).kid(0), U = redex.kid(0).kid(1), T = redex.kid(1).kid(0), V = redex.kid(1).kid(1);
  Splitting sp = split(above, s, copar2(seq2(R, U), seq2(T, V)));
  SplitSeqResult l = shallow_split_seq(sp.left, R, U, sp.k1);
  SplitSeqResult r = shallow_split_seq(sp.right, T, V, sp.k2);
  S vq = seq2(copar2(R, T), copar2(U, V));
  const auto& bs = sp.binders;
  Path z = zeros(bs.size());
  UpBuilder ub(under(bs, S::par({vq, sp.k1, sp.k2})));
  ub.above(plug(make_context(under(bs, S::par({vq, S::unit(), sp.k2})), cat(z, {1})), l.glue));
  ub.above(plug(make_context(under(bs, S::par({vq, seq2(l.p1, l.p2), S::unit()})), cat(z, {2})), r.glue));
  Binding q1;
  q1.set("R", l.p1).set("T", l.p2).set("U", r.p1).set("V", r.p2).set("K", vq);
  ub.up(Rule::QDown, z, q1);
  Binding q2;
  q2.set("R", copar2(R, T)).set("T", copar2(U, V)).set("U", par2(l.p1, r.p1)).set("V", par2(l.p2, r.p2));
  ub.up(Rule::QDown, z, q2);
  for (int side : {0, 1}) {
    S x = side == 0 ? R : U, y = side == 0 ? T : V;
    S kx = side == 0 ? l.p1 : l.p2, ky = side == 0 ? r.p1 : r.p2;
    Binding s1;
    s1.set("R", x).set("T", y).set("U", kx).set("K", ky);
    ub.up(Rule::Switch, cat(z, {side}), s1);
    Binding s2;
    s2.set("R", y).set("T", par2(x, kx)).set("U", ky);
    ub.up(Rule::Switch, cat(z, {side}), s2);
  }
  fill_slots(ub, {{cat(z, {0, 0}), r.left},
                  {cat(z, {0, 1}), l.left},
                  {cat(z, {1, 0}), r.right},
                  {cat(z, {1, 1}), l.right}});
  Derivation top = with_premise(ub.done(), S::unit());
  return compose(top, sp.builder(vq));
}

Derivation eliminate_u_up(const Derivation& above, const Context& s, const S& redex) {
  // A binder name no step has seen, so the killers cannot mention it.
  std::set<std::string> avoid = all_names(plug(s, redex));
  for (const auto& st : above.steps)
    for (const auto& n : all_names(st)) avoid.insert(n);
  const S& l0 = redex.kid(0);
  const S& r0 = redex.kid(1);
  std::string a = fresh_ident(l0.name(), avoid);
  S R = substitute(l0.body(), l0.name(), a), T = substitute(r0.body(), r0.name(), a);
  Splitting sp = split(above, s, copar2(S::sdq(a, R), S::sdq(a, T)));
  SplitSdqResult l = shallow_split_sdq(sp.left, a, R, sp.k1);
  SplitSdqResult r = shallow_split_sdq(sp.right, a, T, sp.k2);
  S vu = S::sdq(a, copar2(R, T));
  const auto& bs = sp.binders;
  Path z = zeros(bs.size());
  UpBuilder ub(under(bs, S::par({vu, sp.k1, sp.k2})));
  ub.above(plug(make_context(under(bs, S::par({vu, S::unit(), sp.k2})), cat(z, {1})), l.glue));
  ub.above(plug(make_context(under(bs, S::par({vu, S::sdq(a, l.t), S::unit()})), cat(z, {2})), r.glue));
  Binding u1;
  u1.atom = a;
  u1.set("R", copar2(R, T)).set("T", l.t).set("K", S::sdq(a, r.t));
  ub.up(Rule::UDown, z, u1);
  Binding u2;
  u2.atom = a;
  u2.set("R", par2(copar2(R, T), l.t)).set("T", r.t);
  ub.up(Rule::UDown, z, u2);
  Path inside = cat(z, {0});
  Binding s1;
  s1.set("R", R).set("T", T).set("U", l.t).set("K", r.t);
  ub.up(Rule::Switch, inside, s1);
  Binding s2;
  s2.set("R", T).set("T", par2(R, l.t)).set("U", r.t);
  ub.up(Rule::Switch, inside, s2);
  fill_slots(ub, {{cat(inside, {0}), r.witness}, {cat(inside, {1}), l.witness}});
  Derivation top = with_premise(ub.done(), S::unit());
  return compose(top, sp.builder(vu));
}

Derivation prefix(const Derivation& d, std::size_t links) {
  Derivation out;
  out.steps.assign(d.steps.begin(), d.steps.begin() + static_cast<long>(links) + 1);
  out.links.assign(d.links.begin(), d.links.begin() + static_cast<long>(links));
  for (const auto& m : d.macros)
    if (m.last <= links) out.macros.push_back(m);
  return out;
}

Derivation suffix(const Derivation& d, std::size_t from) {
  Derivation out;
  out.steps.assign(d.steps.begin() + static_cast<long>(from), d.steps.end());
  out.links.assign(d.links.begin() + static_cast<long>(from), d.links.end());
  for (auto m : d.macros)
    if (m.first >= from) {
      m.first -= from;
      m.last -= from;
      out.macros.push_back(std::move(m));
    }
  return out;
}

} // namespace

Elimination eliminate_up(const Derivation& proof) {
  CheckReport rep = check(proof, sbvq_rules());
  if (!rep.ok) throw std::invalid_argument("eliminate_up: input is not an SBVQ derivation: " + rep.message);
  if (!proof.is_proof()) throw std::invalid_argument("eliminate_up: input is not a proof");
  Elimination out;
  out.proof = proof;
  while (true) {
    const Derivation& d = out.proof;
    auto it = std::find_if(d.links.begin(), d.links.end(), [](const RuleInstance& l) { return !is_down(l.rule); });
    if (it == d.links.end()) break;
    auto i = static_cast<std::size_t>(it - d.links.begin());
    const RuleInstance& inst = *it;
    EliminationRound round{inst.rule, i, count_up(d), 0};

    // The hole sits where the rule's own schema sits inside the addressed node.
    const Binding& b = inst.binding;
    S w = S::unit();
    Path in;
    if (b.wrap == Wrap::Seq) {
      w = S::seq({b.get("K"), S::unit(), b.get("K2")});
      in = {1};
    } else if (b.vars.count("K")) {
      w = b.wrap == Wrap::Par ? par2(S::unit(), b.get("K")) : copar2(S::unit(), b.get("K"));
      in = {0};
    }
    for (auto o = b.outer.rbegin(); o != b.outer.rend(); ++o) {
      w = S::sdq(*o, w);
      in.insert(in.begin(), 0);
    }
    const S& concl = d.steps[i + 1];
    Context s = make_context(replace_at(concl, inst.path, w), cat(inst.path, in));
    RuleInstance bare = inst;
    bare.path.clear();
    bare.binding.vars.erase("K");
    bare.binding.vars.erase("K2");
    bare.binding.wrap = Wrap::Par;
    bare.binding.outer.clear();
    S redex = instance_premise(bare);
    auto [fs, fredex] = freshen_hole_path(s, redex);
    Derivation above = prefix(d, i);
    Derivation fixed;
    switch (inst.rule) {
    case Rule::AiUp: fixed = eliminate_ai_up(above, fs, fredex); break;
    case Rule::QUp: fixed = eliminate_q_up(above, fs, fredex); break;
    case Rule::UUp: fixed = eliminate_u_up(above, fs, fredex); break;
    default: throw std::logic_error("eliminate_up: unexpected rule");
    }
    ensure(fixed, S::unit(), concl, "eliminate_up round");
    Derivation next = compose(fixed, suffix(d, i + 1));
    round.length = next.length();
    out.proof = std::move(next);
    out.rounds.push_back(round);
  }
  require_valid(out.proof, bvq_rules(), "eliminate_up");
  if (!equiv(out.proof.conclusion(), proof.conclusion()))
    throw std::logic_error("eliminate_up: conclusion changed");
  return out;
}

} // namespace bvq
