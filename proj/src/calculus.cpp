#include "bvq/calculus.hpp"

#include <algorithm>
#include <sstream>

namespace bvq {

// ---------------------------------------------------------------------------
// Rules

const std::vector<Rule>& all_rules() {
  static const std::vector<Rule> rs{Rule::AiDown, Rule::AiUp, Rule::Switch, Rule::QDown,
                                    Rule::QUp,    Rule::UDown, Rule::UUp};
  return rs;
}

std::string rule_name(Rule r) {
  switch (r) {
  case Rule::AiDown: return "ai↓";
  case Rule::AiUp: return "ai↑";
  case Rule::Switch: return "s";
  case Rule::QDown: return "q↓";
  case Rule::QUp: return "q↑";
  case Rule::UDown: return "u↓";
  case Rule::UUp: return "u↑";
  }
  return "?";
}

std::optional<Rule> parse_rule(std::string_view n) {
  static const std::map<std::string, Rule, std::less<>> names{
      {"ai↓", Rule::AiDown}, {"ai_down", Rule::AiDown}, {"aidown", Rule::AiDown}, {"ai-down", Rule::AiDown},
      {"ai↑", Rule::AiUp},   {"ai_up", Rule::AiUp},     {"aiup", Rule::AiUp},     {"ai-up", Rule::AiUp},
      {"s", Rule::Switch},   {"switch", Rule::Switch},
      {"q↓", Rule::QDown},   {"q_down", Rule::QDown},   {"qdown", Rule::QDown},   {"q-down", Rule::QDown},
      {"q↑", Rule::QUp},     {"q_up", Rule::QUp},       {"qup", Rule::QUp},       {"q-up", Rule::QUp},
      {"u↓", Rule::UDown},   {"u_down", Rule::UDown},   {"udown", Rule::UDown},   {"u-down", Rule::UDown},
      {"u↑", Rule::UUp},     {"u_up", Rule::UUp},       {"uup", Rule::UUp},       {"u-up", Rule::UUp},
  };
  auto it = names.find(n);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

bool is_down(Rule r) {
  return r == Rule::AiDown || r == Rule::Switch || r == Rule::QDown || r == Rule::UDown;
}

Rule dual_rule(Rule r) {
  switch (r) {
  case Rule::AiDown: return Rule::AiUp;
  case Rule::AiUp: return Rule::AiDown;
  case Rule::Switch: return Rule::Switch;
  case Rule::QDown: return Rule::QUp;
  case Rule::QUp: return Rule::QDown;
  case Rule::UDown: return Rule::UUp;
  case Rule::UUp: return Rule::UDown;
  }
  return r;
}

RuleSet bvq_rules() { return {Rule::AiDown, Rule::Switch, Rule::QDown, Rule::UDown}; }
RuleSet sbvq_rules() { return RuleSet(all_rules().begin(), all_rules().end()); }

RuleSet parse_rule_set(std::string_view text) {
  if (text == "bvq" || text == "down") return bvq_rules();
  if (text == "sbvq") return sbvq_rules();
  if (text == "up") return {Rule::AiUp, Rule::Switch, Rule::QUp, Rule::UUp};
  RuleSet out;
  std::size_t b = 0;
  while (b <= text.size()) {
    std::size_t e = text.find(',', b);
    if (e == std::string_view::npos) e = text.size();
    std::string_view item = text.substr(b, e - b);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      auto r = parse_rule(item);
      if (!r) throw std::invalid_argument("unknown rule '" + std::string(item) + "'");
      out.insert(*r);
    }
    b = e + 1;
  }
  return out;
}

std::string rule_set_name(const RuleSet& rs) {
  if (rs == bvq_rules()) return "bvq";
  if (rs == sbvq_rules()) return "sbvq";
  std::string out;
  for (Rule r : rs) {
    if (!out.empty()) out += ',';
    out += rule_name(r);
  }
  return out;
}

Structure Binding::get(const std::string& key) const {
  auto it = vars.find(key);
  return it == vars.end() ? Structure::unit() : it->second;
}

Binding& Binding::set(const std::string& key, Structure s) {
  vars[key] = std::move(s);
  return *this;
}

// ---------------------------------------------------------------------------
// Schemas

namespace {

using S = Structure;

S par2(S a, S b) { return S::par({std::move(a), std::move(b)}); }
S copar2(S a, S b) { return S::copar({std::move(a), std::move(b)}); }
S seq2(S a, S b) { return S::seq({std::move(a), std::move(b)}); }

S schema_premise(Rule r, const Binding& b) {
  S R = b.get("R"), T = b.get("T"), U = b.get("U"), V = b.get("V");
  switch (r) {
  case Rule::AiDown: return S::unit();
  case Rule::AiUp: return copar2(S::atom(b.atom), S::atom(b.atom, true));
  case Rule::Switch: return copar2(par2(R, U), T);
  case Rule::QDown: return seq2(par2(R, U), par2(T, V));
  case Rule::QUp: return copar2(seq2(R, U), seq2(T, V));
  case Rule::UDown: return S::sdq(b.atom, par2(R, T));
  case Rule::UUp: return copar2(S::sdq(b.atom, R), S::sdq(b.atom, T));
  }
  return S::unit();
}

S schema_conclusion(Rule r, const Binding& b) {
  S R = b.get("R"), T = b.get("T"), U = b.get("U"), V = b.get("V");
  switch (r) {
  case Rule::AiDown: return par2(S::atom(b.atom), S::atom(b.atom, true));
  case Rule::AiUp: return S::unit();
  case Rule::Switch: return par2(copar2(R, T), U);
  case Rule::QDown: return par2(seq2(R, T), seq2(U, V));
  case Rule::QUp: return seq2(copar2(R, T), copar2(U, V));
  case Rule::UDown: return par2(S::sdq(b.atom, R), S::sdq(b.atom, T));
  case Rule::UUp: return S::sdq(b.atom, copar2(R, T));
  }
  return S::unit();
}

S wrap(const S& x, const Binding& b) {
  S out;
  switch (b.wrap) {
  case Wrap::Par: out = b.vars.count("K") ? par2(x, b.get("K")) : x; break;
  case Wrap::CoPar: out = b.vars.count("K") ? copar2(x, b.get("K")) : x; break;
  case Wrap::Seq: out = S::seq({b.get("K"), x, b.get("K2")}); break;
  }
  for (auto it = b.outer.rbegin(); it != b.outer.rend(); ++it) out = S::sdq(*it, out);
  return out;
}

bool uses_atom(Rule r) { return r == Rule::AiDown || r == Rule::AiUp || r == Rule::UDown || r == Rule::UUp; }

} // namespace

Structure instance_premise(const RuleInstance& inst) { return wrap(schema_premise(inst.rule, inst.binding), inst.binding); }
Structure instance_conclusion(const RuleInstance& inst) {
  return wrap(schema_conclusion(inst.rule, inst.binding), inst.binding);
}

// ---------------------------------------------------------------------------
// Contexts

Context hole_context() { return {Structure::unit(), {}}; }

Context make_context(Structure shape, Path hole) {
  if (!valid_path(shape, hole)) throw std::invalid_argument("context hole path is not valid");
  return {std::move(shape), std::move(hole)};
}

Structure plug(const Context& c, const Structure& r) { return replace_at(c.shape, c.hole, r); }

Context nest(const Context& outer, const Context& inner) {
  Path p = outer.hole;
  p.insert(p.end(), inner.hole.begin(), inner.hole.end());
  return {plug(outer, inner.shape), p};
}

// ---------------------------------------------------------------------------
// Redex enumeration

namespace {

S par_of(std::vector<S> v) {
  if (v.empty()) return S::unit();
  if (v.size() == 1) return v[0];
  return S::par(std::move(v));
}
S copar_of(std::vector<S> v) {
  if (v.empty()) return S::unit();
  if (v.size() == 1) return v[0];
  return S::copar(std::move(v));
}
S seq_of(std::vector<S> v) {
  if (v.empty()) return S::unit();
  if (v.size() == 1) return v[0];
  return S::seq(std::move(v));
}
S group(Kind k, std::vector<S> v) { return k == Kind::Par ? par_of(std::move(v)) : copar_of(std::move(v)); }

std::vector<S> pick(const std::vector<S>& kids, unsigned long mask, bool in) {
  std::vector<S> out;
  for (std::size_t i = 0; i < kids.size(); ++i)
    if (((mask >> i) & 1UL) == (in ? 1UL : 0UL)) out.push_back(kids[i]);
  return out;
}

constexpr std::size_t kMaxKids = 20;

struct Walker {
  Rule rule;
  Direction dir;
  std::vector<RuleInstance>* out;
  std::vector<std::string> pool; // atoms for ai instances that introduce a pair

  void emit(const Path& p, Binding b) { out->push_back({rule, p, std::move(b)}); }

  // Both halves of a two-item rule (q and u families) sit in a Par node for
  // the down rules read upward, and in a CoPar node for the up rules read downward.
  bool pair_mode() const { return is_down(rule) == (dir == Direction::Up); }
  Kind pair_kind() const { return is_down(rule) ? Kind::Par : Kind::CoPar; }

  void visit(const S& s, Path& p, std::vector<std::string>& scope, bool chain_top) {
    at_node(s, p, scope, chain_top);
    if (s.is(Kind::Sdq)) scope.push_back(s.name());
    for (std::size_t i = 0; i < s.kids().size(); ++i) {
      p.push_back(static_cast<int>(i));
      visit(s.kids()[i], p, scope, !s.is(Kind::Sdq));
      p.pop_back();
    }
    if (s.is(Kind::Sdq)) scope.pop_back();
  }

  void at_node(const S& s, const Path& p, const std::vector<std::string>& scope, bool chain_top) {
    bool intro = (rule == Rule::AiDown && dir == Direction::Down) || (rule == Rule::AiUp && dir == Direction::Up);
    if (intro) return introduce_pair(s, p, scope);
    switch (rule) {
    case Rule::AiDown:
    case Rule::AiUp:
      if (s.is(pair_kind_ai())) dual_pairs(s, p);
      break;
    case Rule::Switch:
      if (s.is(dir == Direction::Up ? Kind::Par : Kind::CoPar)) switches(s, p);
      break;
    case Rule::QDown:
    case Rule::QUp:
      if (pair_mode() && s.is(pair_kind())) seq_pairs(s, p);
      else if (!pair_mode() && s.is(Kind::Seq)) seq_windows(s, p);
      break;
    case Rule::UDown:
    case Rule::UUp:
      if (pair_mode() && s.is(pair_kind())) binder_pairs(s, p);
      else if (!pair_mode() && s.is(Kind::Sdq) && chain_top) binder_split(s, p);
      break;
    }
  }

  Kind pair_kind_ai() const { return rule == Rule::AiDown ? Kind::Par : Kind::CoPar; }

  // ai↓ read downward / ai↑ read upward: a unit anywhere becomes a dual pair.
  void introduce_pair(const S& s, const Path& p, const std::vector<std::string>& scope) {
    std::vector<std::string> atoms = pool;
    for (const auto& b : scope)
      if (std::find(atoms.begin(), atoms.end(), b) == atoms.end()) atoms.push_back(b);
    if (atoms.empty()) atoms.push_back("a");
    for (const auto& a : atoms) {
      Binding b;
      b.atom = a;
      b.wrap = Wrap::Par;
      b.set("K", s);
      emit(p, b);
      b.wrap = Wrap::CoPar;
      emit(p, b);
      Binding before;
      before.atom = a;
      before.wrap = Wrap::Seq;
      before.set("K", s);
      emit(p, before);
      Binding after;
      after.atom = a;
      after.wrap = Wrap::Seq;
      after.set("K2", s);
      emit(p, after);
    }
  }

  // ai↓ read upward / ai↑ read downward: two dual atoms in one node.
  void dual_pairs(const S& s, const Path& p) {
    const auto& k = s.kids();
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!k[i].is_atom()) continue;
      for (std::size_t j = i + 1; j < k.size(); ++j) {
        if (!k[j].is_atom() || k[j].name() != k[i].name() || k[j].negative() == k[i].negative()) continue;
        std::vector<S> rest;
        for (std::size_t m = 0; m < k.size(); ++m)
          if (m != i && m != j) rest.push_back(k[m]);
        Binding b;
        b.atom = k[i].name();
        b.wrap = s.is(Kind::Par) ? Wrap::Par : Wrap::CoPar;
        b.set("K", group(s.kind(), rest));
        emit(p, b);
      }
    }
  }

  // s read upward at a Par node [(R,T),U,K]; read downward at a CoPar node ([R,U],T,K).
  void switches(const S& s, const Path& p) {
    const auto& k = s.kids();
    if (k.size() > kMaxKids) return;
    bool up = dir == Direction::Up;
    Kind inner = up ? Kind::CoPar : Kind::Par;
    for (std::size_t i = 0; i < k.size(); ++i) {
      // Ways to read kid i as (R,T) (upward) or [R,U] (downward).
      std::vector<std::pair<S, S>> reads;
      if (k[i].is(inner)) {
        const auto& d = k[i].kids();
        if (d.size() > kMaxKids) continue;
        for (unsigned long m = 0; m < (1UL << d.size()); ++m) {
          if (m == (1UL << d.size()) - 1) continue; // second part must be nonempty
          reads.emplace_back(group(inner, pick(d, m, true)), group(inner, pick(d, m, false)));
        }
      } else {
        reads.emplace_back(S::unit(), k[i]);
      }
      std::vector<S> others;
      for (std::size_t m = 0; m < k.size(); ++m)
        if (m != i) others.push_back(k[m]);
      for (unsigned long um = 1; um < (1UL << others.size()); ++um) {
        S third = group(s.kind(), pick(others, um, true));
        S rest = group(s.kind(), pick(others, um, false));
        for (const auto& [first, second] : reads) {
          Binding b;
          b.wrap = up ? Wrap::Par : Wrap::CoPar;
          b.set("K", rest);
          if (up) { // [(R,T),U]: R=first, T=second, U=third
            b.set("R", first).set("T", second).set("U", third);
          } else { // ([R,U],T): R=first, U=second, T=third
            b.set("R", first).set("U", second).set("T", third);
          }
          emit(p, b);
        }
      }
    }
  }

  struct SeqItem {
    unsigned long used;
    S left, right;
    int side; // 0: split of a Seq kid, 1: multiset on the left, 2: on the right
  };

  // q↓ read upward at a Par node: [<R;T>,<U;V>,K]; q↑ read downward at a CoPar node: (<R;U>,<T;V>,K).
  void seq_pairs(const S& s, const Path& p) {
    const auto& k = s.kids();
    if (k.size() > 12) return;
    std::vector<SeqItem> items;
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!k[i].is(Kind::Seq)) continue;
      const auto& l = k[i].kids();
      for (std::size_t j = 1; j < l.size(); ++j)
        items.push_back({1UL << i, seq_of({l.begin(), l.begin() + static_cast<long>(j)}),
                         seq_of({l.begin() + static_cast<long>(j), l.end()}), 0});
    }
    for (unsigned long m = 1; m < (1UL << k.size()); ++m) {
      S g = group(s.kind(), pick(k, m, true));
      items.push_back({m, g, S::unit(), 1});
      items.push_back({m, S::unit(), g, 2});
    }
    for (std::size_t x = 0; x < items.size(); ++x)
      for (std::size_t y = x + 1; y < items.size(); ++y) {
        const auto& A = items[x];
        const auto& B = items[y];
        if (A.used & B.used) continue;
        if (A.side != 0 && A.side == B.side) continue;
        unsigned long used = A.used | B.used;
        Binding b;
        b.wrap = s.is(Kind::Par) ? Wrap::Par : Wrap::CoPar;
        b.set("K", group(s.kind(), pick(k, used, false)));
        if (dir == Direction::Up) // [<R;T>,<U;V>]
          b.set("R", A.left).set("T", A.right).set("U", B.left).set("V", B.right);
        else // (<R;U>,<T;V>)
          b.set("R", A.left).set("U", A.right).set("T", B.left).set("V", B.right);
        emit(p, b);
      }
  }

  static std::vector<std::pair<S, S>> readings(const S& x, Kind k) {
    std::vector<std::pair<S, S>> out;
    if (x.is(k) && x.kids().size() <= 12) {
      const auto& d = x.kids();
      for (unsigned long m = 0; m < (1UL << d.size()); ++m)
        out.emplace_back(group(k, pick(d, m, true)), group(k, pick(d, m, false)));
    } else {
      out.emplace_back(x, S::unit());
      out.emplace_back(S::unit(), x);
    }
    return out;
  }

  // q↑ read upward: <(R,T);(U,V)> inside a Seq; q↓ read downward: <[R,U];[T,V]>.
  void seq_windows(const S& s, const Path& p) {
    bool qup = rule == Rule::QUp;
    if (qup != (dir == Direction::Up)) return;
    Kind inner = qup ? Kind::CoPar : Kind::Par;
    const auto& l = s.kids();
    auto slice = [&](std::size_t a, std::size_t b) {
      return seq_of({l.begin() + static_cast<long>(a), l.begin() + static_cast<long>(b)});
    };
    for (std::size_t i = 0; i < l.size(); ++i)
      for (std::size_t e = i + 2; e <= l.size(); ++e)
        for (std::size_t j = i + 1; j < e; ++j) {
          auto xs = readings(slice(i, j), inner);
          auto ys = readings(slice(j, e), inner);
          for (const auto& [x1, x2] : xs)
            for (const auto& [y1, y2] : ys) {
              if (x1.is_unit() && y1.is_unit()) continue;
              if (x2.is_unit() && y2.is_unit()) continue;
              Binding b;
              b.wrap = Wrap::Seq;
              b.set("K", slice(0, i)).set("K2", slice(e, l.size()));
              if (qup) // <(R,T);(U,V)>
                b.set("R", x1).set("T", x2).set("U", y1).set("V", y2);
              else // <[R,U];[T,V]>
                b.set("R", x1).set("U", x2).set("T", y1).set("V", y2);
              emit(p, b);
            }
        }
  }

  struct BinderItem {
    unsigned long used;
    std::string name; // empty: vacuous
    S inner;
  };

  static std::vector<std::string> block_of(const S& s, S& body) {
    std::vector<std::string> out;
    body = s;
    while (body.is(Kind::Sdq)) {
      out.push_back(body.name());
      body = body.body();
    }
    return out;
  }

  static S rewrap(const std::vector<std::string>& block, const std::string& skip, const S& body) {
    S out = body;
    for (auto it = block.rbegin(); it != block.rend(); ++it)
      if (*it != skip) out = S::sdq(*it, out);
    return out;
  }

  // u↓ read upward at a Par node: [∀a.R,∀a.T,K]; u↑ read downward at a CoPar node.
  void binder_pairs(const S& s, const Path& p) {
    const auto& k = s.kids();
    if (k.size() > 12) return;
    std::vector<BinderItem> items;
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!k[i].is(Kind::Sdq)) continue;
      S body;
      auto block = block_of(k[i], body);
      for (const auto& b : block) items.push_back({1UL << i, b, rewrap(block, b, body)});
    }
    std::size_t named = items.size();
    for (unsigned long m = 1; m < (1UL << k.size()); ++m) items.push_back({m, "", group(s.kind(), pick(k, m, true))});
    for (std::size_t x = 0; x < named; ++x)
      for (std::size_t y = x + 1; y < items.size(); ++y) {
        const auto& A = items[x];
        const auto& B = items[y];
        if (A.used & B.used) continue;
        std::string a = A.name;
        S ra = A.inner, rb = B.inner;
        bool clash = (B.name.empty() || B.name != a) && occurs_free(rb, a);
        if (clash) {
          std::set<std::string> avoid = free_names(ra);
          avoid.insert(a);
          for (const auto& n : free_names(rb)) avoid.insert(n);
          for (const auto& n : free_names(s)) avoid.insert(n);
          a = fresh_ident(a, avoid);
          ra = substitute(ra, A.name, a);
        }
        if (!B.name.empty()) rb = substitute(rb, B.name, a);
        Binding b;
        b.atom = a;
        b.wrap = s.is(Kind::Par) ? Wrap::Par : Wrap::CoPar;
        b.set("R", ra).set("T", rb).set("K", group(s.kind(), pick(k, A.used | B.used, false)));
        emit(p, b);
      }
  }

  // u↓ read downward: ∀a.[R,T]; u↑ read upward: ∀a.(R,T).
  void binder_split(const S& s, const Path& p) {
    bool uup = rule == Rule::UUp;
    if (uup != (dir == Direction::Up)) return;
    Kind inner = uup ? Kind::CoPar : Kind::Par;
    S body;
    auto block = block_of(s, body);
    if (!body.is(inner) || body.kids().size() > 12) return;
    const auto& k = body.kids();
    for (const auto& a : block) {
      std::vector<std::string> outer;
      for (const auto& b : block)
        if (b != a) outer.push_back(b);
      // Kid 0 always goes left: R and T play symmetric roles.
      for (unsigned long m = 1; m < (1UL << k.size()) - 1; m += 2) {
        Binding b;
        b.atom = a;
        b.outer = outer;
        b.set("R", group(inner, pick(k, m, true))).set("T", group(inner, pick(k, m, false)));
        emit(p, b);
      }
    }
  }
};

} // namespace

std::vector<RuleInstance> find_redexes(const Structure& r, Rule rule, Direction dir,
                                       const std::vector<std::string>& pool) {
  Structure c = canonicalize(r);
  std::vector<RuleInstance> out;
  Walker w{rule, dir, &out, pool};
  if (w.pool.empty()) {
    auto fn = free_names(c);
    w.pool.assign(fn.begin(), fn.end());
  }
  Path p;
  std::vector<std::string> scope;
  w.visit(c, p, scope, true);
  return out;
}

Structure apply(const Structure& r, const RuleInstance& inst, Direction dir) {
  if (!valid_path(r, inst.path)) throw std::invalid_argument("instance path is not valid");
  const Structure& here = subterm(r, inst.path);
  Structure from = dir == Direction::Up ? instance_conclusion(inst) : instance_premise(inst);
  Structure to = dir == Direction::Up ? instance_premise(inst) : instance_conclusion(inst);
  if (!equiv(here, from))
    throw std::invalid_argument(rule_name(inst.rule) + " does not match at the given path");
  return canonicalize(replace_at(r, inst.path, to));
}

Structure apply_found(const Structure& r, const RuleInstance& inst, Direction dir) {
  Structure to = dir == Direction::Up ? instance_premise(inst) : instance_conclusion(inst);
  return canonicalize(replace_at(r, inst.path, to));
}

// ---------------------------------------------------------------------------
// Derivations

Derivation Derivation::identity(Structure s) {
  Derivation d;
  d.steps.push_back(std::move(s));
  return d;
}

bool Derivation::is_proof() const { return canonical_text(premise()) == "1"; }

CheckReport check_link(const Structure& premise, const Structure& conclusion, const RuleInstance& inst) {
  CheckReport rep;
  auto fail = [&](std::string m) {
    rep.ok = false;
    rep.message = std::move(m);
    return rep;
  };
  if (!valid_path(conclusion, inst.path)) return fail("path does not address the conclusion");
  const Structure* cur = &conclusion;
  for (int i : inst.path) {
    if (cur->is(Kind::Not)) return fail("path crosses a negation");
    cur = &cur->kids()[static_cast<std::size_t>(i)];
  }
  if (uses_atom(inst.rule) && !valid_ident(inst.binding.atom)) return fail("binding lacks a valid atom");
  for (const auto& o : inst.binding.outer)
    if (!valid_ident(o)) return fail("bad outer binder '" + o + "'");
  if (!equiv(*cur, instance_conclusion(inst)))
    return fail("rule not applicable: " + render(*cur) + " is not an instance of the conclusion " +
                render(instance_conclusion(inst)));
  Structure expected = replace_at(conclusion, inst.path, instance_premise(inst));
  if (!equiv(expected, premise))
    return fail("rule not applicable: premise " + render(premise) + " differs from " + render(expected));
  if (is_down(inst.rule) && size(conclusion) < size(premise)) return fail("affinity violated");
  return rep;
}

CheckReport check(const Derivation& d, const RuleSet& allowed) {
  CheckReport rep;
  if (d.steps.empty()) {
    rep.ok = false;
    rep.message = "derivation has no steps";
    return rep;
  }
  if (d.links.size() + 1 != d.steps.size()) {
    rep.ok = false;
    rep.message = "links and steps disagree in number";
    return rep;
  }
  for (std::size_t i = 0; i < d.links.size(); ++i) {
    const auto& inst = d.links[i];
    if (!allowed.count(inst.rule)) {
      rep.ok = false;
      rep.link = i;
      rep.message = "rule " + rule_name(inst.rule) + " is not allowed";
      return rep;
    }
    CheckReport r = check_link(d.steps[i], d.steps[i + 1], inst);
    if (!r.ok) {
      r.link = i;
      return r;
    }
  }
  for (const auto& m : d.macros)
    if (m.first > m.last || m.last > d.links.size()) {
      rep.ok = false;
      rep.message = "macro span '" + m.name + "' out of range";
      return rep;
    }
  return rep;
}

void require_valid(const Derivation& d, const RuleSet& allowed, const std::string& what) {
  CheckReport r = check(d, allowed);
  if (!r.ok) {
    std::ostringstream os;
    os << what << ": link " << r.link << ": " << r.message;
    throw std::logic_error(os.str());
  }
}

Derivation compose(const Derivation& d1, const Derivation& d2) {
  if (!equiv(d1.conclusion(), d2.premise()))
    throw std::invalid_argument("compose: conclusion " + render(d1.conclusion()) + " does not match premise " +
                                render(d2.premise()));
  Derivation out = d1;
  std::size_t shift = d1.links.size();
  out.steps.insert(out.steps.end(), d2.steps.begin() + 1, d2.steps.end());
  out.links.insert(out.links.end(), d2.links.begin(), d2.links.end());
  for (auto m : d2.macros) {
    m.first += shift;
    m.last += shift;
    out.macros.push_back(std::move(m));
  }
  return out;
}

Derivation compose(std::initializer_list<Derivation> ds) {
  if (ds.size() == 0) throw std::invalid_argument("compose: nothing to compose");
  auto it = ds.begin();
  Derivation out = *it++;
  for (; it != ds.end(); ++it) out = compose(out, *it);
  return out;
}

Derivation plug(const Context& c, const Derivation& d) {
  Derivation out;
  out.macros = d.macros;
  for (const auto& s : d.steps) out.steps.push_back(plug(c, s));
  for (auto inst : d.links) {
    Path p = c.hole;
    p.insert(p.end(), inst.path.begin(), inst.path.end());
    inst.path = std::move(p);
    out.links.push_back(std::move(inst));
  }
  return out;
}

Derivation with_premise(Derivation d, const Structure& p) {
  if (!equiv(d.premise(), p))
    throw std::invalid_argument("with_premise: " + render(p) + " is not equivalent to " + render(d.premise()));
  if (d.links.empty()) return Derivation::identity(p);
  d.steps.front() = p;
  return d;
}

Derivation tag_macro(Derivation d, const std::string& name, std::map<std::string, std::string> info) {
  d.macros.push_back({name, 0, d.links.size(), std::move(info)});
  return d;
}

UpBuilder::UpBuilder(Structure conclusion) { rsteps_.push_back(std::move(conclusion)); }

const Structure& UpBuilder::top() const { return rsteps_.back(); }

UpBuilder& UpBuilder::up(Rule rule, Path path, Binding b) {
  RuleInstance inst{rule, std::move(path), std::move(b)};
  const Structure& cur = rsteps_.back();
  if (!valid_path(cur, inst.path)) throw std::logic_error("UpBuilder: bad path for " + rule_name(rule));
  if (!equiv(subterm(cur, inst.path), instance_conclusion(inst)))
    throw std::logic_error("UpBuilder: " + rule_name(rule) + " does not match " + render(subterm(cur, inst.path)) +
                           " against " + render(instance_conclusion(inst)));
  Structure next = replace_at(cur, inst.path, instance_premise(inst));
  rlinks_.push_back(std::move(inst));
  rsteps_.push_back(std::move(next));
  return *this;
}

UpBuilder& UpBuilder::as(const Structure& equivalent) {
  if (!equiv(rsteps_.back(), equivalent))
    throw std::invalid_argument("UpBuilder: " + render(equivalent) + " is not equivalent to " + render(rsteps_.back()));
  rsteps_.back() = equivalent;
  return *this;
}

UpBuilder& UpBuilder::above(const Derivation& d) {
  if (!equiv(d.conclusion(), rsteps_.back()))
    throw std::logic_error("UpBuilder: derivation ending in " + render(d.conclusion()) + " does not fit below " +
                           render(rsteps_.back()));
  std::size_t m = rlinks_.size(), n = d.links.size();
  rsteps_.back() = d.conclusion();
  for (std::size_t k = n; k-- > 0;) {
    rlinks_.push_back(d.links[k]);
    rsteps_.push_back(d.steps[k]);
  }
  for (const auto& span : d.macros) {
    MacroSpan s = span;
    s.first = m + n - span.last;
    s.last = m + n - span.first;
    pending_.push_back(std::move(s));
  }
  return *this;
}

Derivation UpBuilder::done() const {
  Derivation d;
  d.steps.assign(rsteps_.rbegin(), rsteps_.rend());
  d.links.assign(rlinks_.rbegin(), rlinks_.rend());
  std::size_t n = rlinks_.size();
  for (const auto& span : pending_) {
    MacroSpan s = span;
    s.first = n - span.last;
    s.last = n - span.first;
    d.macros.push_back(std::move(s));
  }
  return d;
}

namespace {

RuleInstance dual_instance(const RuleInstance& inst) {
  RuleInstance out;
  out.rule = dual_rule(inst.rule);
  out.path = inst.path;
  const Binding& b = inst.binding;
  Binding& o = out.binding;
  o.atom = b.atom;
  o.outer = b.outer;
  o.wrap = b.wrap == Wrap::Par ? Wrap::CoPar : b.wrap == Wrap::CoPar ? Wrap::Par : Wrap::Seq;
  for (const auto& key : {"K", "K2"})
    if (b.vars.count(key)) o.set(key, negate(b.get(key)));
  Structure R = negate(b.get("R")), T = negate(b.get("T")), U = negate(b.get("U")), V = negate(b.get("V"));
  switch (inst.rule) {
  case Rule::AiDown:
  case Rule::AiUp:
    break;
  case Rule::Switch:
  case Rule::QDown:
  case Rule::QUp:
    o.set("R", R).set("U", T).set("T", U);
    if (inst.rule != Rule::Switch) o.set("V", V);
    break;
  case Rule::UDown:
  case Rule::UUp:
    o.set("R", R).set("T", T);
    break;
  }
  return out;
}

} // namespace

Derivation dualize(const Derivation& d) {
  Derivation out;
  std::size_t n = d.links.size();
  out.steps.push_back(negate(d.steps[n]));
  for (std::size_t i = n; i-- > 0;) {
    const auto& inst = d.links[i];
    out.steps.push_back(negate(replace_at(d.steps[i + 1], inst.path, instance_premise(inst))));
    out.links.push_back(dual_instance(inst));
  }
  // Each dual link addresses a re-derived raw form of the step it concludes,
  // so its path stays valid; the unaddressed top step is negated as is.
  for (const auto& m : d.macros) out.macros.push_back({m.name, n - m.last, n - m.first, m.info});
  return out;
}

// ---------------------------------------------------------------------------
// Derived rules

namespace {

// Proof of (C1, C2) or <C1; C2> from proofs of C1 and C2.
Derivation pair_proof(Kind k, const Derivation& p1, const Derivation& p2) {
  Derivation a = plug(make_context(Structure::make(k, {S::unit(), S::unit()}), {0}), p1);
  Derivation b = plug(make_context(Structure::make(k, {p1.conclusion(), S::unit()}), {1}), p2);
  return with_premise(compose(a, b), S::unit());
}

Derivation i_down(const S& r) {
  switch (r.kind()) {
  case Kind::Unit:
    return Derivation::identity(S::unit());
  case Kind::Atom: {
    Binding b;
    b.atom = r.name();
    return with_premise(UpBuilder(par2(r, negate(r))).up(Rule::AiDown, {}, b).done(), S::unit());
  }
  case Kind::CoPar:
    return i_down(negate(r));
  case Kind::Par: {
    S A = r.kid(0);
    S B = par_of({r.kids().begin() + 1, r.kids().end()});
    S nA = negate(A), nB = negate(B);
    UpBuilder ub(S::par({A, B, copar2(nA, nB)}));
    Binding b1;
    b1.set("R", nB).set("T", nA).set("U", B).set("K", A);
    ub.up(Rule::Switch, {}, b1);
    Binding b2;
    b2.set("R", nA).set("T", par2(nB, B)).set("U", A);
    ub.up(Rule::Switch, {}, b2);
    ub.above(pair_proof(Kind::CoPar, i_down(A), i_down(B)));
    return with_premise(ub.done(), S::unit());
  }
  case Kind::Seq: {
    S A = r.kid(0);
    S B = seq_of({r.kids().begin() + 1, r.kids().end()});
    UpBuilder ub(par2(seq2(A, B), seq2(negate(A), negate(B))));
    Binding b;
    b.set("R", A).set("T", B).set("U", negate(A)).set("V", negate(B));
    ub.up(Rule::QDown, {}, b);
    ub.above(pair_proof(Kind::Seq, i_down(A), i_down(B)));
    return with_premise(ub.done(), S::unit());
  }
  case Kind::Sdq: {
    S B = r.body();
    UpBuilder ub(par2(r, negate(r)));
    Binding b;
    b.atom = r.name();
    b.set("R", B).set("T", negate(B));
    ub.up(Rule::UDown, {}, b);
    ub.above(plug(make_context(S::sdq(r.name(), S::unit()), {0}), i_down(B)));
    return with_premise(ub.done(), S::unit());
  }
  case Kind::Not:
    break;
  }
  throw std::logic_error("i_down: unexpected node");
}

// Renames binders on the hole path of s that would capture a name of `t`.
// Returns the renaming applied.
std::map<std::string, std::string> free_hole_path(Context& s, std::set<std::string> names) {
  std::map<std::string, std::string> renamed;
  std::set<std::string> avoid = names;
  for (const auto& n : free_names(s.shape)) avoid.insert(n);
  for (const auto& n : binder_names(s.shape)) avoid.insert(n);
  for (std::size_t depth = 0; depth < s.hole.size(); ++depth) {
    Path p(s.hole.begin(), s.hole.begin() + static_cast<long>(depth));
    const S& node = subterm(s.shape, p);
    if (!node.is(Kind::Sdq) || !names.count(node.name())) continue;
    std::string fresh = fresh_ident(node.name(), avoid);
    avoid.insert(fresh);
    renamed[node.name()] = fresh;
    s.shape = replace_at(s.shape, p, S::sdq(fresh, substitute(node.body(), node.name(), fresh)));
  }
  return renamed;
}

Derivation extrude(const Context& s, const S& r, const S& t) {
  if (s.hole.empty()) return Derivation::identity(par2(r, t));
  const S& node = s.shape;
  auto i = static_cast<std::size_t>(s.hole[0]);
  Context inner{node.kid(i), Path(s.hole.begin() + 1, s.hole.end())};
  S x = plug(inner, r);
  Context here{node, {static_cast<int>(i)}};
  Derivation below = plug(here, extrude(inner, r, t));
  S headed = plug(here, x);
  switch (node.kind()) {
  case Kind::Par:
    return compose(below, Derivation::identity(par2(headed, t)));
  case Kind::CoPar: {
    std::vector<S> others;
    for (std::size_t m = 0; m < node.kids().size(); ++m)
      if (m != i) others.push_back(node.kid(m));
    Binding b;
    b.set("R", x).set("T", copar_of(others)).set("U", t);
    return compose(below, UpBuilder(par2(headed, t)).up(Rule::Switch, {}, b).done());
  }
  case Kind::Seq: {
    const auto& l = node.kids();
    S before = seq_of({l.begin(), l.begin() + static_cast<long>(i)});
    S after = seq_of({l.begin() + static_cast<long>(i) + 1, l.end()});
    UpBuilder ub(par2(headed, t));
    Path at;
    if (!before.is_unit()) {
      Binding b;
      b.set("R", before).set("T", seq2(x, after)).set("V", t);
      ub.up(Rule::QDown, {}, b);
      at = {1};
    }
    if (!after.is_unit()) {
      Binding b;
      b.set("R", x).set("T", after).set("U", t);
      ub.up(Rule::QDown, at, b);
    }
    return compose(below, ub.done());
  }
  case Kind::Sdq: {
    if (occurs_free(t, node.name()))
      throw std::invalid_argument("context_extrusion: binder " + node.name() + " captures the extruded structure");
    Binding b;
    b.atom = node.name();
    b.set("R", x).set("T", t);
    return compose(below, UpBuilder(par2(headed, t)).up(Rule::UDown, {}, b).done());
  }
  default:
    break;
  }
  throw std::invalid_argument("context_extrusion: hole below a negation or an atom");
}

} // namespace

Derivation derive_i_down(const Structure& r) {
  Derivation d = i_down(canonicalize(r));
  return d;
}

Derivation derive_i_up(const Structure& r) {
  Derivation d = dualize(derive_i_down(r));
  return with_premise(d, copar2(r, negate(r)));
}

Derivation context_extrusion(const Context& s, const Structure& r, const Structure& t) {
  Context c = s;
  auto renamed = free_hole_path(c, free_names(t));
  // R sits in the scope of the renamed binders; T is kept apart from them.
  Structure rr = r;
  for (const auto& [from, to] : renamed) rr = substitute(rr, from, to);
  return extrude(c, rr, t);
}

Derivation derive_t_down(const Context& s, const Structure& r, const Structure& t, const std::string& a) {
  auto bn = binder_names(s.shape);
  if (bn.count(a)) throw std::invalid_argument("t↓: atom " + a + " is bound by the context");
  for (const auto& n : free_names(t))
    if (bn.count(n)) throw std::invalid_argument("t↓: name " + n + " of T is bound by the context");
  S na = S::atom(a, true);
  S at = S::atom(a);
  UpBuilder ub(par2(seq2(r, na), seq2(at, t)));
  Binding b1;
  b1.set("R", r).set("T", na).set("V", seq2(at, t));
  ub.up(Rule::QDown, {}, b1);
  Binding b2;
  b2.set("R", na).set("U", at).set("V", t);
  ub.up(Rule::QDown, {1}, b2);
  Binding b3;
  b3.atom = a;
  ub.up(Rule::AiDown, {1, 0}, b3);
  Derivation base = with_premise(ub.done(), seq2(r, t));
  Derivation d = compose(plug(s, base), extrude(s, seq2(r, na), seq2(at, t)));
  return with_premise(d, plug(s, seq2(r, t)));
}

Derivation derive_pmix(const Structure& r, const Structure& t) {
  if (r.is_unit() || t.is_unit()) return Derivation::identity(seq2(r, t));
  Binding b;
  b.set("R", r).set("V", t);
  return with_premise(UpBuilder(par2(r, t)).up(Rule::QDown, {}, b).done(), seq2(r, t));
}

Derivation derive_mix(const Structure& r, const Structure& t) {
  if (r.is_unit() || t.is_unit()) return Derivation::identity(copar2(r, t));
  Binding b;
  b.set("R", r).set("V", t);
  UpBuilder ub(par2(r, t));
  ub.up(Rule::QDown, {}, b);
  ub.as(seq2(r, t));
  ub.up(Rule::QUp, {}, b);
  return with_premise(ub.done(), copar2(r, t));
}

Derivation strip_binder(const Derivation& d, const std::string& a) {
  Derivation out;
  out.macros = d.macros;
  for (const auto& s : d.steps) {
    if (!s.is(Kind::Sdq) || s.name() != a)
      throw std::invalid_argument("strip_binder: step " + render(s) + " is not under the binder " + a);
    out.steps.push_back(s.body());
  }
  for (auto inst : d.links) {
    if (inst.path.empty()) throw std::invalid_argument("strip_binder: a step consumes the outer binder");
    inst.path.erase(inst.path.begin());
    out.links.push_back(std::move(inst));
  }
  RuleSet used;
  for (const auto& l : d.links) used.insert(l.rule);
  CheckReport r = check(out, used);
  if (!r.ok) throw std::invalid_argument("strip_binder: a step consumes the outer binder (" + r.message + ")");
  return out;
}

std::vector<std::size_t> affinity_violations(const Derivation& d) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.links.size(); ++i)
    if (is_down(d.links[i].rule) && size(d.steps[i + 1]) < size(d.steps[i])) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const Derivation& d, const RuleSet& allowed) {
  nlohmann::json j;
  j["steps"] = nlohmann::json::array();
  for (const auto& s : d.steps) j["steps"].push_back(render(s));
  j["links"] = nlohmann::json::array();
  for (const auto& l : d.links) {
    nlohmann::json b = nlohmann::json::object();
    for (const auto& [k, v] : l.binding.vars) b[k] = render(v);
    if (!l.binding.atom.empty()) b["a"] = l.binding.atom;
    if (l.binding.wrap != Wrap::Par) b["W"] = l.binding.wrap == Wrap::CoPar ? "copar" : "seq";
    if (!l.binding.outer.empty()) {
      std::string o;
      for (const auto& n : l.binding.outer) o += (o.empty() ? "" : " ") + n;
      b["outer"] = o;
    }
    j["links"].push_back({{"rule", rule_name(l.rule)}, {"path", l.path}, {"binding", b}});
  }
  j["allowed"] = nlohmann::json::array();
  for (Rule r : allowed) j["allowed"].push_back(rule_name(r));
  if (!d.macros.empty()) {
    j["macros"] = nlohmann::json::array();
    for (const auto& m : d.macros) {
      nlohmann::json mj{{"macro", m.name}, {"first", m.first}, {"last", m.last}};
      if (!m.info.empty()) mj["info"] = m.info;
      j["macros"].push_back(mj);
    }
  }
  return j;
}

Derivation derivation_from_json(const nlohmann::json& j, RuleSet* allowed) {
  Derivation d;
  for (const auto& s : j.at("steps")) d.steps.push_back(parse_structure(s.get<std::string>()));
  for (const auto& l : j.at("links")) {
    RuleInstance inst;
    auto r = parse_rule(l.at("rule").get<std::string>());
    if (!r) throw std::invalid_argument("unknown rule " + l.at("rule").dump());
    inst.rule = *r;
    inst.path = l.at("path").get<Path>();
    if (l.contains("binding")) {
      for (const auto& [k, v] : l["binding"].items()) {
        std::string val = v.get<std::string>();
        if (k == "a") inst.binding.atom = val;
        else if (k == "W") {
          if (val == "par") inst.binding.wrap = Wrap::Par;
          else if (val == "copar") inst.binding.wrap = Wrap::CoPar;
          else if (val == "seq") inst.binding.wrap = Wrap::Seq;
          else throw std::invalid_argument("bad wrap '" + val + "'");
        } else if (k == "outer") {
          std::istringstream is(val);
          std::string n;
          while (is >> n) inst.binding.outer.push_back(n);
        } else {
          inst.binding.set(k, parse_structure(val));
        }
      }
    }
    d.links.push_back(std::move(inst));
  }
  if (j.contains("macros"))
    for (const auto& m : j["macros"]) {
      MacroSpan s;
      s.name = m.at("macro").get<std::string>();
      s.first = m.at("first").get<std::size_t>();
      s.last = m.at("last").get<std::size_t>();
      if (m.contains("info")) s.info = m["info"].get<std::map<std::string, std::string>>();
      d.macros.push_back(std::move(s));
    }
  if (allowed) {
    allowed->clear();
    if (j.contains("allowed"))
      for (const auto& r : j["allowed"]) {
        auto rr = parse_rule(r.get<std::string>());
        if (!rr) throw std::invalid_argument("unknown rule " + r.dump());
        allowed->insert(*rr);
      }
  }
  if (d.steps.empty()) throw std::invalid_argument("derivation has no steps");
  if (d.links.size() + 1 != d.steps.size()) throw std::invalid_argument("links and steps disagree in number");
  return d;
}

} // namespace bvq
