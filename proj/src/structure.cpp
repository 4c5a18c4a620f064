#include "bvq/structure.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace bvq {

// ---------------------------------------------------------------------------
// Construction

Structure::Structure() : n_(std::make_shared<const Node>()) {}

Structure Structure::unit() {
  static const Structure u{std::make_shared<const Node>()};
  return u;
}

Structure Structure::atom(std::string ident, bool negative) {
  Node n;
  n.kind = Kind::Atom;
  n.name = std::move(ident);
  n.negative = negative;
  return Structure(std::make_shared<const Node>(std::move(n)));
}

Structure Structure::negation(Structure s) {
  Node n;
  n.kind = Kind::Not;
  n.kids.push_back(std::move(s));
  return Structure(std::make_shared<const Node>(std::move(n)));
}

Structure Structure::make(Kind k, std::vector<Structure> kids) {
  if (kids.empty() && (k == Kind::Par || k == Kind::CoPar || k == Kind::Seq)) return unit();
  Node n;
  n.kind = k;
  n.kids = std::move(kids);
  return Structure(std::make_shared<const Node>(std::move(n)));
}

Structure Structure::par(std::vector<Structure> kids) { return make(Kind::Par, std::move(kids)); }
Structure Structure::copar(std::vector<Structure> kids) { return make(Kind::CoPar, std::move(kids)); }
Structure Structure::seq(std::vector<Structure> kids) { return make(Kind::Seq, std::move(kids)); }

Structure Structure::sdq(std::string binder, Structure body) {
  Node n;
  n.kind = Kind::Sdq;
  n.name = std::move(binder);
  n.kids.push_back(std::move(body));
  return Structure(std::make_shared<const Node>(std::move(n)));
}

bool Structure::same(const Structure& o) const {
  if (n_ == o.n_) return true;
  if (kind() != o.kind() || name() != o.name() || negative() != o.negative()) return false;
  if (kids().size() != o.kids().size()) return false;
  for (std::size_t i = 0; i < kids().size(); ++i)
    if (!kids()[i].same(o.kids()[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Parsing and printing

ParseError::ParseError(std::size_t p, const std::string& msg)
    : std::runtime_error("at " + std::to_string(p) + ": " + msg), pos(p) {}

bool valid_ident(std::string_view id) {
  if (id.empty() || !(id[0] >= 'a' && id[0] <= 'z')) return false;
  for (char c : id)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  return id != "all";
}

namespace {

class Parser {
public:
  explicit Parser(std::string_view t) : t_(t) {}

  Structure parse_all() {
    Structure s = term();
    skip();
    if (i_ != t_.size()) throw ParseError(i_, "unexpected trailing input");
    return s;
  }

private:
  std::string_view t_;
  std::size_t i_ = 0;

  void skip() {
    while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_]))) ++i_;
  }

  bool eat(char c) {
    skip();
    if (i_ < t_.size() && t_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) throw ParseError(i_, std::string("expected '") + c + "'");
  }

  std::string word() {
    skip();
    std::size_t b = i_;
    while (i_ < t_.size() &&
           ((t_[i_] >= 'a' && t_[i_] <= 'z') || (t_[i_] >= '0' && t_[i_] <= '9') || t_[i_] == '_'))
      ++i_;
    return std::string(t_.substr(b, i_ - b));
  }

  std::vector<Structure> list(char sep, char close) {
    std::vector<Structure> out;
    out.push_back(term());
    while (eat(sep)) out.push_back(term());
    expect(close);
    return out;
  }

  Structure term() {
    skip();
    if (i_ >= t_.size()) throw ParseError(i_, "unexpected end of input");
    char c = t_[i_];
    switch (c) {
    case '1':
      ++i_;
      return Structure::unit();
    case '~': {
      ++i_;
      Structure t = term();
      if (t.is_atom() && !t.negative()) return Structure::atom(t.name(), true);
      return Structure::negation(t);
    }
    case '[':
      ++i_;
      return Structure::par(list(',', ']'));
    case '(':
      ++i_;
      return Structure::copar(list(',', ')'));
    case '<':
      ++i_;
      return Structure::seq(list(';', '>'));
    default:
      break;
    }
    std::size_t start = i_;
    std::string w = word();
    if (w.empty()) throw ParseError(start, std::string("unexpected character '") + c + "'");
    if (w == "all") {
      skip();
      if (i_ < t_.size() && t_[i_] == '~') throw ParseError(i_, "binder must be a positive ident");
      std::size_t at = i_;
      std::string x = word();
      if (!valid_ident(x)) throw ParseError(at, "expected binder ident after 'all'");
      expect('.');
      return Structure::sdq(x, term());
    }
    if (!valid_ident(w)) throw ParseError(start, "bad ident '" + w + "'");
    return Structure::atom(w);
  }
};

void render_to(const Structure& s, std::string& out) {
  auto join = [&](const char* open, const char* sep, const char* close) {
    out += open;
    bool first = true;
    for (const auto& k : s.kids()) {
      if (!first) out += sep;
      first = false;
      render_to(k, out);
    }
    out += close;
  };
  switch (s.kind()) {
  case Kind::Unit:
    out += '1';
    break;
  case Kind::Atom:
    if (s.negative()) out += '~';
    out += s.name();
    break;
  case Kind::Not:
    out += '~';
    render_to(s.body(), out);
    break;
  case Kind::Par:
    join("[", ", ", "]");
    break;
  case Kind::CoPar:
    join("(", ", ", ")");
    break;
  case Kind::Seq:
    join("<", "; ", ">");
    break;
  case Kind::Sdq:
    out += "all ";
    out += s.name();
    out += ". ";
    render_to(s.body(), out);
    break;
  }
}

} // namespace

Structure parse_structure(std::string_view text) { return Parser(text).parse_all(); }

std::string render(const Structure& s) {
  std::string out;
  render_to(s, out);
  return out;
}

// ---------------------------------------------------------------------------
// Negation

namespace {

Structure nnf(const Structure& s, bool neg) {
  switch (s.kind()) {
  case Kind::Unit:
    return s;
  case Kind::Atom:
    return neg ? Structure::atom(s.name(), !s.negative()) : s;
  case Kind::Not:
    return nnf(s.body(), !neg);
  case Kind::Sdq:
    return Structure::sdq(s.name(), nnf(s.body(), neg));
  case Kind::Par:
  case Kind::CoPar:
  case Kind::Seq: {
    std::vector<Structure> kids;
    kids.reserve(s.kids().size());
    for (const auto& k : s.kids()) kids.push_back(nnf(k, neg));
    Kind k = s.kind();
    if (neg && k == Kind::Par) k = Kind::CoPar;
    else if (neg && k == Kind::CoPar) k = Kind::Par;
    return Structure::make(k, std::move(kids));
  }
  }
  return s;
}

} // namespace

Structure negate(const Structure& s) { return nnf(s, true); }
Structure push_negations(const Structure& s) { return nnf(s, false); }

// ---------------------------------------------------------------------------
// Names and size

namespace {

// Free occurrence of `id` with the given polarity filter, tracking negations.
bool occurs(const Structure& s, const std::string& id, bool neg, bool positive_only) {
  switch (s.kind()) {
  case Kind::Unit:
    return false;
  case Kind::Atom:
    return s.name() == id && (!positive_only || s.negative() == neg);
  case Kind::Not:
    return occurs(s.body(), id, !neg, positive_only);
  case Kind::Sdq:
    return s.name() != id && occurs(s.body(), id, neg, positive_only);
  default:
    for (const auto& k : s.kids())
      if (occurs(k, id, neg, positive_only)) return true;
    return false;
  }
}

void collect_names(const Structure& s, std::set<std::string>& bound_ctx, NameSets& out, NameReading r) {
  switch (s.kind()) {
  case Kind::Unit:
    return;
  case Kind::Atom:
    if (!bound_ctx.count(s.name())) out.free.insert(s.name());
    return;
  case Kind::Sdq: {
    if (r == NameReading::Syntactic || occurs(s.body(), s.name(), false, false)) out.bound.insert(s.name());
    bool had = bound_ctx.count(s.name()) > 0;
    bound_ctx.insert(s.name());
    collect_names(s.body(), bound_ctx, out, r);
    if (!had) bound_ctx.erase(s.name());
    return;
  }
  default:
    for (const auto& k : s.kids()) collect_names(k, bound_ctx, out, r);
  }
}

std::size_t size_rec(const Structure& s, BindReading r) {
  switch (s.kind()) {
  case Kind::Unit:
    return 0;
  case Kind::Atom:
    return 1;
  case Kind::Sdq:
    return size_rec(s.body(), r) +
           (occurs(s.body(), s.name(), false, r == BindReading::PositiveOnly) ? 1 : 0);
  default: {
    std::size_t n = 0;
    for (const auto& k : s.kids()) n += size_rec(k, r);
    return n;
  }
  }
}

void collect_binders(const Structure& s, std::set<std::string>& out) {
  if (s.is(Kind::Sdq)) out.insert(s.name());
  for (const auto& k : s.kids()) collect_binders(k, out);
}

} // namespace

std::size_t size(const Structure& s, BindReading r) { return size_rec(s, r); }

NameSets name_sets(const Structure& s, NameReading r) {
  NameSets out;
  std::set<std::string> ctx;
  collect_names(s, ctx, out, r);
  return out;
}

std::set<std::string> free_names(const Structure& s) { return name_sets(s).free; }

std::set<std::string> binder_names(const Structure& s) {
  std::set<std::string> out;
  collect_binders(s, out);
  return out;
}

bool occurs_free(const Structure& s, const std::string& ident) { return occurs(s, ident, false, false); }

std::string fresh_ident(const std::string& base, const std::set<std::string>& avoid) {
  std::string stem = base;
  while (!stem.empty() && std::isdigit(static_cast<unsigned char>(stem.back()))) stem.pop_back();
  if (stem.empty() || !valid_ident(stem)) stem = "x";
  if (!avoid.count(stem)) return stem;
  for (int i = 1;; ++i) {
    std::string c = stem + std::to_string(i);
    if (!avoid.count(c)) return c;
  }
}

// ---------------------------------------------------------------------------
// Substitution

namespace {

void all_idents(const Structure& s, std::set<std::string>& out) {
  if (s.is_atom() || s.is(Kind::Sdq)) out.insert(s.name());
  for (const auto& k : s.kids()) all_idents(k, out);
}

Structure subst_rec(const Structure& s, const std::string& from, const std::string& to) {
  switch (s.kind()) {
  case Kind::Unit:
    return s;
  case Kind::Atom:
    return s.name() == from ? Structure::atom(to, s.negative()) : s;
  case Kind::Sdq: {
    if (s.name() == from) return s;
    if (!occurs(s.body(), from, false, false)) return s;
    if (s.name() == to) {
      std::set<std::string> avoid{from, to};
      all_idents(s.body(), avoid);
      std::string fresh = fresh_ident(s.name(), avoid);
      Structure renamed = subst_rec(s.body(), s.name(), fresh);
      return Structure::sdq(fresh, subst_rec(renamed, from, to));
    }
    return Structure::sdq(s.name(), subst_rec(s.body(), from, to));
  }
  default: {
    std::vector<Structure> kids;
    kids.reserve(s.kids().size());
    for (const auto& k : s.kids()) kids.push_back(subst_rec(k, from, to));
    return Structure::make(s.kind(), std::move(kids));
  }
  }
}

Structure rename_away_rec(const Structure& s, const std::set<std::string>& avoid, std::set<std::string>& used) {
  if (s.is(Kind::Sdq)) {
    Structure body = s.body();
    std::string b = s.name();
    if (avoid.count(b)) {
      std::string fresh = fresh_ident(b, used);
      used.insert(fresh);
      body = subst_rec(body, b, fresh);
      b = fresh;
    }
    return Structure::sdq(b, rename_away_rec(body, avoid, used));
  }
  if (s.kids().empty()) return s;
  std::vector<Structure> kids;
  for (const auto& k : s.kids()) kids.push_back(rename_away_rec(k, avoid, used));
  if (s.is(Kind::Not)) return Structure::negation(kids[0]);
  return Structure::make(s.kind(), std::move(kids));
}

} // namespace

Structure substitute(const Structure& s, const std::string& from, const std::string& to) {
  if (from == to) return s;
  return subst_rec(s, from, to);
}

Structure rename_binders_away(const Structure& s, const std::set<std::string>& avoid) {
  std::set<std::string> used = avoid;
  all_idents(s, used);
  return rename_away_rec(s, avoid, used);
}

// ---------------------------------------------------------------------------
// Canonical forms
//
// Three passes: (1) negation-normal form, flattening, unit absorption and
// vacuous-binder removal, with every binder renamed to a unique internal
// name "#k"; (2) choice of a prefix for canonical binder names that no free
// name can collide with; (3) naming and sorting. A binder at nesting depth d
// is called prefix+d. Within a block of adjacent binders the order is fixed
// by first occurrence in a name-blind traversal; ties fall back to trying
// every permutation and keeping the least rendering.

namespace {

Structure build(Kind k, std::vector<Structure> kids) {
  std::vector<Structure> flat;
  for (auto& c : kids) {
    if (c.is_unit()) continue;
    if (c.kind() == k) {
      for (const auto& g : c.kids()) flat.push_back(g);
    } else {
      flat.push_back(std::move(c));
    }
  }
  if (flat.empty()) return Structure::unit();
  if (flat.size() == 1) return flat[0];
  return Structure::make(k, std::move(flat));
}

bool mentions(const Structure& s, const std::string& id) {
  if (s.is_atom()) return s.name() == id;
  for (const auto& k : s.kids())
    if (mentions(k, id)) return true;
  return false;
}

struct Prep {
  int counter = 0;
  std::vector<std::pair<std::string, std::string>> env;

  Structure go(const Structure& s, bool neg) {
    switch (s.kind()) {
    case Kind::Unit:
      return s;
    case Kind::Atom: {
      std::string name = s.name();
      for (auto it = env.rbegin(); it != env.rend(); ++it)
        if (it->first == name) {
          name = it->second;
          break;
        }
      return Structure::atom(name, s.negative() != neg);
    }
    case Kind::Not:
      return go(s.body(), !neg);
    case Kind::Sdq: {
      std::string internal = "#" + std::to_string(counter++);
      env.emplace_back(s.name(), internal);
      Structure body = go(s.body(), neg);
      env.pop_back();
      if (!mentions(body, internal)) return body;
      return Structure::sdq(internal, body);
    }
    default: {
      Kind k = s.kind();
      if (neg && k == Kind::Par) k = Kind::CoPar;
      else if (neg && k == Kind::CoPar) k = Kind::Par;
      std::vector<Structure> kids;
      kids.reserve(s.kids().size());
      for (const auto& c : s.kids()) kids.push_back(go(c, neg));
      return build(k, std::move(kids));
    }
    }
  }
};

void free_plain_names(const Structure& s, std::set<std::string>& out) {
  if (s.is_atom() && s.name()[0] != '#') out.insert(s.name());
  for (const auto& k : s.kids()) free_plain_names(k, out);
}

std::string choose_prefix(const std::set<std::string>& free) {
  static const char* candidates[] = {"v", "w", "u", "z", "y", "v_", "w_", "u_"};
  auto clashes = [&](const std::string& p) {
    for (const auto& n : free) {
      if (n.size() <= p.size() || n.compare(0, p.size(), p) != 0) continue;
      bool digits = true;
      for (std::size_t i = p.size(); i < n.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(n[i]))) digits = false;
      if (digits) return true;
    }
    return false;
  };
  for (const char* c : candidates)
    if (!clashes(c)) return c;
  for (int i = 0;; ++i) {
    std::string p = "v" + std::to_string(i) + "_";
    if (!clashes(p)) return p;
  }
}

struct Rendered {
  Structure s;
  std::string text;
};

struct Canon {
  std::string prefix;
  std::unordered_map<const Node*, std::string> ekeys;
  const std::map<std::string, std::string>* outer = nullptr;
  const std::vector<std::string>* block = nullptr;

  // Rendering with the names of the block being ordered blanked to "#" and
  // names bound below it to "#i"; names bound further out already have their
  // canonical names. Only valid while one block is being ordered.
  const std::string& ekey(const Structure& s) {
    auto it = ekeys.find(s.raw());
    if (it != ekeys.end()) return it->second;
    std::string out;
    switch (s.kind()) {
    case Kind::Unit:
      out = "1";
      break;
    case Kind::Atom:
      if (s.name()[0] != '#') {
        out = (s.negative() ? "~" : "") + s.name();
      } else {
        auto o = outer->find(s.name());
        std::string n = o != outer->end() ? o->second
                        : std::find(block->begin(), block->end(), s.name()) != block->end() ? "#"
                                                                                             : "#i";
        out = (s.negative() ? "~" : "") + n;
      }
      break;
    case Kind::Sdq:
      out = "A." + ekey(s.body());
      break;
    default: {
      std::vector<std::string> ks;
      for (const auto& k : s.kids()) ks.push_back(ekey(k));
      if (s.kind() != Kind::Seq) std::sort(ks.begin(), ks.end());
      const char* open = s.is(Kind::Par) ? "[" : s.is(Kind::CoPar) ? "(" : "<";
      const char* close = s.is(Kind::Par) ? "]" : s.is(Kind::CoPar) ? ")" : ">";
      out = open;
      for (std::size_t i = 0; i < ks.size(); ++i) {
        if (i) out += ',';
        out += ks[i];
      }
      out += close;
    }
    }
    return ekeys.emplace(s.raw(), std::move(out)).first->second;
  }

  static bool mentions_any(const Structure& s, const std::vector<std::string>& names) {
    if (s.is_atom()) return std::find(names.begin(), names.end(), s.name()) != names.end();
    for (const auto& k : s.kids())
      if (mentions_any(k, names)) return true;
    return false;
  }

  void first_occurrence(const Structure& s, const std::vector<std::string>& block, std::vector<std::string>& order,
                        bool& ambiguous) {
    if (order.size() == block.size() || ambiguous) return;
    switch (s.kind()) {
    case Kind::Unit:
      return;
    case Kind::Atom:
      if (std::find(block.begin(), block.end(), s.name()) != block.end() &&
          std::find(order.begin(), order.end(), s.name()) == order.end())
        order.push_back(s.name());
      return;
    case Kind::Sdq:
      first_occurrence(s.body(), block, order, ambiguous);
      return;
    case Kind::Seq:
      for (const auto& k : s.kids()) first_occurrence(k, block, order, ambiguous);
      return;
    default: {
      std::vector<std::size_t> idx(s.kids().size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return ekey(s.kid(a)) < ekey(s.kid(b)); });
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (order.size() == block.size()) return;
        std::vector<std::string> missing;
        for (const auto& b : block)
          if (std::find(order.begin(), order.end(), b) == order.end()) missing.push_back(b);
        // Kids with equal keys can be listed in either order, so any block
        // name inside such a group makes the first-occurrence order unreliable.
        std::size_t e = i;
        while (e + 1 < idx.size() && ekey(s.kid(idx[e + 1])) == ekey(s.kid(idx[i]))) ++e;
        if (e > i)
          for (std::size_t j = i; j <= e; ++j)
            if (mentions_any(s.kid(idx[j]), missing)) {
              ambiguous = true;
              return;
            }
        first_occurrence(s.kid(idx[i]), block, order, ambiguous);
        if (ambiguous) return;
      }
    }
    }
  }

  Rendered go(const Structure& s, int depth, const std::map<std::string, std::string>& env) {
    switch (s.kind()) {
    case Kind::Unit:
      return {s, "1"};
    case Kind::Atom: {
      if (s.name()[0] != '#') return {s, render(s)};
      Structure a = Structure::atom(env.at(s.name()), s.negative());
      return {a, render(a)};
    }
    case Kind::Par:
    case Kind::CoPar:
    case Kind::Seq: {
      std::vector<Rendered> kids;
      kids.reserve(s.kids().size());
      for (const auto& k : s.kids()) kids.push_back(go(k, depth, env));
      if (!s.is(Kind::Seq))
        std::sort(kids.begin(), kids.end(), [](const Rendered& a, const Rendered& b) { return a.text < b.text; });
      std::vector<Structure> ks;
      std::string text = s.is(Kind::Par) ? "[" : s.is(Kind::CoPar) ? "(" : "<";
      const char* sep = s.is(Kind::Seq) ? "; " : ", ";
      for (std::size_t i = 0; i < kids.size(); ++i) {
        if (i) text += sep;
        text += kids[i].text;
        ks.push_back(std::move(kids[i].s));
      }
      text += s.is(Kind::Par) ? "]" : s.is(Kind::CoPar) ? ")" : ">";
      return {Structure::make(s.kind(), std::move(ks)), std::move(text)};
    }
    case Kind::Sdq: {
      std::vector<std::string> block;
      Structure body = s;
      while (body.is(Kind::Sdq)) {
        block.push_back(body.name());
        body = body.body();
      }
      std::vector<std::string> order;
      bool ambiguous = false;
      ekeys.clear();
      outer = &env;
      this->block = &block;
      first_occurrence(body, block, order, ambiguous);
      std::vector<std::vector<std::string>> candidates;
      // The order found before an ambiguity is canonical; only the rest is
      // searched.
      std::vector<std::string> rest;
      for (const auto& b : block)
        if (std::find(order.begin(), order.end(), b) == order.end()) rest.push_back(b);
      if (rest.empty()) {
        candidates.push_back(order);
      } else if (rest.size() <= 6) {
        std::sort(rest.begin(), rest.end());
        do {
          candidates.push_back(order);
          candidates.back().insert(candidates.back().end(), rest.begin(), rest.end());
        } while (std::next_permutation(rest.begin(), rest.end()));
      } else {
        // Too many permutations; complete the partial order deterministically.
        std::vector<std::string> perm = order;
        for (const auto& b : block)
          if (std::find(perm.begin(), perm.end(), b) == perm.end()) perm.push_back(b);
        candidates.push_back(perm);
      }
      Rendered best;
      bool have = false;
      for (const auto& perm : candidates) {
        auto env2 = env;
        std::string head;
        for (std::size_t i = 0; i < perm.size(); ++i) {
          std::string nm = prefix + std::to_string(depth + static_cast<int>(i));
          env2[perm[i]] = nm;
          head += "all " + nm + ". ";
        }
        Rendered b = go(body, depth + static_cast<int>(perm.size()), env2);
        std::string text = head + b.text;
        if (!have || text < best.text) {
          Structure out = b.s;
          for (std::size_t i = perm.size(); i-- > 0;)
            out = Structure::sdq(prefix + std::to_string(depth + static_cast<int>(i)), out);
          best = {out, std::move(text)};
          have = true;
        }
      }
      return best;
    }
    case Kind::Not:
      break;
    }
    throw std::logic_error("canonicalize: unexpected node");
  }
};

Rendered canon_full(const Structure& s) {
  Prep prep;
  Structure p = prep.go(s, false);
  std::set<std::string> free;
  free_plain_names(p, free);
  Canon c;
  c.prefix = choose_prefix(free);
  return c.go(p, 0, {});
}

} // namespace

Structure canonicalize(const Structure& s) { return canon_full(s).s; }
std::string canonical_text(const Structure& s) { return canon_full(s).text; }
bool equiv(const Structure& a, const Structure& b) { return canonical_text(a) == canonical_text(b); }

// ---------------------------------------------------------------------------
// Paths

const Structure& subterm(const Structure& s, const Path& p) {
  const Structure* cur = &s;
  for (int i : p) {
    if (i < 0 || static_cast<std::size_t>(i) >= cur->kids().size())
      throw std::out_of_range("path does not address a subterm");
    cur = &cur->kids()[static_cast<std::size_t>(i)];
  }
  return *cur;
}

bool valid_path(const Structure& s, const Path& p) {
  const Structure* cur = &s;
  for (int i : p) {
    if (i < 0 || static_cast<std::size_t>(i) >= cur->kids().size()) return false;
    cur = &cur->kids()[static_cast<std::size_t>(i)];
  }
  return true;
}

namespace {
Structure replace_rec(const Structure& s, const Path& p, std::size_t at, const Structure& with) {
  if (at == p.size()) return with;
  auto i = static_cast<std::size_t>(p[at]);
  if (i >= s.kids().size()) throw std::out_of_range("path does not address a subterm");
  if (s.is(Kind::Sdq)) return Structure::sdq(s.name(), replace_rec(s.body(), p, at + 1, with));
  if (s.is(Kind::Not)) return Structure::negation(replace_rec(s.body(), p, at + 1, with));
  std::vector<Structure> kids = s.kids();
  kids[i] = replace_rec(kids[i], p, at + 1, with);
  return Structure::make(s.kind(), std::move(kids));
}
} // namespace

Structure replace_at(const Structure& s, const Path& p, const Structure& with) {
  return replace_rec(s, p, 0, with);
}

// ---------------------------------------------------------------------------
// Enumeration

void enumerate_structures(const std::vector<std::string>& atoms, std::size_t max_size,
                          const std::function<bool(const Structure&)>& visit) {
  if (max_size > kEnumerationBound)
    throw std::invalid_argument("enumeration size " + std::to_string(max_size) + " exceeds bound " +
                                std::to_string(kEnumerationBound));
  std::unordered_set<std::string> seen;
  std::vector<std::vector<Structure>> by_size(max_size + 1);
  auto offer = [&](const Structure& raw) -> bool {
    Rendered r = canon_full(raw);
    if (!seen.insert(r.text).second) return true;
    std::size_t n = size(r.s);
    if (n > max_size) return true;
    by_size[n].push_back(r.s);
    return visit(r.s);
  };
  if (!offer(Structure::unit())) return;
  if (max_size == 0) return;
  for (const auto& a : atoms) {
    if (!offer(Structure::atom(a))) return;
    if (!offer(Structure::atom(a, true))) return;
  }
  for (std::size_t n = 2; n <= max_size; ++n) {
    for (std::size_t i = 1; i < n; ++i) {
      std::size_t j = n - i;
      // Copies, since offer() may append to the same buckets.
      std::vector<Structure> left = by_size[i], right = by_size[j];
      for (const auto& x : left)
        for (const auto& y : right) {
          if (i <= j) {
            if (!offer(Structure::par({x, y}))) return;
            if (!offer(Structure::copar({x, y}))) return;
          }
          if (!offer(Structure::seq({x, y}))) return;
        }
    }
    std::vector<Structure> bodies = by_size[n - 1];
    for (const auto& b : bodies) {
      // Canonical binder names are not in `atoms`; re-expose them under each ident.
      for (const auto& a : atoms) {
        if (!occurs_free(b, a)) continue;
        if (!offer(Structure::sdq(a, b))) return;
      }
    }
  }
}

std::vector<Structure> enumerate_structures(const std::vector<std::string>& atoms, std::size_t max_size) {
  std::vector<Structure> out;
  enumerate_structures(atoms, max_size, [&](const Structure& s) {
    out.push_back(s);
    return true;
  });
  return out;
}

} // namespace bvq
