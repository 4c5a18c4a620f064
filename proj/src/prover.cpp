#include "bvq/prover.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <map>
#include <queue>
#include <tuple>
#include <unordered_map>

namespace bvq {

std::size_t default_max_visited() {
  if (const char* env = std::getenv("BVQ_MAX_VISITED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 10'000'000;
}

std::string status_name(Status s) {
  switch (s) {
  case Status::Proved: return "proved";
  case Status::Refuted: return "refuted";
  case Status::BoundExceeded: return "bound_exceeded";
  }
  return "?";
}

RuleSet system_rules(System s) { return s == System::BVQ ? bvq_rules() : sbvq_rules(); }

std::vector<Structure> decompose(const Structure& r) {
  Structure c = canonicalize(r);
  switch (c.kind()) {
  case Kind::Seq:
  case Kind::CoPar: {
    const auto& k = c.kids();
    std::vector<Structure> rest(k.begin() + 1, k.end());
    return {k[0], rest.size() == 1 ? rest[0] : Structure::make(c.kind(), rest)};
  }
  case Kind::Sdq: {
    auto avoid = free_names(c);
    std::string b = fresh_ident("b", avoid);
    return {canonicalize(substitute(c.body(), c.name(), b))};
  }
  default:
    return {c};
  }
}

namespace {

// Positive minus negative free occurrences per name, zeros dropped, plus the
// same count over all bound occurrences under the key "". No BVQ rule changes
// either: ai↓ adds one of each, and nothing else creates or deletes an atom.
// Binders can be merged by u↓, so a single binder need not balance on its own.
std::map<std::string, long> charge(const Structure& raw) {
  Structure s = push_negations(raw);
  std::map<std::string, long> count;
  std::vector<std::string> scope;
  auto walk = [&](auto&& self, const Structure& n) -> void {
    switch (n.kind()) {
    case Kind::Atom: {
      long d = n.negative() ? -1 : 1;
      bool bound = std::find(scope.begin(), scope.end(), n.name()) != scope.end();
      count[bound ? std::string() : n.name()] += d;
      return;
    }
    case Kind::Sdq:
      scope.push_back(n.name());
      self(self, n.body());
      scope.pop_back();
      return;
    default:
      for (const auto& k : n.kids()) self(self, k);
    }
  };
  walk(walk, s);
  std::erase_if(count, [](const auto& kv) { return kv.second == 0; });
  return count;
}

bool balanced(const Structure& s) { return charge(s).empty(); }

// Reading a BVQ proof downward, ai↓ puts each dual pair it creates in a Par,
// and no rule or equivalence turns a Par relation between two atoms into a
// Seq or CoPar one. So a provable structure pairs off its atoms into dual
// pairs whose lowest common ancestor is a Par node. Free atoms pair with the
// same free name; bound atoms pair with bound atoms, since u↓ may have split
// the binder they were created under.
bool pairable(const Structure& raw) {
  struct Occ {
    std::string key;
    std::vector<int> path; // kid indices, Sdq nodes skipped
  };
  Structure s = push_negations(raw);
  std::vector<Occ> pos, neg;
  std::vector<std::string> scope;
  std::vector<int> path;
  auto walk = [&](auto&& self, const Structure& n) -> void {
    switch (n.kind()) {
    case Kind::Unit:
      return;
    case Kind::Atom: {
      bool bound = std::find(scope.begin(), scope.end(), n.name()) != scope.end();
      (n.negative() ? neg : pos).push_back({bound ? std::string() : n.name(), path});
      return;
    }
    case Kind::Sdq:
      scope.push_back(n.name());
      self(self, n.body());
      scope.pop_back();
      return;
    default:
      for (std::size_t i = 0; i < n.kids().size(); ++i) {
        path.push_back(static_cast<int>(i));
        self(self, n.kids()[i]);
        path.pop_back();
      }
    }
  };
  walk(walk, s);
  if (pos.size() != neg.size()) return false;
  auto linked = [&](const Occ& a, const Occ& b) {
    if (a.key != b.key) return false;
    std::size_t i = 0;
    const Structure* n = &s;
    while (n->is(Kind::Sdq)) n = &n->body();
    while (i < a.path.size() && i < b.path.size() && a.path[i] == b.path[i]) {
      n = &n->kids()[static_cast<std::size_t>(a.path[i++])];
      while (n->is(Kind::Sdq)) n = &n->body();
    }
    return n->is(Kind::Par);
  };
  std::vector<std::vector<std::size_t>> adj(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < neg.size(); ++j)
      if (linked(pos[i], neg[j])) adj[i].push_back(j);
  // Kuhn's augmenting paths.
  std::vector<long> match(neg.size(), -1);
  std::vector<char> seen;
  auto augment = [&](auto&& self, std::size_t i) -> bool {
    for (std::size_t j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (match[j] < 0 || self(self, static_cast<std::size_t>(match[j]))) {
        match[j] = static_cast<long>(i);
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < pos.size(); ++i) {
    seen.assign(neg.size(), 0);
    if (!augment(augment, i)) return false;
  }
  return true;
}

Derivation pair_proof(Kind k, const Derivation& p1, const Derivation& p2) {
  Derivation a = plug(make_context(Structure::make(k, {Structure::unit(), Structure::unit()}), {0}), p1);
  Derivation b = plug(make_context(Structure::make(k, {p1.conclusion(), Structure::unit()}), {1}), p2);
  return with_premise(compose(a, b), Structure::unit());
}

struct Searcher {
  const SearchConfig& cfg;
  SearchStats stats;
  RuleSet rules;

  struct Rec {
    int parent;
    RuleInstance inst;
    Structure s;
    std::size_t depth;
  };

  SearchResult run(const Structure& r) {
    Structure c = canonicalize(r);
    SearchResult res;
    if (c.is_unit()) {
      res.status = Status::Proved;
      res.proof = Derivation::identity(c);
      return res;
    }
    if (cfg.decompose && (c.is(Kind::Seq) || c.is(Kind::CoPar) || c.is(Kind::Sdq))) {
      auto parts = decompose(c);
      if (c.is(Kind::Sdq)) {
        SearchResult inner = run(parts[0]);
        if (inner.status != Status::Proved) return inner;
        // decompose renamed the outer binder; put it back around the body proof.
        std::string b = fresh_ident("b", free_names(c));
        Derivation d = plug(make_context(Structure::sdq(b, Structure::unit()), {0}), *inner.proof);
        inner.proof = with_premise(d, Structure::unit());
        return inner;
      }
      SearchResult left = run(parts[0]);
      if (left.status != Status::Proved) return left;
      SearchResult right = run(parts[1]);
      if (right.status != Status::Proved) return right;
      res.status = Status::Proved;
      res.proof = pair_proof(c.kind(), *left.proof, *right.proof);
      return res;
    }
    if (cfg.system == System::BVQ && !(balanced(c) && pairable(c))) {
      res.status = Status::Refuted;
      return res;
    }
    return search(c);
  }

  SearchResult search(const Structure& root) {
    SearchResult res;
    std::vector<Rec> nodes;
    std::unordered_map<std::string, int> index;
    bool sbvq = cfg.system == System::SBVQ;
    bool by_size = sbvq || !cfg.shortest;
    std::size_t size_limit = size(root) + (sbvq ? cfg.max_size_increase : 0);
    std::vector<std::string> pool;
    for (const auto& n : free_names(root)) pool.push_back(n);
    bool pruned = false;

    using Key = std::tuple<std::size_t, std::size_t, int>;
    std::priority_queue<Key, std::vector<Key>, std::greater<>> best;
    std::deque<int> fifo;
    auto push = [&](int id) {
      const Rec& n = nodes[static_cast<std::size_t>(id)];
      if (by_size) best.emplace(size(n.s), n.depth, id);
      else fifo.push_back(id);
      std::size_t f = by_size ? best.size() : fifo.size();
      if (f > stats.frontier_peak) stats.frontier_peak = f;
    };

    nodes.push_back({-1, {}, root, 0});
    index.emplace(render(root), 0);
    ++stats.visited;
    push(0);
    while (by_size ? !best.empty() : !fifo.empty()) {
      int cur;
      if (by_size) {
        cur = std::get<2>(best.top());
        best.pop();
      } else {
        cur = fifo.front();
        fifo.pop_front();
      }
      Structure x = nodes[static_cast<std::size_t>(cur)].s;
      std::size_t depth = nodes[static_cast<std::size_t>(cur)].depth;
      if (depth >= cfg.max_steps) {
        pruned = true;
        continue;
      }
      for (Rule rule : all_rules()) {
        if (!rules.count(rule)) continue;
        for (auto& inst : find_redexes(x, rule, Direction::Up, pool)) {
          Structure p = apply_found(x, inst, Direction::Up);
          if (size(p) > size_limit) {
            pruned = true;
            continue;
          }
          std::string key = render(p);
          if (index.count(key)) continue;
          if (stats.visited >= cfg.max_visited) {
            res.status = Status::BoundExceeded;
            return res;
          }
          int id = static_cast<int>(nodes.size());
          nodes.push_back({cur, std::move(inst), p, depth + 1});
          index.emplace(key, id);
          ++stats.visited;
          if (p.is_unit()) {
            res.status = Status::Proved;
            res.proof = rebuild(nodes, id);
            return res;
          }
          if (!sbvq && !pairable(p)) continue;
          push(id);
        }
      }
    }
    res.status = pruned ? Status::BoundExceeded : Status::Refuted;
    return res;
  }

  static Derivation rebuild(const std::vector<Rec>& nodes, int leaf) {
    Derivation d;
    int i = leaf;
    while (true) {
      const Rec& n = nodes[static_cast<std::size_t>(i)];
      d.steps.push_back(n.s);
      if (n.parent < 0) break;
      d.links.push_back(n.inst);
      i = n.parent;
    }
    return d;
  }
};

} // namespace

bool plausibly_provable(const Structure& r) {
  Structure c = canonicalize(r);
  if (c.is_unit()) return true;
  if (c.is(Kind::Seq) || c.is(Kind::CoPar))
    return std::all_of(c.kids().begin(), c.kids().end(), [](const Structure& k) { return plausibly_provable(k); });
  if (c.is(Kind::Sdq)) return plausibly_provable(c.body());
  return balanced(c) && pairable(c);
}

SearchResult prove(const Structure& r, const SearchConfig& cfg) {
  Searcher s{cfg, {}, system_rules(cfg.system)};
  SearchResult res = s.run(r);
  res.stats = s.stats;
  if (res.status == Status::Proved) require_valid(*res.proof, s.rules, "prove");
  return res;
}

bool oracle_provable(const Structure& r, std::size_t max_size, std::size_t max_visited) {
  Structure root = canonicalize(r);
  if (size(root) > max_size)
    throw std::length_error("oracle: size " + std::to_string(size(root)) + " exceeds bound " +
                            std::to_string(max_size));
  if (root.is_unit()) return true;
  std::unordered_map<std::string, char> seen;
  std::deque<Structure> frontier{root};
  seen.emplace(render(root), 0);
  while (!frontier.empty()) {
    Structure x = frontier.front();
    frontier.pop_front();
    for (Rule rule : {Rule::AiDown, Rule::Switch, Rule::QDown, Rule::UDown})
      for (const auto& inst : find_redexes(x, rule, Direction::Up)) {
        Structure p = apply_found(x, inst, Direction::Up);
        if (p.is_unit()) return true;
        if (!seen.emplace(render(p), 0).second) continue;
        if (seen.size() > max_visited) throw std::length_error("oracle: visited bound exceeded");
        frontier.push_back(std::move(p));
      }
  }
  return false;
}

ClimbResult climb(const Structure& target, const std::function<bool(const Structure&)>& accept,
                  std::size_t max_visited, std::size_t min_size) {
  struct Rec {
    int parent;
    RuleInstance inst;
    Structure s;
  };
  ClimbResult res;
  std::vector<Rec> nodes;
  std::unordered_map<std::string, int> index;
  Structure root = canonicalize(target);
  nodes.push_back({-1, {}, root});
  index.emplace(render(root), 0);
  auto found = [&](int leaf) {
    Derivation d;
    for (int i = leaf;;) {
      const Rec& n = nodes[static_cast<std::size_t>(i)];
      d.steps.push_back(n.s);
      if (n.parent < 0) break;
      d.links.push_back(n.inst);
      i = n.parent;
    }
    res.visited = nodes.size();
    res.derivation = std::move(d);
    return res;
  };
  if (accept(root)) return found(0);
  for (std::size_t cur = 0; cur < nodes.size(); ++cur) {
    Structure x = nodes[cur].s;
    for (Rule rule : {Rule::AiDown, Rule::Switch, Rule::QDown, Rule::UDown})
      for (auto& inst : find_redexes(x, rule, Direction::Up)) {
        Structure p = apply_found(x, inst, Direction::Up);
        if (min_size > 0 && size(p) < min_size) continue;
        if (!index.emplace(render(p), static_cast<int>(nodes.size())).second) continue;
        if (nodes.size() >= max_visited) {
          res.visited = nodes.size();
          return res;
        }
        nodes.push_back({static_cast<int>(cur), std::move(inst), p});
        if (accept(p)) return found(static_cast<int>(nodes.size()) - 1);
      }
  }
  res.visited = nodes.size();
  res.exhausted = true;
  return res;
}

std::optional<Derivation> find_derivation(const Structure& premise, const Structure& conclusion,
                                          std::size_t max_visited) {
  Structure from = canonicalize(premise);
  if (charge(from) != charge(conclusion)) return std::nullopt;
  std::string want = render(from);
  // Reading upward sizes only shrink, so anything smaller than the premise is a dead end.
  ClimbResult r = climb(conclusion, [&](const Structure& q) { return render(q) == want; }, max_visited,
                        size(from));
  if (!r.derivation) return std::nullopt;
  Derivation d = with_premise(*r.derivation, premise);
  require_valid(d, bvq_rules(), "find_derivation");
  return d;
}

} // namespace bvq
