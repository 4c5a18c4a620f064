// Acceptance run: one PASS/FAIL line per criterion, exit 1 when any fails.
//
//   acceptance [--corpus-seconds S] [--only N,...]

#include "fixtures.hpp"

#include "bvq/lambda.hpp"
#include "bvq/prover.hpp"
#include "bvq/splitting.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

using namespace bvq;
using S = Structure;

namespace {

// Pinned thresholds.
constexpr double kNotTrueSeconds = 5.0;   // criterion 2
constexpr std::size_t kCorpusMaxSize = 8; // criteria 3-5
constexpr std::size_t kCorpusAtoms = 3;
constexpr std::size_t kFixtureCount = 50;     // criterion 6
constexpr double kFixtureSeconds = 10.0;
constexpr std::size_t kLambdaTerms = 100;     // criteria 8-10
constexpr std::size_t kLambdaMaxAbs = 8;
constexpr std::uint64_t kLambdaSeed = 20240611;
constexpr double kDefaultCorpusSeconds = 240.0;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::map<int, std::pair<bool, std::string>> verdicts;
std::set<int> selected;

bool wanted(int n) { return selected.empty() || selected.count(n); }

// Lines are printed in criterion order at the end; stderr shows progress.
void report(int n, bool ok, const std::string& what) {
  verdicts[n] = {ok, what};
  std::cerr << "criterion " << n << (ok ? " passed" : " failed") << std::endl;
}

std::string fmt(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fs", seconds);
  return buf;
}

// Criterion 7 looks at every derivation the other criteria build.
struct Affinity {
  std::size_t derivations = 0, links = 0, violations = 0;
  std::string first;
  void add(const Derivation& d, const std::string& where) {
    ++derivations;
    links += d.length();
    auto v = affinity_violations(d);
    if (!v.empty() && first.empty()) first = where + ", link " + std::to_string(v.front());
    violations += v.size();
  }
} affinity;

// ---------------------------------------------------------------------------

void criterion1() {
  struct Case {
    const char* text;
    std::size_t want;
  };
  std::vector<Case> cases{{"[a, ~a]", 2}, {"all b.[a, ~a]", 2}, {"all a.[a, ~a]", 3}};
  std::string got;
  bool ok = true;
  for (const auto& c : cases) {
    std::size_t n = size(parse_structure(c.text));
    ok = ok && n == c.want;
    got += (got.empty() ? "" : ", ") + std::string("size(") + c.text + ") = " + std::to_string(n);
  }
  report(1, ok, got);
}

void criterion2() {
  auto t0 = Clock::now();
  LambdaTerm m = parse_term("Not True");
  LambdaTerm target = parse_term("\\x. \\y. True y x");
  std::string why;
  bool ok = false;
  try {
    ReductionTrace t = reduce(m, 1);
    Derivation d = compile_reduction(t, "o");
    double dt = since(t0);
    affinity.add(d, "Not True");
    CheckReport rep = check(d, bvq_rules());
    bool concl = equiv(d.conclusion(), encode(m, "o"));
    bool prem = equiv(d.premise(), encode(target, "o"));
    ok = rep.ok && concl && prem && dt < kNotTrueSeconds && alpha_equal(t.to, target);
    why = std::to_string(d.length()) + " links, " + (rep.ok ? "BVQ-valid" : "invalid: " + rep.message) +
          ", conclusion " + (concl ? "≈" : "≉") + " ⟦Not True⟧o, premise " + (prem ? "≈" : "≉") +
          " ⟦λx.λy.True y x⟧o, " + fmt(dt) + " (limit " + fmt(kNotTrueSeconds) + ")";
  } catch (const std::exception& e) {
    why = std::string("threw: ") + e.what();
  }
  report(2, ok, why);
}

// Criteria 3-5 share one pass over the corpus.
struct Corpus {
  std::size_t structures = 0, provable = 0;
  std::size_t complete_size = 0; // every structure up to this size was checked
  std::map<std::size_t, std::size_t> per_size;
  bool finished = false;
  std::size_t decompositions = 0, decomposition_bad = 0;
  std::size_t sbvq_bad = 0, sbvq_bound = 0;
  std::size_t splits = 0, split_bad = 0;
  std::string first3, first4, first5;
  double seconds = 0;
};

bool oracle(const S& s) {
  static std::unordered_map<std::string, bool> memo;
  std::string key = canonical_text(s);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  bool v = oracle_provable(s);
  memo.emplace(key, v);
  return v;
}

S of(Kind k, std::vector<S> v) {
  if (v.empty()) return S::unit();
  if (v.size() == 1) return v[0];
  return S::make(k, std::move(v));
}

void decomposition(Corpus& c, const S& s, bool whole) {
  auto agree = [&](bool rhs, const std::string& what) {
    ++c.decompositions;
    if (whole == rhs) return;
    ++c.decomposition_bad;
    if (c.first3.empty()) c.first3 = render(s) + " (" + what + ")";
  };
  if (s.is(Kind::Seq)) {
    const auto& k = s.kids();
    for (std::size_t i = 1; i < k.size(); ++i) {
      S r = of(Kind::Seq, {k.begin(), k.begin() + static_cast<long>(i)});
      S t = of(Kind::Seq, {k.begin() + static_cast<long>(i), k.end()});
      agree(oracle(r) && oracle(t), "seq at " + std::to_string(i));
    }
  } else if (s.is(Kind::CoPar)) {
    const auto& k = s.kids();
    for (std::size_t i = 0; i < k.size(); ++i) {
      std::vector<S> rest;
      for (std::size_t j = 0; j < k.size(); ++j)
        if (j != i) rest.push_back(k[j]);
      agree(oracle(k[i]) && oracle(of(Kind::CoPar, rest)), "copar kid " + std::to_string(i));
    }
  } else if (s.is(Kind::Sdq)) {
    std::set<std::string> avoid = free_names(s);
    for (const auto& n : binder_names(s)) avoid.insert(n);
    std::string b = fresh_ident("b", avoid);
    agree(oracle(substitute(s.body(), s.name(), b)), "binder");
  }
}

void splitting_contracts(Corpus& c, const S& s) {
  std::vector<S> kids = s.is(Kind::Par) ? s.kids() : std::vector<S>{s};
  std::optional<Derivation> proof;
  for (std::size_t i = 0; i < kids.size(); ++i) {
    const S& k = kids[i];
    if (!k.is(Kind::Seq) && !k.is(Kind::CoPar) && !k.is(Kind::Sdq)) continue;
    if (!proof) {
      SearchResult r = prove(s);
      if (!r.proof) {
        ++c.split_bad;
        if (c.first5.empty()) c.first5 = render(s) + ": no BVQ proof found";
        return;
      }
      proof = r.proof;
      affinity.add(*proof, "corpus proof of " + render(s));
    }
    std::vector<S> rest;
    for (std::size_t j = 0; j < kids.size(); ++j)
      if (j != i) rest.push_back(kids[j]);
    S p = of(Kind::Par, rest);
    // Every way to cut a Seq in two; each CoPar component against the rest.
    std::vector<std::pair<S, S>> sides;
    if (k.is(Kind::Seq)) {
      const auto& l = k.kids();
      for (std::size_t j = 1; j < l.size(); ++j)
        sides.emplace_back(of(Kind::Seq, {l.begin(), l.begin() + static_cast<long>(j)}),
                           of(Kind::Seq, {l.begin() + static_cast<long>(j), l.end()}));
    } else if (k.is(Kind::CoPar)) {
      const auto& l = k.kids();
      for (std::size_t j = 0; j < l.size(); ++j) {
        std::vector<S> others;
        for (std::size_t m = 0; m < l.size(); ++m)
          if (m != j) others.push_back(l[m]);
        sides.emplace_back(l[j], of(Kind::CoPar, others));
      }
    } else {
      sides.emplace_back(k.body(), S::unit());
    }
    for (const auto& [r, t] : sides) {
      ++c.splits;
      std::string where = render(s) + " at " + render(k);
      auto fail = [&](const std::string& why) {
        ++c.split_bad;
        if (c.first5.empty()) c.first5 = where + ": " + why;
      };
      auto valid = [&](const Derivation& d, const S& premise, const S& conclusion, const std::string& name) {
        affinity.add(d, name + " of " + where);
        CheckReport rep = check(d, bvq_rules());
        if (!rep.ok) return fail(name + " invalid: " + rep.message), false;
        if (!equiv(d.premise(), premise) || !equiv(d.conclusion(), conclusion))
          return fail(name + " has the wrong endpoints"), false;
        return true;
      };
      try {
        if (k.is(Kind::Seq)) {
          SplitSeqResult sp = shallow_split_seq(*proof, r, t, p);
          valid(sp.glue, S::seq({sp.p1, sp.p2}), p, "glue") &&
              valid(sp.left, S::unit(), S::par({r, sp.p1}), "left") &&
              valid(sp.right, S::unit(), S::par({t, sp.p2}), "right");
        } else if (k.is(Kind::CoPar)) {
          SplitParResult sp = shallow_split_copar(*proof, r, t, p);
          valid(sp.glue, S::par({sp.p1, sp.p2}), p, "glue") &&
              valid(sp.left, S::unit(), S::par({r, sp.p1}), "left") &&
              valid(sp.right, S::unit(), S::par({t, sp.p2}), "right");
        } else {
          SplitSdqResult sp = shallow_split_sdq(*proof, k.name(), r, p);
          valid(sp.glue, S::sdq(k.name(), sp.t), p, "glue") &&
              valid(sp.witness, S::unit(), S::par({r, sp.t}), "witness");
        }
      } catch (const std::exception& e) {
        fail(std::string("threw: ") + e.what());
      }
    }
  }
}

// One enumeration pass running the checks of the criteria in `which`.
Corpus sweep_corpus(double budget, const std::set<int>& which) {
  Corpus c;
  std::vector<std::string> atoms{"a", "b", "c"};
  atoms.resize(kCorpusAtoms);
  auto t0 = Clock::now();
  std::size_t current = 0;
  bool out_of_time = false;
  enumerate_structures(atoms, kCorpusMaxSize, [&](const S& s) {
    std::size_t n = size(s);
    if (n != current) {
      if (since(t0) > budget) {
        out_of_time = true;
        return false;
      }
      c.complete_size = current;
      current = n;
    }
    if (since(t0) > budget) {
      out_of_time = true;
      return false;
    }
    ++c.structures;
    ++c.per_size[n];
    bool whole = oracle(s);
    if (whole) ++c.provable;
    if (which.count(3)) decomposition(c, s, whole);
    if (which.count(4)) {
      SearchConfig cfg;
      cfg.system = System::SBVQ;
      SearchResult r = prove(s, cfg);
      bool sb = r.status == Status::Proved;
      if (r.status == Status::BoundExceeded) ++c.sbvq_bound;
      if (sb != whole) {
        ++c.sbvq_bad;
        if (c.first4.empty()) c.first4 = render(s) + (whole ? " provable, SBVQ search: " : " unprovable, SBVQ search: ") +
                                         status_name(r.status);
      }
      if (r.proof) affinity.add(*r.proof, "SBVQ proof of " + render(s));
    }
    if (which.count(5) && whole) splitting_contracts(c, s);
    return true;
  });
  if (!out_of_time) {
    c.finished = true;
    c.complete_size = kCorpusMaxSize;
  }
  c.seconds = since(t0);
  return c;
}

std::string coverage(const Corpus& c) {
  std::ostringstream o;
  o << c.structures << " structures over " << kCorpusAtoms << " idents in " << fmt(c.seconds);
  if (c.finished) {
    o << ", every size up to " << kCorpusMaxSize;
    return o.str();
  }
  o << "; complete up to size " << c.complete_size;
  auto it = c.per_size.find(c.complete_size + 1);
  if (it != c.per_size.end()) o << ", " << it->second << " of size " << c.complete_size + 1;
  o << "; sizes " << c.complete_size + 1 << ".." << kCorpusMaxSize << " not covered";
  return o.str();
}

void criteria3to5(double budget) {
  // The SBVQ search costs far more per structure than the oracle, so it gets
  // its own pass and half the budget instead of holding back the other two.
  std::set<int> cheap, costly;
  for (int n : {3, 5})
    if (wanted(n)) cheap.insert(n);
  if (wanted(4)) costly.insert(4);
  if (cheap.empty() && costly.empty()) return;
  double share = cheap.empty() || costly.empty() ? budget : budget / 2;
  if (!cheap.empty()) {
    Corpus c = sweep_corpus(share, cheap);
    std::string cov = coverage(c);
    if (wanted(3))
      report(3, c.finished && c.decomposition_bad == 0,
             std::to_string(c.decomposition_bad) + " discrepancies in " + std::to_string(c.decompositions) +
                 " decompositions (" + std::to_string(c.provable) + " provable); " + cov +
                 (c.first3.empty() ? "" : "; first: " + c.first3));
    if (wanted(5))
      report(5, c.finished && c.split_bad == 0,
             std::to_string(c.splits - c.split_bad) + "/" + std::to_string(c.splits) +
                 " shallow splits checked; " + cov + (c.first5.empty() ? "" : "; first failure: " + c.first5));
  }
  if (!costly.empty()) {
    Corpus c = sweep_corpus(share, costly);
    report(4, c.finished && c.sbvq_bad == 0,
           std::to_string(c.sbvq_bad) + " discrepancies between SBVQ search and the BVQ oracle (" +
               std::to_string(c.sbvq_bound) + " SBVQ bound hits); " + coverage(c) +
               (c.first4.empty() ? "" : "; first: " + c.first4));
  }
}

void criterion6() {
  auto fixtures = testing::elimination_fixtures();
  std::size_t ok = 0, with_up = 0;
  double worst = 0;
  std::string first;
  for (const auto& f : fixtures) {
    if (count_up(f.proof) > 0 && check(f.proof, sbvq_rules()).ok && f.proof.is_proof()) ++with_up;
    affinity.add(f.proof, "fixture " + f.name);
    auto t0 = Clock::now();
    try {
      Elimination e = eliminate_up(f.proof);
      double dt = since(t0);
      worst = std::max(worst, dt);
      affinity.add(e.proof, "elimination of " + f.name);
      bool good = check(e.proof, bvq_rules()).ok && count_up(e.proof) == 0 && e.proof.is_proof() &&
                  equiv(e.proof.conclusion(), f.proof.conclusion()) && dt < kFixtureSeconds;
      if (good) ++ok;
      else if (first.empty()) first = f.name + " (" + fmt(dt) + ")";
    } catch (const std::exception& e) {
      worst = std::max(worst, since(t0));
      if (first.empty()) first = f.name + ": " + e.what();
    }
  }
  bool pass = fixtures.size() == kFixtureCount && with_up == kFixtureCount && ok == kFixtureCount;
  report(6, pass,
         std::to_string(ok) + "/" + std::to_string(fixtures.size()) + " SBVQ proofs turned into BVQ proofs, slowest " +
             fmt(worst) + " (limit " + fmt(kFixtureSeconds) + ")" + (first.empty() ? "" : "; first failure: " + first));
}

std::size_t occurrences(const S& s, const std::string& x) {
  if (s.is_atom()) return s.name() == x ? 1 : 0;
  std::size_t n = 0;
  for (const auto& k : s.kids()) n += occurrences(k, x);
  return n;
}

void criteria8to10() {
  if (!wanted(8) && !wanted(9) && !wanted(10)) return;
  std::mt19937_64 rng(kLambdaSeed);
  std::size_t compiled = 0, round_trips = 0, linear_ok = 0, encoded = 0, steps = 0;
  std::string first8, first9, first10;
  auto t0 = Clock::now();
  auto channel_check = [&](const LambdaTerm& m) {
    ++encoded;
    S e = encode(m, "o");
    std::set<std::string> want = free_vars(m);
    want.insert("o");
    bool good = occurrences(e, "o") == 1 && free_names(e) == want;
    if (good) ++linear_ok;
    else if (first10.empty()) first10 = render(m);
  };
  for (std::size_t i = 0; i < kLambdaTerms; ++i) {
    LambdaTerm m = random_linear_term(rng, kLambdaMaxAbs);
    std::string name = render(m);
    try {
      ReductionTrace t = reduce(m);
      steps += t.steps.size();
      if (wanted(10)) {
        channel_check(t.from);
        for (const auto& s : t.steps) channel_check(s.after);
      }
      if (!wanted(8) && !wanted(9)) continue;
      Derivation d = compile_reduction(t, "o");
      affinity.add(d, "compilation of " + name);
      CheckReport rep = check(d, bvq_rules());
      bool ends = equiv(d.conclusion(), encode(t.from, "o")) && equiv(d.premise(), encode(t.to, "o"));
      if (rep.ok && ends) ++compiled;
      else if (first8.empty()) first8 = name + (rep.ok ? ": wrong endpoints" : ": " + rep.message);
      if (!wanted(9)) continue;
      try {
        ReductionTrace back = decode_beta_chain(d);
        bool same = alpha_equal(back.from, t.from) && alpha_equal(back.to, t.to) && back.steps.size() == t.steps.size();
        for (std::size_t j = 0; same && j < t.steps.size(); ++j)
          same = back.steps[j].path == t.steps[j].path && alpha_equal(back.steps[j].before, t.steps[j].before) &&
                 alpha_equal(back.steps[j].after, t.steps[j].after);
        if (same) ++round_trips;
        else if (first9.empty()) first9 = name + ": decoded a different trace";
      } catch (const std::exception& e) {
        if (first9.empty()) first9 = name + ": " + e.what();
      }
    } catch (const std::exception& e) {
      if (first8.empty()) first8 = name + ": " + e.what();
    }
  }
  double dt = since(t0);
  if (wanted(8))
    report(8, compiled == kLambdaTerms,
           std::to_string(compiled) + "/" + std::to_string(kLambdaTerms) + " reductions (" + std::to_string(steps) +
               " steps, ≤ " + std::to_string(kLambdaMaxAbs) + " abstractions, seed " + std::to_string(kLambdaSeed) +
               ") compiled to valid derivations with the right endpoints, " + fmt(dt) +
               (first8.empty() ? "" : "; first failure: " + first8));
  if (wanted(9)) {
    // ((λx.x) u) v: the derivation moves v next to the abstraction and
    // substitutes it, ending at ⟦v u⟧, which is no reduct.
    std::size_t rejected = 0;
    std::string why;
    Derivation bad = derive_misplaced_argument("x", LambdaTerm::var("x"), LambdaTerm::var("u"), LambdaTerm::var("v"), "o");
    affinity.add(bad, "misplaced argument");
    bool bad_valid = check(bad, bvq_rules()).ok;
    for (const auto& d : {bad, tag_macro(bad, "beta")}) {
      try {
        decode_beta_chain(d);
      } catch (const BetaChainError& e) {
        ++rejected;
        why = e.what();
      } catch (const std::exception& e) {
        why = std::string("unexpected error: ") + e.what();
      }
    }
    report(9, round_trips == kLambdaTerms && bad_valid && rejected == 2,
           std::to_string(round_trips) + "/" + std::to_string(kLambdaTerms) +
               " traces decoded back unchanged; the BVQ-valid derivation ⟦v u⟧o ⊢ ⟦(λx.x) u v⟧o rejected " +
               std::to_string(rejected) + "/2 times (untagged, tagged as beta)" +
               (first9.empty() ? "" : "; first failure: " + first9) + (why.empty() ? "" : "; last message: " + why));
  }
  if (wanted(10))
    report(10, linear_ok == encoded && encoded > 0,
           std::to_string(linear_ok) + "/" + std::to_string(encoded) +
               " encodings have o exactly once and FN = FV ∪ {o}" + (first10.empty() ? "" : "; first: " + first10));
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  double corpus_seconds = kDefaultCorpusSeconds;
  std::vector<int> only;
  app.add_option("--corpus-seconds", corpus_seconds, "Time budget for the corpus sweep of criteria 3-5");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  selected.insert(only.begin(), only.end());

  if (wanted(1)) criterion1();
  if (wanted(2)) criterion2();
  criteria3to5(corpus_seconds);
  if (wanted(6)) criterion6();
  criteria8to10();
  if (wanted(7))
    report(7, affinity.violations == 0 && affinity.derivations > 0,
           std::to_string(affinity.violations) + " violations over " + std::to_string(affinity.derivations) +
               " derivations (" + std::to_string(affinity.links) + " links)" +
               (affinity.first.empty() ? "" : "; first: " + affinity.first));

  std::size_t failed = 0;
  for (const auto& [n, v] : verdicts) {
    failed += v.first ? 0 : 1;
    std::cout << (v.first ? "PASS" : "FAIL") << "  criterion " << n << ": " << v.second << '\n';
  }
  std::cout << verdicts.size() - failed << "/" << verdicts.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
