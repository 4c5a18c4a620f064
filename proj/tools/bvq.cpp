#include "bvq/lambda.hpp"
#include "bvq/prover.hpp"
#include "bvq/splitting.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace bvq;
using nlohmann::json;

namespace {

constexpr int kUsage = 64;
constexpr int kInput = 65;
constexpr int kInternal = 70;

// Bad input the user can fix; maps to exit 65.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  bool json = false;
  bool top_down = false;
};

json read_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open " + file);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(file + ": " + e.what());
  }
}

void write_json(const std::string& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw InputError("cannot write " + file);
  out << j.dump(2) << '\n';
}

Derivation read_derivation(const std::string& file, RuleSet* allowed = nullptr) {
  json j = read_json(file);
  try {
    return derivation_from_json(j, allowed);
  } catch (const json::exception& e) {
    throw InputError(file + ": " + e.what());
  }
}

Structure read_structure(const std::string& text) {
  try {
    return parse_structure(text);
  } catch (const ParseError& e) {
    throw InputError("structure, column " + std::to_string(e.pos + 1) + ": " + e.what());
  }
}

LambdaTerm read_term(const std::string& text) {
  try {
    return parse_term(text);
  } catch (const ParseError& e) {
    throw InputError("term, column " + std::to_string(e.pos + 1) + ": " + e.what());
  }
}

Path read_path(const std::string& text) {
  Path p;
  if (text.empty() || text == "-") return p;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      int i = std::stoi(tok, &used);
      if (used != tok.size() || i < 0) throw std::invalid_argument(tok);
      p.push_back(i);
    } catch (const std::exception&) {
      throw InputError("bad path component '" + tok + "'");
    }
  }
  return p;
}

std::size_t columns(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

// Display layout: premise on top, each later line labelled with the rule that
// derives it from the line above. --top-down starts from the conclusion.
void print_derivation(const Derivation& d, const Options& o) {
  std::size_t w = 0;
  for (const auto& l : d.links) w = std::max(w, columns(rule_name(l.rule)));
  auto pad = [&](const std::string& label) { return label + std::string(w - columns(label), ' ') + "  "; };
  std::vector<std::string> lines;
  lines.push_back(pad("") + render(d.steps[0]));
  for (std::size_t i = 0; i < d.links.size(); ++i)
    lines.push_back(pad(rule_name(d.links[i].rule)) + render(d.steps[i + 1]));
  if (o.top_down) std::reverse(lines.begin(), lines.end());
  for (const auto& l : lines) std::cout << l << '\n';
}

json trace_json(const ReductionTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"path", render(s.path)}, {"rules", step_rules(s)}, {"before", render(s.before)},
                     {"after", render(s.after)}});
  return {{"from", render(t.from)}, {"to", render(t.to)}, {"rules", trace_rules(t)}, {"steps", steps}};
}

void print_trace(const ReductionTrace& t) {
  std::cout << render(t.from) << '\n';
  for (const auto& s : t.steps) {
    auto r = step_rules(s);
    std::string rules;
    for (const auto& x : r) rules += (rules.empty() ? "" : " ") + x;
    std::cout << "  -> " << render(s.after) << "    [" << rules << " at " << render(s.path) << "]\n";
  }
  std::cout << trace_rules(t) << '\n';
}

json derivation_summary(const Derivation& d) {
  return {{"premise", render(d.premise())}, {"conclusion", render(d.conclusion())}, {"length", d.length()}};
}

// ---------------------------------------------------------------------------

int cmd_normalize(const Options& o, const std::string& text) {
  Structure s = read_structure(text);
  Structure c = canonicalize(s);
  if (o.json) {
    std::cout << json{{"input", render(s)}, {"canonical", render(c)}, {"size", size(c)}}.dump(2) << '\n';
  } else {
    std::cout << render(c) << '\n';
  }
  return 0;
}

int cmd_check(const Options& o, const std::string& file, const std::string& allowed_text) {
  RuleSet allowed;
  Derivation d = read_derivation(file, &allowed);
  if (!allowed_text.empty()) {
    try {
      allowed = parse_rule_set(allowed_text);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
  CheckReport r = check(d, allowed);
  if (o.json) {
    json j = derivation_summary(d);
    j["ok"] = r.ok;
    j["allowed"] = rule_set_name(allowed);
    j["proof"] = d.is_proof();
    if (!r.ok) {
      j["link"] = r.link;
      j["message"] = r.message;
    }
    std::cout << j.dump(2) << '\n';
  } else if (r.ok) {
    std::cout << "valid " << rule_set_name(allowed) << " " << (d.is_proof() ? "proof" : "derivation") << ", "
              << d.length() << " links\n  premise    " << render(d.premise()) << "\n  conclusion "
              << render(d.conclusion()) << '\n';
  } else {
    std::cout << "invalid at link " << r.link << ": " << r.message << '\n';
  }
  return r.ok ? 0 : 1;
}

int cmd_prove(const Options& o, const std::string& text, const std::string& system, std::size_t max_steps,
              const std::string& emit) {
  Structure s = read_structure(text);
  SearchConfig cfg;
  cfg.max_steps = max_steps;
  if (system == "bvq") cfg.system = System::BVQ;
  else if (system == "sbvq") cfg.system = System::SBVQ;
  else throw InputError("unknown system '" + system + "'");
  SearchResult r = prove(s, cfg);
  RuleSet rules = system_rules(cfg.system);
  if (r.proof && !emit.empty()) write_json(emit, to_json(*r.proof, rules));
  if (o.json) {
    json j{{"structure", render(s)},
           {"system", system},
           {"status", status_name(r.status)},
           {"visited", r.stats.visited},
           {"frontier_peak", r.stats.frontier_peak}};
    if (r.proof) j["proof"] = to_json(*r.proof, rules);
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << status_name(r.status) << " (" << r.stats.visited << " visited)\n";
    if (r.proof) print_derivation(*r.proof, o);
  }
  switch (r.status) {
  case Status::Proved:
    return 0;
  case Status::Refuted:
    return 1;
  case Status::BoundExceeded:
    return 2;
  }
  return kInternal;
}

int cmd_eliminate(const Options& o, const std::string& file, bool trace, const std::string& emit) {
  Derivation d = read_derivation(file);
  if (!d.is_proof()) throw InputError(file + ": not a proof (premise is not the unit)");
  CheckReport r = check(d, sbvq_rules());
  if (!r.ok) throw InputError(file + ": invalid at link " + std::to_string(r.link) + ": " + r.message);
  Elimination e = eliminate_up(d);
  json rounds = json::array();
  for (const auto& x : e.rounds)
    rounds.push_back(
        {{"rule", rule_name(x.rule)}, {"link", x.link}, {"up_before", x.up_before}, {"length", x.length}});
  if (!emit.empty()) {
    write_json(emit, to_json(e.proof, bvq_rules()));
    if (trace) {
      std::filesystem::path p(emit);
      p.replace_extension(".trace.json");
      write_json(p.string(), json{{"input", file}, {"rounds", rounds}});
    }
  }
  if (o.json) {
    json j = derivation_summary(e.proof);
    j["up_before"] = count_up(d);
    j["rounds"] = rounds;
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::cout << count_up(d) << " up instances eliminated in " << e.rounds.size() << " rounds, " << e.proof.length()
            << " links\n";
  if (trace)
    for (std::size_t i = 0; i < e.rounds.size(); ++i) {
      const auto& x = e.rounds[i];
      std::cout << "  round " << i + 1 << ": " << rule_name(x.rule) << " at link " << x.link << ", " << x.up_before
                << " up before, length " << x.length << '\n';
    }
  if (emit.empty()) print_derivation(e.proof, o);
  return 0;
}

int cmd_split(const Options& o, const std::string& file, const std::string& at, const std::string& shape,
              const std::string& out_dir) {
  Derivation d = read_derivation(file);
  CheckReport r = check(d, bvq_rules());
  if (!r.ok) throw InputError(file + ": not a BVQ derivation: link " + std::to_string(r.link) + ": " + r.message);
  if (!d.is_proof()) throw InputError(file + ": not a proof (premise is not the unit)");
  Path p = read_path(at);
  const Structure& whole = d.conclusion();
  if (!valid_path(whole, p)) throw InputError("path " + at + " does not address a subterm of the conclusion");
  Structure k = subterm(whole, p);
  Kind want = shape == "seq" ? Kind::Seq : shape == "copar" ? Kind::CoPar : shape == "sdq" ? Kind::Sdq : Kind::Unit;
  if (want == Kind::Unit) throw InputError("unknown shape '" + shape + "'");
  if (!k.is(want)) throw InputError("the subterm at " + at + " is " + render(k) + ", not a " + shape);
  // Split K as its first component against the rest.
  if (want != Kind::Sdq && k.kids().size() > 2) {
    std::vector<Structure> rest(k.kids().begin() + 1, k.kids().end());
    k = Structure::make(want, {k.kid(0), Structure::make(want, rest)});
  }
  Splitting sp = split(d, make_context(whole, p), k);
  Derivation glue = sp.builder(k);
  json bundle{{"shape", shape_name(sp.shape)},
              {"r", render(sp.r)},
              {"t", render(sp.t)},
              {"k1", render(sp.k1)},
              {"k2", render(sp.k2)},
              {"binders", sp.binders},
              {"glue", to_json(glue, bvq_rules())},
              {"left", to_json(sp.left, bvq_rules())},
              {"right", to_json(sp.right, bvq_rules())}};
  if (!sp.atom.empty()) bundle["atom"] = sp.atom;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json(out_dir + "/glue.json", bundle["glue"]);
    write_json(out_dir + "/left.json", bundle["left"]);
    write_json(out_dir + "/right.json", bundle["right"]);
    json meta = bundle;
    meta.erase("glue");
    meta.erase("left");
    meta.erase("right");
    write_json(out_dir + "/split.json", meta);
  }
  if (o.json) {
    std::cout << bundle.dump(2) << '\n';
    return 0;
  }
  std::cout << "K  = " << render(k) << "\nK1 = " << render(sp.k1) << "\nK2 = " << render(sp.k2) << '\n';
  if (!sp.binders.empty()) {
    std::cout << "binders:";
    for (const auto& b : sp.binders) std::cout << ' ' << b;
    std::cout << '\n';
  }
  std::cout << "glue  " << render(glue.premise()) << " ⊢ " << render(glue.conclusion()) << " (" << glue.length()
            << " links)\nleft  ⊢ " << render(sp.left.conclusion()) << " (" << sp.left.length()
            << " links)\nright ⊢ " << render(sp.right.conclusion()) << " (" << sp.right.length() << " links)\n";
  return 0;
}

int cmd_encode(const Options& o, const std::string& text, const std::string& chan) {
  LambdaTerm m = read_term(text);
  LinearityReport lin = check_linear(m);
  if (!lin.ok) {
    std::string msg = render(m) + " is not linear:";
    for (const auto& p : lin.problems) msg += "\n  " + p;
    throw InputError(msg);
  }
  Structure s;
  try {
    s = encode(m, chan);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (o.json) {
    std::cout << json{{"term", render(m)}, {"channel", chan}, {"encoding", render(s)}, {"size", size(s)}}.dump(2)
              << '\n';
  } else {
    std::cout << render(s) << '\n';
  }
  return 0;
}

int cmd_simulate(const Options& o, const std::string& text, const std::string& steps, const std::string& chan,
                 const std::string& emit) {
  LambdaTerm m = read_term(text);
  std::size_t k = kUnboundedSteps;
  if (steps != "all") {
    try {
      std::size_t used = 0;
      long long v = std::stoll(steps, &used);
      if (used != steps.size() || v < 0) throw std::invalid_argument(steps);
      k = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw InputError("--steps takes a count or 'all'");
    }
  }
  auto [t, d] = [&] {
    try {
      ReductionTrace t = reduce(m, k);
      return std::pair{t, compile_reduction(t, chan)};
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }();
  if (!emit.empty()) write_json(emit, to_json(d, bvq_rules()));
  if (o.json) {
    json j = derivation_summary(d);
    j["trace"] = trace_json(t);
    j["channel"] = chan;
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  print_trace(t);
  std::cout << '\n';
  print_derivation(d, o);
  return 0;
}

int cmd_decode(const Options& o, const std::string& file) {
  Derivation d = read_derivation(file);
  std::optional<ReductionTrace> decoded;
  try {
    decoded = decode_beta_chain(d);
  } catch (const BetaChainError& e) {
    if (o.json) std::cout << json{{"ok", false}, {"message", e.what()}}.dump(2) << '\n';
    else std::cout << e.what() << '\n';
    return 1;
  }
  const ReductionTrace& t = *decoded;
  if (o.json) {
    json j = trace_json(t);
    j["ok"] = true;
    std::cout << j.dump(2) << '\n';
  } else {
    print_trace(t);
  }
  return 0;
}

int cmd_enumerate(const Options& o, const std::string& atoms_text, std::size_t max_size, bool provable,
                  bool count_only) {
  std::vector<std::string> atoms;
  std::stringstream in(atoms_text);
  std::string a;
  while (std::getline(in, a, ','))
    if (!a.empty()) {
      if (!valid_ident(a)) throw InputError("bad ident '" + a + "'");
      atoms.push_back(a);
    }
  if (max_size > kEnumerationBound)
    throw InputError("--max-size is at most " + std::to_string(kEnumerationBound));
  std::size_t n = 0;
  json list = json::array();
  enumerate_structures(atoms, max_size, [&](const Structure& s) {
    if (provable && !oracle_provable(s)) return true;
    ++n;
    if (!count_only) {
      if (o.json) list.push_back(render(s));
      else std::cout << render(s) << '\n';
    }
    return true;
  });
  if (o.json) {
    json j{{"atoms", atoms}, {"max_size", max_size}, {"provable_only", provable}, {"count", n}};
    if (!count_only) j["structures"] = list;
    std::cout << j.dump(2) << '\n';
  } else if (count_only) {
    std::cout << n << '\n';
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep-inference prover and λ-calculus simulator for BVQ"};
  app.require_subcommand(1);
  Options opt;
  app.add_flag("--json", opt.json, "Print machine-readable reports");
  app.add_flag("--top-down", opt.top_down, "Print derivations from the conclusion upward");

  std::string a1, a2, a3, emit, allowed, system = "bvq", shape, chan = "o", steps = "1", atoms = "a,b,c";
  std::size_t max_steps = SearchConfig{}.max_steps, max_size = 4;
  bool trace = false, provable = false, count_only = false;

  auto* normalize = app.add_subcommand("normalize", "Print the canonical form of a structure");
  normalize->add_option("structure", a1)->required();

  auto* check_cmd = app.add_subcommand("check", "Check a derivation file");
  check_cmd->add_option("file", a1)->required();
  check_cmd->add_option("--allowed", allowed, "bvq, sbvq, down, up or a list of rule names");

  auto* prove_cmd = app.add_subcommand("prove", "Search for a proof (exit 0 proved, 1 refuted, 2 bound exceeded)");
  prove_cmd->add_option("structure", a1)->required();
  prove_cmd->add_option("--system", system)->check(CLI::IsMember({"bvq", "sbvq"}));
  prove_cmd->add_option("--max-steps", max_steps);
  prove_cmd->add_option("--emit", emit, "Write the proof to this file");

  auto* elim = app.add_subcommand("eliminate", "Turn an SBVQ proof into a BVQ proof");
  elim->add_option("file", a1)->required();
  elim->add_flag("--trace", trace, "Report every round; with --emit also write <emit>.trace.json");
  elim->add_option("--emit", emit, "Write the BVQ proof to this file");

  auto* split_cmd = app.add_subcommand("split", "Split a BVQ proof at a subterm of its conclusion");
  split_cmd->add_option("file", a1)->required();
  split_cmd->add_option("--at", a2, "Comma-separated child indices into the conclusion")->required();
  split_cmd->add_option("--shape", shape)->required()->check(CLI::IsMember({"seq", "copar", "sdq"}));
  split_cmd->add_option("--emit", emit, "Directory for glue.json, left.json, right.json and split.json");

  auto* enc = app.add_subcommand("encode", "Encode a linear λ-term");
  enc->add_option("term", a1)->required();
  enc->add_option("-o,--channel", chan, "Output channel");

  auto* sim = app.add_subcommand("simulate", "Reduce a λ-term and compile the reduction into BVQ");
  sim->add_option("term", a1)->required();
  sim->add_option("--steps", steps, "Number of reduction steps, or 'all'");
  sim->add_option("-o,--channel", chan, "Output channel");
  sim->add_option("--emit", emit, "Write the derivation to this file");

  auto* dec = app.add_subcommand("decode", "Read a beta-chain derivation back into a reduction");
  dec->add_option("file", a1)->required();

  auto* en = app.add_subcommand("enumerate", "List canonical structures up to a size");
  en->add_option("--atoms", atoms, "Comma-separated idents");
  en->add_option("--max-size", max_size);
  en->add_flag("--provable", provable, "Only provable ones");
  en->add_flag("--count", count_only, "Print the count only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*normalize) return cmd_normalize(opt, a1);
    if (*check_cmd) return cmd_check(opt, a1, allowed);
    if (*prove_cmd) return cmd_prove(opt, a1, system, max_steps, emit);
    if (*elim) return cmd_eliminate(opt, a1, trace, emit);
    if (*split_cmd) return cmd_split(opt, a1, a2, shape, emit);
    if (*enc) return cmd_encode(opt, a1, chan);
    if (*sim) return cmd_simulate(opt, a1, steps, chan, emit);
    if (*dec) return cmd_decode(opt, a1);
    if (*en) return cmd_enumerate(opt, atoms, max_size, provable, count_only);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const SplitSearchExhausted& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
