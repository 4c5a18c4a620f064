#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bvq {

enum class Kind : unsigned char { Unit, Atom, Not, Par, CoPar, Seq, Sdq };

class Structure;
using Path = std::vector<int>;

struct Node {
  Kind kind = Kind::Unit;
  std::string name;      // atom ident or Sdq binder
  bool negative = false; // atoms only
  std::vector<Structure> kids;
};

// Immutable, cheaply copyable handle. A default-constructed Structure is the unit.
class Structure {
public:
  Structure();

  static Structure unit();
  static Structure atom(std::string ident, bool negative = false);
  static Structure negation(Structure s);
  static Structure par(std::vector<Structure> kids);
  static Structure copar(std::vector<Structure> kids);
  static Structure seq(std::vector<Structure> kids);
  static Structure sdq(std::string binder, Structure body);
  static Structure make(Kind k, std::vector<Structure> kids);

  Kind kind() const { return n_->kind; }
  const std::string& name() const { return n_->name; }
  bool negative() const { return n_->negative; }
  const std::vector<Structure>& kids() const { return n_->kids; }
  const Structure& kid(std::size_t i) const { return n_->kids.at(i); }
  const Structure& body() const { return n_->kids.at(0); }

  bool is_unit() const { return n_->kind == Kind::Unit; }
  bool is_atom() const { return n_->kind == Kind::Atom; }
  bool is(Kind k) const { return n_->kind == k; }

  // Syntactic identity, not equivalence.
  bool same(const Structure& o) const;
  const Node* raw() const { return n_.get(); }

private:
  explicit Structure(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  std::shared_ptr<const Node> n_;
};

struct ParseError : std::runtime_error {
  std::size_t pos;
  ParseError(std::size_t p, const std::string& msg);
};

Structure parse_structure(std::string_view text);
std::string render(const Structure& s);

bool valid_ident(std::string_view id);

// Negation-normal form of Not(R).
Structure negate(const Structure& s);
// Pushes every Not node down to the atoms.
Structure push_negations(const Structure& s);

// How to decide whether a binder "effectively binds": Either counts a or ~a,
// PositiveOnly requires a positive occurrence.
enum class BindReading { Either, PositiveOnly };

std::size_t size(const Structure& s, BindReading r = BindReading::Either);

enum class NameReading { Effective, Syntactic };
struct NameSets {
  std::set<std::string> free;
  std::set<std::string> bound;
};
NameSets name_sets(const Structure& s, NameReading r = NameReading::Effective);
std::set<std::string> free_names(const Structure& s);
std::set<std::string> binder_names(const Structure& s);
bool occurs_free(const Structure& s, const std::string& ident);

// Fresh identifier derived from `base` that is not in `avoid`.
std::string fresh_ident(const std::string& base, const std::set<std::string>& avoid);

// R{to/from}: free occurrences of `from` (both polarities) become `to`.
// Binders that would capture `to` are renamed first.
Structure substitute(const Structure& s, const std::string& from, const std::string& to);

// Rename every binder of `s` that is in `avoid` to a fresh ident.
Structure rename_binders_away(const Structure& s, const std::set<std::string>& avoid);

Structure canonicalize(const Structure& s);
std::string canonical_text(const Structure& s);
bool equiv(const Structure& a, const Structure& b);

// Subterm addressing. Not and Sdq have their only child at index 0.
const Structure& subterm(const Structure& s, const Path& p);
Structure replace_at(const Structure& s, const Path& p, const Structure& with);
bool valid_path(const Structure& s, const Path& p);

// Every equivalence class of size <= max_size whose idents (free or bound) are
// drawn from `atoms`, each exactly once, in canonical form. Stops early when
// `visit` returns false.
constexpr std::size_t kEnumerationBound = 8;
void enumerate_structures(const std::vector<std::string>& atoms, std::size_t max_size,
                          const std::function<bool(const Structure&)>& visit);
std::vector<Structure> enumerate_structures(const std::vector<std::string>& atoms,
                                            std::size_t max_size);

} // namespace bvq
