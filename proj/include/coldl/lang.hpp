#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coldl/common.hpp"
#include "coldl/dictionary.hpp"

namespace coldl {

/// A variable (symbolic name) or a constant (dictionary id).
class Term {
 public:
  static Term variable(std::string name) { return Term(std::move(name)); }
  static Term constant(Id id) { return Term(id); }

  bool is_variable() const noexcept { return is_var_; }
  bool is_constant() const noexcept { return !is_var_; }

  /// Only meaningful for variables.
  const std::string& name() const noexcept { return name_; }
  /// Only meaningful for constants.
  Id id() const noexcept { return id_; }

  friend bool operator==(const Term& a, const Term& b) noexcept {
    if (a.is_var_ != b.is_var_) return false;
    return a.is_var_ ? a.name_ == b.name_ : a.id_ == b.id_;
  }
  friend bool operator<(const Term& a, const Term& b) noexcept {
    if (a.is_var_ != b.is_var_) return a.is_var_ < b.is_var_;
    return a.is_var_ ? a.name_ < b.name_ : a.id_ < b.id_;
  }

 private:
  explicit Term(std::string name) : is_var_(true), name_(std::move(name)) {}
  explicit Term(Id id) : is_var_(false), id_(id) {}

  bool is_var_ = false;
  std::string name_;
  Id id_ = 0;
};

enum class PredicateClass { edb, idb };

struct Predicate {
  std::string name;
  std::size_t arity = 0;
  PredicateClass cls = PredicateClass::edb;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct Atom {
  PredId pred = 0;
  std::vector<Term> terms;

  bool is_ground() const;
  friend bool operator==(const Atom&, const Atom&) = default;
  friend bool operator<(const Atom& a, const Atom& b) {
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.terms < b.terms;
  }
};

struct Rule {
  Atom head;
  /// Canonical order once owned by a Program: EDB atoms first, otherwise stable.
  std::vector<Atom> body;
  /// source_order[i] is the body index of the i-th atom as written. Empty means identity.
  std::vector<std::size_t> source_order;

  friend bool operator==(const Rule& a, const Rule& b) { return a.head == b.head && a.body == b.body; }
};

/// Partial map from variable names to terms.
using Substitution = std::map<std::string, Term>;

/// A positive, function-free Datalog program plus any EDB facts written inline.
class Program {
 public:
  /// Registers `name/arity`; throws ArityError on a conflicting arity.
  PredId intern_predicate(std::string_view name, std::size_t arity);
  std::optional<PredId> find_predicate(std::string_view name) const;

  /// Checks safety and arities, marks the head predicate IDB. Throws SafetyError.
  void add_rule(Rule rule);

  /// Reorders every body EDB-first (stable) and records the source order.
  void canonicalize();

  const std::vector<Rule>& rules() const noexcept { return rules_; }
  const std::vector<Predicate>& predicates() const noexcept { return preds_; }
  const Predicate& predicate(PredId id) const { return preds_.at(id); }
  bool is_idb(PredId id) const { return preds_.at(id).cls == PredicateClass::idb; }

  /// Ground EDB facts that appeared in the rule text.
  std::vector<Atom> facts;

  friend bool operator==(const Program& a, const Program& b) {
    return a.preds_ == b.preds_ && a.rules_ == b.rules_ && a.facts == b.facts;
  }

 private:
  std::vector<Predicate> preds_;
  std::vector<Rule> rules_;
};

/// Parses rule text. Constants are interned into `dict`.
/// Throws ParseError, SafetyError, ArityError, or InputError (fact for an IDB predicate).
Program parse_program(std::string_view text, Dictionary& dict);

/// Parses a single atom such as `T(X,pO,Y)` against an existing program's registry.
/// Unknown predicates are registered as EDB with the written arity.
Atom parse_atom(std::string_view text, Program& program, Dictionary& dict);

std::string to_string(const Term& t, const Dictionary& dict);
std::string to_string(const Atom& a, const Program& p, const Dictionary& dict);
std::string to_string(const Rule& r, const Program& p, const Dictionary& dict);
/// Prints rules (bodies in source order) and inline facts; parse_program(to_string(P)) == P.
std::string to_string(const Program& p, const Dictionary& dict);

std::set<std::string> variables(const Atom& a);
std::set<std::string> variables(const Rule& r);

/// Most general unifier, or nullopt. When both sides hold a variable, the
/// variable of `a` is bound to the term of `b`.
std::optional<Substitution> unify(const Atom& a, const Atom& b);

Term apply_subst(const Term& t, const Substitution& s);
Atom apply_subst(const Atom& a, const Substitution& s);
Rule apply_subst(const Rule& r, const Substitution& s);

/// Renames every variable of `r` so that none occurs in `avoid` (appends primes).
Rule rename_apart(const Rule& r, const std::set<std::string>& avoid);

/// Backward chaining: replaces body atom `k` of `r` by the body of `producer`
/// (renamed apart) and applies the MGU of that atom and the producer's head.
std::optional<Rule> resolve(const Rule& r, std::size_t k, const Rule& producer);

/// True iff the head atom occurs syntactically in the body.
bool is_trivially_redundant(const Rule& r);

/// True iff some substitution θ maps head(general) onto head(specific) and
/// every body atom of `general` into body(specific). Implies specific(I) ⊆ general(I).
bool subsumes(const Rule& general, const Rule& specific);

/// True iff some substitution over the variables of `general` maps it onto `specific`.
bool atom_subsumes(const Atom& general, const Atom& specific);

/// Equal up to a bijective variable renaming.
bool is_variant(const Atom& a, const Atom& b);

}  // namespace coldl
