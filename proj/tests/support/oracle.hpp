#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "coldl/engine.hpp"

namespace oracle {

using Tuple = std::vector<std::string>;
using FactSet = std::map<std::string, std::set<Tuple>>;

/// Variables start with an uppercase letter; everything else is a constant.
struct SAtom {
  std::string pred;
  std::vector<std::string> terms;
};

struct SRule {
  SAtom head;
  std::vector<SAtom> body;
};

bool is_var(const std::string& t);

/// Naive bottom-up evaluation: applies every rule to all known facts until
/// nothing changes. Returns derived facts only (predicates that head a rule).
FactSet naive_fixpoint(const std::vector<SRule>& rules, const FactSet& edb);

/// All ground instances of `head` produced by one rule over `facts` (nested loops).
std::set<Tuple> apply_rule(const SRule& rule, const FactSet& facts);

struct Case {
  std::vector<SRule> rules;
  FactSet edb;
  std::string text;  // rules in surface syntax
  std::string tsv;   // facts as tab-separated lines
};

/// Random program and database: at most 5 derived predicates of arity <= 3,
/// at most 8 rules, at most 30 base facts.
Case random_case(std::uint64_t seed);

/// Builds a program, store and dictionary from a case.
struct Loaded {
  coldl::Dictionary dict;
  coldl::Program program;
  std::shared_ptr<coldl::EdbStore> edb;
};
Loaded load(const Case& c);

/// Derived facts of a finished run, as strings (all IDB predicates of the original program).
FactSet engine_facts(const coldl::Materialization& m, const coldl::Program& original, const coldl::Dictionary& dict);

/// Nested-loop natural join on the shared attributes; output rows as (attribute -> value) maps.
std::set<std::map<std::string, coldl::Id>> nested_loop_join(const coldl::Relation& a, const coldl::Relation& b);
std::set<std::map<std::string, coldl::Id>> as_bindings(const coldl::Relation& r);

/// Reads a program text file from the test data directory.
std::string read_text(const std::string& path);

}  // namespace oracle
