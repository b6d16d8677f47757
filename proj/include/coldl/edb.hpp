#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coldl/columns.hpp"
#include "coldl/dictionary.hpp"
#include "coldl/lang.hpp"

namespace coldl {

enum class FactFormat { tsv, ntriples };

/// A contiguous slice of one permutation index. Row r, output column c is
/// rows[r * stride + components[c]]; rows are sorted on the output columns.
struct EdbSlice {
  std::span<const Id> rows;
  std::size_t stride = 0;
  std::vector<std::size_t> components;

  std::size_t size() const noexcept { return stride == 0 ? 0 : rows.size() / stride; }
};

/// In-memory base-fact store. Each predicate keeps its tuples in several
/// sorted permutation indexes: all k! orders for arity <= 3, the k cyclic
/// rotations above that.
class EdbStore {
 public:
  /// Throws ArityError if `name` was seen with another arity.
  void add_fact(std::string_view name, std::span<const Id> tuple);
  /// Adds the inline facts of a program.
  void add_facts(const Program& program);
  /// Builds the indexes. Required before any query; add_fact unseals.
  void seal();
  bool sealed() const noexcept { return sealed_; }

  bool has_predicate(std::string_view name) const;
  std::optional<std::size_t> arity(std::string_view name) const;
  /// Distinct tuples of a predicate (0 if unknown).
  std::size_t count(std::string_view name) const;
  std::size_t total_facts() const;
  std::vector<std::string> predicate_names() const;

  /// Tuples matching `terms`, projected onto the distinct variables in
  /// first-occurrence order and sorted lexicographically on them.
  Relation scan(std::string_view name, std::span<const Term> terms) const;
  Relation scan(const Atom& pattern, const Program& program) const;

  /// Index slice answering `terms` directly, available when the pattern has
  /// no repeated variable and some index orders the constants first followed
  /// by the variables in first-occurrence order.
  std::optional<EdbSlice> slice(std::string_view name, std::span<const Term> terms) const;

  /// All tuples in id order (row-major).
  std::vector<Id> tuples(std::string_view name) const;

  /// Number of permutation indexes held for a predicate.
  std::size_t index_count(std::string_view name) const;
  /// Rows of index `i` in its own column order, plus that order.
  std::pair<std::span<const Id>, std::span<const std::size_t>> index(std::string_view name, std::size_t i) const;

  /// Binary snapshot; constants are stored as strings.
  void save(std::ostream& out, const Dictionary& dict) const;
  /// Adds a snapshot's facts, interning its strings into `dict`.
  void load(std::istream& in, Dictionary& dict);

 private:
  struct Index {
    std::vector<std::size_t> order;
    std::vector<Id> rows;  // row-major, columns permuted by `order`
  };
  struct Table {
    std::size_t arity = 0;
    std::vector<Id> staged;
    bool nullary_present = false;
    std::vector<Index> indexes;
  };

  const Table& table(std::string_view name) const;
  const Table* find(std::string_view name) const;
  std::pair<std::size_t, std::size_t> prefix_range(const Index& ix, std::size_t arity,
                                                   std::span<const Id> prefix) const;

  std::map<std::string, Table, std::less<>> tables_;
  bool sealed_ = true;
};

/// Reads facts into `store` and seals it. Returns the number of distinct facts
/// in this source. N-Triples rows become `triple/3`. Throws InputError with the
/// line number for malformed lines, IDB predicates, or arity clashes with `program`.
std::size_t load_facts(std::istream& in, FactFormat format, EdbStore& store, Dictionary& dict,
                       const Program* program = nullptr);
std::size_t load_facts_file(const std::string& path, FactFormat format, EdbStore& store, Dictionary& dict,
                            const Program* program = nullptr);

/// Natural join of EDB atoms on shared variables. An empty list yields the unit relation.
Relation join_edb(std::span<const Atom> atoms, const Program& program, const EdbStore& store);

}  // namespace coldl
