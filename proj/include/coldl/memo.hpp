#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coldl/edb.hpp"
#include "coldl/lang.hpp"

namespace coldl {

/// Ground tuples, sorted and duplicate-free.
using TupleSet = std::vector<std::vector<Id>>;

/// Top-down evaluation of `query` with adorned input and answer tables,
/// repeated until no table changes. Returns the ground instances of `query`
/// in the least model, or nullopt when `budget` runs out first.
std::optional<TupleSet> qsqr_answer(const Atom& query, const Program& program, const EdbStore& edb,
                                    std::chrono::nanoseconds budget);

/// IDB body atoms up to variable renaming, minus those strictly more specific
/// than another candidate. Atoms with more constants come first.
std::vector<Atom> select_memo_candidates(const Program& program);

enum class MemoStatus { memoized, timed_out, failed };

struct MemoOutcome {
  Atom atom;
  MemoStatus status = MemoStatus::failed;
  /// Name of the EDB predicate holding the answers (memoized only).
  std::string memo_predicate;
  std::size_t fact_count = 0;
  double elapsed_ms = 0;
  std::string error;
};

struct MemoPlan {
  std::vector<MemoOutcome> outcomes;
  /// Program with memoized occurrences redirected to the memo predicates.
  Program program;
  /// Input facts plus the memo predicates.
  std::shared_ptr<EdbStore> edb;
  double total_ms = 0;

  std::size_t memoized_count() const;
};

/// Precomputes each candidate under its own time budget and redirects every
/// body atom that is an instance of a memoized candidate.
MemoPlan memoize(const Program& program, const EdbStore& edb, std::chrono::nanoseconds timeout_per_atom);

}  // namespace coldl
