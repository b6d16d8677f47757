#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "coldl/columns.hpp"
#include "coldl/edb.hpp"
#include "coldl/lang.hpp"
#include "coldl/stats.hpp"

namespace coldl {

/// Facts newly derived for one predicate by one rule application.
struct Block {
  std::uint64_t step = 0;
  std::size_t rule_index = 0;
  std::shared_ptr<const SortedTable> table;
};

/// Per-predicate block lists plus the step bookkeeping of the evaluation.
class BlockStore {
 public:
  BlockStore() = default;
  BlockStore(const Program& program);

  std::uint64_t step() const noexcept { return step_; }
  /// 0 when the rule was never applied.
  std::uint64_t last_applied(std::size_t rule) const { return last_applied_.at(rule); }

  const std::vector<Block>& blocks(PredId pred) const;
  /// Non-empty blocks of `pred` with lo <= step <= hi, in step order. Throws for EDB predicates.
  std::vector<const Block*> delta_range(PredId pred, std::uint64_t lo, std::uint64_t hi) const;

  std::size_t fact_count(PredId pred) const;
  std::size_t idb_fact_count() const;
  std::size_t block_count() const noexcept { return block_count_; }
  bool contains(PredId pred, std::span<const Id> row) const;
  /// Row-major union of all blocks of `pred`, sorted.
  std::vector<Id> facts(PredId pred) const;
  std::size_t arity(PredId pred) const { return arity_.at(pred); }
  std::size_t predicate_count() const noexcept { return blocks_.size(); }
  std::size_t storage_bytes() const;

  /// Starts step `step() + 1` applying `rule`.
  std::uint64_t begin_step(std::size_t rule);
  void add_block(PredId pred, Block block);

 private:
  std::vector<std::vector<Block>> blocks_;
  std::vector<std::size_t> arity_;
  std::vector<bool> idb_;
  std::vector<std::uint64_t> last_applied_;
  std::uint64_t step_ = 0;
  std::size_t block_count_ = 0;
};

enum class Schedule { round_robin, random };

struct MaterializeOptions {
  bool opt_mismatch = true;
  bool opt_redundancy = true;
  bool opt_subsumption = true;
  /// Re-evaluates every dropped block and throws if it would have added a fact.
  bool validate_drops = false;
  std::size_t dyn_check_limit = 32;
  std::size_t hash_row_threshold = 1000;
  std::size_t hash_block_threshold = 8;
  std::optional<std::chrono::milliseconds> timeout;
  std::optional<std::uint64_t> max_steps;
  Schedule schedule = Schedule::round_robin;
  std::uint64_t seed = 0;
  bool memo = false;
  std::chrono::milliseconds memo_timeout{1000};

  void disable_optimizations() { opt_mismatch = opt_redundancy = opt_subsumption = false; }
};

enum class RunStatus { fixpoint, timeout, step_limit };

/// Evaluates one program bottom-up, one rule per step.
class Materializer {
 public:
  /// `program` and `edb` must outlive the materializer.
  Materializer(const Program& program, const EdbStore& edb, MaterializeOptions options = {});
  ~Materializer();
  Materializer(const Materializer&) = delete;
  Materializer& operator=(const Materializer&) = delete;

  /// Applies one rule as the next step. Returns the new block, or null when nothing new was derived.
  const Block* apply_rule(std::size_t rule_index);

  /// Applies rules under the configured schedule until the fixpoint or a limit.
  RunStatus run();

  const Program& program() const noexcept { return program_; }
  const BlockStore& store() const noexcept { return store_; }
  /// Moves the blocks out; the materializer is unusable afterwards.
  BlockStore take_store() { return std::move(store_); }
  StatsReport& stats() noexcept { return stats_; }
  const StatsReport& stats() const noexcept { return stats_; }

 private:
  struct Impl;
  const Program& program_;
  BlockStore store_;
  StatsReport stats_;
  std::unique_ptr<Impl> impl_;
};

/// A finished evaluation. Owns the (possibly rewritten) program and EDB it ran on.
struct Materialization {
  std::shared_ptr<const Program> program;
  std::shared_ptr<const EdbStore> edb;
  BlockStore store;
  StatsReport stats;
  RunStatus status = RunStatus::fixpoint;

  /// Sorted IDB facts of `name` (row-major); empty for unknown or EDB names.
  std::vector<Id> facts(std::string_view name) const;
  std::size_t idb_fact_count() const { return store.idb_fact_count(); }
  std::size_t export_facts(const Dictionary& dict, std::ostream& out) const;
};

/// Runs memoization when enabled, then evaluates to the fixpoint.
Materialization materialize(const Program& program, std::shared_ptr<const EdbStore> edb,
                            const MaterializeOptions& options = {});

/// Writes IDB facts as `pred<TAB>term...` lines, predicates by name and facts
/// by their printed form. Returns the number of lines written.
std::size_t export_facts(const Program& program, const BlockStore& store, const Dictionary& dict, std::ostream& out);

/// Facts (IDB or EDB) matching an atom such as `T(X,pO,Y)`, printed as atoms
/// and sorted. Throws InputError for a predicate the run does not know.
std::vector<std::string> query_facts(const Materialization& result, Dictionary& dict, std::string_view pattern);

}  // namespace coldl
