#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coldl/columns.hpp"
#include "coldl/lang.hpp"

namespace coldl {

enum class Decision { keep, drop };

/// Read access to the facts known at the time of a pruning decision.
class FactSource {
 public:
  virtual ~FactSource() = default;
  /// Bindings for the variables of `atom` (first-occurrence order) among the
  /// known facts, or nullopt when the lookup is judged too expensive.
  virtual std::optional<Relation> match(const Atom& atom) const = 0;
};

/// Inputs for deciding whether block `o` of body atom `k` can be skipped.
struct PruneContext {
  const Rule* rule = nullptr;
  std::size_t k = 0;                   // body index of the IDB atom q_k
  const Relation* partial = nullptr;   // R_k; null means no data-driven check
  const Rule* producer = nullptr;      // rule that created the block
  std::uint64_t block_step = 0;
};

/// True iff the distinct projection of `partial` onto `vars` has at most `limit` rows.
bool should_check_dynamic(const Relation& partial, std::span<const std::string> vars, std::size_t limit);

/// Drop when the producer's head cannot unify with q_k, either outright or
/// under every binding drawn from R_k.
Decision prune_mismatch(const PruneContext& ctx, std::size_t dyn_limit = 32);

/// Drop when the rule resolved with the producer is trivially redundant,
/// either outright or under every binding drawn from R_k. With a fact source,
/// each binding is extended by evaluating the producer's body atoms (other
/// than those over the head predicate) on the known facts.
Decision prune_redundant(const PruneContext& ctx, std::size_t dyn_limit = 32, const FactSource* facts = nullptr);

/// Drop when resolve(rule, k, producer) is subsumed by one of `applied_since`.
Decision prune_subsumed_static(const Rule& rule, std::size_t k, const Rule& producer,
                               std::span<const Rule* const> applied_since);

/// Rules among `candidates` that subsume resolve(rule, k, producer); empty when
/// the producer does not unify. Engines cache this per (rule, k, producer).
std::vector<std::size_t> subsuming_rules(const Rule& rule, std::size_t k, const Rule& producer,
                                         std::span<const Rule> candidates);

}  // namespace coldl
