#include "coldl/optimize.hpp"

#include <algorithm>
#include <set>

namespace coldl {

namespace {

std::vector<std::string> bound_vars(const Relation& partial, const std::set<std::string>& wanted) {
  std::vector<std::string> out;
  for (const auto& a : partial.attributes())
    if (wanted.count(a)) out.push_back(a);
  return out;
}

// Distinct bindings of `vars` in `partial`, or nullopt past `limit`.
std::optional<std::vector<Substitution>> distinct_bindings(const Relation& partial,
                                                           std::span<const std::string> vars, std::size_t limit) {
  std::vector<std::size_t> cols;
  for (const auto& v : vars) cols.push_back(static_cast<std::size_t>(partial.index_of(v)));
  std::set<std::vector<Id>> seen;
  std::vector<Id> key(cols.size());
  for (std::size_t r = 0; r < partial.size(); ++r) {
    auto row = partial.row(r);
    for (std::size_t i = 0; i < cols.size(); ++i) key[i] = row[cols[i]];
    if (seen.insert(key).second && seen.size() > limit) return std::nullopt;
  }
  std::vector<Substitution> out;
  for (const auto& k : seen) {
    Substitution s;
    for (std::size_t i = 0; i < vars.size(); ++i) s.emplace(vars[i], Term::constant(k[i]));
    out.push_back(std::move(s));
  }
  return out;
}

Substitution row_binding(const Relation& rel, std::size_t r) {
  Substitution s;
  auto row = rel.row(r);
  for (std::size_t c = 0; c < rel.arity(); ++c) s.emplace(rel.attributes()[c], Term::constant(row[c]));
  return s;
}

// Joins the matches of `atoms`; nullopt when none could be evaluated.
std::optional<Relation> evaluate_atoms(std::span<const Atom> atoms, const FactSource& facts) {
  std::optional<Relation> acc;
  for (const Atom& a : atoms) {
    std::optional<Relation> m = facts.match(a);
    if (!m) continue;
    if (!acc) {
      acc = std::move(*m);
    } else {
      std::vector<std::string> shared;
      for (const auto& v : m->attributes())
        if (acc->index_of(v) >= 0) shared.push_back(v);
      acc = hash_join(*acc, *m, shared);
    }
    if (acc->empty()) break;
  }
  if (acc) acc->sort_dedup();
  return acc;
}

}  // namespace

bool should_check_dynamic(const Relation& partial, std::span<const std::string> vars, std::size_t limit) {
  return distinct_bindings(partial, vars, limit).has_value();
}

Decision prune_mismatch(const PruneContext& ctx, std::size_t dyn_limit) {
  const Atom& atom = ctx.rule->body.at(ctx.k);
  const Rule renamed = rename_apart(*ctx.producer, variables(*ctx.rule));
  if (!unify(renamed.head, atom)) return Decision::drop;
  if (!ctx.partial) return Decision::keep;
  const auto vars = bound_vars(*ctx.partial, variables(atom));
  if (vars.empty() && !ctx.partial->empty()) return Decision::keep;
  const auto bindings = distinct_bindings(*ctx.partial, vars, dyn_limit);
  if (!bindings) return Decision::keep;
  for (const auto& sigma : *bindings)
    if (unify(renamed.head, apply_subst(atom, sigma))) return Decision::keep;
  return Decision::drop;
}

Decision prune_redundant(const PruneContext& ctx, std::size_t dyn_limit, const FactSource* facts) {
  const Rule& rule = *ctx.rule;
  const auto resolved = resolve(rule, ctx.k, *ctx.producer);
  if (!resolved) return Decision::keep;
  if (is_trivially_redundant(*resolved)) return Decision::drop;
  if (!ctx.partial) return Decision::keep;
  const auto vars = bound_vars(*ctx.partial, variables(rule));
  if (vars.empty() && !ctx.partial->empty()) return Decision::keep;
  const auto bindings = distinct_bindings(*ctx.partial, vars, dyn_limit);
  if (!bindings) return Decision::keep;

  const std::size_t spliced = ctx.producer->body.size();
  for (const auto& sigma : *bindings) {
    const auto r_sigma = resolve(apply_subst(rule, sigma), ctx.k, *ctx.producer);
    if (!r_sigma || is_trivially_redundant(*r_sigma)) continue;
    if (!facts) return Decision::keep;
    std::vector<Atom> probe;
    for (std::size_t i = ctx.k; i < ctx.k + spliced; ++i)
      if (r_sigma->body[i].pred != rule.head.pred) probe.push_back(r_sigma->body[i]);
    const auto ext = evaluate_atoms(probe, *facts);
    if (!ext) return Decision::keep;
    if (ext->empty()) continue;
    if (ext->size() > dyn_limit) return Decision::keep;
    for (std::size_t r = 0; r < ext->size(); ++r)
      if (!is_trivially_redundant(apply_subst(*r_sigma, row_binding(*ext, r)))) return Decision::keep;
  }
  return Decision::drop;
}

std::vector<std::size_t> subsuming_rules(const Rule& rule, std::size_t k, const Rule& producer,
                                         std::span<const Rule> candidates) {
  std::vector<std::size_t> out;
  const auto resolved = resolve(rule, k, producer);
  if (!resolved) return out;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (subsumes(candidates[i], *resolved)) out.push_back(i);
  return out;
}

Decision prune_subsumed_static(const Rule& rule, std::size_t k, const Rule& producer,
                               std::span<const Rule* const> applied_since) {
  const auto resolved = resolve(rule, k, producer);
  if (!resolved) return Decision::keep;
  for (const Rule* r : applied_since)
    if (subsumes(*r, *resolved)) return Decision::drop;
  return Decision::keep;
}

}  // namespace coldl
