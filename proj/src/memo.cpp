#include "coldl/memo.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace coldl {

namespace {

using Clock = std::chrono::steady_clock;

struct Timeout {};

/// Adornment of an atom given the bound variables: 'b' or 'f' per position.
std::string adornment(const Atom& a, const std::set<std::string>& bound) {
  std::string s;
  for (const Term& t : a.terms) s += (t.is_constant() || bound.count(t.name())) ? 'b' : 'f';
  return s;
}

std::vector<std::string> distinct_vars(const Atom& a) {
  std::vector<std::string> out;
  for (const Term& t : a.terms)
    if (t.is_variable() && std::find(out.begin(), out.end(), t.name()) == out.end()) out.push_back(t.name());
  return out;
}

std::vector<std::string> shared_attrs(const Relation& a, const Relation& b) {
  std::vector<std::string> out;
  for (const auto& v : b.attributes())
    if (a.index_of(v) >= 0) out.push_back(v);
  return out;
}

/// Bindings of the distinct variables of `atom` among `tuples`.
Relation match_tuples(const Atom& atom, const std::set<std::vector<Id>>& tuples) {
  const auto vars = distinct_vars(atom);
  Relation out(vars);
  std::vector<Id> row(vars.size());
  for (const auto& t : tuples) {
    std::map<std::string, Id> seen;
    bool ok = true;
    for (std::size_t i = 0; i < atom.terms.size() && ok; ++i) {
      const Term& term = atom.terms[i];
      if (term.is_constant()) {
        ok = term.id() == t[i];
      } else {
        auto [it, fresh] = seen.emplace(term.name(), t[i]);
        ok = fresh || it->second == t[i];
      }
    }
    if (!ok) continue;
    for (std::size_t v = 0; v < vars.size(); ++v) row[v] = seen[vars[v]];
    out.add_row(row);
  }
  return out;
}

class Qsqr {
 public:
  Qsqr(const Program& program, const EdbStore& edb, Clock::time_point deadline)
      : program_(program), edb_(edb), deadline_(deadline) {}

  TupleSet run(const Atom& query) {
    std::vector<Id> input;
    for (const Term& t : query.terms)
      if (t.is_constant()) input.push_back(t.id());
    inputs_[{query.pred, adornment(query, {})}].insert(input);
    bool changed = true;
    while (changed) {
      changed = false;
      // Snapshot the keys: evaluating a rule may register new subqueries.
      std::vector<std::pair<PredId, std::string>> keys;
      for (const auto& [k, v] : inputs_) keys.push_back(k);
      for (const auto& [pred, adorn] : keys) {
        for (std::size_t r = 0; r < program_.rules().size(); ++r) {
          const Rule& rule = program_.rules()[r];
          if (rule.head.pred != pred) continue;
          check_deadline();
          changed |= evaluate(rule, adorn, inputs_[{pred, adorn}]);
        }
      }
      changed |= inputs_size() != last_inputs_;
      last_inputs_ = inputs_size();
    }
    TupleSet out;
    const auto& all = answers_[query.pred];
    for (const auto& t : all) {
      std::set<std::vector<Id>> one{t};
      if (!match_tuples(query, one).empty()) out.push_back(t);
    }
    return out;
  }

 private:
  void check_deadline() const {
    if (Clock::now() >= deadline_) throw Timeout{};
  }

  std::size_t inputs_size() const {
    std::size_t n = 0;
    for (const auto& [k, v] : inputs_) n += v.size();
    return n;
  }

  // Head bindings from the input tuples of one adornment.
  Relation seed(const Rule& rule, const std::string& adorn, const std::set<std::vector<Id>>& input) const {
    std::vector<std::string> vars;
    for (std::size_t i = 0; i < adorn.size(); ++i) {
      const Term& t = rule.head.terms[i];
      if (adorn[i] == 'b' && t.is_variable() && std::find(vars.begin(), vars.end(), t.name()) == vars.end())
        vars.push_back(t.name());
    }
    Relation out(vars);
    std::vector<Id> row(vars.size());
    for (const auto& in : input) {
      std::map<std::string, Id> seen;
      bool ok = true;
      std::size_t c = 0;
      for (std::size_t i = 0; i < adorn.size() && ok; ++i) {
        if (adorn[i] != 'b') continue;
        const Id v = in[c++];
        const Term& t = rule.head.terms[i];
        if (t.is_constant()) {
          ok = t.id() == v;
        } else {
          auto [it, fresh] = seen.emplace(t.name(), v);
          ok = fresh || it->second == v;
        }
      }
      if (!ok) continue;
      for (std::size_t v = 0; v < vars.size(); ++v) row[v] = seen[vars[v]];
      out.add_row(row);
    }
    out.sort_dedup();
    return out;
  }

  const Relation& edb_scan(const Atom& a) {
    auto it = edb_cache_.find(a);
    if (it == edb_cache_.end()) it = edb_cache_.emplace(a, edb_.scan(a, program_)).first;
    return it->second;
  }

  // Sideways passing: repeatedly takes the body atom with the most bound
  // positions, preferring EDB atoms on ties.
  bool evaluate(const Rule& rule, const std::string& adorn, const std::set<std::vector<Id>>& input) {
    Relation acc = seed(rule, adorn, input);
    std::vector<bool> done(rule.body.size(), false);
    for (std::size_t step = 0; step < rule.body.size() && !acc.empty(); ++step) {
      check_deadline();
      std::set<std::string> bound(acc.attributes().begin(), acc.attributes().end());
      std::size_t best = rule.body.size();
      long best_score = -1;
      for (std::size_t i = 0; i < rule.body.size(); ++i) {
        if (done[i]) continue;
        const std::string ad = adornment(rule.body[i], bound);
        long score = 2 * static_cast<long>(std::count(ad.begin(), ad.end(), 'b')) +
                     (program_.is_idb(rule.body[i].pred) ? 0 : 1);
        if (score > best_score) {
          best_score = score;
          best = i;
        }
      }
      done[best] = true;
      const Atom& atom = rule.body[best];
      Relation right;
      if (!program_.is_idb(atom.pred)) {
        right = edb_scan(atom);
      } else {
        const std::string ad = adornment(atom, bound);
        auto& in = inputs_[{atom.pred, ad}];
        std::vector<std::size_t> cols;
        for (const Term& t : atom.terms)
          if (t.is_variable() && bound.count(t.name())) cols.push_back(static_cast<std::size_t>(acc.index_of(t.name())));
        std::vector<Id> key;
        for (std::size_t r = 0; r < acc.size(); ++r) {
          key.clear();
          auto row = acc.row(r);
          std::size_t c = 0;
          for (const Term& t : atom.terms) {
            if (t.is_constant()) key.push_back(t.id());
            else if (bound.count(t.name())) key.push_back(row[cols[c++]]);
          }
          in.insert(key);
        }
        right = match_tuples(atom, answers_[atom.pred]);
      }
      acc = hash_join(acc, right, shared_attrs(acc, right));
      acc.sort_dedup();
    }
    if (acc.empty()) return false;
    auto& answers = answers_[rule.head.pred];
    const std::size_t before = answers.size();
    std::vector<Id> fact(rule.head.terms.size());
    for (std::size_t r = 0; r < acc.size(); ++r) {
      auto row = acc.row(r);
      for (std::size_t i = 0; i < fact.size(); ++i) {
        const Term& t = rule.head.terms[i];
        fact[i] = t.is_constant() ? t.id() : row[static_cast<std::size_t>(acc.index_of(t.name()))];
      }
      answers.insert(fact);
    }
    return answers.size() != before;
  }

  const Program& program_;
  const EdbStore& edb_;
  Clock::time_point deadline_;
  std::map<std::pair<PredId, std::string>, std::set<std::vector<Id>>> inputs_;
  std::map<PredId, std::set<std::vector<Id>>> answers_;
  std::map<Atom, Relation> edb_cache_;
  std::size_t last_inputs_ = 0;
};

std::size_t constant_count(const Atom& a) {
  return static_cast<std::size_t>(std::count_if(a.terms.begin(), a.terms.end(), [](const Term& t) { return t.is_constant(); }));
}

Program rebuild(const Program& source, const std::vector<std::pair<Atom, PredId>>& redirects,
                const std::vector<Predicate>& extra) {
  Program out;
  for (const auto& p : source.predicates()) out.intern_predicate(p.name, p.arity);
  for (const auto& p : extra) out.intern_predicate(p.name, p.arity);
  for (const Rule& r : source.rules()) {
    Rule copy;
    copy.head = r.head;
    for (std::size_t i = 0; i < r.body.size(); ++i) {
      Atom a = r.source_order.empty() ? r.body[i] : r.body[r.source_order[i]];
      for (const auto& [pattern, target] : redirects) {
        if (a.pred == pattern.pred && atom_subsumes(pattern, a)) {
          a.pred = target;
          break;
        }
      }
      copy.body.push_back(std::move(a));
    }
    out.add_rule(std::move(copy));
  }
  out.facts = source.facts;
  out.canonicalize();
  return out;
}

}  // namespace

std::optional<TupleSet> qsqr_answer(const Atom& query, const Program& program, const EdbStore& edb,
                                    std::chrono::nanoseconds budget) {
  if (!program.is_idb(query.pred)) throw Error("qsqr_answer: query predicate must be IDB");
  if (budget <= std::chrono::nanoseconds::zero()) return std::nullopt;
  try {
    Qsqr q(program, edb, Clock::now() + budget);
    return q.run(query);
  } catch (const Timeout&) {
    return std::nullopt;
  }
}

std::vector<Atom> select_memo_candidates(const Program& program) {
  std::vector<Atom> distinct;
  for (const Rule& r : program.rules())
    for (const Atom& a : r.body) {
      if (!program.is_idb(a.pred)) continue;
      if (std::none_of(distinct.begin(), distinct.end(), [&](const Atom& b) { return is_variant(a, b); }))
        distinct.push_back(a);
    }
  std::vector<Atom> out;
  for (const Atom& a : distinct) {
    const bool dominated = std::any_of(distinct.begin(), distinct.end(), [&](const Atom& b) {
      return b.pred == a.pred && !is_variant(a, b) && atom_subsumes(b, a);
    });
    if (!dominated) out.push_back(a);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Atom& a, const Atom& b) { return constant_count(a) > constant_count(b); });
  return out;
}

std::size_t MemoPlan::memoized_count() const {
  return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](const MemoOutcome& o) {
    return o.status == MemoStatus::memoized;
  }));
}

MemoPlan memoize(const Program& program, const EdbStore& edb, std::chrono::nanoseconds timeout_per_atom) {
  const auto start = Clock::now();
  MemoPlan plan;
  plan.edb = std::make_shared<EdbStore>(edb);
  std::vector<std::pair<Atom, PredId>> redirects;
  std::vector<Predicate> extra;
  std::set<std::string> taken;
  for (const auto& p : program.predicates()) taken.insert(p.name);
  for (const Atom& cand : select_memo_candidates(program)) {
    MemoOutcome outcome;
    outcome.atom = cand;
    const auto t0 = Clock::now();
    try {
      auto answers = qsqr_answer(cand, program, edb, timeout_per_atom);
      if (answers) {
        const Predicate& p = program.predicate(cand.pred);
        std::string name;
        for (std::size_t n = 0;; ++n) {
          name = p.name + "__memo" + std::to_string(n);
          if (taken.insert(name).second) break;
        }
        for (const auto& t : *answers) plan.edb->add_fact(name, t);
        const PredId target = static_cast<PredId>(program.predicates().size() + extra.size());
        extra.push_back({name, p.arity, PredicateClass::edb});
        redirects.emplace_back(cand, target);
        outcome.status = MemoStatus::memoized;
        outcome.memo_predicate = name;
        outcome.fact_count = answers->size();
      } else {
        outcome.status = MemoStatus::timed_out;
      }
    } catch (const std::exception& e) {
      outcome.status = MemoStatus::failed;
      outcome.error = e.what();
    }
    outcome.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    plan.outcomes.push_back(std::move(outcome));
  }
  plan.edb->seal();
  plan.program = redirects.empty() ? program : rebuild(program, redirects, extra);
  plan.total_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  return plan;
}

}  // namespace coldl
