#include "oracle.hpp"

#include <fstream>
#include <functional>
#include <random>
#include <sstream>

namespace oracle {

bool is_var(const std::string& t) { return !t.empty() && std::isupper(static_cast<unsigned char>(t[0])); }

std::set<Tuple> apply_rule(const SRule& rule, const FactSet& facts) {
  std::set<Tuple> out;
  std::map<std::string, std::string> env;
  static const std::set<Tuple> none;
  std::function<void(std::size_t)> walk = [&](std::size_t i) {
    if (i == rule.body.size()) {
      Tuple t;
      for (const auto& term : rule.head.terms) t.push_back(is_var(term) ? env.at(term) : term);
      out.insert(t);
      return;
    }
    const SAtom& a = rule.body[i];
    auto it = facts.find(a.pred);
    const auto& rows = it == facts.end() ? none : it->second;
    for (const Tuple& row : rows) {
      if (row.size() != a.terms.size()) continue;
      const auto saved = env;
      bool ok = true;
      for (std::size_t p = 0; p < row.size() && ok; ++p) {
        const std::string& term = a.terms[p];
        if (!is_var(term)) {
          ok = term == row[p];
        } else {
          auto [pos, fresh] = env.emplace(term, row[p]);
          ok = fresh || pos->second == row[p];
        }
      }
      if (ok) walk(i + 1);
      env = saved;
    }
  };
  walk(0);
  return out;
}

FactSet naive_fixpoint(const std::vector<SRule>& rules, const FactSet& edb) {
  FactSet all = edb;
  std::set<std::string> idb;
  for (const auto& r : rules) idb.insert(r.head.pred);
  for (const auto& p : idb) all[p];
  bool changed = true;
  while (changed) {
    changed = false;
    FactSet next = all;
    for (const auto& r : rules)
      for (auto& t : apply_rule(r, all)) changed |= next[r.head.pred].insert(t).second;
    all = std::move(next);
  }
  FactSet out;
  for (const auto& p : idb) out[p] = all[p];
  return out;
}

namespace {

std::string atom_text(const SAtom& a) {
  std::string s = a.pred;
  if (a.terms.empty()) return s;
  s += '(';
  for (std::size_t i = 0; i < a.terms.size(); ++i) s += (i ? "," : "") + a.terms[i];
  return s + ')';
}

}  // namespace

Case random_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::vector<std::string> consts = {"a", "b", "c", "d", "e"};
  const std::vector<std::string> vars = {"X", "Y", "Z", "W"};

  Case c;
  const std::size_t n_edb = 1 + pick(3);
  std::vector<std::pair<std::string, std::size_t>> edb_preds, idb_preds;
  for (std::size_t i = 0; i < n_edb; ++i) edb_preds.emplace_back("e" + std::to_string(i), 1 + pick(3));
  const std::size_t n_idb = 1 + pick(5);
  for (std::size_t i = 0; i < n_idb; ++i) idb_preds.emplace_back("p" + std::to_string(i), pick(8) == 0 ? 0 : 1 + pick(3));

  const std::size_t n_facts = pick(31);
  for (std::size_t i = 0; i < n_facts; ++i) {
    const auto& [name, k] = edb_preds[pick(edb_preds.size())];
    Tuple t;
    for (std::size_t j = 0; j < k; ++j) t.push_back(consts[pick(consts.size())]);
    c.edb[name].insert(t);
  }

  // Every derived predicate heads at least one rule.
  const std::size_t n_rules = std::max<std::size_t>(n_idb, 1 + pick(8));
  for (std::size_t r = 0; r < n_rules; ++r) {
    const auto& [hname, hk] = idb_preds[r < n_idb ? r : pick(n_idb)];
    SRule rule;
    const std::size_t n_body = 1 + pick(3);
    std::vector<std::string> body_vars;
    for (std::size_t b = 0; b < n_body; ++b) {
      const bool use_idb = pick(2) == 0;
      const auto& [bname, bk] = use_idb ? idb_preds[pick(n_idb)] : edb_preds[pick(n_edb)];
      SAtom a{bname, {}};
      for (std::size_t j = 0; j < bk; ++j) {
        if (pick(7) == 0) {
          a.terms.push_back(consts[pick(consts.size())]);
        } else {
          a.terms.push_back(vars[pick(vars.size())]);
          body_vars.push_back(a.terms.back());
        }
      }
      rule.body.push_back(std::move(a));
    }
    rule.head.pred = hname;
    for (std::size_t j = 0; j < hk; ++j) {
      if (body_vars.empty() || pick(8) == 0)
        rule.head.terms.push_back(consts[pick(consts.size())]);
      else
        rule.head.terms.push_back(body_vars[pick(body_vars.size())]);
    }
    c.rules.push_back(std::move(rule));
  }

  std::ostringstream text;
  for (const auto& r : c.rules) {
    text << atom_text(r.head) << " :- ";
    for (std::size_t i = 0; i < r.body.size(); ++i) text << (i ? ", " : "") << atom_text(r.body[i]);
    text << ".\n";
  }
  c.text = text.str();
  std::ostringstream tsv;
  for (const auto& [p, rows] : c.edb)
    for (const auto& row : rows) {
      tsv << p;
      for (const auto& v : row) tsv << '\t' << v;
      tsv << '\n';
    }
  c.tsv = tsv.str();
  return c;
}

Loaded load(const Case& c) {
  Loaded l;
  l.program = coldl::parse_program(c.text, l.dict);
  l.program.canonicalize();
  l.edb = std::make_shared<coldl::EdbStore>();
  std::istringstream in(c.tsv);
  coldl::load_facts(in, coldl::FactFormat::tsv, *l.edb, l.dict, &l.program);
  l.edb->seal();
  return l;
}

FactSet engine_facts(const coldl::Materialization& m, const coldl::Program& original, const coldl::Dictionary& dict) {
  FactSet out;
  for (coldl::PredId p = 0; p < original.predicates().size(); ++p) {
    if (!original.is_idb(p)) continue;
    const auto& pred = original.predicate(p);
    auto& set = out[pred.name];
    const auto id = m.program->find_predicate(pred.name);
    if (!id) continue;
    if (pred.arity == 0) {
      if (m.store.fact_count(*id) > 0) set.insert(Tuple{});
      continue;
    }
    const auto rows = m.store.facts(*id);
    for (std::size_t r = 0; r < rows.size(); r += pred.arity) {
      Tuple t;
      for (std::size_t c = 0; c < pred.arity; ++c) t.push_back(dict.lookup(rows[r + c]));
      set.insert(t);
    }
  }
  return out;
}

std::set<std::map<std::string, coldl::Id>> as_bindings(const coldl::Relation& r) {
  std::set<std::map<std::string, coldl::Id>> out;
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::map<std::string, coldl::Id> b;
    for (std::size_t c = 0; c < r.arity(); ++c) b[r.attributes()[c]] = r.row(i)[c];
    out.insert(b);
  }
  return out;
}

std::set<std::map<std::string, coldl::Id>> nested_loop_join(const coldl::Relation& a, const coldl::Relation& b) {
  std::set<std::map<std::string, coldl::Id>> out;
  for (const auto& x : as_bindings(a))
    for (const auto& y : as_bindings(b)) {
      bool ok = true;
      for (const auto& [k, v] : y)
        if (auto it = x.find(k); it != x.end() && it->second != v) ok = false;
      if (!ok) continue;
      auto merged = x;
      merged.insert(y.begin(), y.end());
      out.insert(merged);
    }
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace oracle
