#include "coldl/edb.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

namespace coldl {

namespace {

std::vector<std::vector<std::size_t>> index_orders(std::size_t arity) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> order(arity);
  std::iota(order.begin(), order.end(), 0);
  if (arity <= 3) {
    do out.push_back(order);
    while (std::next_permutation(order.begin(), order.end()));
  } else {
    for (std::size_t r = 0; r < arity; ++r) {
      out.push_back(order);
      std::rotate(order.begin(), order.begin() + 1, order.end());
    }
  }
  return out;
}

struct PatternShape {
  std::vector<std::string> vars;               // distinct, first-occurrence order
  std::vector<std::size_t> var_pos;            // first position of each var
  std::vector<std::size_t> const_pos;
  std::vector<std::pair<std::size_t, std::size_t>> repeats;  // (position, first position)
};

PatternShape shape_of(std::span<const Term> terms) {
  PatternShape s;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].is_constant()) {
      s.const_pos.push_back(i);
      continue;
    }
    auto it = std::find(s.vars.begin(), s.vars.end(), terms[i].name());
    if (it == s.vars.end()) {
      s.vars.push_back(terms[i].name());
      s.var_pos.push_back(i);
    } else {
      s.repeats.emplace_back(i, s.var_pos[static_cast<std::size_t>(it - s.vars.begin())]);
    }
  }
  return s;
}

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw InputError("truncated snapshot");
  return v;
}

constexpr char kMagic[] = "COLDLEDB1";

}  // namespace

// ---------------------------------------------------------------------------
// EdbStore

void EdbStore::add_fact(std::string_view name, std::span<const Id> tuple) {
  auto it = tables_.find(name);
  if (it == tables_.end()) {
    it = tables_.emplace(std::string(name), Table{}).first;
    it->second.arity = tuple.size();
  } else if (it->second.arity != tuple.size()) {
    throw ArityError("predicate '" + std::string(name) + "' used with arity " + std::to_string(tuple.size()) +
                     " and " + std::to_string(it->second.arity));
  }
  Table& t = it->second;
  if (t.arity == 0) {
    t.nullary_present = true;
    return;
  }
  if (!t.indexes.empty()) {
    t.staged = std::move(t.indexes.front().rows);
    t.indexes.clear();
  }
  t.staged.insert(t.staged.end(), tuple.begin(), tuple.end());
  sealed_ = false;
}

void EdbStore::add_facts(const Program& program) {
  std::vector<Id> tuple;
  for (const Atom& f : program.facts) {
    tuple.clear();
    for (const Term& t : f.terms) tuple.push_back(t.id());
    add_fact(program.predicate(f.pred).name, tuple);
  }
}

void EdbStore::seal() {
  for (auto& [name, t] : tables_) {
    if (t.arity == 0 || !t.indexes.empty()) continue;
    sort_unique_rows(t.staged, t.arity);
    const std::size_t n = t.staged.size() / t.arity;
    for (auto& order : index_orders(t.arity)) {
      Index ix;
      ix.order = order;
      if (t.indexes.empty()) {
        ix.rows = t.staged;
      } else {
        ix.rows.resize(t.staged.size());
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < t.arity; ++c) ix.rows[r * t.arity + c] = t.staged[r * t.arity + order[c]];
        sort_unique_rows(ix.rows, t.arity);
      }
      t.indexes.push_back(std::move(ix));
    }
    t.staged.clear();
    t.staged.shrink_to_fit();
  }
  sealed_ = true;
}

const EdbStore::Table* EdbStore::find(std::string_view name) const {
  auto it = tables_.find(name);
  return it == tables_.end() ? nullptr : &it->second;
}

const EdbStore::Table& EdbStore::table(std::string_view name) const {
  const Table* t = find(name);
  if (!t) throw Error("unknown EDB predicate '" + std::string(name) + "'");
  return *t;
}

bool EdbStore::has_predicate(std::string_view name) const { return find(name) != nullptr; }

std::optional<std::size_t> EdbStore::arity(std::string_view name) const {
  const Table* t = find(name);
  if (!t) return std::nullopt;
  return t->arity;
}

std::size_t EdbStore::count(std::string_view name) const {
  const Table* t = find(name);
  if (!t) return 0;
  if (t->arity == 0) return t->nullary_present ? 1 : 0;
  if (!sealed_) throw Error("EdbStore queried before seal()");
  return t->indexes.empty() ? 0 : t->indexes.front().rows.size() / t->arity;
}

std::size_t EdbStore::total_facts() const {
  std::size_t total = 0;
  for (const auto& [name, t] : tables_) total += count(name);
  return total;
}

std::vector<std::string> EdbStore::predicate_names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : tables_) out.push_back(name);
  return out;
}

std::vector<Id> EdbStore::tuples(std::string_view name) const {
  const Table* t = find(name);
  if (!t || t->arity == 0) return {};
  if (!sealed_) throw Error("EdbStore queried before seal()");
  return t->indexes.empty() ? std::vector<Id>{} : t->indexes.front().rows;
}

std::size_t EdbStore::index_count(std::string_view name) const { return table(name).indexes.size(); }

std::pair<std::span<const Id>, std::span<const std::size_t>> EdbStore::index(std::string_view name,
                                                                             std::size_t i) const {
  const Index& ix = table(name).indexes.at(i);
  return {ix.rows, ix.order};
}

std::pair<std::size_t, std::size_t> EdbStore::prefix_range(const Index& ix, std::size_t arity,
                                                           std::span<const Id> prefix) const {
  const std::size_t n = ix.rows.size() / arity;
  auto cmp_row = [&](std::size_t r) {
    for (std::size_t c = 0; c < prefix.size(); ++c) {
      const Id v = ix.rows[r * arity + c];
      if (v != prefix[c]) return v < prefix[c] ? -1 : 1;
    }
    return 0;
  };
  std::size_t lo = 0, hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (cmp_row(mid) < 0) lo = mid + 1; else hi = mid;
  }
  std::size_t first = lo;
  hi = n;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (cmp_row(mid) <= 0) lo = mid + 1; else hi = mid;
  }
  return {first, lo};
}

Relation EdbStore::scan(std::string_view name, std::span<const Term> terms) const {
  const PatternShape s = shape_of(terms);
  Relation out(s.vars);
  const Table* t = find(name);
  if (!t) return out;
  if (t->arity != terms.size())
    throw ArityError("predicate '" + std::string(name) + "' has arity " + std::to_string(t->arity));
  if (t->arity == 0) return t->nullary_present ? Relation::unit() : out;
  if (!sealed_) throw Error("EdbStore queried before seal()");
  if (t->indexes.empty()) return out;

  // Prefer the index ordered constants, then variables in first-occurrence order.
  const Index* best = nullptr;
  std::size_t best_consts = 0;
  bool sorted_output = false;
  for (const Index& ix : t->indexes) {
    if (std::is_permutation(s.const_pos.begin(), s.const_pos.end(), ix.order.begin()) &&
        std::equal(s.var_pos.begin(), s.var_pos.end(), ix.order.begin() + static_cast<std::ptrdiff_t>(s.const_pos.size()))) {
      best = &ix;
      best_consts = s.const_pos.size();
      sorted_output = true;
      break;
    }
    std::size_t lead = 0;
    while (lead < ix.order.size() && terms[ix.order[lead]].is_constant()) ++lead;
    if (!best || lead > best_consts) {
      best = &ix;
      best_consts = lead;
    }
  }

  const std::size_t k = t->arity;
  std::vector<std::size_t> col_of(k);
  for (std::size_t c = 0; c < k; ++c) col_of[best->order[c]] = c;
  std::vector<Id> prefix;
  for (std::size_t c = 0; c < best_consts; ++c) prefix.push_back(terms[best->order[c]].id());
  auto [lo, hi] = prefix_range(*best, k, prefix);

  std::vector<Id>& data = out.mutable_data();
  std::size_t rows = 0;
  for (std::size_t r = lo; r < hi; ++r) {
    const Id* row = &best->rows[r * k];
    bool ok = true;
    for (std::size_t p : s.const_pos) ok = ok && row[col_of[p]] == terms[p].id();
    for (const auto& [p, q] : s.repeats) ok = ok && row[col_of[p]] == row[col_of[q]];
    if (!ok) continue;
    for (std::size_t p : s.var_pos) data.push_back(row[col_of[p]]);
    ++rows;
  }
  out.set_row_count(rows);
  if (!sorted_output) out.sort_dedup();
  return out;
}

Relation EdbStore::scan(const Atom& pattern, const Program& program) const {
  return scan(program.predicate(pattern.pred).name, pattern.terms);
}

std::optional<EdbSlice> EdbStore::slice(std::string_view name, std::span<const Term> terms) const {
  const PatternShape s = shape_of(terms);
  if (!s.repeats.empty()) return std::nullopt;
  const Table* t = find(name);
  if (!t || t->arity == 0 || t->arity != terms.size() || t->indexes.empty() || !sealed_) return std::nullopt;
  const std::size_t k = t->arity;
  for (const Index& ix : t->indexes) {
    if (!std::is_permutation(s.const_pos.begin(), s.const_pos.end(), ix.order.begin())) continue;
    if (!std::equal(s.var_pos.begin(), s.var_pos.end(), ix.order.begin() + static_cast<std::ptrdiff_t>(s.const_pos.size())))
      continue;
    std::vector<Id> prefix;
    for (std::size_t c = 0; c < s.const_pos.size(); ++c) prefix.push_back(terms[ix.order[c]].id());
    auto [lo, hi] = prefix_range(ix, k, prefix);
    EdbSlice out;
    out.rows = std::span<const Id>(ix.rows).subspan(lo * k, (hi - lo) * k);
    out.stride = k;
    for (std::size_t c = 0; c < s.var_pos.size(); ++c) out.components.push_back(s.const_pos.size() + c);
    return out;
  }
  return std::nullopt;
}

void EdbStore::save(std::ostream& out, const Dictionary& dict) const {
  if (!sealed_) throw Error("EdbStore saved before seal()");
  std::unordered_map<Id, std::uint64_t> local;
  std::vector<Id> order;
  for (const auto& [name, t] : tables_)
    for (const Index& ix : t.indexes.empty() ? std::vector<Index>{} : std::vector<Index>{t.indexes.front()})
      for (Id v : ix.rows)
        if (local.emplace(v, order.size()).second) order.push_back(v);
  out.write(kMagic, sizeof kMagic);
  write_u64(out, order.size());
  for (Id v : order) {
    const std::string& s = dict.lookup(v);
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  write_u64(out, tables_.size());
  for (const auto& [name, t] : tables_) {
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, t.arity);
    if (t.arity == 0) {
      write_u64(out, t.nullary_present ? 1 : 0);
      continue;
    }
    const std::vector<Id>& rows = t.indexes.empty() ? std::vector<Id>{} : t.indexes.front().rows;
    write_u64(out, rows.size() / t.arity);
    for (Id v : rows) write_u64(out, local.at(v));
  }
  if (!out) throw Error("failed to write snapshot");
}

void EdbStore::load(std::istream& in, Dictionary& dict) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw InputError("not an EDB snapshot");
  auto read_string = [&] {
    const std::uint64_t len = read_u64(in);
    std::string s(len, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(len))) throw InputError("truncated snapshot");
    return s;
  };
  const std::uint64_t nstrings = read_u64(in);
  std::vector<Id> remap;
  remap.reserve(nstrings);
  for (std::uint64_t i = 0; i < nstrings; ++i) remap.push_back(dict.intern(read_string()));
  const std::uint64_t npreds = read_u64(in);
  std::vector<Id> tuple;
  for (std::uint64_t p = 0; p < npreds; ++p) {
    const std::string name = read_string();
    const std::uint64_t arity = read_u64(in);
    const std::uint64_t rows = read_u64(in);
    if (arity == 0) {
      if (rows) add_fact(name, {});
      continue;
    }
    tuple.resize(arity);
    for (std::uint64_t r = 0; r < rows; ++r) {
      for (auto& v : tuple) {
        const std::uint64_t local = read_u64(in);
        if (local >= remap.size()) throw InputError("corrupt snapshot");
        v = remap[local];
      }
      add_fact(name, tuple);
    }
  }
  seal();
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::string line_error(std::size_t line, const std::string& msg) { return "line " + std::to_string(line) + ": " + msg; }

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      default: out += s[i]; break;
    }
  }
  return out;
}

// One N-Triples term starting at `pos`; returns the interned string.
std::string nt_term(std::string_view line, std::size_t& pos, std::size_t lineno) {
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  if (pos >= line.size()) throw InputError(line_error(lineno, "expected a term"));
  const std::size_t start = pos;
  if (line[pos] == '<') {
    const std::size_t end = line.find('>', pos);
    if (end == std::string_view::npos) throw InputError(line_error(lineno, "unterminated IRI"));
    pos = end + 1;
    return std::string(line.substr(start, pos - start));
  }
  if (line.substr(pos, 2) == "_:") {
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
    return std::string(line.substr(start, pos - start));
  }
  if (line[pos] == '"') {
    ++pos;
    while (pos < line.size() && line[pos] != '"') pos += line[pos] == '\\' ? 2 : 1;
    if (pos >= line.size()) throw InputError(line_error(lineno, "unterminated literal"));
    const std::size_t close = pos++;
    if (pos < line.size() && line[pos] == '@') {
      while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
      return std::string(line.substr(start, pos - start));
    }
    if (line.substr(pos, 2) == "^^") {
      pos += 2;
      nt_term(line, pos, lineno);
      return std::string(line.substr(start, pos - start));
    }
    return unescape(line.substr(start + 1, close - start - 1));
  }
  throw InputError(line_error(lineno, "unexpected character '" + std::string(1, line[pos]) + "'"));
}

}  // namespace

std::size_t load_facts(std::istream& in, FactFormat format, EdbStore& store, Dictionary& dict,
                       const Program* program) {
  struct Pending {
    std::size_t arity = 0;
    std::vector<Id> rows;
    bool nullary = false;
  };
  std::map<std::string, Pending, std::less<>> pending;

  auto record = [&](std::string_view pred, const std::vector<std::string>& terms, std::size_t lineno) {
    if (program) {
      if (auto id = program->find_predicate(pred)) {
        const Predicate& p = program->predicate(*id);
        if (p.cls == PredicateClass::idb)
          throw InputError(line_error(lineno, "predicate '" + std::string(pred) + "' is derived by rules and cannot appear in data"));
        if (p.arity != terms.size())
          throw InputError(line_error(lineno, "predicate '" + std::string(pred) + "' has arity " + std::to_string(p.arity)));
      }
    }
    if (auto a = store.arity(pred); a && *a != terms.size())
      throw InputError(line_error(lineno, "predicate '" + std::string(pred) + "' has arity " + std::to_string(*a)));
    auto it = pending.find(pred);
    if (it == pending.end()) {
      it = pending.emplace(std::string(pred), Pending{}).first;
      it->second.arity = terms.size();
    } else if (it->second.arity != terms.size()) {
      throw InputError(line_error(lineno, "predicate '" + std::string(pred) + "' has arity " + std::to_string(it->second.arity)));
    }
    if (terms.empty()) it->second.nullary = true;
    for (const auto& t : terms) it->second.rows.push_back(dict.intern(t));
  };

  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (format == FactFormat::tsv) {
      fields.clear();
      std::size_t start = 0;
      while (true) {
        const std::size_t tab = line.find('\t', start);
        fields.emplace_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      if (fields.front().empty()) throw InputError(line_error(lineno, "missing predicate name"));
      for (std::size_t i = 1; i < fields.size(); ++i)
        if (fields[i].empty()) throw InputError(line_error(lineno, "empty term in column " + std::to_string(i + 1)));
      const std::string pred = fields.front();
      fields.erase(fields.begin());
      record(pred, fields, lineno);
    } else {
      std::size_t pos = 0;
      fields.clear();
      for (int i = 0; i < 3; ++i) fields.push_back(nt_term(line, pos, lineno));
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (pos >= line.size() || line[pos] != '.') throw InputError(line_error(lineno, "expected '.' after object"));
      ++pos;
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (pos < line.size() && line[pos] != '#') throw InputError(line_error(lineno, "trailing characters"));
      record("triple", fields, lineno);
    }
  }
  if (in.bad()) throw InputError("read error");

  std::size_t distinct = 0;
  std::vector<Id> empty;
  for (auto& [name, p] : pending) {
    if (p.arity == 0) {
      distinct += p.nullary ? 1 : 0;
      if (p.nullary) store.add_fact(name, empty);
      continue;
    }
    sort_unique_rows(p.rows, p.arity);
    distinct += p.rows.size() / p.arity;
    for (std::size_t r = 0; r < p.rows.size(); r += p.arity)
      store.add_fact(name, std::span<const Id>(p.rows.data() + r, p.arity));
  }
  store.seal();
  return distinct;
}

std::size_t load_facts_file(const std::string& path, FactFormat format, EdbStore& store, Dictionary& dict,
                            const Program* program) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path + "'");
  try {
    return load_facts(in, format, store, dict, program);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// EDB joins

Relation join_edb(std::span<const Atom> atoms, const Program& program, const EdbStore& store) {
  Relation acc = Relation::unit();
  for (const Atom& a : atoms) {
    Relation next = store.scan(a, program);
    if (acc.arity() == 0) {
      if (acc.empty()) break;
      acc = std::move(next);
      continue;
    }
    std::vector<std::string> shared;
    for (const auto& v : next.attributes())
      if (acc.index_of(v) >= 0) shared.push_back(v);
    acc = hash_join(acc, next, shared);
    if (acc.empty()) break;
  }
  // Attributes of a failed early exit still need to cover every variable.
  if (acc.empty()) {
    std::vector<std::string> attrs = acc.attributes();
    for (const Atom& a : atoms)
      for (const Term& t : a.terms)
        if (t.is_variable() && std::find(attrs.begin(), attrs.end(), t.name()) == attrs.end()) attrs.push_back(t.name());
    return Relation(attrs);
  }
  acc.sort_dedup();
  return acc;
}

}  // namespace coldl
