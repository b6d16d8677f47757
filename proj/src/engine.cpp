#include "coldl/engine.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "coldl/memo.hpp"
#include "coldl/optimize.hpp"

namespace coldl {

// ---------------------------------------------------------------------------
// BlockStore

BlockStore::BlockStore(const Program& program)
    : blocks_(program.predicates().size()), last_applied_(program.rules().size(), 0) {
  for (const auto& p : program.predicates()) {
    arity_.push_back(p.arity);
    idb_.push_back(p.cls == PredicateClass::idb);
  }
}

const std::vector<Block>& BlockStore::blocks(PredId pred) const { return blocks_.at(pred); }

std::vector<const Block*> BlockStore::delta_range(PredId pred, std::uint64_t lo, std::uint64_t hi) const {
  if (!idb_.at(pred)) throw Error("delta_range: predicate is EDB; its facts live in the EDB store");
  std::vector<const Block*> out;
  if (lo > hi) return out;
  const auto& list = blocks_[pred];
  auto it = std::lower_bound(list.begin(), list.end(), lo, [](const Block& b, std::uint64_t s) { return b.step < s; });
  for (; it != list.end() && it->step <= hi; ++it)
    if (!it->table->empty()) out.push_back(&*it);
  return out;
}

std::size_t BlockStore::fact_count(PredId pred) const {
  std::size_t n = 0;
  for (const auto& b : blocks_.at(pred)) n += b.table->size();
  return n;
}

std::size_t BlockStore::idb_fact_count() const {
  std::size_t n = 0;
  for (PredId p = 0; p < blocks_.size(); ++p) n += fact_count(p);
  return n;
}

bool BlockStore::contains(PredId pred, std::span<const Id> row) const {
  for (const auto& b : blocks_.at(pred))
    if (b.table->contains(row)) return true;
  return false;
}

std::vector<Id> BlockStore::facts(PredId pred) const {
  const std::size_t k = arity_.at(pred);
  if (k == 0) return {};
  std::vector<Id> rows;
  for (const auto& b : blocks_[pred]) b.table->decode_rows(0, b.table->size(), rows);
  sort_unique_rows(rows, k);
  return rows;
}

std::size_t BlockStore::storage_bytes() const {
  std::size_t n = 0;
  for (const auto& list : blocks_)
    for (const auto& b : list) n += b.table->storage_bytes();
  return n;
}

std::uint64_t BlockStore::begin_step(std::size_t rule) {
  ++step_;
  last_applied_.at(rule) = step_;
  return step_;
}

void BlockStore::add_block(PredId pred, Block block) {
  auto& list = blocks_.at(pred);
  if (!list.empty() && list.back().step >= block.step) throw Error("blocks must be added in increasing step order");
  list.push_back(std::move(block));
  ++block_count_;
}

// ---------------------------------------------------------------------------
// Join machinery

namespace {

using Clock = std::chrono::steady_clock;

struct AtomShape {
  std::vector<std::pair<std::size_t, Id>> consts;
  std::vector<std::string> vars;  // distinct, first-occurrence order
  std::vector<std::size_t> var_pos;
  std::vector<std::pair<std::size_t, std::size_t>> repeats;

  explicit AtomShape(const Atom& a) {
    for (std::size_t i = 0; i < a.terms.size(); ++i) {
      const Term& t = a.terms[i];
      if (t.is_constant()) {
        consts.emplace_back(i, t.id());
        continue;
      }
      auto it = std::find(vars.begin(), vars.end(), t.name());
      if (it == vars.end()) {
        vars.push_back(t.name());
        var_pos.push_back(i);
      } else {
        repeats.emplace_back(i, var_pos[static_cast<std::size_t>(it - vars.begin())]);
      }
    }
  }

  std::size_t pos_of(const std::string& v) const {
    return var_pos[static_cast<std::size_t>(std::find(vars.begin(), vars.end(), v) - vars.begin())];
  }

  bool accepts(std::span<const Id> row) const {
    for (const auto& [p, v] : consts)
      if (row[p] != v) return false;
    for (const auto& [p, q] : repeats)
      if (row[p] != row[q]) return false;
    return true;
  }
};

/// Bitset over dictionary ids that remembers what it set.
class DenseIdSet {
 public:
  bool insert(Id v) {
    const std::size_t w = static_cast<std::size_t>(v >> 6);
    if (w >= bits_.size()) bits_.resize(std::max(w + 1, bits_.size() * 2), 0);
    const std::uint64_t m = std::uint64_t{1} << (v & 63);
    if (bits_[w] & m) return false;
    bits_[w] |= m;
    items_.push_back(v);
    return true;
  }
  const std::vector<Id>& items() const noexcept { return items_; }
  void clear() {
    for (Id v : items_) bits_[static_cast<std::size_t>(v >> 6)] = 0;
    items_.clear();
  }

 private:
  std::vector<std::uint64_t> bits_;
  std::vector<Id> items_;
};

/// Lookup structure for one body atom over a set of blocks. Given values for
/// the key variables it appends the matching values of the output positions.
class AtomProbe {
 public:
  AtomProbe(std::span<const SortedTable* const> tables, const AtomShape& shape, std::vector<std::size_t> key_pos,
            std::vector<std::size_t> out_pos, bool prefer_hash)
      : shape_(shape), key_pos_(std::move(key_pos)), out_pos_(std::move(out_pos)) {
    if (tables.empty()) {
      mode_ = Mode::empty;
      return;
    }
    if (key_pos_.empty() && out_pos_.empty()) {
      mode_ = Mode::exists;
      std::vector<Id> rows;
      for (const SortedTable* t : tables) {
        const std::size_t k = t->arity();
        if (k == 0) {
          exists_ = exists_ || !t->empty();
          continue;
        }
        rows.clear();
        t->decode_rows(0, t->size(), rows);
        for (std::size_t r = 0; r < rows.size() && !exists_; r += k)
          exists_ = shape.accepts(std::span<const Id>(rows.data() + r, k));
      }
      return;
    }
    if (tables.size() == 1 && try_view(*tables.front())) {
      concat_blocks(tables, {}, ConcatMode::sorted);  // records the zero-copy passthrough
      return;
    }
    std::vector<std::size_t> needed = key_pos_;
    needed.insert(needed.end(), out_pos_.begin(), out_pos_.end());
    RowFilter filter;
    filter.equals_constant = shape.consts;
    filter.equals_column = shape.repeats;
    const bool hashed = prefer_hash && !key_pos_.empty();
    mode_ = hashed ? Mode::hashed : Mode::sorted;
    rel_ = concat_blocks(tables, needed, hashed ? ConcatMode::hashed : ConcatMode::sorted, filter, key_pos_.size());
    if (rel_.is_passthrough()) rel_.materialize(filter, key_pos_.size());
  }

  std::size_t out_width() const noexcept { return out_pos_.size(); }

  /// Appends out_width() values per match; returns the number of matches.
  std::size_t lookup(std::span<const Id> key, std::vector<Id>& out) {
    switch (mode_) {
      case Mode::empty: return 0;
      case Mode::exists: return exists_ ? 1 : 0;
      case Mode::view: return lookup_view(key, out);
      case Mode::sorted: return lookup_sorted(key, out);
      case Mode::hashed: return lookup_hashed(key, out);
    }
    return 0;
  }

 private:
  enum class Mode { empty, exists, view, sorted, hashed };

  // A single block can be searched in place when the constants and key
  // positions together form a prefix of its columns.
  bool try_view(const SortedTable& t) {
    std::vector<std::size_t> bound = key_pos_;
    for (const auto& c : shape_.consts) bound.push_back(c.first);
    std::sort(bound.begin(), bound.end());
    for (std::size_t i = 0; i < bound.size(); ++i)
      if (bound[i] != i) return false;
    mode_ = Mode::view;
    table_ = &t;
    prefix_.assign(bound.size(), 0);
    prefix_key_.assign(bound.size(), -1);
    for (const auto& [p, v] : shape_.consts) prefix_[p] = v;
    for (std::size_t i = 0; i < key_pos_.size(); ++i) prefix_key_[key_pos_[i]] = static_cast<int>(i);
    return true;
  }

  std::size_t lookup_view(std::span<const Id> key, std::vector<Id>& out) {
    for (std::size_t c = 0; c < prefix_.size(); ++c)
      if (prefix_key_[c] >= 0) prefix_[c] = key[static_cast<std::size_t>(prefix_key_[c])];
    const auto [b, e] = table_->equal_range(prefix_);
    if (b == e) return 0;
    const std::size_t n = e - b;
    if (shape_.repeats.empty()) {
      if (out_pos_.size() == 1) {
        table_->column(out_pos_[0]).decode(b, e, out);
      } else if (!out_pos_.empty()) {
        const std::size_t base = out.size();
        const std::size_t w = out_pos_.size();
        out.resize(base + n * w);
        for (std::size_t c = 0; c < w; ++c) {
          col_.clear();
          table_->column(out_pos_[c]).decode(b, e, col_);
          for (std::size_t r = 0; r < n; ++r) out[base + r * w + c] = col_[r];
        }
      }
      return n;
    }
    rows_buf_.clear();
    table_->decode_rows(b, e, rows_buf_);
    const std::size_t k = table_->arity();
    std::size_t hits = 0;
    for (std::size_t r = 0; r < n; ++r) {
      std::span<const Id> row(rows_buf_.data() + r * k, k);
      if (!shape_.accepts(row)) continue;
      for (std::size_t p : out_pos_) out.push_back(row[p]);
      ++hits;
    }
    return hits;
  }

  std::size_t emit_rows(std::size_t first, std::size_t last, std::vector<Id>& out) const {
    const std::size_t w = rel_.width();
    const std::size_t kw = key_pos_.size();
    const auto& rows = rel_.rows();
    for (std::size_t r = first; r < last; ++r)
      out.insert(out.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * w + kw),
                 rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
    return last - first;
  }

  std::size_t lookup_sorted(std::span<const Id> key, std::vector<Id>& out) {
    const std::size_t w = rel_.width();
    const std::size_t n = w == 0 ? 0 : rel_.rows().size() / w;
    if (key.empty()) return emit_rows(0, n, out);
    const Id* data = rel_.rows().data();
    auto cmp = [&](std::size_t r) {
      for (std::size_t c = 0; c < key.size(); ++c) {
        const Id v = data[r * w + c];
        if (v != key[c]) return v < key[c] ? -1 : 1;
      }
      return 0;
    };
    std::size_t lo = 0, hi = n;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (cmp(mid) < 0) lo = mid + 1; else hi = mid;
    }
    std::size_t end = lo;
    while (end < n && cmp(end) == 0) ++end;
    return emit_rows(lo, end, out);
  }

  std::size_t lookup_hashed(std::span<const Id> key, std::vector<Id>& out) {
    const auto hits = rel_.hash_lookup(key);
    const std::size_t w = rel_.width();
    const std::size_t kw = key_pos_.size();
    const auto& rows = rel_.rows();
    for (std::uint32_t r : hits)
      out.insert(out.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * w + kw),
                 rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
    return hits.size();
  }

  const AtomShape& shape_;
  std::vector<std::size_t> key_pos_;
  std::vector<std::size_t> out_pos_;
  Mode mode_ = Mode::empty;
  bool exists_ = false;
  const SortedTable* table_ = nullptr;
  std::vector<Id> prefix_;
  std::vector<int> prefix_key_;
  std::vector<Id> col_;
  std::vector<Id> rows_buf_;
  ConcatenatedRelation rel_;
};

std::vector<const SortedTable*> tables_of(std::span<const Block* const> blocks) {
  std::vector<const SortedTable*> out;
  out.reserve(blocks.size());
  for (const Block* b : blocks) out.push_back(b->table.get());
  return out;
}

/// Derived head tuples of one rule application, before deduplication.
struct TmpFacts {
  std::size_t arity = 0;
  std::vector<Id> rows;
  bool nullary_hit = false;
};

std::set<std::string> vars_of(const Atom& a) { return variables(a); }

}  // namespace

// ---------------------------------------------------------------------------
// Materializer

struct Materializer::Impl {
  struct RulePlan {
    std::vector<std::size_t> edb_atoms;
    std::vector<std::size_t> idb_atoms;
    std::vector<AtomShape> shapes;  // per body atom
    std::vector<std::set<std::string>> needed_after;  // per IDB position
    std::optional<Relation> r_edb;
    std::map<std::pair<std::size_t, std::size_t>, Decision> mr_static, rr_static;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> subsumers;
    bool proxy_ok = false;
    bool share_ok = false;
  };

  class StoreFacts final : public FactSource {
   public:
    StoreFacts(const Impl& impl) : impl_(impl) {}
    std::optional<Relation> match(const Atom& atom) const override { return impl_.match_known(atom); }

   private:
    const Impl& impl_;
  };

  Impl(Materializer& owner, const EdbStore& edb, MaterializeOptions opts)
      : owner(owner), program(owner.program_), edb(edb), opts(opts) {
    for (const Rule& r : program.rules()) plans.push_back(plan_rule(r));
  }

  RulePlan plan_rule(const Rule& r) {
    RulePlan p;
    for (std::size_t i = 0; i < r.body.size(); ++i) {
      (program.is_idb(r.body[i].pred) ? p.idb_atoms : p.edb_atoms).push_back(i);
      p.shapes.emplace_back(r.body[i]);
    }
    const auto head_vars = vars_of(r.head);
    for (std::size_t t = 0; t < p.idb_atoms.size(); ++t) {
      std::set<std::string> need = head_vars;
      for (std::size_t u = t + 1; u < p.idb_atoms.size(); ++u) {
        auto v = vars_of(r.body[p.idb_atoms[u]]);
        need.insert(v.begin(), v.end());
      }
      p.needed_after.push_back(std::move(need));
    }
    // Head variables, constants skipped, in the same order as the single body atom's variables.
    auto head_var_seq = [&] {
      std::vector<std::string> seq;
      for (const Term& t : r.head.terms)
        if (t.is_variable()) seq.push_back(t.name());
      return seq;
    };
    if (r.body.size() == 1) {
      const AtomShape& s = p.shapes.front();
      const bool same_order = head_var_seq() == s.vars;
      if (p.edb_atoms.size() == 1) p.proxy_ok = same_order && s.repeats.empty();
      if (p.idb_atoms.size() == 1) p.share_ok = same_order && s.repeats.empty() && s.consts.empty();
    }
    return p;
  }

  const Relation& r_edb(std::size_t ri) {
    RulePlan& p = plans[ri];
    if (!p.r_edb) {
      std::vector<Atom> atoms;
      for (std::size_t i : p.edb_atoms) atoms.push_back(program.rules()[ri].body[i]);
      p.r_edb = join_edb(atoms, program, edb);
    }
    return *p.r_edb;
  }

  // Bindings of `atom` among EDB facts and derived blocks; IDB scans are
  // limited to atoms with a bound first column or small predicates.
  std::optional<Relation> match_known(const Atom& atom) const {
    if (!program.is_idb(atom.pred)) return edb.scan(atom, program);
    const AtomShape shape(atom);
    const BlockStore& store = owner.store_;
    std::vector<Id> prefix;
    for (const Term& t : atom.terms) {
      if (!t.is_constant()) break;
      prefix.push_back(t.id());
    }
    if (prefix.empty() && store.fact_count(atom.pred) > kSmallPredicate) return std::nullopt;
    Relation out(shape.vars);
    std::vector<Id> rows;
    for (const Block& b : store.blocks(atom.pred)) {
      rows.clear();
      const auto [lo, hi] = b.table->equal_range(prefix);
      b.table->decode_rows(lo, hi, rows);
      const std::size_t k = b.table->arity();
      if (k == 0) {
        if (!b.table->empty()) return Relation::unit();
        continue;
      }
      for (std::size_t r = 0; r < hi - lo; ++r) {
        std::span<const Id> row(rows.data() + r * k, k);
        if (!shape.accepts(row)) continue;
        std::vector<Id> vals;
        for (std::size_t p : shape.var_pos) vals.push_back(row[p]);
        out.add_row(vals);
      }
    }
    out.sort_dedup();
    return out;
  }

  // --- pruning -------------------------------------------------------------

  // Distinct projection of `rel` onto `attrs`, or nullopt past the dynamic limit.
  std::optional<Relation> small_projection(const Relation& rel, const std::set<std::string>& wanted) const {
    std::vector<std::string> attrs;
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < rel.arity(); ++c)
      if (wanted.count(rel.attributes()[c])) {
        attrs.push_back(rel.attributes()[c]);
        cols.push_back(c);
      }
    std::set<std::vector<Id>> seen;
    std::vector<Id> key(cols.size());
    for (std::size_t r = 0; r < rel.size(); ++r) {
      auto row = rel.row(r);
      for (std::size_t i = 0; i < cols.size(); ++i) key[i] = row[cols[i]];
      if (seen.insert(key).second && seen.size() > opts.dyn_check_limit) return std::nullopt;
    }
    Relation out(attrs);
    for (const auto& k : seen) out.add_row(k);
    return out;
  }

  enum class Pruned { none, mismatch, redundancy, subsumption };

  struct PruneInputs {
    std::optional<Relation> mr_partial;
    std::optional<Relation> rr_partial;
  };

  PruneInputs prune_inputs(std::size_t ri, std::size_t k, const Relation& partial) const {
    PruneInputs in;
    const Rule& rule = program.rules()[ri];
    const auto atom_vars = vars_of(rule.body[k]);
    if (opts.opt_mismatch) in.mr_partial = small_projection(partial, atom_vars);
    if (opts.opt_redundancy) {
      auto wanted = atom_vars;
      auto hv = vars_of(rule.head);
      wanted.insert(hv.begin(), hv.end());
      in.rr_partial = small_projection(partial, wanted);
    }
    return in;
  }

  // `others_max` is the newest step among blocks the other body atoms may
  // join with; a subsuming rule only covers facts older than its last run.
  Pruned prune_block(std::size_t ri, std::size_t k, const Block& block, const PruneInputs& in,
                     std::uint64_t others_max) {
    RulePlan& plan = plans[ri];
    const Rule& rule = program.rules()[ri];
    const Rule& producer = program.rules()[block.rule_index];
    const auto key = std::make_pair(k, block.rule_index);
    if (opts.opt_mismatch) {
      auto it = plan.mr_static.find(key);
      if (it == plan.mr_static.end())
        it = plan.mr_static.emplace(key, prune_mismatch({&rule, k, nullptr, &producer, 0})).first;
      if (it->second == Decision::drop) return Pruned::mismatch;
      if (in.mr_partial &&
          prune_mismatch({&rule, k, &*in.mr_partial, &producer, block.step}, opts.dyn_check_limit) == Decision::drop)
        return Pruned::mismatch;
    }
    if (opts.opt_redundancy) {
      auto it = plan.rr_static.find(key);
      if (it == plan.rr_static.end())
        it = plan.rr_static.emplace(key, prune_redundant({&rule, k, nullptr, &producer, 0})).first;
      if (it->second == Decision::drop) return Pruned::redundancy;
      if (in.rr_partial) {
        StoreFacts facts(*this);
        if (prune_redundant({&rule, k, &*in.rr_partial, &producer, block.step}, opts.dyn_check_limit, &facts) ==
            Decision::drop)
          return Pruned::redundancy;
      }
    }
    if (opts.opt_subsumption) {
      auto it = plan.subsumers.find(key);
      if (it == plan.subsumers.end())
        it = plan.subsumers.emplace(key, subsuming_rules(rule, k, producer, program.rules())).first;
      for (std::size_t r : it->second) {
        const std::uint64_t last = r == ri ? previous_application_ : owner.store_.last_applied(r);
        if (last > block.step && last > others_max) return Pruned::subsumption;
      }
    }
    return Pruned::none;
  }

  // --- joins ---------------------------------------------------------------

  bool prefer_hash(std::size_t rows, std::size_t blocks) const {
    return rows < opts.hash_row_threshold || blocks > opts.hash_block_threshold;
  }

  Relation join_atom(const Relation& left, const AtomShape& shape, std::span<const Block* const> blocks,
                     const std::set<std::string>& needed) {
    std::vector<std::size_t> key_pos, key_cols, out_pos, keep_cols;
    std::vector<std::string> attrs;
    bool dropped = false;
    for (std::size_t c = 0; c < left.arity(); ++c) {
      if (needed.count(left.attributes()[c])) {
        keep_cols.push_back(c);
        attrs.push_back(left.attributes()[c]);
      } else {
        dropped = true;
      }
    }
    for (std::size_t i = 0; i < shape.vars.size(); ++i) {
      const int c = left.index_of(shape.vars[i]);
      if (c >= 0) {
        key_pos.push_back(shape.var_pos[i]);
        key_cols.push_back(static_cast<std::size_t>(c));
      } else if (needed.count(shape.vars[i])) {
        out_pos.push_back(shape.var_pos[i]);
        attrs.push_back(shape.vars[i]);
      } else {
        dropped = true;
      }
    }
    const auto tables = tables_of(blocks);
    AtomProbe probe(tables, shape, key_pos, out_pos, prefer_hash(left.size(), blocks.size()));
    Relation out(attrs);
    std::vector<Id> key(key_cols.size()), buf, row(attrs.size());
    const std::size_t ow = out_pos.size();
    for (std::size_t r = 0; r < left.size(); ++r) {
      auto lrow = left.row(r);
      for (std::size_t i = 0; i < key_cols.size(); ++i) key[i] = lrow[key_cols[i]];
      buf.clear();
      const std::size_t n = probe.lookup(key, buf);
      if (n == 0) continue;
      for (std::size_t i = 0; i < keep_cols.size(); ++i) row[i] = lrow[keep_cols[i]];
      if (ow == 0) {
        out.add_row(row);
        continue;
      }
      for (std::size_t m = 0; m < n; ++m) {
        std::copy(buf.begin() + static_cast<std::ptrdiff_t>(m * ow), buf.begin() + static_cast<std::ptrdiff_t>((m + 1) * ow),
                  row.begin() + static_cast<std::ptrdiff_t>(keep_cols.size()));
        out.add_row(row);
      }
    }
    if (dropped) out.sort_dedup();
    return out;
  }

  // Last join of a rule body fused with the head projection. Left rows are
  // grouped on the head variables they bind; each group's right-hand head
  // values are deduplicated before emission.
  void final_join(const Relation& left_in, const AtomShape& shape, std::span<const Block* const> blocks,
                  const Atom& head, TmpFacts& tmp) {
    std::vector<std::size_t> key_pos, key_cols, out_pos;
    std::vector<std::string> out_vars;
    for (std::size_t i = 0; i < shape.vars.size(); ++i) {
      const int c = left_in.index_of(shape.vars[i]);
      if (c >= 0) {
        key_pos.push_back(shape.var_pos[i]);
        key_cols.push_back(static_cast<std::size_t>(c));
      }
    }
    // Head term sources: constant, left column, or probe output.
    struct Src {
      int kind;  // 0 constant, 1 left, 2 right
      std::size_t index;
      Id value;
    };
    std::vector<Src> src;
    std::vector<std::size_t> group_cols;
    for (const Term& t : head.terms) {
      if (t.is_constant()) {
        src.push_back({0, 0, t.id()});
        continue;
      }
      const int c = left_in.index_of(t.name());
      if (c >= 0) {
        src.push_back({1, static_cast<std::size_t>(c), 0});
        if (std::find(group_cols.begin(), group_cols.end(), static_cast<std::size_t>(c)) == group_cols.end())
          group_cols.push_back(static_cast<std::size_t>(c));
        continue;
      }
      auto it = std::find(out_vars.begin(), out_vars.end(), t.name());
      if (it == out_vars.end()) {
        out_vars.push_back(t.name());
        out_pos.push_back(shape.pos_of(t.name()));
        it = out_vars.end() - 1;
      }
      src.push_back({2, static_cast<std::size_t>(it - out_vars.begin()), 0});
    }

    const Relation* left = &left_in;
    Relation sorted;
    if (!group_cols.empty() && !left_in.is_sorted_on(group_cols)) {
      sorted = left_in;
      sorted.sort_by(group_cols);
      left = &sorted;
    }

    const auto tables = tables_of(blocks);
    AtomProbe probe(tables, shape, key_pos, out_pos, prefer_hash(left->size(), blocks.size()));
    const std::size_t ow = out_pos.size();
    std::vector<Id> key(key_cols.size()), buf;
    std::vector<Id> head_row(head.terms.size());
    auto emit = [&](std::span<const Id> lrow, const Id* right) {
      if (head.terms.empty()) {
        tmp.nullary_hit = true;
        return;
      }
      for (std::size_t p = 0; p < src.size(); ++p) {
        switch (src[p].kind) {
          case 0: head_row[p] = src[p].value; break;
          case 1: head_row[p] = lrow[src[p].index]; break;
          default: head_row[p] = right[src[p].index]; break;
        }
      }
      tmp.rows.insert(tmp.rows.end(), head_row.begin(), head_row.end());
    };
    auto same_group = [&](std::size_t a, std::size_t b) {
      auto ra = left->row(a), rb = left->row(b);
      for (std::size_t c : group_cols)
        if (ra[c] != rb[c]) return false;
      return true;
    };

    std::size_t g = 0;
    const std::size_t n = left->size();
    while (g < n) {
      std::size_t g_end = g + 1;
      while (g_end < n && same_group(g, g_end)) ++g_end;
      auto lookup = [&](std::size_t r) {
        auto lrow = left->row(r);
        for (std::size_t i = 0; i < key_cols.size(); ++i) key[i] = lrow[key_cols[i]];
        return probe.lookup(key, buf);
      };
      if (ow == 0) {
        for (std::size_t r = g; r < g_end; ++r) {
          buf.clear();
          if (lookup(r) > 0) {
            emit(left->row(r), nullptr);
            break;
          }
        }
      } else if (ow == 1) {
        dense_.clear();
        for (std::size_t r = g; r < g_end; ++r) {
          buf.clear();
          lookup(r);
          for (Id v : buf) dense_.insert(v);
        }
        for (Id v : dense_.items()) emit(left->row(g), &v);
      } else {
        buf.clear();
        for (std::size_t r = g; r < g_end; ++r) lookup(r);
        sort_unique_rows(buf, ow);
        for (std::size_t i = 0; i < buf.size(); i += ow) emit(left->row(g), buf.data() + i);
      }
      g = g_end;
    }
  }

  // Evaluates IDB atoms t0..m-1 of a rule starting from `start`, with the
  // given block ranges. Returns the number of blocks used in joins.
  std::size_t run_chain(std::size_t ri, const Relation& start, std::size_t t0,
                        const std::vector<std::vector<const Block*>>& ranges, bool prune, TmpFacts& tmp,
                        std::size_t* single_block_out) {
    const Rule& rule = program.rules()[ri];
    RulePlan& plan = plans[ri];
    const std::size_t m = plan.idb_atoms.size();
    const Relation* left = &start;
    Relation owned;
    std::size_t joined = 0;
    for (std::size_t t = t0; t < m; ++t) {
      const std::size_t k = plan.idb_atoms[t];
      std::vector<const Block*> kept;
      if (prune && (opts.opt_mismatch || opts.opt_redundancy || opts.opt_subsumption)) {
        const PruneInputs in = prune_inputs(ri, k, *left);
        std::uint64_t others_max = 0;
        for (std::size_t u = 0; u < m; ++u)
          if (u != t)
            for (const Block* b : ranges[u]) others_max = std::max(others_max, b->step);
        std::vector<const Block*> dropped;
        for (const Block* b : ranges[t]) {
          const Pruned why = prune_block(ri, k, *b, in, others_max);
          switch (why) {
            case Pruned::none: kept.push_back(b); continue;
            case Pruned::mismatch: owner.stats_.add("opt.mr.blocks_pruned"); break;
            case Pruned::redundancy: owner.stats_.add("opt.rr.blocks_pruned"); break;
            case Pruned::subsumption: owner.stats_.add("opt.sub.blocks_pruned"); break;
          }
          dropped.push_back(b);
        }
        if (opts.validate_drops && !dropped.empty()) {
          std::vector<std::vector<const Block*>> vr = ranges;
          vr[t] = dropped;
          run_chain(ri, *left, t, vr, false, verify_, nullptr);
        }
      } else {
        kept = ranges[t];
      }
      joined += kept.size();
      if (kept.empty()) return joined;
      if (t + 1 == m) {
        if (single_block_out) *single_block_out = kept.size() == 1 && left->arity() == 0 ? 1 : 0;
        final_join(*left, plan.shapes[k], kept, rule.head, tmp);
        return joined;
      }
      owned = join_atom(*left, plan.shapes[k], kept, plan.needed_after[t]);
      left = &owned;
      if (left->empty()) return joined;
    }
    return joined;
  }

  // Projects R_EDB onto the head for rules without IDB atoms.
  void project_head(const Relation& rel, const Atom& head, TmpFacts& tmp) {
    if (rel.empty()) return;
    if (head.terms.empty()) {
      tmp.nullary_hit = true;
      return;
    }
    std::vector<int> cols;
    for (const Term& t : head.terms) cols.push_back(t.is_variable() ? rel.index_of(t.name()) : -1);
    for (std::size_t r = 0; r < rel.size(); ++r) {
      auto row = rel.row(r);
      for (std::size_t p = 0; p < head.terms.size(); ++p)
        tmp.rows.push_back(cols[p] >= 0 ? row[static_cast<std::size_t>(cols[p])] : head.terms[p].id());
    }
  }

  std::shared_ptr<const SortedTable> proxy_table(const Rule& rule, std::size_t rows) const {
    const Atom& atom = rule.body.front();
    auto slice = edb.slice(program.predicate(atom.pred).name, atom.terms);
    if (!slice || slice->size() != rows) return nullptr;
    std::vector<ColumnPtr> cols;
    std::size_t v = 0;
    for (const Term& t : rule.head.terms) {
      if (t.is_constant())
        cols.push_back(std::make_shared<ConstantColumn>(t.id(), rows));
      else
        cols.push_back(std::make_shared<EdbProxyColumn>(slice->rows, slice->stride, slice->components[v++]));
    }
    return std::make_shared<SortedTable>(rule.head.terms.size(), rows, std::move(cols));
  }

  std::shared_ptr<const SortedTable> shared_table(const Rule& rule, const SortedTable& source, std::size_t rows) const {
    if (source.size() != rows) return nullptr;
    std::vector<ColumnPtr> cols;
    std::size_t v = 0;
    for (const Term& t : rule.head.terms) {
      if (t.is_constant())
        cols.push_back(std::make_shared<ConstantColumn>(t.id(), rows));
      else
        cols.push_back(std::make_shared<SharedColumn>(source.columns()[v++]));
    }
    return std::make_shared<SortedTable>(rule.head.terms.size(), rows, std::move(cols));
  }

  const Block* apply(std::size_t ri) {
    if (ri >= program.rules().size()) throw Error("rule index out of range");
    const auto t_start = Clock::now();
    const Rule& rule = program.rules()[ri];
    RulePlan& plan = plans[ri];
    BlockStore& store = owner.store_;
    StatsReport& stats = owner.stats_;
    const std::string prefix = "rule." + std::to_string(ri) + ".";

    const std::uint64_t j = store.last_applied(ri);
    const std::uint64_t i = store.step();
    previous_application_ = j;
    const std::uint64_t step = store.begin_step(ri);
    stats.add(prefix + "applications");
    stats.set("steps", step);

    TmpFacts tmp;
    tmp.arity = rule.head.terms.size();
    verify_ = TmpFacts{tmp.arity, {}, false};
    const std::size_t m = plan.idb_atoms.size();
    const Relation& base = r_edb(ri);
    std::size_t joined = 0;
    std::size_t single_block = 0;
    const Block* share_source = nullptr;

    if (m == 0) {
      if (j == 0) {
        stats.add(prefix + "sne_variants");
        project_head(base, rule.head, tmp);
      }
    } else if (!base.empty()) {
      for (std::size_t l = 0; l < m; ++l) {
        stats.add(prefix + "sne_variants");
        std::vector<std::vector<const Block*>> ranges(m);
        bool empty = false;
        for (std::size_t t = 0; t < m && !empty; ++t) {
          const PredId q = rule.body[plan.idb_atoms[t]].pred;
          if (t < l) ranges[t] = store.delta_range(q, 0, i);
          else if (t == l) ranges[t] = store.delta_range(q, j, i);
          else if (j > 0) ranges[t] = store.delta_range(q, 0, j - 1);
          empty = ranges[t].empty();
        }
        if (empty) continue;
        std::size_t single = 0;
        joined += run_chain(ri, base, 0, ranges, true, tmp, &single);
        if (m == 1 && single) {
          single_block = 1;
          // The only surviving block is the one the final join used.
          for (const Block* b : ranges[0])
            if (!share_source) share_source = b;
        }
      }
    }
    stats.add(prefix + "blocks_joined", joined);

    // Deduplicate against everything derived so far.
    std::vector<std::string> cols;
    for (std::size_t c = 0; c < tmp.arity; ++c) cols.push_back("c" + std::to_string(c));
    Relation fresh(cols);
    if (tmp.arity == 0) {
      if (tmp.nullary_hit) fresh = Relation::unit();
    } else {
      fresh.mutable_data() = std::move(tmp.rows);
      fresh.set_row_count(fresh.data().size() / tmp.arity);
      fresh.sort_dedup();
    }
    const std::size_t before = fresh.size();
    const auto history_blocks = store.blocks(rule.head.pred);
    std::vector<const SortedTable*> history;
    for (const Block& b : history_blocks) history.push_back(b.table.get());
    Relation survivors = subtract_sorted_rows(std::move(fresh), history);
    const std::size_t removed = before - survivors.size();
    stats.add("dedup.rows_before", before);
    stats.add("dedup.rows_removed", removed);

    if (opts.validate_drops) check_drops(rule, survivors, history);

    const Block* result = nullptr;
    if (!survivors.empty()) {
      std::shared_ptr<const SortedTable> table;
      if (removed == 0 && plan.proxy_ok && m == 0) table = proxy_table(rule, survivors.size());
      if (!table && removed == 0 && plan.share_ok && single_block && share_source)
        table = shared_table(rule, *share_source->table, survivors.size());
      if (!table) table = std::make_shared<SortedTable>(build_table(std::move(survivors)));
      store.add_block(rule.head.pred, Block{step, ri, std::move(table)});
      result = &store.blocks(rule.head.pred).back();
      stats.set_max("blocks.peak", store.block_count());
    }
    stats.add_time(prefix + "time_ms", std::chrono::duration<double, std::milli>(Clock::now() - t_start).count());
    return result;
  }

  // Every fact reachable through a dropped block must already be known or
  // derived through the kept blocks.
  void check_drops(const Rule& rule, const Relation& survivors, std::span<const SortedTable* const> history) {
    const std::size_t k = verify_.arity;
    if (k == 0) return;
    sort_unique_rows(verify_.rows, k);
    for (std::size_t r = 0; r < verify_.rows.size(); r += k) {
      std::span<const Id> row(verify_.rows.data() + r, k);
      bool known = std::any_of(history.begin(), history.end(), [&](const SortedTable* t) { return t->contains(row); });
      if (!known) {
        for (std::size_t s = 0; s < survivors.size() && !known; ++s)
          known = std::equal(row.begin(), row.end(), survivors.row(s).begin());
      }
      if (!known)
        throw Error("pruning dropped a new inference for '" + program.predicate(rule.head.pred).name + "'");
    }
  }

  static constexpr std::size_t kSmallPredicate = 4096;

  Materializer& owner;
  const Program& program;
  const EdbStore& edb;
  MaterializeOptions opts;
  std::vector<RulePlan> plans;
  DenseIdSet dense_;
  TmpFacts verify_;
  std::uint64_t previous_application_ = 0;
};

Materializer::Materializer(const Program& program, const EdbStore& edb, MaterializeOptions options)
    : program_(program), store_(program) {
  if (options.dyn_check_limit == 0 || options.hash_row_threshold == 0 || options.hash_block_threshold == 0)
    throw Error("materialize thresholds must be positive");
  impl_ = std::make_unique<Impl>(*this, edb, options);
  for (std::size_t r = 0; r < program.rules().size(); ++r) {
    const std::string p = "rule." + std::to_string(r) + ".";
    stats_.add(p + "applications", 0);
    stats_.add(p + "sne_variants", 0);
    stats_.add(p + "blocks_joined", 0);
    stats_.add_time(p + "time_ms", 0.0);
  }
  for (const char* key : {"opt.mr.blocks_pruned", "opt.rr.blocks_pruned", "opt.sub.blocks_pruned", "dedup.rows_before",
                          "dedup.rows_removed", "blocks.peak", "steps", "facts.idb"})
    stats_.add(key, 0);
}

Materializer::~Materializer() = default;

const Block* Materializer::apply_rule(std::size_t rule_index) { return impl_->apply(rule_index); }

RunStatus Materializer::run() {
  const std::size_t n = program_.rules().size();
  const auto& opts = impl_->opts;
  const auto start = Clock::now();
  std::uint64_t last_productive = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opts.seed);
  std::size_t cursor = n;
  RunStatus status = RunStatus::fixpoint;
  while (n > 0) {
    if (opts.timeout && Clock::now() - start >= *opts.timeout) {
      status = RunStatus::timeout;
      break;
    }
    if (opts.max_steps && store_.step() >= *opts.max_steps) {
      status = RunStatus::step_limit;
      break;
    }
    if (cursor == n) {
      if (opts.schedule == Schedule::random) std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    if (apply_rule(order[cursor++])) last_productive = store_.step();
    bool done = true;
    for (std::size_t r = 0; r < n && done; ++r) done = store_.last_applied(r) > last_productive;
    if (done) break;
  }
  stats_.set("facts.idb", store_.idb_fact_count());
  stats_.set("steps", store_.step());
  return status;
}

// ---------------------------------------------------------------------------
// Whole runs, export and queries

Materialization materialize(const Program& program, std::shared_ptr<const EdbStore> edb,
                            const MaterializeOptions& options) {
  Materialization out;
  auto prog = std::make_shared<const Program>(program);
  StatsReport memo_stats;
  memo_stats.add("memo.atoms_attempted", 0);
  memo_stats.add("memo.atoms_memoized", 0);
  memo_stats.add_time("memo.time_ms", 0.0);
  if (options.memo) {
    MemoPlan plan = memoize(program, *edb, options.memo_timeout);
    memo_stats.add("memo.atoms_attempted", plan.outcomes.size());
    memo_stats.add("memo.atoms_memoized", plan.memoized_count());
    memo_stats.add_time("memo.time_ms", plan.total_ms);
    if (plan.memoized_count() > 0) {
      prog = std::make_shared<const Program>(std::move(plan.program));
      edb = std::move(plan.edb);
    }
  }
  Materializer m(*prog, *edb, options);
  out.status = m.run();
  out.stats = m.stats();
  for (const auto& [k, v] : memo_stats.counters()) out.stats.set(k, v);
  for (const auto& [k, v] : memo_stats.timings()) out.stats.add_time(k, v);
  out.store = m.take_store();
  out.program = std::move(prog);
  out.edb = std::move(edb);
  return out;
}

std::vector<Id> Materialization::facts(std::string_view name) const {
  auto id = program->find_predicate(name);
  if (!id || !program->is_idb(*id)) return {};
  return store.facts(*id);
}

std::size_t Materialization::export_facts(const Dictionary& dict, std::ostream& out) const {
  return coldl::export_facts(*program, store, dict, out);
}

std::size_t export_facts(const Program& program, const BlockStore& store, const Dictionary& dict, std::ostream& out) {
  std::vector<std::pair<std::string, PredId>> preds;
  for (PredId p = 0; p < program.predicates().size(); ++p)
    if (program.is_idb(p)) preds.emplace_back(program.predicate(p).name, p);
  std::sort(preds.begin(), preds.end());
  std::size_t written = 0;
  std::vector<std::string> lines;
  for (const auto& [name, p] : preds) {
    lines.clear();
    const std::size_t k = program.predicate(p).arity;
    if (k == 0) {
      if (store.fact_count(p) > 0) lines.push_back(name);
    } else {
      const std::vector<Id> rows = store.facts(p);
      for (std::size_t r = 0; r < rows.size(); r += k) {
        std::string line = name;
        for (std::size_t c = 0; c < k; ++c) {
          line += '\t';
          line += dict.lookup(rows[r + c]);
        }
        lines.push_back(std::move(line));
      }
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& l : lines) out << l << '\n';
    written += lines.size();
  }
  if (!out) throw Error("failed to write facts");
  return written;
}

std::vector<std::string> query_facts(const Materialization& result, Dictionary& dict, std::string_view pattern) {
  Program scratch = *result.program;
  const std::size_t known = scratch.predicates().size();
  const Atom atom = parse_atom(pattern, scratch, dict);
  if (atom.pred >= known) throw InputError("unknown predicate '" + scratch.predicate(atom.pred).name + "'");
  const AtomShape shape(atom);
  const std::size_t k = atom.terms.size();
  std::vector<Id> rows;
  if (scratch.is_idb(atom.pred)) {
    rows = result.store.facts(atom.pred);
  } else {
    rows = result.edb->tuples(scratch.predicate(atom.pred).name);
    if (k == 0 && result.edb->count(scratch.predicate(atom.pred).name) > 0) return {scratch.predicate(atom.pred).name};
  }
  if (k == 0) {
    if (scratch.is_idb(atom.pred) && result.store.fact_count(atom.pred) > 0) return {scratch.predicate(atom.pred).name};
    return {};
  }
  std::vector<std::string> out;
  for (std::size_t r = 0; r < rows.size(); r += k) {
    std::span<const Id> row(rows.data() + r, k);
    if (!shape.accepts(row)) continue;
    Atom fact{atom.pred, {}};
    for (Id v : row) fact.terms.push_back(Term::constant(v));
    out.push_back(to_string(fact, scratch, dict));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace coldl
