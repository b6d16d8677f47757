#include "coldl/columns.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace coldl {

// ---------------------------------------------------------------------------
// Columns

std::pair<std::uint64_t, std::uint64_t> Column::equal_range(std::uint64_t lo, std::uint64_t hi, Id value) const {
  std::uint64_t a = lo, b = hi;
  while (a < b) {
    const std::uint64_t mid = a + (b - a) / 2;
    if (at(mid) < value) a = mid + 1; else b = mid;
  }
  const std::uint64_t first = a;
  b = hi;
  while (a < b) {
    const std::uint64_t mid = a + (b - a) / 2;
    if (at(mid) <= value) a = mid + 1; else b = mid;
  }
  return {first, a};
}

RleColumn::RleColumn(std::span<const Id> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values_.empty() || values_.back() != values[i]) {
      values_.push_back(values[i]);
      ends_.push_back(i + 1);
    } else {
      ends_.back() = i + 1;
    }
  }
}

std::size_t RleColumn::run_of(std::uint64_t row) const {
  return static_cast<std::size_t>(std::upper_bound(ends_.begin(), ends_.end(), row) - ends_.begin());
}

Id RleColumn::at(std::uint64_t row) const { return values_[run_of(row)]; }

void RleColumn::decode(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const {
  if (begin >= end) return;
  std::size_t r = run_of(begin);
  std::uint64_t pos = begin;
  while (pos < end) {
    const std::uint64_t stop = std::min<std::uint64_t>(ends_[r], end);
    out.insert(out.end(), stop - pos, values_[r]);
    pos = stop;
    ++r;
  }
}

std::size_t RleColumn::storage_bytes() const noexcept {
  return sizeof(*this) + values_.capacity() * sizeof(Id) + ends_.capacity() * sizeof(std::uint64_t);
}

std::pair<std::uint64_t, std::uint64_t> RleColumn::equal_range(std::uint64_t lo, std::uint64_t hi, Id value) const {
  if (lo >= hi) return {lo, lo};
  const std::size_t r_lo = run_of(lo);
  const std::size_t r_hi = run_of(hi - 1) + 1;
  // Runs inside a sorted range carry strictly increasing values.
  auto first = values_.begin() + static_cast<std::ptrdiff_t>(r_lo);
  auto last = values_.begin() + static_cast<std::ptrdiff_t>(r_hi);
  auto it = std::lower_bound(first, last, value);
  if (it == last || *it != value) {
    const std::uint64_t at_row = it == last ? hi : std::max<std::uint64_t>(lo, it == values_.begin() ? 0 : ends_[it - values_.begin() - 1]);
    return {at_row, at_row};
  }
  const std::size_t r = static_cast<std::size_t>(it - values_.begin());
  const std::uint64_t start = r == 0 ? 0 : ends_[r - 1];
  return {std::max(lo, start), std::min(hi, ends_[r])};
}

std::vector<Run> RleColumn::runs() const {
  std::vector<Run> out;
  out.reserve(values_.size());
  std::uint64_t prev = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    out.push_back({values_[i], ends_[i] - prev});
    prev = ends_[i];
  }
  return out;
}

SharedColumn::SharedColumn(ColumnPtr source) : source_(std::move(source)) {
  // Never stack shared wrappers.
  if (auto* inner = dynamic_cast<const SharedColumn*>(source_.get())) source_ = inner->source();
}

EdbProxyColumn::EdbProxyColumn(std::span<const Id> rows, std::size_t stride, std::size_t component)
    : rows_(rows), stride_(stride), component_(component) {
  if (stride == 0 || component >= stride || rows.size() % stride != 0)
    throw std::invalid_argument("EdbProxyColumn: bad stride/component");
}

void EdbProxyColumn::decode(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const {
  out.reserve(out.size() + (end - begin));
  for (std::uint64_t r = begin; r < end; ++r) out.push_back(rows_[r * stride_ + component_]);
}

ColumnPtr make_column(std::span<const Id> values) {
  if (!values.empty() && std::all_of(values.begin(), values.end(), [&](Id v) { return v == values.front(); }))
    return std::make_shared<ConstantColumn>(values.front(), values.size());
  return std::make_shared<RleColumn>(values);
}

std::vector<Run> rle_encode(std::span<const Id> values) { return RleColumn(values).runs(); }

std::vector<Id> rle_decode(std::span<const Run> runs) {
  std::vector<Id> out;
  for (const auto& r : runs) out.insert(out.end(), r.length, r.value);
  return out;
}

// ---------------------------------------------------------------------------
// Row helpers

namespace {

template <std::size_t K>
void sort_unique_fixed(std::vector<Id>& rows) {
  const std::size_t n = rows.size() / K;
  std::vector<std::array<Id, K>> tmp(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < K; ++c) tmp[i][c] = rows[i * K + c];
  std::sort(tmp.begin(), tmp.end());
  tmp.erase(std::unique(tmp.begin(), tmp.end()), tmp.end());
  rows.resize(tmp.size() * K);
  for (std::size_t i = 0; i < tmp.size(); ++i)
    for (std::size_t c = 0; c < K; ++c) rows[i * K + c] = tmp[i][c];
}

int compare_rows(const Id* a, const Id* b, std::size_t arity) {
  for (std::size_t c = 0; c < arity; ++c) {
    if (a[c] != b[c]) return a[c] < b[c] ? -1 : 1;
  }
  return 0;
}

std::uint64_t hash_key(const Id* key, std::size_t width) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ width;
  for (std::size_t i = 0; i < width; ++i) {
    h ^= key[i] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdULL;
  }
  return h ^ (h >> 33);
}

}  // namespace

void sort_unique_rows(std::vector<Id>& rows, std::size_t arity) {
  switch (arity) {
    case 0: rows.clear(); return;
    case 1:
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
      return;
    case 2: sort_unique_fixed<2>(rows); return;
    case 3: sort_unique_fixed<3>(rows); return;
    case 4: sort_unique_fixed<4>(rows); return;
    default: break;
  }
  const std::size_t n = rows.size() / arity;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return compare_rows(&rows[a * arity], &rows[b * arity], arity) < 0;
  });
  std::vector<Id> out;
  out.reserve(rows.size());
  for (std::size_t k = 0; k < n; ++k) {
    const Id* r = &rows[idx[k] * arity];
    if (k > 0 && compare_rows(r, &rows[idx[k - 1] * arity], arity) == 0) continue;
    out.insert(out.end(), r, r + arity);
  }
  rows = std::move(out);
}

// ---------------------------------------------------------------------------
// SortedTable

SortedTable::SortedTable(std::size_t arity, std::uint64_t rows, std::vector<ColumnPtr> columns)
    : arity_(arity), rows_(rows), columns_(std::move(columns)) {
  if (columns_.size() != arity_) throw std::invalid_argument("SortedTable: column count differs from arity");
  for (const auto& c : columns_)
    if (c->size() != rows_) throw std::invalid_argument("SortedTable: column length differs from row count");
}

void SortedTable::decode_rows(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const {
  if (begin >= end || arity_ == 0) return;
  const std::size_t n = end - begin;
  const std::size_t base = out.size();
  out.resize(base + n * arity_);
  std::vector<Id> col;
  col.reserve(n);
  for (std::size_t c = 0; c < arity_; ++c) {
    col.clear();
    columns_[c]->decode(begin, end, col);
    for (std::size_t r = 0; r < n; ++r) out[base + r * arity_ + c] = col[r];
  }
}

std::vector<Id> SortedTable::rows() const {
  std::vector<Id> out;
  decode_rows(0, rows_, out);
  return out;
}

std::pair<std::uint64_t, std::uint64_t> SortedTable::equal_range(std::span<const Id> prefix) const {
  std::uint64_t lo = 0, hi = rows_;
  for (std::size_t c = 0; c < prefix.size() && lo < hi; ++c) std::tie(lo, hi) = columns_[c]->equal_range(lo, hi, prefix[c]);
  return {lo, hi};
}

bool SortedTable::contains(std::span<const Id> row) const {
  auto [lo, hi] = equal_range(row);
  return lo < hi;
}

std::size_t SortedTable::storage_bytes() const noexcept {
  std::size_t total = sizeof(*this);
  for (const auto& c : columns_) total += c->storage_bytes();
  return total;
}

SortedTable build_table_sorted(std::size_t arity, std::span<const Id> rows) {
  if (arity == 0) throw std::invalid_argument("build_table_sorted: nullary tables need build_table(Relation)");
  const std::size_t n = rows.size() / arity;
  std::vector<ColumnPtr> cols;
  std::vector<Id> values(n);
  for (std::size_t c = 0; c < arity; ++c) {
    for (std::size_t r = 0; r < n; ++r) values[r] = rows[r * arity + c];
    cols.push_back(make_column(values));
  }
  return SortedTable(arity, n, std::move(cols));
}

SortedTable build_table(std::size_t arity, std::vector<Id> rows) {
  sort_unique_rows(rows, arity);
  return build_table_sorted(arity, rows);
}

SortedTable build_table(Relation rel) {
  if (rel.arity() == 0) return SortedTable(0, rel.empty() ? 0 : 1, {});
  return build_table(rel.arity(), std::move(rel.mutable_data()));
}

void dump_table(const SortedTable& t, std::ostream& out) {
  out << t.arity() << ' ' << t.size() << '\n';
  std::vector<Id> rows = t.rows();
  for (std::uint64_t r = 0; r < t.size(); ++r) {
    for (std::size_t c = 0; c < t.arity(); ++c) {
      if (c) out << ' ';
      out << rows[r * t.arity() + c];
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Relation

Relation::Relation(std::vector<std::string> attributes) : attrs_(std::move(attributes)) {
  for (std::size_t i = 0; i < attrs_.size(); ++i)
    for (std::size_t j = i + 1; j < attrs_.size(); ++j)
      if (attrs_[i] == attrs_[j]) throw std::invalid_argument("Relation: duplicate attribute " + attrs_[i]);
}

Relation Relation::unit() {
  Relation r;
  r.rows_ = 1;
  return r;
}

int Relation::index_of(const std::string& attr) const {
  for (std::size_t i = 0; i < attrs_.size(); ++i)
    if (attrs_[i] == attr) return static_cast<int>(i);
  return -1;
}

void Relation::add_row(std::span<const Id> row) {
  assert(row.size() == arity());
  data_.insert(data_.end(), row.begin(), row.end());
  ++rows_;
}

void Relation::sort_by(std::span<const std::size_t> key_columns) {
  const std::size_t k = arity();
  if (k == 0 || rows_ < 2) return;
  std::vector<std::size_t> order(key_columns.begin(), key_columns.end());
  for (std::size_t c = 0; c < k; ++c)
    if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
  bool identity = true;
  for (std::size_t c = 0; c < k; ++c) identity = identity && order[c] == c;
  if (identity) {
    // Rows are a set, so sorting plus unique keeps every row.
    sort_unique_rows(data_, k);
    rows_ = data_.size() / k;
    return;
  }
  std::vector<Id> permuted(data_.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < k; ++c) permuted[r * k + c] = data_[r * k + order[c]];
  sort_unique_rows(permuted, k);
  rows_ = permuted.size() / k;
  data_.resize(permuted.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < k; ++c) data_[r * k + order[c]] = permuted[r * k + c];
}

void Relation::sort_dedup() {
  if (arity() == 0) {
    rows_ = std::min<std::size_t>(rows_, 1);
    return;
  }
  sort_unique_rows(data_, arity());
  rows_ = data_.size() / arity();
}

bool Relation::is_sorted_on(std::span<const std::size_t> key_columns) const {
  for (std::size_t r = 1; r < rows_; ++r) {
    auto a = row(r - 1), b = row(r);
    for (std::size_t c : key_columns) {
      if (a[c] < b[c]) break;
      if (a[c] > b[c]) return false;
    }
  }
  return true;
}

Relation Relation::project(std::span<const std::string> attrs) const {
  std::vector<std::string> kept;
  std::vector<std::size_t> idx;
  for (const auto& a : attrs) {
    const int i = index_of(a);
    if (i >= 0 && std::find(kept.begin(), kept.end(), a) == kept.end()) {
      kept.push_back(a);
      idx.push_back(static_cast<std::size_t>(i));
    }
  }
  Relation out(std::move(kept));
  out.data_.reserve(rows_ * idx.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t i : idx) out.data_.push_back(data_[r * arity() + i]);
  out.rows_ = rows_;
  out.sort_dedup();
  return out;
}

// ---------------------------------------------------------------------------
// Joins

namespace {

struct JoinLayout {
  std::vector<std::size_t> left_keys, right_keys, right_rest;
  std::vector<std::string> out_attrs;
};

JoinLayout layout_join(const Relation& left, const Relation& right, std::span<const std::string> join_attrs) {
  JoinLayout l;
  for (const auto& a : join_attrs) {
    const int li = left.index_of(a), ri = right.index_of(a);
    if (li < 0 || ri < 0) throw std::invalid_argument("join attribute '" + a + "' missing from an input");
    l.left_keys.push_back(static_cast<std::size_t>(li));
    l.right_keys.push_back(static_cast<std::size_t>(ri));
  }
  l.out_attrs = left.attributes();
  for (std::size_t i = 0; i < right.arity(); ++i) {
    const auto& a = right.attributes()[i];
    if (std::find(join_attrs.begin(), join_attrs.end(), a) != join_attrs.end()) continue;
    if (left.index_of(a) >= 0)
      throw std::invalid_argument("attribute '" + a + "' is shared but not listed as a join attribute");
    l.right_rest.push_back(i);
    l.out_attrs.push_back(a);
  }
  return l;
}

int compare_keys(std::span<const Id> a, const std::vector<std::size_t>& ka, std::span<const Id> b,
                 const std::vector<std::size_t>& kb) {
  for (std::size_t i = 0; i < ka.size(); ++i) {
    const Id x = a[ka[i]], y = b[kb[i]];
    if (x != y) return x < y ? -1 : 1;
  }
  return 0;
}

void emit_joined(Relation& out, std::span<const Id> l, std::span<const Id> r, const JoinLayout& lay,
                 std::vector<Id>& scratch) {
  scratch.assign(l.begin(), l.end());
  for (std::size_t i : lay.right_rest) scratch.push_back(r[i]);
  out.add_row(scratch);
}

}  // namespace

Relation merge_join(const Relation& left, const Relation& right, std::span<const std::string> join_attrs) {
  const JoinLayout lay = layout_join(left, right, join_attrs);
  assert(left.is_sorted_on(lay.left_keys) && right.is_sorted_on(lay.right_keys));
  Relation out(lay.out_attrs);
  std::vector<Id> scratch;
  std::size_t i = 0, j = 0;
  while (i < left.size() && j < right.size()) {
    const int c = compare_keys(left.row(i), lay.left_keys, right.row(j), lay.right_keys);
    if (c < 0) {
      ++i;
    } else if (c > 0) {
      ++j;
    } else {
      std::size_t i_end = i + 1, j_end = j + 1;
      while (i_end < left.size() && compare_keys(left.row(i), lay.left_keys, left.row(i_end), lay.left_keys) == 0)
        ++i_end;
      while (j_end < right.size() &&
             compare_keys(right.row(j), lay.right_keys, right.row(j_end), lay.right_keys) == 0)
        ++j_end;
      for (std::size_t a = i; a < i_end; ++a)
        for (std::size_t b = j; b < j_end; ++b) emit_joined(out, left.row(a), right.row(b), lay, scratch);
      i = i_end;
      j = j_end;
    }
  }
  return out;
}

Relation hash_join(const Relation& left, const Relation& right, std::span<const std::string> join_attrs) {
  const JoinLayout lay = layout_join(left, right, join_attrs);
  Relation out(lay.out_attrs);
  std::unordered_multimap<std::uint64_t, std::size_t> table;
  table.reserve(right.size());
  std::vector<Id> key(lay.right_keys.size());
  for (std::size_t r = 0; r < right.size(); ++r) {
    auto row = right.row(r);
    for (std::size_t k = 0; k < key.size(); ++k) key[k] = row[lay.right_keys[k]];
    table.emplace(hash_key(key.data(), key.size()), r);
  }
  std::vector<Id> scratch;
  for (std::size_t l = 0; l < left.size(); ++l) {
    auto row = left.row(l);
    for (std::size_t k = 0; k < key.size(); ++k) key[k] = row[lay.left_keys[k]];
    auto [first, last] = table.equal_range(hash_key(key.data(), key.size()));
    for (auto it = first; it != last; ++it) {
      auto rrow = right.row(it->second);
      if (compare_keys(row, lay.left_keys, rrow, lay.right_keys) == 0) emit_joined(out, row, rrow, lay, scratch);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// On-demand concatenation

bool RowFilter::accepts(std::span<const Id> row) const {
  for (const auto& [c, v] : equals_constant)
    if (row[c] != v) return false;
  for (const auto& [a, b] : equals_column)
    if (row[a] != row[b]) return false;
  return true;
}

ConcatCounters& concat_counters() {
  static ConcatCounters counters;
  return counters;
}

std::size_t ConcatenatedRelation::size() const {
  if (table_) return table_->size();
  return needed_.empty() ? 0 : rows_.size() / needed_.size();
}

namespace {

void append_projected(const SortedTable& t, std::span<const std::size_t> needed, const RowFilter& filter,
                      std::vector<Id>& out) {
  constexpr std::uint64_t chunk = 4096;
  std::vector<Id> buf;
  for (std::uint64_t b = 0; b < t.size(); b += chunk) {
    const std::uint64_t e = std::min<std::uint64_t>(t.size(), b + chunk);
    buf.clear();
    t.decode_rows(b, e, buf);
    for (std::uint64_t r = 0; r < e - b; ++r) {
      std::span<const Id> row(buf.data() + r * t.arity(), t.arity());
      if (!filter.accepts(row)) continue;
      for (std::size_t c : needed) out.push_back(row[c]);
    }
  }
}

}  // namespace

void ConcatenatedRelation::build_hash(std::size_t key_width) {
  hash_key_width_ = key_width;
  buckets_.clear();
  bucket_of_hash_.clear();
  const std::size_t w = width();
  if (w == 0) return;
  const std::size_t n = rows_.size() / w;
  bucket_of_hash_.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Id* key = &rows_[r * w];
    const std::uint64_t h = hash_key(key, key_width);
    std::uint32_t bucket = UINT32_MAX;
    auto [first, last] = bucket_of_hash_.equal_range(h);
    for (auto it = first; it != last; ++it) {
      const Id* rep = &rows_[buckets_[it->second].front() * w];
      if (compare_rows(rep, key, key_width) == 0) {
        bucket = it->second;
        break;
      }
    }
    if (bucket == UINT32_MAX) {
      bucket = static_cast<std::uint32_t>(buckets_.size());
      buckets_.emplace_back();
      bucket_of_hash_.emplace(h, bucket);
    }
    buckets_[bucket].push_back(static_cast<std::uint32_t>(r));
  }
}

std::span<const std::uint32_t> ConcatenatedRelation::hash_lookup(std::span<const Id> key) const {
  const std::size_t w = width();
  auto [first, last] = bucket_of_hash_.equal_range(hash_key(key.data(), key.size()));
  for (auto it = first; it != last; ++it) {
    const auto& rows = buckets_[it->second];
    if (compare_rows(&rows_[rows.front() * w], key.data(), key.size()) == 0) return rows;
  }
  return {};
}

void ConcatenatedRelation::materialize(const RowFilter& filter, std::size_t hash_key_width) {
  if (!table_) return;
  const SortedTable* t = table_;
  table_ = nullptr;
  rows_.clear();
  append_projected(*t, needed_, filter, rows_);
  auto& counters = concat_counters();
  ++counters.copies;
  counters.rows_copied += needed_.empty() ? 0 : rows_.size() / needed_.size();
  if (mode_ == ConcatMode::sorted) {
    sort_unique_rows(rows_, width());
  } else {
    build_hash(hash_key_width);
  }
}

ConcatenatedRelation concat_blocks(std::span<const SortedTable* const> blocks, std::span<const std::size_t> needed_cols,
                                   ConcatMode mode, const RowFilter& filter, std::size_t hash_key_width) {
  for (const auto* b : blocks)
    if (b->arity() != blocks.front()->arity()) throw std::invalid_argument("concat_blocks: arity mismatch");
  ConcatenatedRelation out;
  out.mode_ = mode;
  out.needed_.assign(needed_cols.begin(), needed_cols.end());
  auto& counters = concat_counters();
  if (blocks.size() == 1) {
    out.table_ = blocks.front();
    ++counters.passthroughs;
    return out;
  }
  for (const auto* b : blocks) append_projected(*b, needed_cols, filter, out.rows_);
  if (!blocks.empty()) {
    ++counters.copies;
    counters.rows_copied += needed_cols.empty() ? 0 : out.rows_.size() / needed_cols.size();
  }
  if (mode == ConcatMode::sorted) {
    sort_unique_rows(out.rows_, out.width());
  } else {
    out.build_hash(hash_key_width);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Duplicate elimination

Relation subtract_sorted_rows(Relation tmp, std::span<const SortedTable* const> history) {
  const std::size_t k = tmp.arity();
  if (tmp.empty()) return tmp;
  if (k == 0) {
    for (const auto* h : history)
      if (!h->empty()) return Relation();
    return tmp;
  }
  const std::size_t n = tmp.size();
  const std::vector<Id>& rows = tmp.data();
  std::vector<char> removed(n, 0);
  std::vector<Id> buf;
  for (const SortedTable* h : history) {
    if (h->empty()) continue;
    assert(h->arity() == k);
    // Probe with binary search when tmp is much smaller than the block; merge otherwise.
    std::uint64_t log_h = 1;
    while ((std::uint64_t{1} << log_h) < h->size()) ++log_h;
    if (n * log_h * 4 < h->size()) {
      for (std::size_t r = 0; r < n; ++r)
        if (!removed[r] && h->contains(std::span<const Id>(&rows[r * k], k))) removed[r] = 1;
      continue;
    }
    constexpr std::uint64_t chunk = 4096;
    std::size_t i = 0;
    for (std::uint64_t b = 0; b < h->size() && i < n; b += chunk) {
      const std::uint64_t e = std::min<std::uint64_t>(h->size(), b + chunk);
      buf.clear();
      h->decode_rows(b, e, buf);
      std::size_t j = 0;
      const std::size_t m = e - b;
      while (i < n && j < m) {
        const int c = compare_rows(&rows[i * k], &buf[j * k], k);
        if (c < 0) {
          ++i;
        } else if (c > 0) {
          ++j;
        } else {
          removed[i] = 1;
          ++i;
          ++j;
        }
      }
    }
  }
  Relation out(tmp.attributes());
  auto& data = out.mutable_data();
  std::size_t kept = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (removed[r]) continue;
    data.insert(data.end(), rows.begin() + static_cast<std::ptrdiff_t>(r * k),
                rows.begin() + static_cast<std::ptrdiff_t>((r + 1) * k));
    ++kept;
  }
  out.set_row_count(kept);
  return out;
}

SortedTable dedup_subtract(const SortedTable& tmp, std::span<const SortedTable* const> history) {
  std::vector<std::string> attrs;
  for (std::size_t c = 0; c < tmp.arity(); ++c) attrs.push_back("c" + std::to_string(c));
  Relation rel(attrs);
  rel.mutable_data() = tmp.rows();
  rel.set_row_count(tmp.size());
  return build_table(subtract_sorted_rows(std::move(rel), history));
}

}  // namespace coldl
