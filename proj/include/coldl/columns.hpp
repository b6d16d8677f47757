#pragma once

#include <atomic>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coldl/common.hpp"

namespace coldl {

enum class ColumnKind { rle, constant, shared, edb_proxy };

/// One column of a SortedTable. Immutable once constructed.
class Column {
 public:
  virtual ~Column() = default;

  virtual ColumnKind kind() const noexcept = 0;
  virtual std::uint64_t size() const noexcept = 0;
  virtual Id at(std::uint64_t row) const = 0;
  /// Appends rows [begin, end) to `out`.
  virtual void decode(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const = 0;
  /// Bytes owned by this column object (shared/proxied data excluded).
  virtual std::size_t storage_bytes() const noexcept = 0;

  /// Sub-range of [lo, hi) holding `value`, assuming the column is sorted on [lo, hi).
  virtual std::pair<std::uint64_t, std::uint64_t> equal_range(std::uint64_t lo, std::uint64_t hi, Id value) const;
};

using ColumnPtr = std::shared_ptr<const Column>;

struct Run {
  Id value;
  std::uint64_t length;
  friend bool operator==(const Run&, const Run&) = default;
};

class RleColumn final : public Column {
 public:
  explicit RleColumn(std::span<const Id> values);

  ColumnKind kind() const noexcept override { return ColumnKind::rle; }
  std::uint64_t size() const noexcept override { return ends_.empty() ? 0 : ends_.back(); }
  Id at(std::uint64_t row) const override;
  void decode(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const override;
  std::size_t storage_bytes() const noexcept override;
  std::pair<std::uint64_t, std::uint64_t> equal_range(std::uint64_t lo, std::uint64_t hi, Id value) const override;

  std::vector<Run> runs() const;
  std::size_t run_count() const noexcept { return values_.size(); }

 private:
  std::size_t run_of(std::uint64_t row) const;

  std::vector<Id> values_;
  std::vector<std::uint64_t> ends_;  // exclusive end row of each run
};

/// The single-run special case; O(1) storage regardless of row count.
class ConstantColumn final : public Column {
 public:
  ConstantColumn(Id value, std::uint64_t rows) : value_(value), rows_(rows) {}

  ColumnKind kind() const noexcept override { return ColumnKind::constant; }
  std::uint64_t size() const noexcept override { return rows_; }
  Id at(std::uint64_t) const override { return value_; }
  void decode(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const override {
    out.insert(out.end(), end - begin, value_);
  }
  std::size_t storage_bytes() const noexcept override { return sizeof(*this); }
  std::pair<std::uint64_t, std::uint64_t> equal_range(std::uint64_t lo, std::uint64_t hi, Id value) const override {
    return value == value_ ? std::pair{lo, hi} : std::pair{lo, lo};
  }

  Id value() const noexcept { return value_; }

 private:
  Id value_;
  std::uint64_t rows_;
};

/// A column object owned by another table, reused without copying.
class SharedColumn final : public Column {
 public:
  explicit SharedColumn(ColumnPtr source);

  ColumnKind kind() const noexcept override { return ColumnKind::shared; }
  std::uint64_t size() const noexcept override { return source_->size(); }
  Id at(std::uint64_t row) const override { return source_->at(row); }
  void decode(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const override {
    source_->decode(begin, end, out);
  }
  std::size_t storage_bytes() const noexcept override { return sizeof(*this); }
  std::pair<std::uint64_t, std::uint64_t> equal_range(std::uint64_t lo, std::uint64_t hi, Id value) const override {
    return source_->equal_range(lo, hi, value);
  }

  const ColumnPtr& source() const noexcept { return source_; }

 private:
  ColumnPtr source_;
};

/// Values read on demand from a contiguous slice of an EDB permutation index.
/// The index must outlive the column.
class EdbProxyColumn final : public Column {
 public:
  /// `rows` is row-major with `stride` ids per tuple; the column yields component `component`.
  EdbProxyColumn(std::span<const Id> rows, std::size_t stride, std::size_t component);

  ColumnKind kind() const noexcept override { return ColumnKind::edb_proxy; }
  std::uint64_t size() const noexcept override { return rows_.size() / stride_; }
  Id at(std::uint64_t row) const override { return rows_[row * stride_ + component_]; }
  void decode(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const override;
  std::size_t storage_bytes() const noexcept override { return sizeof(*this); }

 private:
  std::span<const Id> rows_;
  std::size_t stride_;
  std::size_t component_;
};

/// Picks ConstantColumn for a single distinct value, RLE otherwise.
ColumnPtr make_column(std::span<const Id> values);

std::vector<Run> rle_encode(std::span<const Id> values);
std::vector<Id> rle_decode(std::span<const Run> runs);

/// Lexicographically sorted, duplicate-free table stored column-wise.
class SortedTable {
 public:
  SortedTable() = default;
  SortedTable(std::size_t arity, std::uint64_t rows, std::vector<ColumnPtr> columns);

  std::size_t arity() const noexcept { return arity_; }
  std::uint64_t size() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_ == 0; }
  const std::vector<ColumnPtr>& columns() const noexcept { return columns_; }
  const Column& column(std::size_t i) const { return *columns_.at(i); }

  Id at(std::uint64_t row, std::size_t col) const { return columns_[col]->at(row); }
  /// Appends rows [begin, end) to `out` in row-major order.
  void decode_rows(std::uint64_t begin, std::uint64_t end, std::vector<Id>& out) const;
  std::vector<Id> rows() const;

  /// Row range whose first `prefix.size()` columns equal `prefix`.
  std::pair<std::uint64_t, std::uint64_t> equal_range(std::span<const Id> prefix) const;
  bool contains(std::span<const Id> row) const;

  std::size_t storage_bytes() const noexcept;

 private:
  std::size_t arity_ = 0;
  std::uint64_t rows_ = 0;
  std::vector<ColumnPtr> columns_;
};

/// Builds a table from row-major tuples (arity >= 1); sorts and removes duplicates.
SortedTable build_table(std::size_t arity, std::vector<Id> rows);
/// Builds a table from rows that are already strictly increasing.
SortedTable build_table_sorted(std::size_t arity, std::span<const Id> rows);

class Relation;
/// Builds a table from a relation of any arity (nullary relations hold 0 or 1 tuple).
SortedTable build_table(Relation rel);

/// Sorts row-major tuples lexicographically and removes duplicates.
void sort_unique_rows(std::vector<Id>& rows, std::size_t arity);

/// Debug dump: header `arity rowcount`, then one row per line, ids space-separated.
void dump_table(const SortedTable& t, std::ostream& out);

/// Transient set of tuples with named attributes, stored row-major.
class Relation {
 public:
  Relation() = default;
  explicit Relation(std::vector<std::string> attributes);

  /// Zero attributes, one empty tuple: the identity of natural join.
  static Relation unit();

  const std::vector<std::string>& attributes() const noexcept { return attrs_; }
  std::size_t arity() const noexcept { return attrs_.size(); }
  std::size_t size() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_ == 0; }
  /// Index of an attribute, or -1.
  int index_of(const std::string& attr) const;

  void add_row(std::span<const Id> row);
  std::span<const Id> row(std::size_t i) const { return {data_.data() + i * arity(), arity()}; }
  const std::vector<Id>& data() const noexcept { return data_; }
  std::vector<Id>& mutable_data() noexcept { return data_; }
  /// After writing mutable_data directly, resync the row count.
  void set_row_count(std::size_t rows) noexcept { rows_ = rows; }
  void reserve(std::size_t rows) { data_.reserve(rows * arity()); }

  /// Sorts rows by the given columns first, then by the remaining columns.
  void sort_by(std::span<const std::size_t> key_columns);
  void sort_dedup();
  bool is_sorted_on(std::span<const std::size_t> key_columns) const;
  /// Distinct projection onto the named attributes (missing names are skipped).
  Relation project(std::span<const std::string> attrs) const;

 private:
  std::vector<std::string> attrs_;
  std::vector<Id> data_;
  std::size_t rows_ = 0;
};

/// Natural join of two relations sorted on `join_attrs` (in that order), in one merge pass.
/// Output attributes: left's, then right's non-join attributes. Output is sorted on join_attrs.
Relation merge_join(const Relation& left, const Relation& right, std::span<const std::string> join_attrs);

/// Same tuple set as merge_join, without sort requirements; output order unspecified.
Relation hash_join(const Relation& left, const Relation& right, std::span<const std::string> join_attrs);

enum class ConcatMode { sorted, hashed };

/// Restriction applied while concatenating: column == constant, column == column.
struct RowFilter {
  std::vector<std::pair<std::size_t, Id>> equals_constant;
  std::vector<std::pair<std::size_t, std::size_t>> equals_column;

  bool empty() const noexcept { return equals_constant.empty() && equals_column.empty(); }
  bool accepts(std::span<const Id> row) const;
};

/// Union of several blocks projected onto `needed_cols`. A single block is
/// passed through by reference; the caller then reads it directly.
class ConcatenatedRelation {
 public:
  bool is_passthrough() const noexcept { return table_ != nullptr; }
  const SortedTable* table() const noexcept { return table_; }
  ConcatMode mode() const noexcept { return mode_; }
  const std::vector<std::size_t>& needed_columns() const noexcept { return needed_; }

  /// Materialized rows over needed_columns (only when not a passthrough).
  /// Sorted mode: lexicographically sorted and duplicate-free.
  const std::vector<Id>& rows() const noexcept { return rows_; }
  std::size_t width() const noexcept { return needed_.size(); }
  std::size_t size() const;

  /// Row indices whose first `key.size()` needed columns equal `key` (hashed mode).
  std::span<const std::uint32_t> hash_lookup(std::span<const Id> key) const;
  std::size_t hash_key_width() const noexcept { return hash_key_width_; }

  /// Copies a passthrough table into the materialized form.
  void materialize(const RowFilter& filter = {}, std::size_t hash_key_width = 0);

 private:
  friend ConcatenatedRelation concat_blocks(std::span<const SortedTable* const>, std::span<const std::size_t>,
                                            ConcatMode, const RowFilter&, std::size_t);
  void build_hash(std::size_t key_width);

  const SortedTable* table_ = nullptr;
  ConcatMode mode_ = ConcatMode::sorted;
  std::vector<std::size_t> needed_;
  std::vector<Id> rows_;
  std::size_t hash_key_width_ = 0;
  std::vector<std::vector<std::uint32_t>> buckets_;
  std::unordered_multimap<std::uint64_t, std::uint32_t> bucket_of_hash_;
};

/// Consolidates `blocks` for one join. `hash_key_width` is the number of leading
/// needed columns forming the hash key in hashed mode.
ConcatenatedRelation concat_blocks(std::span<const SortedTable* const> blocks, std::span<const std::size_t> needed_cols,
                                   ConcatMode mode, const RowFilter& filter = {}, std::size_t hash_key_width = 0);

/// Instrumentation for on-demand concatenation.
struct ConcatCounters {
  std::atomic<std::uint64_t> passthroughs{0};
  std::atomic<std::uint64_t> copies{0};
  std::atomic<std::uint64_t> rows_copied{0};
};
ConcatCounters& concat_counters();

/// tmp minus the union of history (all sorted, same arity).
SortedTable dedup_subtract(const SortedTable& tmp, std::span<const SortedTable* const> history);

/// Row-level variant used by the engine: `tmp` sorted and duplicate-free; returns the survivors.
Relation subtract_sorted_rows(Relation tmp, std::span<const SortedTable* const> history);

}  // namespace coldl
