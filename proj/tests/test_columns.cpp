#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "coldl/columns.hpp"
#include "oracle.hpp"

using namespace coldl;

namespace {

std::vector<Id> random_rows(std::mt19937_64& rng, std::size_t rows, std::size_t arity, Id domain) {
  std::vector<Id> out(rows * arity);
  for (auto& v : out) v = rng() % domain;
  return out;
}

Relation random_relation(std::mt19937_64& rng, std::vector<std::string> attrs, std::size_t rows, Id domain) {
  Relation r(std::move(attrs));
  const auto data = random_rows(rng, rows, r.arity(), domain);
  for (std::size_t i = 0; i < rows; ++i) r.add_row(std::span<const Id>(data).subspan(i * r.arity(), r.arity()));
  r.sort_dedup();
  return r;
}

std::vector<std::vector<Id>> as_rows(const SortedTable& t) {
  const auto flat = t.rows();
  std::vector<std::vector<Id>> out;
  for (std::size_t r = 0; r < t.size(); ++r)
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(r * t.arity()),
                     flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * t.arity()));
  return out;
}

}  // namespace

TEST(Columns, RleExamples) {
  const Id c = 2, d = 3, pO = 7;
  const std::vector<coldl::Run> runs = {{c, 3}, {d, 1}};
  EXPECT_EQ(rle_encode(std::vector<Id>{c, c, c, d}), runs);
  EXPECT_TRUE(rle_encode(std::vector<Id>{}).empty());
  const std::vector<coldl::Run> single = {{pO, 3}};
  EXPECT_EQ(rle_encode(std::vector<Id>{pO, pO, pO}), single);
  EXPECT_EQ(rle_decode(runs), (std::vector<Id>{c, c, c, d}));
}

TEST(Columns, RleRoundTripRandom) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10'000; ++i) {
    const std::size_t n = rng() % 40;
    const Id domain = 1 + rng() % 4;
    std::vector<Id> v(n);
    for (auto& x : v) x = rng() % domain;
    const auto runs = rle_encode(v);
    ASSERT_EQ(rle_decode(runs), v);
    for (std::size_t r = 1; r < runs.size(); ++r) ASSERT_NE(runs[r].value, runs[r - 1].value);
    if (n == 0) continue;
    const auto col = make_column(v);
    std::vector<Id> decoded;
    col->decode(0, n, decoded);
    ASSERT_EQ(decoded, v);
    for (std::size_t r = 0; r < n; ++r) ASSERT_EQ(col->at(r), v[r]);
  }
}

TEST(Columns, ConstantColumnIsConstantSize) {
  const ConstantColumn small(5, 10);
  const ConstantColumn large(5, 10'000'000);
  EXPECT_EQ(small.storage_bytes(), large.storage_bytes());
  EXPECT_EQ(large.size(), 10'000'000u);
  EXPECT_EQ(large.at(9'999'999), 5u);
  const std::vector<Id> same(1000, 4);
  EXPECT_EQ(make_column(same)->kind(), ColumnKind::constant);
  const std::vector<Id> two = {1, 1, 2};
  EXPECT_EQ(make_column(two)->kind(), ColumnKind::rle);
}

TEST(Columns, BuildTableExample) {
  const Id a = 0, b = 1, c = 2, pO = 3;
  const SortedTable t = build_table(3, {b, pO, a, c, pO, b, c, pO, a});
  const std::vector<std::vector<Id>> expected = {{b, pO, a}, {c, pO, a}, {c, pO, b}};
  EXPECT_EQ(as_rows(t), expected);
  EXPECT_EQ(t.column(1).kind(), ColumnKind::constant);
  EXPECT_EQ(build_table(1, {a, a}).size(), 1u);
  const SortedTable empty = build_table(2, {});
  EXPECT_EQ(empty.size(), 0u);
  EXPECT_EQ(empty.arity(), 2u);
}

TEST(Columns, BuildTableStrictlyIncreasing) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 1 + rng() % 4;
    const auto data = random_rows(rng, rng() % 300, k, 1 + rng() % 6);
    const SortedTable t = build_table(k, data);
    const auto rows = as_rows(t);
    for (std::size_t r = 1; r < rows.size(); ++r) ASSERT_LT(rows[r - 1], rows[r]);
    std::set<std::vector<Id>> want;
    for (std::size_t r = 0; r * k < data.size(); ++r)
      want.insert(std::vector<Id>(data.begin() + static_cast<std::ptrdiff_t>(r * k),
                                  data.begin() + static_cast<std::ptrdiff_t>((r + 1) * k)));
    EXPECT_EQ(std::set<std::vector<Id>>(rows.begin(), rows.end()), want);
    for (const auto& row : want) EXPECT_TRUE(t.contains(row));
  }
}

TEST(Columns, EqualRangeOnPrefix) {
  const SortedTable t = build_table(2, {1, 1, 1, 2, 2, 1, 3, 3, 3, 4});
  const std::vector<Id> p3 = {3};
  EXPECT_EQ(t.equal_range(p3), (std::pair<std::uint64_t, std::uint64_t>{3, 5}));
  const std::vector<Id> p9 = {9};
  const auto none = t.equal_range(p9);
  EXPECT_EQ(none.first, none.second);
  EXPECT_FALSE(t.contains(std::vector<Id>{2, 2}));
}

TEST(Columns, MergeJoinExample) {
  // Inverse(v,w) joined with T(x,v,y) on the property column.
  const Id hP = 0, pO = 1, iO = 2, a = 3, b = 4, c = 5;
  Relation inv({"V", "W"});
  inv.add_row(std::vector<Id>{hP, pO});
  Relation t({"V", "X", "Y"});
  for (const auto& row : std::vector<std::vector<Id>>{{hP, a, b}, {hP, b, c}, {iO, hP, pO}}) t.add_row(row);
  t.sort_dedup();
  const std::vector<std::string> on = {"V"};
  const Relation out = merge_join(inv, t, on);
  EXPECT_EQ(oracle::as_bindings(out), oracle::nested_loop_join(inv, t));
  EXPECT_EQ(out.size(), 2u);
  EXPECT_EQ(oracle::as_bindings(merge_join(t, Relation::unit(), {})), oracle::as_bindings(t));
  Relation other({"V", "Z"});
  other.add_row(std::vector<Id>{pO, a});
  EXPECT_TRUE(merge_join(inv, other, on).empty());
}

TEST(Columns, JoinAlgorithmsAgree) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Id domain = 1 + rng() % 30;
    const Relation left = random_relation(rng, {"A", "B"}, rng() % 1000, domain);
    const bool two_keys = rng() % 2;
    const Relation right = random_relation(rng, two_keys ? std::vector<std::string>{"A", "B", "C"}
                                                         : std::vector<std::string>{"B", "C"},
                                           rng() % 1000, domain);
    std::vector<std::string> on = two_keys ? std::vector<std::string>{"A", "B"} : std::vector<std::string>{"B"};
    Relation l = left, r = right;
    std::vector<std::size_t> lk, rk;
    for (const auto& att : on) {
      lk.push_back(static_cast<std::size_t>(l.index_of(att)));
      rk.push_back(static_cast<std::size_t>(r.index_of(att)));
    }
    l.sort_by(lk);
    r.sort_by(rk);
    const auto expected = oracle::nested_loop_join(left, right);
    EXPECT_EQ(oracle::as_bindings(merge_join(l, r, on)), expected) << "pair " << i;
    EXPECT_EQ(oracle::as_bindings(hash_join(left, right, on)), expected) << "pair " << i;
  }
}

TEST(Columns, ConcatBlocks) {
  const SortedTable p1 = build_table(3, {0, 9, 1, 1, 9, 2});
  const SortedTable p2 = build_table(3, {0, 8, 2, 3, 8, 0});
  const SortedTable* both[] = {&p1, &p2};
  const std::size_t subject[] = {0};
  const auto u = concat_blocks(both, subject, ConcatMode::sorted);
  EXPECT_FALSE(u.is_passthrough());
  EXPECT_EQ(u.rows(), (std::vector<Id>{0, 1, 3}));

  const auto before = concat_counters().passthroughs.load();
  const SortedTable* one[] = {&p1};
  const std::size_t all[] = {0, 1, 2};
  const auto pass = concat_blocks(one, all, ConcatMode::sorted);
  EXPECT_TRUE(pass.is_passthrough());
  EXPECT_EQ(pass.table(), &p1);
  EXPECT_EQ(concat_counters().passthroughs.load(), before + 1);

  const auto none = concat_blocks({}, subject, ConcatMode::sorted);
  EXPECT_EQ(none.size(), 0u);
}

TEST(Columns, ConcatHashedLookup) {
  const SortedTable p1 = build_table(2, {1, 5, 2, 6, 1, 7});
  const SortedTable p2 = build_table(2, {1, 8, 3, 9});
  const SortedTable* both[] = {&p1, &p2};
  const std::size_t cols[] = {0, 1};
  const auto h = concat_blocks(both, cols, ConcatMode::hashed, {}, 1);
  const std::vector<Id> key = {1};
  std::set<Id> seen;
  for (auto r : h.hash_lookup(key)) seen.insert(h.rows()[r * 2 + 1]);
  EXPECT_EQ(seen, (std::set<Id>{5, 7, 8}));
  RowFilter f;
  f.equals_constant.emplace_back(0, 3);
  const auto filtered = concat_blocks(both, cols, ConcatMode::sorted, f);
  EXPECT_EQ(filtered.rows(), (std::vector<Id>{3, 9}));
}

TEST(Columns, DedupSubtract) {
  const SortedTable history = build_table(3, {1, 7, 0, 2, 7, 1, 2, 7, 0});
  const SortedTable* h[] = {&history};
  // Everything already known.
  EXPECT_TRUE(dedup_subtract(build_table(3, {2, 7, 0, 1, 7, 0}), h).empty());
  const SortedTable tmp = build_table(3, {1, 7, 0, 3, 3, 3});
  EXPECT_EQ(as_rows(dedup_subtract(tmp, {})), as_rows(tmp));
  EXPECT_EQ(as_rows(dedup_subtract(tmp, h)), (std::vector<std::vector<Id>>{{3, 3, 3}}));
}

TEST(Columns, DedupSubtractProperties) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 1 + rng() % 3;
    const Id domain = 1 + rng() % 5;
    const SortedTable tmp = build_table(k, random_rows(rng, rng() % 100, k, domain));
    std::vector<SortedTable> hist;
    for (std::size_t n = rng() % 4; n > 0; --n) hist.push_back(build_table(k, random_rows(rng, rng() % 60, k, domain)));
    std::vector<const SortedTable*> ptrs;
    for (const auto& t : hist) ptrs.push_back(&t);
    const auto out = as_rows(dedup_subtract(tmp, ptrs));
    std::set<std::vector<Id>> known;
    for (const auto& t : hist)
      for (const auto& r : as_rows(t)) known.insert(r);
    std::vector<std::vector<Id>> want;
    for (const auto& r : as_rows(tmp))
      if (!known.count(r)) want.push_back(r);
    EXPECT_EQ(out, want);
  }
}
