#include <gtest/gtest.h>

#include <sstream>

#include "coldl/engine.hpp"
#include "oracle.hpp"

using namespace coldl;

namespace {

struct Fixture {
  Dictionary dict;
  Program program;
  std::shared_ptr<EdbStore> edb = std::make_shared<EdbStore>();

  Fixture(const std::string& rules, const std::string& tsv) {
    program = parse_program(rules, dict);
    program.canonicalize();
    std::istringstream in(tsv);
    load_facts(in, FactFormat::tsv, *edb, dict, &program);
  }

  std::set<std::vector<std::string>> facts(const Materialization& m, const std::string& pred) const {
    const std::size_t k = program.predicate(*program.find_predicate(pred)).arity;
    std::set<std::vector<std::string>> out;
    const auto rows = m.facts(pred);
    for (std::size_t r = 0; r < rows.size(); r += k) {
      std::vector<std::string> t;
      for (std::size_t c = 0; c < k; ++c) t.push_back(dict.lookup(rows[r + c]));
      out.insert(t);
    }
    return out;
  }
};

Fixture running_example() {
  return Fixture(oracle::read_text(COLDL_TEST_DATA "/running_example.dl"),
                 oracle::read_text(COLDL_TEST_DATA "/running_example.tsv"));
}

std::string chain(std::size_t n) {
  std::string s;
  for (std::size_t i = 1; i < n; ++i) s += "q\t" + std::to_string(i) + "\t" + std::to_string(i + 1) + "\n";
  return s;
}

const char* kTc = "t(X,Y) :- q(X,Y).\nt(X,Z) :- t(X,Y), t(Y,Z).\n";

}  // namespace

TEST(Engine, RunningExampleFacts) {
  auto f = running_example();
  const auto m = materialize(f.program, f.edb);
  EXPECT_EQ(m.status, RunStatus::fixpoint);
  const std::set<std::vector<std::string>> t = {{"hP", "iO", "pO"}, {"a", "hP", "b"}, {"b", "hP", "c"}, {"a", "hP", "c"},
                                                {"b", "pO", "a"},   {"c", "pO", "b"}, {"c", "pO", "a"}};
  EXPECT_EQ(f.facts(m, "T"), t);
  const std::set<std::vector<std::string>> inv = {{"hP", "pO"}};
  EXPECT_EQ(f.facts(m, "Inverse"), inv);
  EXPECT_EQ(m.idb_fact_count(), 8u);
  EXPECT_EQ(m.stats.counter("facts.idb"), 8u);
}

TEST(Engine, FirstApplicationOfBaseRule) {
  auto f = running_example();
  Materializer m(f.program, *f.edb);
  const Block* b = m.apply_rule(0);
  ASSERT_NE(b, nullptr);
  EXPECT_EQ(b->table->size(), 3u);
  EXPECT_EQ(b->step, 1u);
  EXPECT_EQ(m.store().step(), 1u);
  EXPECT_EQ(m.store().last_applied(0), 1u);
  // A rule without derived body atoms has nothing new to contribute afterwards.
  EXPECT_EQ(m.apply_rule(0), nullptr);
  EXPECT_EQ(m.store().step(), 2u);
}

TEST(Engine, FurtherRoundAddsNothing) {
  auto f = running_example();
  Materializer m(f.program, *f.edb);
  ASSERT_EQ(m.run(), RunStatus::fixpoint);
  const auto before = m.store().idb_fact_count();
  for (std::size_t r = 0; r < f.program.rules().size(); ++r) EXPECT_EQ(m.apply_rule(r), nullptr);
  EXPECT_EQ(m.store().idb_fact_count(), before);
}

TEST(Engine, DeltaRangeOfRunningExample) {
  auto f = running_example();
  Materializer m(f.program, *f.edb);
  m.run();
  const PredId t = *f.program.find_predicate("T");
  const auto all = m.store().delta_range(t, 0, m.store().step());
  std::vector<std::pair<std::uint64_t, std::size_t>> seen;
  for (const Block* b : all) seen.emplace_back(b->step, b->rule_index);
  const std::vector<std::pair<std::uint64_t, std::size_t>> expected = {{1, 0}, {3, 2}, {5, 4}, {8, 2}};
  EXPECT_EQ(seen, expected);
  EXPECT_TRUE(m.store().delta_range(t, 9, m.store().step()).empty());
  EXPECT_TRUE(m.store().delta_range(t, 4, 3).empty());
  EXPECT_THROW(m.store().delta_range(*f.program.find_predicate("triple"), 0, 5), Error);
}

TEST(Engine, TransitiveClosureOfShortChain) {
  Fixture f(kTc, chain(6));
  const auto m = materialize(f.program, f.edb);
  EXPECT_EQ(f.facts(m, "t").size(), 15u);
}

TEST(Engine, BlocksArePairwiseDisjoint) {
  Fixture f(kTc, chain(40));
  const auto m = materialize(f.program, f.edb);
  const PredId t = *f.program.find_predicate("t");
  std::set<std::vector<Id>> seen;
  std::size_t total = 0;
  for (const Block& b : m.store.blocks(t)) {
    const auto rows = b.table->rows();
    for (std::size_t r = 0; r < rows.size(); r += 2) {
      EXPECT_TRUE(seen.insert({rows[r], rows[r + 1]}).second);
      ++total;
    }
  }
  EXPECT_EQ(total, 40u * 39u / 2u);
}

TEST(Engine, StepLimitAndTimeout) {
  Fixture f(kTc, chain(50));
  MaterializeOptions o;
  o.max_steps = 3;
  auto m = materialize(f.program, f.edb, o);
  EXPECT_EQ(m.status, RunStatus::step_limit);
  EXPECT_EQ(m.stats.counter("steps"), 3u);
  MaterializeOptions z;
  z.timeout = std::chrono::milliseconds(0);
  EXPECT_EQ(materialize(f.program, f.edb, z).status, RunStatus::timeout);
}

TEST(Engine, RandomScheduleReachesSameFixpoint) {
  auto f = running_example();
  const auto a = materialize(f.program, f.edb);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    MaterializeOptions o;
    o.schedule = Schedule::random;
    o.seed = seed;
    const auto b = materialize(f.program, f.edb, o);
    EXPECT_EQ(f.facts(a, "T"), f.facts(b, "T"));
    EXPECT_EQ(f.facts(a, "Inverse"), f.facts(b, "Inverse"));
  }
}

TEST(Engine, CopyRuleSharesEdbColumns) {
  Fixture f("p(X,Y) :- e(X,Y).\nr(c,X) :- e(X,Y).\n", "e\ta\tb\ne\ta\tc\ne\tb\tc\n");
  const auto m = materialize(f.program, f.edb);
  const auto& pb = m.store.blocks(*f.program.find_predicate("p"));
  ASSERT_EQ(pb.size(), 1u);
  for (const auto& col : pb.front().table->columns()) EXPECT_EQ(col->kind(), ColumnKind::edb_proxy);
  EXPECT_EQ(f.facts(m, "p").size(), 3u);
  const std::set<std::vector<std::string>> r = {{"c", "a"}, {"c", "b"}};
  EXPECT_EQ(f.facts(m, "r"), r);
}

TEST(Engine, ReorderedCopyDoesNotShare) {
  Fixture f("p(Y,X) :- e(X,Y).\n", "e\ta\tb\ne\tb\tc\n");
  const auto m = materialize(f.program, f.edb);
  const auto& blocks = m.store.blocks(*f.program.find_predicate("p"));
  ASSERT_EQ(blocks.size(), 1u);
  for (const auto& col : blocks.front().table->columns()) EXPECT_NE(col->kind(), ColumnKind::edb_proxy);
  const std::set<std::vector<std::string>> p = {{"b", "a"}, {"c", "b"}};
  EXPECT_EQ(f.facts(m, "p"), p);
}

TEST(Engine, IdbCopySharesColumns) {
  Fixture f("p(X,Y) :- e(X,Y).\ns(X,Y) :- p(X,Y).\n", "e\ta\tb\ne\ta\tc\n");
  const auto m = materialize(f.program, f.edb);
  const auto& blocks = m.store.blocks(*f.program.find_predicate("s"));
  ASSERT_EQ(blocks.size(), 1u);
  for (const auto& col : blocks.front().table->columns()) EXPECT_EQ(col->kind(), ColumnKind::shared);
}

TEST(Engine, NullaryAndConstantHeads) {
  Fixture f("any :- e(X,Y).\nself(X) :- e(X,X).\nflag(yes) :- any.\nnone :- e(X,zz).\n", "e\ta\tb\ne\tc\tc\n");
  const auto m = materialize(f.program, f.edb);
  EXPECT_GT(m.store.fact_count(*f.program.find_predicate("any")), 0u);
  EXPECT_EQ(m.store.fact_count(*f.program.find_predicate("none")), 0u);
  const std::set<std::vector<std::string>> self = {{"c"}};
  EXPECT_EQ(f.facts(m, "self"), self);
  const std::set<std::vector<std::string>> flag = {{"yes"}};
  EXPECT_EQ(f.facts(m, "flag"), flag);
}

TEST(Engine, StatsCountersPresent) {
  auto f = running_example();
  const auto m = materialize(f.program, f.edb);
  for (const char* key : {"rule.0.applications", "rule.0.sne_variants", "rule.0.blocks_joined", "rule.0.time_ms",
                          "opt.mr.blocks_pruned", "opt.rr.blocks_pruned", "opt.sub.blocks_pruned", "dedup.rows_before",
                          "dedup.rows_removed", "blocks.peak", "steps", "facts.idb", "memo.atoms_attempted"})
    EXPECT_TRUE(m.stats.has(key)) << key;
  EXPECT_EQ(m.stats.counter("rule.0.sne_variants"), 1u);
  EXPECT_EQ(m.stats.counter("blocks.peak"), m.store.block_count());
}

TEST(Engine, ExportIsSortedAndComplete) {
  auto f = running_example();
  const auto m = materialize(f.program, f.edb);
  std::ostringstream out;
  EXPECT_EQ(m.export_facts(f.dict, out), 8u);
  const std::string expected =
      "Inverse\thP\tpO\n"
      "T\ta\thP\tb\nT\ta\thP\tc\nT\tb\thP\tc\nT\tb\tpO\ta\nT\tc\tpO\ta\nT\tc\tpO\tb\nT\thP\tiO\tpO\n";
  EXPECT_EQ(out.str(), expected);
}

TEST(Engine, QueryFacts) {
  auto f = running_example();
  const auto m = materialize(f.program, f.edb);
  const std::vector<std::string> pO = {"T(b,pO,a)", "T(c,pO,a)", "T(c,pO,b)"};
  EXPECT_EQ(query_facts(m, f.dict, "T(X,pO,Y)"), pO);
  EXPECT_EQ(query_facts(m, f.dict, "Inverse(X,Y)").size(), 1u);
  EXPECT_EQ(query_facts(m, f.dict, "triple(X,iO,Y)").size(), 1u);
  EXPECT_TRUE(query_facts(m, f.dict, "T(X,nothing,Y)").empty());
  EXPECT_TRUE(query_facts(m, f.dict, "T(X,X,Y)").empty());
  EXPECT_THROW(query_facts(m, f.dict, "Unknown(X)"), InputError);
}

TEST(Engine, HashAndSortedModesAgree) {
  Fixture f(kTc, chain(60));
  MaterializeOptions sorted;
  sorted.hash_row_threshold = 1;
  sorted.hash_block_threshold = 1'000'000;
  MaterializeOptions hashed;
  hashed.hash_row_threshold = 1'000'000;
  const auto a = materialize(f.program, f.edb, sorted);
  const auto b = materialize(f.program, f.edb, hashed);
  EXPECT_EQ(f.facts(a, "t"), f.facts(b, "t"));
  EXPECT_EQ(f.facts(a, "t").size(), 60u * 59u / 2u);
}

TEST(Engine, RejectsInvalidThresholds) {
  auto f = running_example();
  MaterializeOptions o;
  o.dyn_check_limit = 0;
  EXPECT_THROW(Materializer(f.program, *f.edb, o), Error);
}
