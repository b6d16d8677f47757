#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coldl/cli.hpp"
#include "coldl/common.hpp"
#include "coldl/stats.hpp"
#include "oracle.hpp"

using namespace coldl;
namespace fs = std::filesystem;

namespace {

const std::string kRules = COLDL_TEST_DATA "/running_example.dl";
const std::string kData = COLDL_TEST_DATA "/running_example.tsv";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

struct Cli : ::testing::Test {
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("coldl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }
};

}  // namespace

TEST(Duration, Parses) {
  EXPECT_EQ(parse_duration("500ms").count(), 500);
  EXPECT_EQ(parse_duration("2s").count(), 2000);
  EXPECT_EQ(parse_duration("1.5m").count(), 90'000);
  EXPECT_EQ(parse_duration("1h").count(), 3'600'000);
  EXPECT_EQ(parse_duration("3").count(), 3000);
  EXPECT_EQ(parse_duration("0s").count(), 0);
  EXPECT_THROW(parse_duration("soon"), InputError);
  EXPECT_THROW(parse_duration("-1s"), InputError);
}

TEST_F(Cli, MaterializeRunningExample) {
  const auto r = run({"materialize", "--rules", kRules, "--data", kData});
  EXPECT_EQ(r.code, exit_ok) << r.err;
  EXPECT_EQ(lines(r.out), 8u);
  EXPECT_NE(r.out.find("Inverse\thP\tpO\n"), std::string::npos);
  const auto again = run({"materialize", "--rules", kRules, "--data", kData});
  EXPECT_EQ(again.out, r.out);
}

TEST_F(Cli, OutputFileMatchesStdout) {
  const auto r = run({"materialize", "--rules", kRules, "--data", kData, "--output", path("out.tsv")});
  ASSERT_EQ(r.code, exit_ok) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(oracle::read_text(path("out.tsv")), run({"materialize", "--rules", kRules, "--data", kData}).out);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({"materialize", "--rules", path("missing.dl"), "--data", kData}).code, exit_input);
  EXPECT_EQ(run({"materialize", "--data", kData}).code, exit_input);
  write("bad.dl", "p(X) :- q(X,Y).\nr :- ");
  EXPECT_EQ(run({"materialize", "--rules", path("bad.dl"), "--data", kData}).code, exit_input);
  EXPECT_EQ(run({"materialize", "--rules", kRules, "--data", kData, "--opt", "xyz"}).code, exit_input);
  EXPECT_EQ(run({"bogus"}).code, exit_input);
  const auto t = run({"materialize", "--rules", kRules, "--data", kData, "--timeout", "0s"});
  EXPECT_EQ(t.code, exit_timeout);
  EXPECT_FALSE(t.err.empty());
}

TEST_F(Cli, QueryPatterns) {
  const auto po = run({"query", "--rules", kRules, "--data", kData, "T(X,pO,Y)"});
  EXPECT_EQ(po.code, exit_ok) << po.err;
  EXPECT_EQ(po.out, "T(b,pO,a)\nT(c,pO,a)\nT(c,pO,b)\n");
  EXPECT_EQ(lines(run({"query", "--rules", kRules, "--data", kData, "Inverse(X,Y)"}).out), 1u);
  const auto none = run({"query", "--rules", kRules, "--data", kData, "T(X,zz,Y)"});
  EXPECT_EQ(none.code, exit_ok);
  EXPECT_TRUE(none.out.empty());
  EXPECT_EQ(run({"query", "--rules", kRules, "--data", kData, "Nope(X)"}).code, exit_input);
}

TEST_F(Cli, StoreSnapshotAnswersQueries) {
  const auto m = run({"materialize", "--rules", kRules, "--data", kData, "--output", path("o.tsv"), "--save-store",
                      path("run.store")});
  ASSERT_EQ(m.code, exit_ok) << m.err;
  const auto q = run({"query", "--store", path("run.store"), "T(X,pO,Y)"});
  EXPECT_EQ(q.code, exit_ok) << q.err;
  EXPECT_EQ(q.out, "T(b,pO,a)\nT(c,pO,a)\nT(c,pO,b)\n");
  EXPECT_EQ(lines(run({"query", "--store", path("run.store"), "triple(X,Y,Z)"}).out), 3u);
  EXPECT_EQ(run({"query", "--store", path("nothing.store"), "T(X,Y,Z)"}).code, exit_input);
}

TEST_F(Cli, StatsFollowOptimizationFlags) {
  ASSERT_EQ(run({"materialize", "--rules", kRules, "--data", kData, "--opt", "mr,rr", "--output", path("o"), "--stats",
                 path("on.txt")})
                .code,
            exit_ok);
  const auto on = StatsReport::parse(oracle::read_text(path("on.txt")));
  EXPECT_GE(on.counter("opt.mr.blocks_pruned"), 1u);
  EXPECT_EQ(on.counter("opt.sub.blocks_pruned"), 0u);
  ASSERT_EQ(run({"materialize", "--rules", kRules, "--data", kData, "--no-opt", "--output", path("o"), "--stats",
                 path("off.json")})
                .code,
            exit_ok);
  const std::string json = oracle::read_text(path("off.json"));
  EXPECT_EQ(json.front(), '{');
  const auto off = StatsReport::parse(json);
  for (const char* k : {"opt.mr.blocks_pruned", "opt.rr.blocks_pruned", "opt.sub.blocks_pruned"})
    EXPECT_EQ(off.counter(k), 0u) << k;
  EXPECT_EQ(off.counter("facts.idb"), 8u);

  const auto summary = run({"stats", path("on.txt")});
  EXPECT_EQ(summary.code, exit_ok);
  EXPECT_NE(summary.out.find("idb facts: 8"), std::string::npos) << summary.out;
  EXPECT_NE(summary.out.find("blocks pruned (mr): "), std::string::npos);
  EXPECT_EQ(run({"stats", path("missing.txt")}).code, exit_input);
  write("junk.txt", "not stats\n");
  EXPECT_EQ(run({"stats", path("junk.txt")}).code, exit_input);
}

TEST_F(Cli, EmptyRunHasZeroCounters) {
  write("empty.dl", "");
  write("empty.tsv", "");
  ASSERT_EQ(run({"materialize", "--rules", path("empty.dl"), "--data", path("empty.tsv"), "--stats", path("s.txt")})
                .code,
            exit_ok);
  const auto s = StatsReport::parse(oracle::read_text(path("s.txt")));
  EXPECT_EQ(s.counter("facts.idb"), 0u);
  EXPECT_EQ(s.counter("opt.mr.blocks_pruned"), 0u);
}

TEST_F(Cli, ConfigFileWithOverrides) {
  write("run.conf", "# defaults\nrules = " + kRules + "\ndata = " + kData + "\nopt = none\nstats = " + path("c.txt") +
                        "\noutput = " + path("c.tsv") + "\n");
  ASSERT_EQ(run({"materialize", "--config", path("run.conf")}).code, exit_ok);
  EXPECT_EQ(StatsReport::parse(oracle::read_text(path("c.txt"))).counter("opt.mr.blocks_pruned"), 0u);
  EXPECT_EQ(lines(oracle::read_text(path("c.tsv"))), 8u);
  // Command-line flags win over the file.
  ASSERT_EQ(run({"materialize", "--config", path("run.conf"), "--opt", "mr"}).code, exit_ok);
  EXPECT_GE(StatsReport::parse(oracle::read_text(path("c.txt"))).counter("opt.mr.blocks_pruned"), 1u);
  write("bad.conf", "rules " + kRules + "\n");
  EXPECT_EQ(run({"materialize", "--config", path("bad.conf")}).code, exit_input);
  write("unknown.conf", "colour = red\n");
  EXPECT_EQ(run({"materialize", "--config", path("unknown.conf")}).code, exit_input);
}

TEST_F(Cli, MemoizationKeepsOutput) {
  const auto plain = run({"materialize", "--rules", kRules, "--data", kData});
  const auto memo = run({"materialize", "--rules", kRules, "--data", kData, "--memo", "on", "--stats", path("m.txt")});
  ASSERT_EQ(memo.code, exit_ok) << memo.err;
  EXPECT_EQ(memo.out, plain.out);
  EXPECT_GE(StatsReport::parse(oracle::read_text(path("m.txt"))).counter("memo.atoms_memoized"), 1u);
}

TEST_F(Cli, NTriplesInput) {
  write("g.nt", "<a> <hP> <b> .\n<b> <hP> <c> .\n<hP> <iO> <pO> .\n");
  std::string rules = oracle::read_text(kRules);
  for (const std::string c : {"hP", "iO"})
    for (std::size_t at = rules.find("," + c); at != std::string::npos; at = rules.find("," + c, at + 1))
      rules.replace(at + 1, c.size(), "<" + c + ">");
  write("iri.dl", rules);
  const auto r = run({"materialize", "--rules", path("iri.dl"), "--data", path("g.nt"), "--format", "nt"});
  EXPECT_EQ(r.code, exit_ok) << r.err;
  EXPECT_EQ(lines(r.out), 8u);
}
