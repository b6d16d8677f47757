#include <gtest/gtest.h>

#include "coldl/common.hpp"
#include "coldl/stats.hpp"

using namespace coldl;

namespace {

StatsReport sample() {
  StatsReport s;
  s.add("steps", 12);
  s.add("rule.0.applications", 3);
  s.add("rule.0.applications");
  s.set_max("blocks.peak", 5);
  s.set_max("blocks.peak", 2);
  s.set("facts.idb", 8);
  s.add_time("rule.0.time_ms", 1.25);
  s.add_time("rule.0.time_ms", 0.5);
  return s;
}

}  // namespace

TEST(Stats, CountersAndTimings) {
  const StatsReport s = sample();
  EXPECT_EQ(s.counter("rule.0.applications"), 4u);
  EXPECT_EQ(s.counter("blocks.peak"), 5u);
  EXPECT_DOUBLE_EQ(s.get("rule.0.time_ms"), 1.75);
  EXPECT_EQ(s.counter("absent"), 0u);
  EXPECT_DOUBLE_EQ(s.get("absent"), 0.0);
  EXPECT_TRUE(s.has("rule.0.time_ms"));
  EXPECT_FALSE(s.has("absent"));
}

TEST(Stats, TextIsSortedKeyValueLines) {
  const std::string text = sample().to_text();
  EXPECT_LT(text.find("blocks.peak = 5"), text.find("facts.idb = 8"));
  EXPECT_LT(text.find("facts.idb = 8"), text.find("steps = 12"));
}

TEST(Stats, RoundTripBothFormats) {
  const StatsReport s = sample();
  for (const std::string& content : {s.to_text(), s.to_json()}) {
    const StatsReport back = StatsReport::parse(content);
    EXPECT_EQ(back.counters(), s.counters()) << content;
    ASSERT_EQ(back.timings().size(), s.timings().size());
    for (const auto& [k, v] : s.timings()) EXPECT_NEAR(back.get(k), v, 1e-6);
  }
  const StatsReport empty = StatsReport::parse(StatsReport{}.to_json());
  EXPECT_TRUE(empty.counters().empty());
}

TEST(Stats, MalformedContentIsAnInputError) {
  EXPECT_THROW(StatsReport::parse("steps 12\n"), InputError);
  EXPECT_THROW(StatsReport::parse("{\"steps\": "), InputError);
  EXPECT_THROW(StatsReport::parse("steps = twelve\n"), InputError);
}
