#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "ipal/codec.hpp"
#include "ipal/detect/detector.hpp"
#include "ipal/error.hpp"
#include "ipal/io.hpp"
#include "ipal/lab/inject.hpp"

using namespace ipal;
using namespace ipal::detect;
using nlohmann::ordered_json;

namespace {

std::vector<IpalMessage> at_times(const std::vector<double>& ts) {
  std::vector<IpalMessage> out;
  for (std::size_t i = 0; i < ts.size(); ++i) out.push_back(test::msg(i, ts[i]));
  return out;
}

const ordered_json& only_key(const DetectorModel& m) {
  EXPECT_EQ(m.payload.at("keys").size(), 1u);
  return m.payload.at("keys").at(0);
}

std::set<std::uint64_t> flagged(const std::vector<AlertEvent>& alerts) {
  std::set<std::uint64_t> ids;
  for (const auto& a : alerts) ids.insert(a.message_ids.begin(), a.message_ids.end());
  return ids;
}

}  // namespace

TEST(IatMean, UniformSpacing) {
  const auto m = train("iat-mean", nullptr, at_times({0, 1, 2, 3}));
  const auto& k = only_key(m);
  EXPECT_DOUBLE_EQ(k.at("mean").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(k.at("stddev").get<double>(), 0.0);
  EXPECT_EQ(k.at("n").get<int>(), 4);
}

TEST(IatMean, UnevenSpacing) {
  const auto m = train("iat-mean", nullptr, at_times({0, 1, 3}));
  const auto& k = only_key(m);
  EXPECT_DOUBLE_EQ(k.at("mean").get<double>(), 1.5);
  EXPECT_NEAR(k.at("stddev").get<double>(), std::sqrt(0.5), 1e-12);
}

TEST(IatMean, KeysSeenOnceAreDropped) {
  auto msgs = at_times({0, 1, 2});
  msgs.push_back(test::msg(3, 2.5, 16, Activity::command));
  const auto m = train("iat-mean", nullptr, msgs);
  EXPECT_EQ(m.payload.at("keys").size(), 1u);
  EXPECT_THROW(train("iat-mean", nullptr, at_times({0})), DataError);
}

TEST(IatMean, FloodingBurstFlagsEveryBurstPacket) {
  // Training: period 1 s with small jitter -> mean ~1, stddev ~0.01.
  std::vector<double> ts;
  for (int i = 0; i < 100; ++i) ts.push_back(100 + i + (i % 2 ? 0.01 : -0.01));
  const auto model = train("iat-mean", nullptr, at_times(ts));
  const double mean = only_key(model).at("mean").get<double>();
  const double sd = only_key(model).at("stddev").get<double>();
  const double half = 3.0 * std::max(sd, 0.001);

  // Test: the schedule plus a burst of 10 packets every 50 ms after t=20.
  std::vector<IpalMessage> test;
  std::set<std::uint64_t> burst;
  std::uint64_t id = 0;
  for (int i = 0; i < 40; ++i) {
    test.push_back(test::msg(id++, i));
    if (i == 20)
      for (int b = 1; b <= 10; ++b) {
        burst.insert(id);
        test.push_back(test::msg(id++, i + 0.05 * b));
      }
  }
  const auto ids = flagged(detect::detect(model, test));
  // By hand: each burst packet is 0.05 s .. 0.5 s after the reference at
  // t=20, all below mean - half; the packet at t=21 is 1 s after the
  // unchanged reference and inside the band.
  EXPECT_LT(0.5, mean - half);
  EXPECT_EQ(ids, burst);
}

TEST(IatMean, OnScheduleReplacementsAreNotFlagged) {
  lab::ScenarioSpec spec = test::periodic_spec(600, 1, 0.01, 1);
  const auto benign = lab::generate(spec);
  spec.seed = 2;
  const auto test_stream = lab::generate(spec);
  lab::AttackSpec atk;
  atk.family = lab::AttackFamily::prediction;
  atk.rate = 0.5;
  const auto attacked = lab::inject(test_stream, atk).stream;

  const auto model = train("iat-mean", nullptr, benign);
  const auto ids = flagged(detect::detect(model, attacked));
  std::size_t tp = 0, mal = 0;
  for (const auto& m : attacked) {
    mal += m.malicious == Label::malicious;
    tp += m.malicious == Label::malicious && ids.count(m.id);
  }
  ASSERT_GT(mal, 0u);
  EXPECT_LE(static_cast<double>(tp) / static_cast<double>(mal), 0.10);
}

TEST(IatMean, DecisionsInvariantUnderTimeScaling) {
  lab::Rng rng(8);
  for (int round = 0; round < 20; ++round) {
    std::vector<double> train_ts, test_ts;
    double t = 0;
    for (int i = 0; i < 50; ++i) train_ts.push_back(t += 1.0 + 0.01 * (rng.uniform() - 0.5));
    for (int i = 0; i < 50; ++i) test_ts.push_back(t += rng.below(5) == 0 ? rng.uniform(0.1, 2.0) : 1.0);
    const ordered_json cfg = {{"stddev_floor", 0.0}};
    std::set<std::uint64_t> base;
    for (double c : {1.0, 2.0, 4.0}) {
      auto scale = [&](std::vector<double> v) {
        for (auto& x : v) x = std::round(x * 1e6) / 1e6 * c;
        return at_times(v);
      };
      const auto ids = flagged(detect::detect(train("iat-mean", cfg, scale(train_ts)), scale(test_ts)));
      if (c == 1.0)
        base = ids;
      else
        EXPECT_EQ(ids, base) << "scale " << c;
    }
  }
}

TEST(IatMean, RelativeModeAndUnseenPolicies) {
  const auto train_msgs = at_times({0, 1, 2, 3});
  auto test_msgs = at_times({10, 11.05, 12.3});
  test_msgs.push_back(test::msg(3, 13, 6, Activity::command));
  test_msgs.push_back(test::msg(4, 14, 6, Activity::command));

  const auto rel = train("iat-mean", {{"mode", "relative"}, {"relative_tolerance", 0.1}}, train_msgs);
  auto alerts = detect::detect(rel, test_msgs);
  ASSERT_EQ(alerts.size(), 2u);
  EXPECT_EQ(alerts[0].message_ids, std::vector<std::uint64_t>{2});  // 1.25 s > 1.1 s
  EXPECT_EQ(alerts[1].violation_class, "unseen");

  const auto always = train("iat-mean", {{"unseen_keys", "always"}}, train_msgs);
  std::size_t unseen = 0;
  for (const auto& a : detect::detect(always, test_msgs)) unseen += a.violation_class == "unseen";
  EXPECT_EQ(unseen, 2u);

  const auto never = train("iat-mean", {{"unseen_keys", "never"}}, train_msgs);
  for (const auto& a : detect::detect(never, test_msgs)) EXPECT_NE(a.violation_class, "unseen");

  EXPECT_THROW(train("iat-mean", {{"unseen_keys", "sometimes"}}, train_msgs), ParseError);
  EXPECT_THROW(train("iat-mean", {{"bogus", 1}}, train_msgs), ParseError);
}

TEST(IatRange, AlternatingPayloadsGroupByContent) {
  // Two payloads alternate on one class key with irregular spacing.
  lab::Rng rng(4);
  std::vector<IpalMessage> msgs;
  double t = 0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    auto m = test::msg(i, t += rng.uniform(0.5, 1.5), 3, Activity::response);
    m.process_data["v"] = std::int64_t(i % 2 ? 7 : 9);
    msgs.push_back(m);
  }
  const auto model = train("iat-range", nullptr, msgs);
  ASSERT_EQ(model.payload.at("keys").size(), 2u);

  // Oracle: group by payload exhaustively, min/max of consecutive gaps.
  std::map<std::string, std::vector<double>> times;
  for (const auto& m : msgs) times[canonical_process_data(m.process_data)].push_back(to_seconds(m.timestamp));
  std::map<std::string, std::pair<double, double>> expect;
  for (const auto& [k, ts] : times) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 1; i < ts.size(); ++i) {
      const double d = std::round((ts[i] - ts[i - 1]) * 1e6) / 1e6;
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    expect[hex64(fnv1a64(k))] = {lo, hi};
  }
  for (const auto& k : model.payload.at("keys")) {
    const auto key = k.at("key").get<std::string>();
    const auto hash = key.substr(key.rfind('|') + 1);
    ASSERT_TRUE(expect.count(hash)) << key;
    EXPECT_NEAR(k.at("min").get<double>(), expect[hash].first, 1e-9);
    EXPECT_NEAR(k.at("max").get<double>(), expect[hash].second, 1e-9);
  }
}

TEST(IatRange, ClosedBoundaries) {
  // Training IATs exactly 2 s: range [2(1-eps), 2(1+eps)] = [1.5, 2.5] at eps 0.25.
  const auto model = train("iat-range", {{"epsilon", 0.25}}, at_times({0, 2, 4, 6}));
  EXPECT_TRUE(detect::detect(model, at_times({10, 11.5, 14.0})).empty());
  const auto alerts = detect::detect(model, at_times({10, 11.499999, 12}));
  ASSERT_EQ(alerts.size(), 1u);
  EXPECT_EQ(alerts[0].message_ids, std::vector<std::uint64_t>{1});
  EXPECT_EQ(alerts[0].violation_class, "timing");
}
