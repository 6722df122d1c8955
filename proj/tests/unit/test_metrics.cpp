#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "ipal/error.hpp"
#include "ipal/eval/evaluator.hpp"

using namespace ipal;
using namespace ipal::eval;
using ipal::test::at;

namespace {

AlertEvent point(std::uint64_t id, double t) {
  AlertEvent a;
  a.detector = "p";
  a.kind = AlertEvent::Kind::point;
  a.message_ids = {id};
  a.start = a.end = at(t);
  return a;
}

AlertEvent interval(double s, double e, std::string name = "i") {
  AlertEvent a;
  a.detector = std::move(name);
  a.kind = AlertEvent::Kind::interval;
  a.start = at(s);
  a.end = at(e);
  return a;
}

Scenario scen(double s, double e) { return {"s", at(s), at(e)}; }
Interval iv(double s, double e) { return {at(s), at(e)}; }

struct Fixture {
  std::vector<IpalMessage> msgs;
  std::vector<AlertEvent> alerts;
};

Fixture random_fixture(lab::Rng& rng) {
  Fixture f;
  const auto n = 1 + rng.below(60);
  double t = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto m = test::msg(i, t += 0.5 * static_cast<double>(rng.below(3)));
    const auto r = rng.below(10);
    m.malicious = r < 3 ? Label::malicious : r < 9 ? Label::benign : Label::unlabeled;
    f.msgs.push_back(m);
  }
  if (std::none_of(f.msgs.begin(), f.msgs.end(), [](const auto& m) { return m.malicious != Label::unlabeled; }))
    f.msgs[0].malicious = Label::benign;
  for (std::size_t k = rng.below(6); k > 0; --k) {
    const auto& m = f.msgs[rng.below(n)];
    f.alerts.push_back(point(m.id, to_seconds(m.timestamp)));
  }
  for (std::size_t k = rng.below(4); k > 0; --k) {
    const double s = rng.uniform(-1, t + 1);
    f.alerts.push_back(interval(s, s + rng.uniform(0, 3)));
  }
  return f;
}

// Exhaustive per-record marking: no merging, no binary search.
kernels::Confusion brute_confusion(const Fixture& f) {
  kernels::Confusion c;
  for (const auto& m : f.msgs) {
    bool hit = false;
    for (const auto& a : f.alerts) {
      if (a.kind == AlertEvent::Kind::point)
        hit |= a.message_ids.front() == m.id;
      else
        hit |= a.start <= m.timestamp && m.timestamp <= a.end;
    }
    if (m.malicious == Label::unlabeled) continue;
    const bool attack = m.malicious == Label::malicious;
    (attack ? (hit ? c.tp : c.fn) : (hit ? c.fp : c.tn))++;
  }
  return c;
}

}  // namespace

TEST(PointMetrics, MatchBruteForceOnRandomFixtures) {
  lab::Rng rng(2024);
  for (int round = 0; round < 200; ++round) {
    const auto f = random_fixture(rng);
    const auto truth = GroundTruth::from_messages(f.msgs);
    const auto want = brute_confusion(f);
    for (bool parallel : {false, true}) {
      const auto got = point_metrics(f.alerts, truth, parallel);
      ASSERT_EQ(got.counts, want) << "round " << round;
      const double all = static_cast<double>(want.tp + want.fp + want.tn + want.fn);
      EXPECT_DOUBLE_EQ(*got.accuracy, static_cast<double>(want.tp + want.tn) / all);
      if (want.tp + want.fp == 0)
        EXPECT_FALSE(got.precision);
      else
        EXPECT_DOUBLE_EQ(*got.precision, static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fp));
      if (want.tp + want.fn == 0) EXPECT_FALSE(got.recall);
      if (want.fp + want.tn == 0)
        EXPECT_FALSE(got.fpr);
      else
        EXPECT_DOUBLE_EQ(*got.fpr, static_cast<double>(want.fp) / static_cast<double>(want.fp + want.tn));
    }
  }
}

TEST(PointMetrics, HandCounts) {
  const auto m = metrics_from_counts({.tp = 8, .fp = 2, .tn = 85, .fn = 5});
  EXPECT_DOUBLE_EQ(*m.precision, 0.8);
  EXPECT_DOUBLE_EQ(*m.recall, 8.0 / 13.0);
  EXPECT_DOUBLE_EQ(*m.f1, 2 * 0.8 * (8.0 / 13.0) / (0.8 + 8.0 / 13.0));
  EXPECT_DOUBLE_EQ(*m.accuracy, 0.93);
  EXPECT_DOUBLE_EQ(*m.fpr, 2.0 / 87.0);
  const auto none = metrics_from_counts({.tp = 0, .fp = 0, .tn = 10, .fn = 3});
  EXPECT_FALSE(none.precision);
  EXPECT_FALSE(none.f1);
  EXPECT_DOUBLE_EQ(*none.recall, 0.0);
}

TEST(PointMetrics, UnlabeledTruthIsRejected) {
  auto m = test::msg(0, 1);
  m.malicious = Label::unlabeled;
  EXPECT_THROW(point_metrics({}, GroundTruth::from_messages({m})), DataError);
}

TEST(ScenarioMetrics, HandExamples) {
  const std::vector<Scenario> s{scen(10, 20)};
  auto m = scenario_metrics({iv(15, 25)}, s);
  EXPECT_EQ(m.detected_attacks, 1u);
  EXPECT_EQ(m.false_alarms, 0u);
  EXPECT_DOUBLE_EQ(m.penalty_score, 5.0);
  EXPECT_DOUBLE_EQ(*m.odr, 100.0);
  EXPECT_DOUBLE_EQ(*m.coverage, 50.0);

  m = scenario_metrics({iv(30, 35)}, s);
  EXPECT_EQ(m.detected_attacks, 0u);
  EXPECT_EQ(m.false_alarms, 1u);
  EXPECT_DOUBLE_EQ(m.penalty_score, 0.0);
  EXPECT_DOUBLE_EQ(*m.odr, 0.0);

  // Grace extends detection past the scenario end, not the coverage.
  m = scenario_metrics({iv(22, 23)}, s, std::chrono::seconds(3));
  EXPECT_EQ(m.detected_attacks, 1u);
  EXPECT_DOUBLE_EQ(m.penalty_score, 1.0);
  EXPECT_DOUBLE_EQ(*m.coverage, 0.0);

  EXPECT_FALSE(scenario_metrics({}, {}).odr);
  EXPECT_THROW(scenario_metrics({iv(5, 6), iv(1, 2)}, s), DataError);
}

TEST(ScenarioMetrics, MatchSecondGranularitySweep) {
  // Integer endpoints: penalty and coverage are exact counts of unit cells.
  lab::Rng rng(77);
  for (int round = 0; round < 50; ++round) {
    std::vector<Scenario> scenarios;
    double t = 0;
    for (std::size_t k = 1 + rng.below(3); k > 0; --k) {
      const double s = t + 1 + static_cast<double>(rng.below(10));
      const double e = s + 1 + static_cast<double>(rng.below(10));
      scenarios.push_back(scen(s, e));
      t = e;
    }
    std::vector<AlertEvent> alerts;
    for (std::size_t k = 1 + rng.below(4); k > 0; --k) {
      const double s = static_cast<double>(rng.below(static_cast<std::size_t>(t) + 5));
      alerts.push_back(interval(s, s + 1 + static_cast<double>(rng.below(8))));
    }
    const auto alarms = alarm_intervals(alerts, Duration::zero());
    const auto got = scenario_metrics(alarms, scenarios);

    auto in_any = [](const auto& list, double a, double b) {
      for (const auto& x : list)
        if (to_seconds(x.start) <= a && b <= to_seconds(x.end)) return true;
      return false;
    };
    auto touches = [](const Interval& a, const Scenario& s) { return a.start <= s.end && s.start <= a.end; };
    std::size_t detected = 0, false_alarms = 0;
    double penalty = 0, covered = 0, total = 0;
    for (const auto& s : scenarios) detected += std::any_of(alarms.begin(), alarms.end(), [&](const auto& a) { return touches(a, s); });
    for (const auto& a : alarms) {
      if (std::none_of(scenarios.begin(), scenarios.end(), [&](const auto& s) { return touches(a, s); })) {
        ++false_alarms;
        continue;
      }
      for (double c = to_seconds(a.start); c < to_seconds(a.end); c += 1) penalty += !in_any(scenarios, c, c + 1);
    }
    for (double c = 0; c < t + 20; c += 1)
      if (in_any(scenarios, c, c + 1)) {
        total += 1;
        covered += in_any(alarms, c, c + 1);
      }
    EXPECT_EQ(got.detected_attacks, detected) << round;
    EXPECT_EQ(got.false_alarms, false_alarms) << round;
    EXPECT_NEAR(got.penalty_score, penalty, 1e-9) << round;
    EXPECT_NEAR(*got.coverage, 100.0 * covered / total, 1e-9) << round;
  }
}

TEST(AlarmIntervals, WidenPointsAndMergeTouching) {
  const auto out = alarm_intervals({point(0, 5), interval(6, 7), point(1, 1), interval(7, 9), point(2, 20)},
                                   std::chrono::seconds(1));
  EXPECT_EQ(out, (std::vector<Interval>{iv(1, 2), iv(5, 9), iv(20, 21)}));
}

TEST(Union, NeverLowersRecall) {
  lab::Rng rng(5);
  for (int round = 0; round < 50; ++round) {
    const auto a = random_fixture(rng);
    auto b_alerts = random_fixture(rng).alerts;
    for (auto& x : b_alerts) x.detector = "other";
    const auto truth = GroundTruth::from_messages(a.msgs);
    const auto u = union_alerts({a.alerts, b_alerts});
    EXPECT_TRUE(std::is_sorted(u.begin(), u.end(), [](const auto& x, const auto& y) { return x.start < y.start; }));
    const auto ca = point_metrics(a.alerts, truth).counts, cb = point_metrics(b_alerts, truth).counts,
               cu = point_metrics(u, truth).counts;
    EXPECT_GE(cu.tp, std::max(ca.tp, cb.tp));
    EXPECT_GE(cu.fp, std::max(ca.fp, cb.fp));
  }
  const auto u = union_alerts({{interval(1, 2, "a")}, {interval(0, 1, "b")}});
  EXPECT_EQ(u.front().detector, "a+b");
  EXPECT_EQ(u.front().start, at(0));
}

TEST(Compare, CsvRows) {
  std::vector<IpalMessage> msgs;
  for (std::uint64_t i = 0; i < 10; ++i) {
    msgs.push_back(test::msg(i, static_cast<double>(i)));
    msgs.back().malicious = i >= 5 && i <= 6 ? Label::malicious : Label::benign;
  }
  const auto truth = GroundTruth::from_messages(msgs, {scen(5, 6)});
  const auto silent = evaluate("quiet", {}, truth);
  const auto csv = comparison_csv({silent});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "detector,tp,fp,tn,fn,accuracy,precision,recall,f1,tpr,fpr,odr,detected_attacks,false_alarms,"
            "penalty_score,cp");
  EXPECT_EQ(csv.substr(csv.find('\n') + 1), "quiet,0,0,8,2,80.00,-,0.00,-,0.00,0.00,0.00,0,0,0.000,0.00\n");

  const auto loud = evaluate("loud", {interval(4, 6)}, truth);
  const auto two = comparison_csv({loud, loud});
  const auto first = two.find('\n') + 1, second = two.find('\n', first) + 1;
  EXPECT_EQ(two.substr(first, second - first), two.substr(second));
  EXPECT_EQ(two.substr(first, second - first), "loud,2,1,7,0,90.00,66.67,100.00,80.00,100.00,12.50,100.00,1,0,1.000,100.00\n");

  auto other = msgs;
  other[0].malicious = Label::malicious;
  EXPECT_THROW(comparison_csv({loud, evaluate("x", {}, GroundTruth::from_messages(other, {scen(0, 6)}))}), DataError);
}

TEST(Report, JsonRoundTrip) {
  std::vector<IpalMessage> msgs;
  for (std::uint64_t i = 0; i < 10; ++i) {
    msgs.push_back(test::msg(i, 100.0 + static_cast<double>(i)));
    msgs.back().malicious = i == 3 ? Label::malicious : Label::benign;
  }
  const auto r = evaluate("d", {point(3, 103), interval(107.5, 108.25)}, GroundTruth::from_messages(msgs, {scen(103, 103.5)}));
  EXPECT_EQ(r.point_width, std::chrono::seconds(1));
  const auto back = EvalReport::from_json(r.to_json());
  EXPECT_EQ(back.dump(), r.dump());
}
