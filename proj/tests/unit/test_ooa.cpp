#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "ipal/detect/detector.hpp"
#include "ipal/error.hpp"

using namespace ipal;
using namespace ipal::detect;

namespace {

std::vector<StateMessage> numeric(std::initializer_list<double> xs, double t0 = 0) {
  std::vector<StateMessage> out;
  double t = t0;
  for (double x : xs) out.push_back(test::state(t++, {{"x", x}}));
  return out;
}

}  // namespace

TEST(Ooa, ClosedBoundsWithoutMargin) {
  const auto model = train("ooa", nullptr, numeric({0, 5, 10}));
  EXPECT_TRUE(detect::detect(model, numeric({10, 0, 3.3}, 100)).empty());
  const auto alerts = detect::detect(model, numeric({5, 10.01, 5}, 100));
  ASSERT_EQ(alerts.size(), 1u);
  EXPECT_EQ(alerts[0].kind, AlertEvent::Kind::interval);
  EXPECT_EQ(alerts[0].start, test::at(101));
  EXPECT_EQ(alerts[0].end, test::at(101));
  EXPECT_EQ(alerts[0].violation_class, "range");
  EXPECT_EQ(detect::detect(model, numeric({-0.01})).size(), 1u);
}

TEST(Ooa, MarginScalesWithTheSpan) {
  // span 10, delta 0.1: accepted range [-1, 11].
  const auto model = train("ooa", {{"delta", 0.1}}, numeric({0, 10}));
  EXPECT_TRUE(detect::detect(model, numeric({10.5, -1, 11})).empty());
  EXPECT_EQ(detect::detect(model, numeric({11.01})).size(), 1u);
  EXPECT_EQ(detect::detect(model, numeric({-1.01})).size(), 1u);
  EXPECT_THROW(train("ooa", {{"delta", -0.1}}, numeric({0, 10})), ParseError);
}

TEST(Ooa, CategoricalAlphabets) {
  std::vector<StateMessage> tr;
  for (int i = 0; i < 10; ++i)
    tr.push_back(test::state(i, {{"valve", std::int64_t{i % 2}}, {"mode", std::string(i % 3 ? "auto" : "manual")},
                                 {"pump", i % 2 == 0}}));
  const auto model = train("ooa", {{"categorical", {"valve"}}}, tr);

  // Inside the numeric range [0, 1] but never seen as a symbol.
  auto alerts = detect::detect(model, std::vector<StateMessage>{test::state(20, {{"valve", std::int64_t{2}}})});
  ASSERT_EQ(alerts.size(), 1u);
  EXPECT_EQ(alerts[0].violation_class, "alphabet");
  EXPECT_EQ(detect::detect(model, std::vector<StateMessage>{test::state(20, {{"mode", std::string("off")}})}).size(), 1u);
  EXPECT_TRUE(detect::detect(model, tr).empty());
}

TEST(Ooa, IntervalsSpanContiguousViolations) {
  std::vector<StateMessage> tr;
  for (int i = 0; i < 10; ++i) tr.push_back(test::state(i, {{"x", double(i)}, {"s", std::string("on")}}));
  const auto model = train("ooa", nullptr, tr);

  std::vector<StateMessage> te;
  const double xs[] = {1, 20, 30, 2, 3, 4, -5, 2};
  const char* ss[] = {"on", "on", "off", "on", "off", "on", "on", "on"};
  for (int i = 0; i < 8; ++i) te.push_back(test::state(100 + i, {{"x", xs[i]}, {"s", std::string(ss[i])}}));
  const auto alerts = detect::detect(model, te);
  ASSERT_EQ(alerts.size(), 3u);
  EXPECT_EQ(alerts[0].start, test::at(101));
  EXPECT_EQ(alerts[0].end, test::at(102));
  EXPECT_EQ(alerts[0].violation_class, "range+alphabet");
  EXPECT_EQ(alerts[1].start, test::at(104));
  EXPECT_EQ(alerts[1].violation_class, "alphabet");
  EXPECT_EQ(alerts[2].start, test::at(106));
  EXPECT_EQ(alerts[2].end, test::at(106));  // closed by the benign final state
  EXPECT_EQ(alerts[2].violation_class, "range");
}

TEST(Ooa, UnknownVariablesFollowTheSetting) {
  const auto tr = numeric({0, 1});
  const std::vector<StateMessage> te{test::state(5, {{"x", 0.5}, {"y", 1.0}})};
  EXPECT_EQ(detect::detect(train("ooa", nullptr, tr), te).size(), 1u);
  EXPECT_TRUE(detect::detect(train("ooa", {{"unknown_variables", false}}, tr), te).empty());
}

TEST(Ooa, OpenIntervalIsFlushedAtEnd) {
  const auto model = train("ooa", nullptr, numeric({0, 1}));
  const auto alerts = detect::detect(model, numeric({0.5, 7, 8}, 10));
  ASSERT_EQ(alerts.size(), 1u);
  EXPECT_EQ(alerts[0].start, test::at(11));
  EXPECT_EQ(alerts[0].end, test::at(12));
}
