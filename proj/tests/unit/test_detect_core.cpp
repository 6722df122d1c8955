#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "ipal/detect/detector.hpp"
#include "ipal/error.hpp"
#include "ipal/lab/generator.hpp"
#include "ipal/lab/inject.hpp"

using namespace ipal;
using namespace ipal::detect;
using nlohmann::ordered_json;

namespace {

const std::vector<std::string> kMessageDetectors = {"iat-mean", "iat-range", "dtmc"};

std::vector<StateMessage> states_of(std::size_t n) {
  std::vector<StateMessage> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(test::state(static_cast<double>(i), {{"x", std::sin(0.3 * static_cast<double>(i))},
                                                        {"y", static_cast<double>(i % 7)}}));
  return out;
}

}  // namespace

TEST(DetectCore, RegistryListsEveryDetector) {
  std::vector<std::string> names;
  for (const auto& d : detectors()) names.push_back(d.name);
  EXPECT_EQ(names, (std::vector<std::string>{"iat-mean", "iat-range", "dtmc", "pasad", "ooa"}));
  EXPECT_THROW(find_detector("nope"), UsageError);
}

TEST(DetectCore, EmptyTrainingIsInsufficientData) {
  for (const auto& d : detectors()) {
    Training t(d.name, nullptr);
    try {
      t.finish();
      ADD_FAILURE() << d.name;
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find("insufficient data"), std::string::npos) << d.name;
    }
  }
}

TEST(DetectCore, MaliciousTrainingRecordIsRefusedByName) {
  auto msgs = lab::generate(test::periodic_spec(20, 1, 0, 1));
  msgs[7].malicious = Label::malicious;
  try {
    train("dtmc", nullptr, msgs);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("message id 7"), std::string::npos) << e.what();
  }
}

TEST(DetectCore, KindAndOrderChecks) {
  const auto msgs = lab::generate(test::periodic_spec(20, 1, 0, 1));
  const auto states = states_of(100);
  const auto m = train("dtmc", nullptr, msgs);
  EXPECT_THROW(detect::detect(m, states), DataError);
  EXPECT_THROW(train("ooa", nullptr, msgs), DataError);

  auto shuffled = msgs;
  std::swap(shuffled[3], shuffled[9]);
  EXPECT_THROW(train("dtmc", nullptr, shuffled), DataError);
  EXPECT_THROW(detect::detect(m, shuffled), DataError);
  EXPECT_THROW(train("dtmc", {{"no_such_knob", 1}}, msgs), ParseError);
  EXPECT_THROW(train("iat-mean", {{"k", "three"}}, msgs), ParseError);
}

TEST(DetectCore, TrainingIsDeterministicAndPersists) {
  test::TempDir dir;
  const auto msgs = lab::generate(test::shipped_spec());
  const auto states = states_of(300);
  for (const auto& d : detectors()) {
    const ordered_json cfg = d.name == "pasad" ? ordered_json{{"lag", 20}} : ordered_json(nullptr);
    const auto a = d.kind.input == InputKind::messages ? train(d.name, cfg, msgs) : train(d.name, cfg, states);
    const auto b = d.kind.input == InputKind::messages ? train(d.name, cfg, msgs) : train(d.name, cfg, states);
    EXPECT_EQ(a.dump(), b.dump()) << d.name;

    a.save(dir / (d.name + ".json"));
    const auto back = DetectorModel::load(dir / (d.name + ".json"));
    EXPECT_EQ(back.dump(), a.dump()) << d.name;
    EXPECT_EQ(back.summary, a.summary) << d.name;
    if (d.kind.input == InputKind::messages) {
      EXPECT_EQ(a.summary.records, msgs.size());
      EXPECT_EQ(a.summary.first, msgs.front().timestamp);
    }
  }
}

TEST(DetectCore, CausalAndPure) {
  // Alerts on a prefix are the alerts of the full run that closed within
  // it (point detectors: exactly the full run's alerts up to that record).
  const auto benign = lab::generate(test::shipped_spec());
  auto spec = test::shipped_spec();
  spec.seed = 9;
  lab::AttackSpec atk;
  atk.family = lab::AttackFamily::swap;
  atk.rate = 0.05;
  const auto test_stream = lab::inject(lab::generate(spec), atk).stream;

  for (const auto& name : kMessageDetectors) {
    const auto model = train(name, nullptr, benign);
    const auto full = detect::detect(model, test_stream);
    EXPECT_EQ(detect::detect(model, test_stream), full) << name << " is not pure";
    ASSERT_FALSE(full.empty()) << name;
    for (std::size_t cut : {test_stream.size() / 3, test_stream.size() / 2, test_stream.size() - 1}) {
      const std::vector<IpalMessage> prefix(test_stream.begin(), test_stream.begin() + static_cast<long>(cut));
      const auto part = detect::detect(model, prefix);
      std::vector<AlertEvent> expect;
      for (const auto& a : full)
        if (a.message_ids.front() < prefix.back().id + 1 && a.start <= prefix.back().timestamp) expect.push_back(a);
      EXPECT_EQ(part, expect) << name << " cut " << cut;
    }
  }
}

TEST(DetectCore, ModelFromJsonRejectsGarbage) {
  EXPECT_THROW(DetectorModel::from_json(ordered_json{{"detector", "dtmc"}}), ParseError);
  EXPECT_THROW(DetectorModel::from_json(ordered_json::array()), ParseError);
}

TEST(DetectCore, SummaryCounts) {
  const auto msgs = lab::generate(test::periodic_spec(30, 1, 0, 1));
  const auto model = train("dtmc", nullptr, msgs);
  Detection d(model);
  auto extra = test::msg(1000, 1600000031, 90);
  std::size_t n = 0;
  for (const auto& m : msgs) d.add(m, [&](AlertEvent&&) { ++n; });
  d.add(extra, [&](AlertEvent&&) { ++n; });
  d.finish([&](AlertEvent&&) { ++n; });
  const auto s = d.summary();
  EXPECT_EQ(s.at("records").get<std::size_t>(), msgs.size() + 1);
  EXPECT_EQ(s.at("alerts").get<std::size_t>(), n);
  EXPECT_EQ(n, 1u);
}
