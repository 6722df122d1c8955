#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "ipal/codec.hpp"
#include "ipal/error.hpp"
#include "ipal/io.hpp"
#include "ipal/scenario.hpp"
#include "ipal/validate.hpp"

using namespace ipal;
using ipal::test::at;

namespace {

IpalMessage sample() {
  IpalMessage m;
  m.id = 4;
  m.timestamp = at(1600000000.25);
  m.protocol = "modbus";
  m.length = 12;
  m.source = "10.0.0.10:49152:1";
  m.destination = "10.0.0.1:502:1";
  m.type = std::int64_t{3};
  return m;
}

}  // namespace

TEST(Codec, EmptyProcessDataIsAnEmptyMap) {
  const auto line = serialize_message(sample());
  EXPECT_NE(line.find("\"process_data\":{}"), std::string::npos);
  EXPECT_NE(line.find("\"responds_to\":[]"), std::string::npos);
  EXPECT_NE(line.find("\"malicious\":null"), std::string::npos);
  EXPECT_EQ(line,
            R"({"id":4,"timestamp":1600000000.250000,"protocol":"modbus","length":12,"malicious":null,)"
            R"("source":"10.0.0.10:49152:1","destination":"10.0.0.1:502:1","message_type":3,)"
            R"("activity":"request","responds_to":[],"process_data":{}})");
}

TEST(Codec, RoundTripsGeneratedCorpus) {
  lab::Rng rng(11);
  const auto msgs = test::random_stream(rng, 100);
  for (const auto& m : msgs) {
    const auto line = serialize_message(m);
    const auto back = parse_message(line);
    EXPECT_EQ(back, m) << line;
    EXPECT_EQ(serialize_message(back), line);
  }
}

TEST(Codec, RespondsToMustPrecedeId) {
  auto m = sample();
  m.id = 2;
  m.activity = Activity::response;
  m.responds_to = {3};
  try {
    serialize_message(m);
    FAIL() << "accepted";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.rule(), rule::responds_before);
  }
  const std::string line =
      R"({"id":2,"timestamp":1,"protocol":"m","length":1,"malicious":false,"source":"a","destination":"b",)"
      R"("message_type":3,"activity":"response","responds_to":[3],"process_data":{}})";
  EXPECT_THROW(parse_message(line), ValidationError);
}

TEST(Codec, MissingTimestampIsNamed) {
  const std::string line =
      R"({"id":2,"protocol":"m","length":1,"malicious":false,"source":"a","destination":"b",)"
      R"("message_type":3,"activity":"request","responds_to":[],"process_data":{}})";
  try {
    parse_message(line);
    FAIL() << "accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("timestamp"), std::string::npos);
  }
}

TEST(Codec, ActivityEnumerationIsClosed) {
  auto line_with = [](const std::string& act) {
    return R"({"id":2,"timestamp":1,"protocol":"m","length":1,"malicious":false,"source":"a","destination":"b",)"
           R"("message_type":3,"activity":")" +
           act + R"(","responds_to":[],"process_data":{}})";
  };
  try {
    parse_message(line_with("poll"));
    FAIL() << "accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("invalid activity"), std::string::npos);
  }
  for (const char* ok : {"request", "response", "command", "command_response"})
    EXPECT_NO_THROW(parse_message(line_with(ok))) << ok;
}

TEST(Codec, UnknownKeysRoundTripInOrder) {
  const std::string line =
      R"({"id":0,"timestamp":1.000000,"protocol":"m","length":1,"malicious":true,"source":"a","destination":"b",)"
      R"("message_type":"READ","activity":"request","responds_to":[],"process_data":{"x":1.5},"zeta":[1,2],"alpha":{"k":"v"}})";
  const auto m = parse_message(line);
  EXPECT_EQ(m.extra.size(), 2u);
  EXPECT_EQ(serialize_message(m), line);
}

TEST(Codec, ValueTypesSurvive) {
  auto m = sample();
  m.process_data = {{"b", true}, {"i", std::int64_t{-7}}, {"d", 2.0}, {"s", std::string("on")}};
  const auto back = parse_message(serialize_message(m));
  EXPECT_TRUE(std::holds_alternative<bool>(back.process_data.at("b")));
  EXPECT_TRUE(std::holds_alternative<std::int64_t>(back.process_data.at("i")));
  EXPECT_TRUE(std::holds_alternative<double>(back.process_data.at("d")));
  EXPECT_TRUE(std::holds_alternative<std::string>(back.process_data.at("s")));
}

TEST(Codec, StateAndAlertRoundTrip) {
  StateMessage s = test::state(1600000001.0, {{"a", 1.25}, {"b", false}}, Label::malicious);
  EXPECT_EQ(parse_state(serialize_state(s)), s);

  AlertEvent p;
  p.detector = "iat-mean";
  p.message_ids = {3, 4};
  p.start = p.end = at(5.5);
  p.score = 2.5;
  p.violation_class = "timing";
  EXPECT_EQ(parse_alert(serialize_alert(p)), p);

  AlertEvent iv;
  iv.detector = "pasad";
  iv.kind = AlertEvent::Kind::interval;
  iv.start = at(1.0);
  iv.end = at(9.0);
  iv.score = 0.125;
  EXPECT_EQ(parse_alert(serialize_alert(iv)), iv);
}

TEST(Validate, MonotoneIdsPass) {
  std::vector<IpalMessage> s;
  for (std::uint64_t i = 0; i < 3; ++i) {
    auto m = sample();
    m.id = i;
    s.push_back(m);
  }
  EXPECT_TRUE(validate_stream(s).empty());
}

TEST(Validate, IdInversionFlagsThirdRecord) {
  std::vector<IpalMessage> s;
  for (std::uint64_t id : {0, 2, 1}) {
    auto m = sample();
    m.id = id;
    s.push_back(m);
  }
  const auto v = validate_stream(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, rule::id_monotonicity);
  EXPECT_EQ(v[0].index, 2u);
}

TEST(Validate, DanglingRespondsToMatchesSetMembership) {
  // Brute force: a link dangles iff its target id was not seen earlier.
  lab::Rng rng(5);
  for (int round = 0; round < 50; ++round) {
    std::vector<IpalMessage> s;
    std::uint64_t id = 0;
    for (int i = 0; i < 30; ++i) {
      auto m = sample();
      id += 1 + rng.below(3);
      m.id = id;
      if (rng.below(3) == 0) {
        m.activity = Activity::response;
        m.responds_to = {rng.below(id)};
      }
      s.push_back(m);
    }
    std::set<std::uint64_t> seen;
    std::size_t expected = 0;
    for (const auto& m : s) {
      for (auto r : m.responds_to) expected += !seen.count(r);
      seen.insert(m.id);
    }
    const auto v = validate_stream(s);
    std::size_t dangling = 0;
    for (const auto& x : v) {
      EXPECT_EQ(x.rule, rule::dangling);
      ++dangling;
    }
    EXPECT_EQ(dangling, expected);
  }
}

TEST(Validate, RejectsEmptySourceAndNonFiniteValues) {
  auto m = sample();
  m.source.clear();
  EXPECT_THROW(validate_message(m), ValidationError);
  m = sample();
  m.process_data["x"] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(validate_message(m), ValidationError);
}

TEST(Io, FilesRoundTripAndReportLineNumbers) {
  test::TempDir dir;
  lab::Rng rng(3);
  const auto msgs = test::random_stream(rng, 50);
  write_messages(dir / "a.ipal", msgs);
  EXPECT_EQ(read_messages(dir / "a.ipal"), msgs);
  EXPECT_EQ(sniff_stream_kind(dir / "a.ipal"), StreamKind::messages);

  {
    std::ofstream out(dir / "bad.ipal");
    out << serialize_message(msgs[0]) << "\n\n{not json}\n";
  }
  try {
    read_messages(dir / "bad.ipal");
    FAIL() << "accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(Io, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(hex64(0xaf63dc4c8601ec8cull), "af63dc4c8601ec8c");
}

TEST(Scenario, NormalizeRejectsOverlap) {
  std::vector<Scenario> s = {{"b", at(20), at(30)}, {"a", at(0), at(10)}};
  normalize_scenarios(s);
  EXPECT_EQ(s[0].name, "a");
  std::vector<Scenario> bad = {{"a", at(0), at(10)}, {"b", at(10), at(20)}};
  EXPECT_THROW(normalize_scenarios(bad), DataError);
  EXPECT_EQ(label_for(s, at(10)), Label::malicious);
  EXPECT_EQ(label_for(s, at(15)), Label::benign);
}

TEST(Scenario, FileRoundTrip) {
  test::TempDir dir;
  ScenarioFile f;
  f.scenarios = {{"flood", at(10), at(20)}};
  f.gaps = {at(12.5)};
  f.save(dir / "s.json");
  const auto g = ScenarioFile::load(dir / "s.json");
  EXPECT_EQ(g.scenarios, f.scenarios);
  EXPECT_EQ(g.gaps, f.gaps);
}
