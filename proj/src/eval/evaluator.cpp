#include "ipal/eval/evaluator.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ipal/error.hpp"
#include "ipal/io.hpp"

namespace ipal::eval {

namespace {

using ojson = nlohmann::ordered_json;

std::uint8_t label_code(Label l) { return l == Label::malicious ? 1 : l == Label::benign ? 0 : 2; }

void check_times(const GroundTruth& g) {
  for (std::size_t i = 1; i < g.times.size(); ++i)
    if (g.times[i] < g.times[i - 1]) throw DataError("truth stream is not ordered by timestamp");
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

double seconds(Duration d) { return static_cast<double>(d.count()) / 1e6; }

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> opt_from(const ojson& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::string cell(const std::optional<double>& v, double scale = 100.0) {
  return v ? fmt::format("{:.2f}", *v * scale) : std::string("-");
}

std::string_view mode_name(Mode m) { return m == Mode::point ? "point" : m == Mode::scenario ? "scenario" : "both"; }

}  // namespace

GroundTruth GroundTruth::from_messages(const std::vector<IpalMessage>& msgs, std::vector<Scenario> scenarios) {
  GroundTruth g;
  g.ids.reserve(msgs.size());
  for (const auto& m : msgs) {
    g.ids.push_back(m.id);
    g.times.push_back(m.timestamp.time_since_epoch().count());
    g.labels.push_back(label_code(m.malicious));
  }
  normalize_scenarios(scenarios);
  g.scenarios = std::move(scenarios);
  check_times(g);
  return g;
}

GroundTruth GroundTruth::from_states(const std::vector<StateMessage>& states, std::vector<Scenario> scenarios) {
  GroundTruth g;
  for (std::size_t i = 0; i < states.size(); ++i) {
    g.ids.push_back(i);
    g.times.push_back(states[i].timestamp.time_since_epoch().count());
    g.labels.push_back(label_code(states[i].malicious));
  }
  normalize_scenarios(scenarios);
  g.scenarios = std::move(scenarios);
  check_times(g);
  return g;
}

Duration GroundTruth::median_gap() const {
  if (times.size() < 2) return Duration::zero();
  std::vector<std::int64_t> gaps(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) gaps[i - 1] = times[i] - times[i - 1];
  auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  return Duration{*mid};
}

std::string GroundTruth::digest() const {
  std::string buf;
  buf.reserve(times.size() * 12);
  for (std::size_t i = 0; i < times.size(); ++i) buf += fmt::format("{}:{}:{};", ids[i], times[i], labels[i]);
  for (const auto& s : scenarios)
    buf += fmt::format("{}[{},{}];", s.name, s.start.time_since_epoch().count(), s.end.time_since_epoch().count());
  return hex64(fnv1a64(buf));
}

std::size_t GroundTruth::check_labels_in_scenarios() const {
  if (scenarios.empty()) return 0;
  std::size_t outside = 0;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (labels[i] == 1 && label_for(scenarios, Timestamp{Duration{times[i]}}) != Label::malicious) ++outside;
  if (outside) spdlog::warn("{} malicious record(s) lie outside every scenario", outside);
  return outside;
}

PointMetrics metrics_from_counts(const kernels::Confusion& c) {
  PointMetrics m;
  m.counts = c;
  m.accuracy = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.tpr = m.recall;
  m.fpr = ratio(c.fp, c.fp + c.tn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0)
    m.f1 = 2 * *m.precision * *m.recall / (*m.precision + *m.recall);
  return m;
}

PointMetrics point_metrics(const std::vector<AlertEvent>& alerts, const GroundTruth& truth, bool parallel) {
  if (std::none_of(truth.labels.begin(), truth.labels.end(), [](auto l) { return l < 2; }))
    throw DataError("truth stream is unlabeled throughout");

  std::vector<std::uint8_t> predicted(truth.times.size(), 0);
  std::unordered_set<std::uint64_t> ids;
  std::vector<std::pair<std::int64_t, std::int64_t>> spans;
  for (const auto& a : alerts) {
    if (a.kind == AlertEvent::Kind::point) {
      ids.insert(a.message_ids.begin(), a.message_ids.end());
    } else {
      spans.emplace_back(a.start.time_since_epoch().count(), a.end.time_since_epoch().count());
    }
  }
  // Interval alerts: sorted and merged so the kernel can binary-search.
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<std::int64_t, std::int64_t>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, s.second);
    else
      merged.push_back(s);
  }
  if (parallel)
    kernels::mark_intervals_parallel(truth.times, merged, predicted);
  else
    kernels::mark_intervals_serial(truth.times, merged, predicted);
  if (!ids.empty())
    for (std::size_t i = 0; i < truth.ids.size(); ++i)
      if (ids.contains(truth.ids[i])) predicted[i] = 1;

  const auto c = parallel ? kernels::confusion_parallel(truth.labels, predicted)
                          : kernels::confusion_serial(truth.labels, predicted);
  return metrics_from_counts(c);
}

std::vector<Interval> alarm_intervals(const std::vector<AlertEvent>& alerts, Duration point_width) {
  std::vector<Interval> raw;
  raw.reserve(alerts.size());
  for (const auto& a : alerts) {
    if (a.kind == AlertEvent::Kind::point)
      raw.push_back({a.start, a.start + point_width});
    else
      raw.push_back({a.start, a.end});
  }
  std::sort(raw.begin(), raw.end(), [](const Interval& a, const Interval& b) {
    return a.start < b.start || (a.start == b.start && a.end < b.end);
  });
  std::vector<Interval> out;
  for (const auto& iv : raw) {
    if (!out.empty() && iv.start <= out.back().end)
      out.back().end = std::max(out.back().end, iv.end);
    else
      out.push_back(iv);
  }
  return out;
}

ScenarioMetrics scenario_metrics(const std::vector<Interval>& alarms, const std::vector<Scenario>& scenarios,
                                 Duration grace) {
  for (std::size_t i = 1; i < alarms.size(); ++i)
    if (alarms[i].start < alarms[i - 1].start) throw DataError("alarm stream is not ordered");

  ScenarioMetrics m;
  m.scenarios = scenarios.size();
  auto overlaps = [](Timestamp a0, Timestamp a1, Timestamp b0, Timestamp b1) { return a0 <= b1 && b0 <= a1; };

  for (const auto& s : scenarios) {
    const auto end = s.end + grace;
    if (std::any_of(alarms.begin(), alarms.end(),
                    [&](const Interval& a) { return overlaps(a.start, a.end, s.start, end); }))
      ++m.detected_attacks;
  }

  // Union of scenario intervals, for penalty and coverage.
  std::vector<Interval> bands;
  for (const auto& s : scenarios) {
    if (!bands.empty() && s.start <= bands.back().end)
      bands.back().end = std::max(bands.back().end, s.end);
    else
      bands.push_back({s.start, s.end});
  }
  auto inside = [&](const Interval& a) {
    Duration d{0};
    for (const auto& b : bands) {
      const auto lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
      if (lo < hi) d += hi - lo;
    }
    return d;
  };

  for (const auto& a : alarms) {
    const bool hit = std::any_of(scenarios.begin(), scenarios.end(), [&](const Scenario& s) {
      return overlaps(a.start, a.end, s.start, s.end + grace);
    });
    if (!hit) {
      ++m.false_alarms;
      continue;
    }
    m.penalty_score += seconds((a.end - a.start) - inside(a));
  }

  if (!scenarios.empty()) m.odr = 100.0 * static_cast<double>(m.detected_attacks) / static_cast<double>(m.scenarios);
  Duration total{0}, covered{0};
  for (const auto& b : bands) total += b.end - b.start;
  for (const auto& b : bands)
    for (const auto& a : alarms) {
      const auto lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
      if (lo < hi) covered += hi - lo;
    }
  if (total > Duration::zero()) m.coverage = 100.0 * seconds(covered) / seconds(total);
  return m;
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "point") return Mode::point;
  if (s == "scenario") return Mode::scenario;
  if (s == "both") return Mode::both;
  return std::nullopt;
}

EvalReport evaluate(std::string detector, const std::vector<AlertEvent>& alerts, const GroundTruth& truth,
                    const EvalOptions& opt) {
  EvalReport r;
  r.detector = std::move(detector);
  r.mode = opt.mode;
  r.records = truth.times.size();
  r.truth_digest = truth.digest();
  r.scenarios = truth.scenarios;
  r.point_width = opt.point_width.value_or(truth.median_gap());
  r.grace = opt.grace;
  truth.check_labels_in_scenarios();
  if (opt.mode != Mode::scenario) r.point = point_metrics(alerts, truth, opt.parallel);
  r.alarms = alarm_intervals(alerts, r.point_width);
  if (opt.mode != Mode::point) {
    if (truth.scenarios.empty()) throw DataError("scenario metrics need attack scenarios");
    r.scenario = scenario_metrics(r.alarms, truth.scenarios, opt.grace);
  }
  return r;
}

ojson EvalReport::to_json() const {
  ojson j;
  j["detector"] = detector;
  j["mode"] = mode_name(mode);
  j["truth"] = {{"records", records}, {"digest", truth_digest}};
  ojson scen = ojson::array();
  for (const auto& s : scenarios)
    scen.push_back({{"name", s.name}, {"start", format_seconds(s.start)}, {"end", format_seconds(s.end)}});
  j["truth"]["scenarios"] = std::move(scen);
  j["point_width"] = seconds(point_width);
  j["grace"] = seconds(grace);
  if (point) {
    const auto& p = *point;
    j["point"] = {{"tp", p.counts.tp},         {"fp", p.counts.fp},         {"tn", p.counts.tn},
                  {"fn", p.counts.fn},         {"accuracy", opt(p.accuracy)}, {"precision", opt(p.precision)},
                  {"recall", opt(p.recall)},   {"f1", opt(p.f1)},           {"tpr", opt(p.tpr)},
                  {"fpr", opt(p.fpr)}};
  }
  if (scenario) {
    const auto& s = *scenario;
    j["scenario"] = {{"scenarios", s.scenarios},         {"detected_attacks", s.detected_attacks},
                     {"false_alarms", s.false_alarms},   {"penalty_score", s.penalty_score},
                     {"odr", opt(s.odr)},                {"coverage", opt(s.coverage)}};
  }
  ojson alarms_j = ojson::array();
  for (const auto& a : alarms) alarms_j.push_back({format_seconds(a.start), format_seconds(a.end)});
  j["alarms"] = std::move(alarms_j);
  return j;
}

EvalReport EvalReport::from_json(const ojson& j) {
  EvalReport r;
  auto ts = [](const ojson& v) {
    return timestamp_from_seconds(std::stod(v.get<std::string>()));
  };
  try {
    r.detector = j.at("detector").get<std::string>();
    const auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!mode) throw ParseError("bad report mode");
    r.mode = *mode;
    const auto& t = j.at("truth");
    r.records = t.at("records").get<std::size_t>();
    r.truth_digest = t.at("digest").get<std::string>();
    for (const auto& s : t.at("scenarios"))
      r.scenarios.push_back({s.at("name").get<std::string>(), ts(s.at("start")), ts(s.at("end"))});
    r.point_width = duration_from_seconds(j.at("point_width").get<double>());
    r.grace = duration_from_seconds(j.at("grace").get<double>());
    if (j.contains("point")) {
      const auto& p = j.at("point");
      PointMetrics m;
      m.counts = {p.at("tp").get<std::uint64_t>(), p.at("fp").get<std::uint64_t>(), p.at("tn").get<std::uint64_t>(),
                  p.at("fn").get<std::uint64_t>()};
      m.accuracy = opt_from(p, "accuracy");
      m.precision = opt_from(p, "precision");
      m.recall = opt_from(p, "recall");
      m.f1 = opt_from(p, "f1");
      m.tpr = opt_from(p, "tpr");
      m.fpr = opt_from(p, "fpr");
      r.point = m;
    }
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      ScenarioMetrics m;
      m.scenarios = s.at("scenarios").get<std::size_t>();
      m.detected_attacks = s.at("detected_attacks").get<std::size_t>();
      m.false_alarms = s.at("false_alarms").get<std::size_t>();
      m.penalty_score = s.at("penalty_score").get<double>();
      m.odr = opt_from(s, "odr");
      m.coverage = opt_from(s, "coverage");
      r.scenario = m;
    }
    for (const auto& a : j.at("alarms")) r.alarms.push_back({ts(a.at(0)), ts(a.at(1))});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("bad report: {}", e.what()));
  }
  return r;
}

std::string EvalReport::dump() const { return to_json().dump(1) + "\n"; }

void EvalReport::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << dump();
}

EvalReport EvalReport::load(const std::filesystem::path& path) {
  try {
    return from_json(ojson::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<AlertEvent> union_alerts(const std::vector<std::vector<AlertEvent>>& inputs) {
  std::vector<AlertEvent> out;
  std::vector<std::string> names;
  for (const auto& in : inputs) {
    out.insert(out.end(), in.begin(), in.end());
    for (const auto& a : in)
      if (std::find(names.begin(), names.end(), a.detector) == names.end()) names.push_back(a.detector);
  }
  std::string joined;
  for (const auto& n : names) joined += (joined.empty() ? "" : "+") + n;
  for (auto& a : out) a.detector = joined;
  std::stable_sort(out.begin(), out.end(), [](const AlertEvent& a, const AlertEvent& b) { return a.start < b.start; });
  return out;
}

namespace {

void check_same_truth(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw UsageError("compare needs at least one report");
  for (const auto& r : reports)
    if (r.truth_digest != reports.front().truth_digest)
      throw DataError(fmt::format("mixed ground truths: {} and {} were scored on different truth streams",
                                  reports.front().detector, r.detector));
}

}  // namespace

std::string comparison_csv(const std::vector<EvalReport>& reports) {
  check_same_truth(reports);
  std::string out =
      "detector,tp,fp,tn,fn,accuracy,precision,recall,f1,tpr,fpr,odr,detected_attacks,false_alarms,penalty_score,cp\n";
  for (const auto& r : reports) {
    out += r.detector;
    if (r.point) {
      const auto& p = *r.point;
      out += fmt::format(",{},{},{},{},{},{},{},{},{},{}", p.counts.tp, p.counts.fp, p.counts.tn, p.counts.fn,
                         cell(p.accuracy), cell(p.precision), cell(p.recall), cell(p.f1), cell(p.tpr), cell(p.fpr));
    } else {
      out += ",-,-,-,-,-,-,-,-,-,-";
    }
    if (r.scenario) {
      const auto& s = *r.scenario;
      out += fmt::format(",{},{},{},{:.3f},{}", cell(s.odr, 1.0), s.detected_attacks, s.false_alarms, s.penalty_score,
                         cell(s.coverage, 1.0));
    } else {
      out += ",-,-,-,-,-";
    }
    out += '\n';
  }
  return out;
}

ojson timeline(const std::vector<EvalReport>& reports) {
  check_same_truth(reports);
  ojson j;
  ojson bands = ojson::array();
  for (const auto& s : reports.front().scenarios)
    bands.push_back({{"name", s.name}, {"start", to_seconds(s.start)}, {"end", to_seconds(s.end)}});
  j["scenarios"] = std::move(bands);
  ojson dets = ojson::array();
  for (const auto& r : reports) {
    ojson alarms = ojson::array();
    for (const auto& a : r.alarms) alarms.push_back({to_seconds(a.start), to_seconds(a.end)});
    dets.push_back({{"detector", r.detector}, {"alarms", std::move(alarms)}});
  }
  j["detectors"] = std::move(dets);
  return j;
}

}  // namespace ipal::eval
