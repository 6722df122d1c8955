#include "ipal/detect/detector.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "ipal/error.hpp"
#include "ipal/io.hpp"
#include "builtin.hpp"

namespace ipal::detect {

std::string_view to_string(InputKind k) { return k == InputKind::messages ? "message stream" : "state stream"; }

void Trainer::throw_kind(InputKind got) {
  throw DataError(fmt::format("kind mismatch: detector does not train on a {}", to_string(got)));
}

void Session::throw_kind(InputKind got) {
  throw DataError(fmt::format("kind mismatch: model does not accept a {}", to_string(got)));
}

nlohmann::ordered_json DetectorModel::to_json() const {
  nlohmann::ordered_json j;
  j["detector"] = detector;
  j["version"] = version;
  j["hyperparameters"] = hyperparameters;
  j["training"] = {{"records", summary.records},
                   {"first", to_seconds(summary.first)},
                   {"last", to_seconds(summary.last)}};
  j["payload"] = payload;
  return j;
}

DetectorModel DetectorModel::from_json(const nlohmann::ordered_json& j) {
  DetectorModel m;
  try {
    m.detector = j.at("detector").get<std::string>();
    m.version = j.at("version").get<int>();
    m.hyperparameters = j.at("hyperparameters");
    const auto& t = j.at("training");
    m.summary.records = t.at("records").get<std::uint64_t>();
    m.summary.first = timestamp_from_seconds(t.at("first").get<double>());
    m.summary.last = timestamp_from_seconds(t.at("last").get<double>());
    m.payload = j.at("payload");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("bad model: {}", e.what()));
  }
  const auto& info = find_detector(m.detector);
  if (m.version != info.version)
    throw DataError(fmt::format("model version {} of \"{}\" not supported (expected {})", m.version, m.detector,
                                info.version));
  return m;
}

std::string DetectorModel::dump() const { return to_json().dump(1) + "\n"; }

void DetectorModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << dump();
}

DetectorModel DetectorModel::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::ordered_json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

const std::vector<DetectorInfo>& detectors() {
  static const std::vector<DetectorInfo> all = {iat_mean_info(), iat_range_info(), dtmc_info(), pasad_info(),
                                                ooa_info()};
  return all;
}

const DetectorInfo& find_detector(std::string_view name) {
  for (const auto& d : detectors())
    if (d.name == name) return d;
  std::string known;
  for (const auto& d : detectors()) known += (known.empty() ? "" : ", ") + d.name;
  throw UsageError(fmt::format("unknown detector \"{}\" (known: {})", name, known));
}

nlohmann::ordered_json merge_hyperparameters(const DetectorInfo& info, const nlohmann::ordered_json& config) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& p : info.params) out[p.key] = p.default_value;
  if (config.is_null()) return out;
  if (!config.is_object()) throw ParseError("detector config must be an object");
  for (const auto& [k, v] : config.items()) {
    if (!out.contains(k)) throw ParseError(fmt::format("unknown hyperparameter \"{}\" for {}", k, info.name));
    const auto& def = out[k];
    const bool compatible = (def.is_number() && v.is_number()) || def.type() == v.type() ||
                            (def.is_null() && (v.is_number() || v.is_string()));
    if (!compatible) throw ParseError(fmt::format("hyperparameter \"{}\" has the wrong type", k));
    out[k] = v;
  }
  return out;
}

Training::Training(std::string_view detector, const nlohmann::ordered_json& config)
    : info_(&find_detector(detector)), hyper_(merge_hyperparameters(*info_, config)),
      trainer_(info_->make_trainer(hyper_)) {}

void Training::check(Label label, Timestamp t, std::string_view what) {
  if (label == Label::malicious)
    throw DataError(fmt::format("training refused: {} is labeled malicious (benign-only training)", what));
  if (summary_.records > 0 && t < summary_.last)
    throw DataError(fmt::format("training input not ordered at {}", what));
  if (summary_.records == 0) summary_.first = t;
  summary_.last = t;
  ++summary_.records;
}

void Training::add(const IpalMessage& m) {
  check(m.malicious, m.timestamp, fmt::format("message id {}", m.id));
  trainer_->observe(m);
}

void Training::add(const StateMessage& s) {
  check(s.malicious, s.timestamp, fmt::format("state at {}", format_seconds(s.timestamp)));
  trainer_->observe(s);
}

DetectorModel Training::finish() {
  if (summary_.records == 0) throw DataError(fmt::format("insufficient data: {} got an empty training stream", info_->name));
  DetectorModel m;
  m.detector = info_->name;
  m.version = info_->version;
  m.hyperparameters = hyper_;
  m.payload = trainer_->finish();
  m.summary = summary_;
  return m;
}

Detection::Detection(const DetectorModel& model) : info_(&find_detector(model.detector)) {
  session_ = info_->make_session(model);
}

void Detection::check(InputKind got, Timestamp t) {
  if (got != info_->kind.input)
    throw DataError(fmt::format("kind mismatch: {} model fed a {}", info_->name, to_string(got)));
  if (last_ && t < *last_) throw DataError("detection input not ordered by timestamp");
  last_ = t;
  ++records_;
}

void Detection::add(const IpalMessage& m, const AlertSink& sink) {
  check(InputKind::messages, m.timestamp);
  session_->feed(m, [&](AlertEvent&& a) {
    ++alerts_;
    sink(std::move(a));
  });
}

void Detection::add(const StateMessage& s, const AlertSink& sink) {
  check(InputKind::states, s.timestamp);
  session_->feed(s, [&](AlertEvent&& a) {
    ++alerts_;
    sink(std::move(a));
  });
}

void Detection::finish(const AlertSink& sink) {
  session_->finish([&](AlertEvent&& a) {
    ++alerts_;
    sink(std::move(a));
  });
}

nlohmann::ordered_json Detection::summary() const {
  nlohmann::ordered_json j;
  j["detector"] = info_->name;
  j["records"] = records_;
  j["alerts"] = alerts_;
  const auto extra = session_->summary();
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

namespace {

template <typename Record>
DetectorModel train_all(std::string_view detector, const nlohmann::ordered_json& config,
                        const std::vector<Record>& stream) {
  Training t(detector, config);
  for (const auto& r : stream) t.add(r);
  return t.finish();
}

template <typename Record>
std::vector<AlertEvent> detect_all(const DetectorModel& model, const std::vector<Record>& stream) {
  Detection d(model);
  std::vector<AlertEvent> out;
  auto sink = [&](AlertEvent&& a) { out.push_back(std::move(a)); };
  for (const auto& r : stream) d.add(r, sink);
  d.finish(sink);
  return out;
}

}  // namespace

DetectorModel train(std::string_view detector, const nlohmann::ordered_json& config,
                    const std::vector<IpalMessage>& stream) {
  return train_all(detector, config, stream);
}

DetectorModel train(std::string_view detector, const nlohmann::ordered_json& config,
                    const std::vector<StateMessage>& stream) {
  return train_all(detector, config, stream);
}

std::vector<AlertEvent> detect(const DetectorModel& model, const std::vector<IpalMessage>& stream) {
  return detect_all(model, stream);
}

std::vector<AlertEvent> detect(const DetectorModel& model, const std::vector<StateMessage>& stream) {
  return detect_all(model, stream);
}

}  // namespace ipal::detect
