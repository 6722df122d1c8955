#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ipal/message.hpp"

namespace ipal::detect {

enum class InputKind { messages, states };
enum class OutputKind { point, interval };

struct DetectorKind {
  InputKind input = InputKind::messages;
  OutputKind output = OutputKind::point;
};

std::string_view to_string(InputKind k);
using ipal::to_string;

struct TrainingSummary {
  std::uint64_t records = 0;
  Timestamp first{};
  Timestamp last{};

  bool operator==(const TrainingSummary&) const = default;
};

/// Persisted detector: everything needed to rebuild a session.
struct DetectorModel {
  std::string detector;
  int version = 1;
  nlohmann::ordered_json hyperparameters = nlohmann::ordered_json::object();
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();
  TrainingSummary summary;

  nlohmann::ordered_json to_json() const;
  static DetectorModel from_json(const nlohmann::ordered_json& j);
  std::string dump() const;
  void save(const std::filesystem::path& path) const;
  static DetectorModel load(const std::filesystem::path& path);
};

using AlertSink = std::function<void(AlertEvent&&)>;
/// Per-record anomaly scores (series name = variable) for plotting.
using ScoreSink = std::function<void(Timestamp, std::string_view series, double score)>;

class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual void observe(const IpalMessage&) { throw_kind(InputKind::messages); }
  virtual void observe(const StateMessage&) { throw_kind(InputKind::states); }
  /// Throws DataError("insufficient data ...") when the input cannot
  /// support a model.
  virtual nlohmann::ordered_json finish() = 0;

 protected:
  [[noreturn]] static void throw_kind(InputKind got);
};

class Session {
 public:
  virtual ~Session() = default;
  virtual void feed(const IpalMessage&, const AlertSink&) { throw_kind(InputKind::messages); }
  virtual void feed(const StateMessage&, const AlertSink&) { throw_kind(InputKind::states); }
  /// Flushes alerts still open at end of input.
  virtual void finish(const AlertSink&) {}
  /// Run counters for the detect summary.
  virtual nlohmann::ordered_json summary() const { return nlohmann::ordered_json::object(); }
  /// Detectors without a score series ignore this.
  virtual void set_score_sink(ScoreSink) {}

 protected:
  [[noreturn]] static void throw_kind(InputKind got);
};

struct HyperParam {
  std::string key;
  nlohmann::ordered_json default_value;
  std::string help;
};

struct DetectorInfo {
  std::string name;
  DetectorKind kind;
  std::string description;
  std::vector<HyperParam> params;
  /// Hyperparameters are already merged with defaults and checked.
  std::function<std::unique_ptr<Trainer>(const nlohmann::ordered_json& hyper)> make_trainer;
  std::function<std::unique_ptr<Session>(const DetectorModel&)> make_session;
  int version = 1;
};

const std::vector<DetectorInfo>& detectors();
const DetectorInfo& find_detector(std::string_view name);

/// Defaults overlaid with `config`; unknown keys are rejected.
nlohmann::ordered_json merge_hyperparameters(const DetectorInfo& info, const nlohmann::ordered_json& config);

/// Streaming trainer front end enforcing the benign-only contract and
/// ordering. Use `add` per record, then `finish`.
class Training {
 public:
  Training(std::string_view detector, const nlohmann::ordered_json& config);

  void add(const IpalMessage& m);
  void add(const StateMessage& s);
  DetectorModel finish();

  const DetectorInfo& info() const { return *info_; }

 private:
  void check(Label label, Timestamp t, std::string_view what);

  const DetectorInfo* info_;
  nlohmann::ordered_json hyper_;
  std::unique_ptr<Trainer> trainer_;
  TrainingSummary summary_;
};

/// Streaming detection front end: kind and ordering checks.
class Detection {
 public:
  explicit Detection(const DetectorModel& model);

  void add(const IpalMessage& m, const AlertSink& sink);
  void add(const StateMessage& s, const AlertSink& sink);
  void finish(const AlertSink& sink);
  nlohmann::ordered_json summary() const;
  void set_score_sink(ScoreSink sink) { session_->set_score_sink(std::move(sink)); }

  const DetectorInfo& info() const { return *info_; }

 private:
  void check(InputKind got, Timestamp t);

  const DetectorInfo* info_;
  std::unique_ptr<Session> session_;
  std::optional<Timestamp> last_;
  std::uint64_t records_ = 0;
  std::uint64_t alerts_ = 0;
};

/// Whole-stream conveniences.
DetectorModel train(std::string_view detector, const nlohmann::ordered_json& config,
                    const std::vector<IpalMessage>& stream);
DetectorModel train(std::string_view detector, const nlohmann::ordered_json& config,
                    const std::vector<StateMessage>& stream);
std::vector<AlertEvent> detect(const DetectorModel& model, const std::vector<IpalMessage>& stream);
std::vector<AlertEvent> detect(const DetectorModel& model, const std::vector<StateMessage>& stream);

}  // namespace ipal::detect
