// Inter-arrival time detectors: a mean/stddev band per class key and a
// min/max range per content key.

#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "builtin.hpp"
#include "ipal/codec.hpp"
#include "ipal/error.hpp"
#include "ipal/io.hpp"

namespace ipal::detect {

namespace {

using ojson = nlohmann::ordered_json;

enum class Unseen { once, always, never };

Unseen parse_unseen(const std::string& s) {
  if (s == "once") return Unseen::once;
  if (s == "always") return Unseen::always;
  if (s == "never") return Unseen::never;
  throw ParseError(fmt::format("unseen_keys must be once, always or never, not \"{}\"", s));
}

std::string class_key(const IpalMessage& m) {
  return fmt::format("{}|{}|{}|{}", m.source, m.destination, to_string(m.type), to_string(m.activity));
}

std::string content_key(const IpalMessage& m) {
  return fmt::format("{}|{}", class_key(m), hex64(fnv1a64(canonical_process_data(m.process_data))));
}

// Division keeps whole-microsecond IATs such as 1.5 s exact.
double seconds_between(Timestamp a, Timestamp b) { return static_cast<double>((b - a).count()) / 1e6; }

struct Welford {
  std::uint64_t n = 0;
  double mean = 0, m2 = 0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double stddev() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
};

// Shared streaming logic: which key a message belongs to and its band.
struct Band {
  double lower = 0, upper = 0, center = 0;
};

class IatTrainer final : public Trainer {
 public:
  explicit IatTrainer(bool range) : range_(range) {}

  void observe(const IpalMessage& m) override {
    auto& k = keys_[range_ ? content_key(m) : class_key(m)];
    if (k.last) {
      const double iat = seconds_between(*k.last, m.timestamp);
      k.stats.add(iat);
      k.min = std::min(k.min, iat);
      k.max = std::max(k.max, iat);
    }
    k.last = m.timestamp;
    ++k.messages;
  }

  ojson finish() override {
    ojson keys = ojson::array();
    std::size_t dropped = 0;
    for (const auto& [key, k] : keys_) {
      if (k.messages < 2) {
        ++dropped;
        continue;
      }
      ojson e;
      e["key"] = key;
      e["n"] = k.messages;
      if (range_) {
        e["min"] = k.min;
        e["max"] = k.max;
      } else {
        e["mean"] = k.stats.mean;
        e["stddev"] = k.stats.stddev();
      }
      keys.push_back(std::move(e));
    }
    if (dropped) spdlog::warn("{} key(s) seen fewer than twice were dropped from the model", dropped);
    if (keys.empty()) throw DataError("insufficient data: no key occurs at least twice");
    return {{"keys", std::move(keys)}};
  }

 private:
  struct Key {
    std::optional<Timestamp> last;
    std::uint64_t messages = 0;
    Welford stats;
    double min = INFINITY, max = -INFINITY;
  };
  bool range_;
  std::map<std::string, Key> keys_;
};

class IatSession final : public Session {
 public:
  IatSession(const DetectorModel& model, bool range) : range_(range), name_(model.detector) {
    const auto& h = model.hyperparameters;
    unseen_ = parse_unseen(h.at("unseen_keys").get<std::string>());
    if (range_) {
      const double eps = h.at("epsilon").get<double>();
      for (const auto& e : model.payload.at("keys")) {
        const double lo = e.at("min").get<double>(), hi = e.at("max").get<double>();
        keys_.emplace(e.at("key").get<std::string>(), Band{lo * (1 - eps), hi * (1 + eps), 0.5 * (lo + hi)});
      }
    } else {
      const double k = h.at("k").get<double>();
      const double floor = h.at("stddev_floor").get<double>();
      const double tol = h.at("relative_tolerance").get<double>();
      const bool relative = h.at("mode").get<std::string>() == "relative";
      for (const auto& e : model.payload.at("keys")) {
        const double mean = e.at("mean").get<double>();
        const double half = relative ? tol * mean : k * std::max(e.at("stddev").get<double>(), floor);
        keys_.emplace(e.at("key").get<std::string>(), Band{mean - half, mean + half, mean});
      }
    }
  }

  void feed(const IpalMessage& m, const AlertSink& sink) override {
    auto key = range_ ? content_key(m) : class_key(m);
    auto it = keys_.find(key);
    if (it == keys_.end()) {
      const bool alert = unseen_ == Unseen::always || (unseen_ == Unseen::once && reported_.insert(key).second);
      if (alert) {
        ++unseen_alerts_;
        emit(m, 0.0, "unseen", sink);
      }
      return;
    }
    auto [ref, fresh] = last_.try_emplace(std::move(key), m.timestamp);
    if (fresh) return;
    const auto& band = it->second;
    const double iat = seconds_between(ref->second, m.timestamp);
    const bool early = iat < band.lower;
    // An early packet does not move the reference: the schedule it broke
    // is still the one the next legitimate packet follows.
    if (!early) ref->second = m.timestamp;
    if (early || iat > band.upper) {
      ++timing_alerts_;
      emit(m, iat - band.center, "timing", sink);
    }
  }

  ojson summary() const override {
    return {{"timing_alerts", timing_alerts_}, {"unseen_alerts", unseen_alerts_}};
  }

 private:
  void emit(const IpalMessage& m, double score, const char* cls, const AlertSink& sink) const {
    AlertEvent a;
    a.detector = name_;
    a.kind = AlertEvent::Kind::point;
    a.message_ids = {m.id};
    a.start = a.end = m.timestamp;
    a.score = score;
    a.violation_class = cls;
    sink(std::move(a));
  }

  bool range_;
  std::string name_;
  Unseen unseen_ = Unseen::once;
  std::unordered_map<std::string, Band> keys_;
  std::unordered_map<std::string, Timestamp> last_;
  std::unordered_set<std::string> reported_;
  std::uint64_t timing_alerts_ = 0, unseen_alerts_ = 0;
};

void check_common(const ojson& h) { parse_unseen(h.at("unseen_keys").get<std::string>()); }

}  // namespace

DetectorInfo iat_mean_info() {
  DetectorInfo d;
  d.name = "iat-mean";
  d.kind = {InputKind::messages, OutputKind::point};
  d.description = "inter-arrival time band (mean +- k stddev) per (source, destination, type, activity)";
  d.params = {
      {"k", 3.0, "band half-width in standard deviations"},
      {"stddev_floor", 0.001, "lower bound on the stddev used for the band (s)"},
      {"mode", "stddev", "stddev: mean +- k*max(stddev, floor); relative: mean +- relative_tolerance*mean"},
      {"relative_tolerance", 0.1, "band half-width as a fraction of the mean (relative mode)"},
      {"unseen_keys", "once", "alert on keys absent from training: once, always or never"},
  };
  d.make_trainer = [](const ojson& h) {
    check_common(h);
    const auto mode = h.at("mode").get<std::string>();
    if (mode != "stddev" && mode != "relative") throw ParseError("mode must be stddev or relative");
    if (!(h.at("k").get<double>() > 0)) throw ParseError("k must be positive");
    if (h.at("stddev_floor").get<double>() < 0) throw ParseError("stddev_floor must be non-negative");
    return std::make_unique<IatTrainer>(false);
  };
  d.make_session = [](const DetectorModel& m) { return std::make_unique<IatSession>(m, false); };
  return d;
}

DetectorInfo iat_range_info() {
  DetectorInfo d;
  d.name = "iat-range";
  d.kind = {InputKind::messages, OutputKind::point};
  d.description = "inter-arrival time range [min(1-eps), max(1+eps)] per class and payload";
  d.params = {
      {"epsilon", 0.05, "relative margin on both range ends"},
      {"unseen_keys", "once", "alert on keys absent from training: once, always or never"},
  };
  d.make_trainer = [](const ojson& h) {
    check_common(h);
    if (h.at("epsilon").get<double>() < 0) throw ParseError("epsilon must be non-negative");
    return std::make_unique<IatTrainer>(true);
  };
  d.make_session = [](const DetectorModel& m) { return std::make_unique<IatSession>(m, true); };
  return d;
}

}  // namespace ipal::detect
