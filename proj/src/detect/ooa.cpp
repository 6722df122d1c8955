// Out-of-alphabet check: numeric bounds and categorical alphabets.

#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "builtin.hpp"
#include "ipal/codec.hpp"
#include "ipal/error.hpp"

namespace ipal::detect {

namespace {

using ojson = nlohmann::ordered_json;

bool categorical_value(const Value& v) {
  return std::holds_alternative<bool>(v) || std::holds_alternative<std::string>(v);
}

struct Variable {
  bool categorical = false;
  double min = INFINITY, max = -INFINITY;
  std::set<std::string> alphabet;
};

class OoaTrainer final : public Trainer {
 public:
  explicit OoaTrainer(const ojson& h) {
    for (const auto& v : h.at("categorical")) forced_.insert(v.get<std::string>());
  }

  void observe(const StateMessage& s) override {
    for (const auto& [name, value] : s.state) {
      auto& var = vars_[name];
      if (forced_.contains(name) || categorical_value(value)) var.categorical = true;
      values_[name].insert(to_string(value));
      if (auto x = as_number(value); x && !std::holds_alternative<std::string>(value)) {
        var.min = std::min(var.min, *x);
        var.max = std::max(var.max, *x);
      }
    }
  }

  ojson finish() override {
    ojson out = ojson::array();
    for (auto& [name, var] : vars_) {
      ojson e;
      e["variable"] = name;
      if (var.categorical) {
        e["alphabet"] = values_[name];
      } else {
        e["min"] = var.min;
        e["max"] = var.max;
      }
      out.push_back(std::move(e));
    }
    return {{"variables", std::move(out)}};
  }

 private:
  std::set<std::string> forced_;
  std::map<std::string, Variable> vars_;
  std::map<std::string, std::set<std::string>> values_;
};

class OoaSession final : public Session {
 public:
  explicit OoaSession(const DetectorModel& model)
      : name_(model.detector), delta_(model.hyperparameters.at("delta").get<double>()),
        unknown_(model.hyperparameters.at("unknown_variables").get<bool>()) {
    for (const auto& e : model.payload.at("variables")) {
      Variable v;
      if (e.contains("alphabet")) {
        v.categorical = true;
        for (const auto& a : e.at("alphabet")) v.alphabet.insert(a.get<std::string>());
      } else {
        v.min = e.at("min").get<double>();
        v.max = e.at("max").get<double>();
      }
      vars_.emplace(e.at("variable").get<std::string>(), std::move(v));
    }
  }

  void feed(const StateMessage& s, const AlertSink& sink) override {
    double score = 0;
    std::string cls;
    for (const auto& [name, value] : s.state) {
      auto it = vars_.find(name);
      if (it == vars_.end()) {
        if (unknown_) raise(score, cls, 1.0, "alphabet");
        continue;
      }
      const auto& var = it->second;
      if (var.categorical) {
        if (!var.alphabet.contains(to_string(value))) raise(score, cls, 1.0, "alphabet");
        continue;
      }
      const auto x = as_number(value);
      if (!x || std::holds_alternative<std::string>(value)) {
        raise(score, cls, 1.0, "alphabet");
        continue;
      }
      const double span = var.max - var.min;
      const double lo = var.min - delta_ * span, hi = var.max + delta_ * span;
      if (*x < lo || *x > hi) {
        const double excess = *x < lo ? lo - *x : *x - hi;
        raise(score, cls, span > 0 ? excess / span : excess, "range");
      }
    }

    if (!cls.empty()) {
      ++violating_;
      if (!open_) open_ = AlertEvent{name_, AlertEvent::Kind::interval, {}, s.timestamp, s.timestamp, score, cls};
      open_->end = s.timestamp;
      open_->score = std::max(open_->score, score);
      if (open_->violation_class != cls) open_->violation_class = "range+alphabet";
    } else if (open_) {
      sink(std::move(*open_));
      open_.reset();
    }
  }

  void finish(const AlertSink& sink) override {
    if (open_) sink(std::move(*open_));
    open_.reset();
  }

  ojson summary() const override { return {{"violating_states", violating_}}; }

 private:
  static void raise(double& score, std::string& cls, double s, const char* c) {
    score = std::max(score, s);
    if (cls.empty())
      cls = c;
    else if (cls != c)
      cls = "range+alphabet";
  }

  std::string name_;
  double delta_;
  bool unknown_;
  std::map<std::string, Variable, std::less<>> vars_;
  std::optional<AlertEvent> open_;
  std::uint64_t violating_ = 0;
};

}  // namespace

DetectorInfo ooa_info() {
  DetectorInfo d;
  d.name = "ooa";
  d.kind = {InputKind::states, OutputKind::interval};
  d.description = "out-of-alphabet check on numeric bounds and categorical values";
  d.params = {
      {"delta", 0.0, "numeric margin as a fraction of the training span"},
      {"categorical", ojson::array(), "numeric variables to treat as categorical"},
      {"unknown_variables", true, "alert on variables absent from training"},
  };
  d.make_trainer = [](const ojson& h) {
    if (h.at("delta").get<double>() < 0) throw ParseError("delta must be non-negative");
    return std::make_unique<OoaTrainer>(h);
  };
  d.make_session = [](const DetectorModel& m) { return std::make_unique<OoaSession>(m); };
  return d;
}

}  // namespace ipal::detect
