// Discrete-time Markov chain over message types per directed connection.

#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "builtin.hpp"
#include "ipal/error.hpp"

namespace ipal::detect {

namespace {

using ojson = nlohmann::ordered_json;

std::string connection_of(const IpalMessage& m) { return m.source + "->" + m.destination; }

std::string state_of(const IpalMessage& m, bool with_length) {
  auto s = to_string(m.type);
  if (with_length) s += fmt::format("/{}", m.length);
  return s;
}

struct Chain {
  std::set<std::string> states;
  std::set<std::pair<std::string, std::string>> transitions;
};

class DtmcTrainer final : public Trainer {
 public:
  explicit DtmcTrainer(bool with_length) : with_length_(with_length) {}

  void observe(const IpalMessage& m) override {
    const auto conn = connection_of(m);
    auto state = state_of(m, with_length_);
    auto& chain = chains_[conn];
    chain.states.insert(state);
    if (auto it = prev_.find(conn); it != prev_.end()) {
      chain.transitions.emplace(it->second, state);
      it->second = std::move(state);
    } else {
      prev_.emplace(conn, std::move(state));
    }
  }

  ojson finish() override {
    ojson conns = ojson::array();
    for (const auto& [name, chain] : chains_) {
      ojson t = ojson::array();
      for (const auto& [a, b] : chain.transitions) t.push_back({a, b});
      conns.push_back({{"connection", name}, {"states", chain.states}, {"transitions", std::move(t)}});
    }
    return {{"reduction", "none"}, {"connections", std::move(conns)}};
  }

 private:
  bool with_length_;
  std::map<std::string, Chain> chains_;
  std::unordered_map<std::string, std::string> prev_;
};

class DtmcSession final : public Session {
 public:
  explicit DtmcSession(const DetectorModel& model)
      : name_(model.detector), with_length_(model.hyperparameters.at("include_length").get<bool>()) {
    for (const auto& c : model.payload.at("connections")) {
      auto& chain = chains_[c.at("connection").get<std::string>()];
      for (const auto& s : c.at("states")) chain.states.insert(s.get<std::string>());
      for (const auto& t : c.at("transitions"))
        chain.transitions.emplace(t.at(0).get<std::string>(), t.at(1).get<std::string>());
    }
  }

  void feed(const IpalMessage& m, const AlertSink& sink) override {
    const auto conn = connection_of(m);
    auto state = state_of(m, with_length_);
    const auto it = chains_.find(conn);
    const Chain* chain = it == chains_.end() ? nullptr : &it->second;
    const bool known = chain && chain->states.contains(state);

    auto prev = prev_.find(conn);
    if (!known) {
      ++state_violations_;
      emit(m, "state", sink);
    } else if (prev != prev_.end() && chain->states.contains(prev->second) &&
               !chain->transitions.contains({prev->second, state})) {
      ++transition_violations_;
      emit(m, "transition", sink);
    }
    if (prev != prev_.end())
      prev->second = std::move(state);
    else
      prev_.emplace(conn, std::move(state));
  }

  ojson summary() const override {
    return {{"state_violations", state_violations_}, {"transition_violations", transition_violations_}};
  }

 private:
  void emit(const IpalMessage& m, const char* cls, const AlertSink& sink) const {
    AlertEvent a;
    a.detector = name_;
    a.kind = AlertEvent::Kind::point;
    a.message_ids = {m.id};
    a.start = a.end = m.timestamp;
    a.score = 1.0;
    a.violation_class = cls;
    sink(std::move(a));
  }

  std::string name_;
  bool with_length_;
  std::unordered_map<std::string, Chain> chains_;
  std::unordered_map<std::string, std::string> prev_;
  std::uint64_t state_violations_ = 0, transition_violations_ = 0;
};

}  // namespace

DetectorInfo dtmc_info() {
  DetectorInfo d;
  d.name = "dtmc";
  d.kind = {InputKind::messages, OutputKind::point};
  d.description = "Markov chain of message types per directed connection; flags unseen states and transitions";
  d.params = {
      {"include_length", false, "state = message type plus length instead of the type alone"},
      {"reduction", "none", "state reduction; only none is available"},
  };
  d.make_trainer = [](const ojson& h) {
    if (h.at("reduction").get<std::string>() != "none")
      throw ParseError("reduction modes other than none are not implemented");
    return std::make_unique<DtmcTrainer>(h.at("include_length").get<bool>());
  };
  d.make_session = [](const DetectorModel& m) { return std::make_unique<DtmcSession>(m); };
  return d;
}

}  // namespace ipal::detect
