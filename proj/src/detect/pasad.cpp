#include "ipal/detect/pasad.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "builtin.hpp"
#include "ipal/error.hpp"
#include "ipal/kernels/departure.hpp"

namespace ipal::detect {

namespace {

using ojson = nlohmann::ordered_json;

}  // namespace

double PasadFit::departure(const double* window) const {
  return kernels::departure(U.data(), L, r, c.data(), window);
}

ojson PasadFit::to_json() const {
  ojson u = ojson::array();
  for (Eigen::Index j = 0; j < U.cols(); ++j) u.push_back(std::vector<double>(U.col(j).begin(), U.col(j).end()));
  return {{"variable", variable},
          {"L", L},
          {"N", N},
          {"r", r},
          {"theta", theta},
          {"centroid", std::vector<double>(c.begin(), c.end())},
          {"basis", std::move(u)},
          {"singular_values", singular_values}};
}

PasadFit PasadFit::from_json(const ojson& j) {
  PasadFit f;
  f.variable = j.at("variable").get<std::string>();
  f.L = j.at("L").get<std::size_t>();
  f.N = j.at("N").get<std::size_t>();
  f.r = j.at("r").get<std::size_t>();
  f.theta = j.at("theta").get<double>();
  const auto c = j.at("centroid").get<std::vector<double>>();
  const auto& u = j.at("basis");
  if (c.size() != f.r || u.size() != f.r) throw DataError("PASAD model: basis and centroid disagree with r");
  f.c = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  f.U.resize(static_cast<Eigen::Index>(f.L), static_cast<Eigen::Index>(f.r));
  for (std::size_t k = 0; k < f.r; ++k) {
    const auto col = u.at(k).get<std::vector<double>>();
    if (col.size() != f.L) throw DataError("PASAD model: basis column length differs from L");
    for (std::size_t l = 0; l < f.L; ++l) f.U(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = col[l];
  }
  f.singular_values = j.value("singular_values", std::vector<double>{});
  return f;
}

PasadFit pasad_fit(std::span<const double> series, const PasadParams& p, std::string variable) {
  const std::size_t n = series.size();
  if (!(p.validation_fraction >= 0 && p.validation_fraction < 1))
    throw ParseError("validation_fraction must lie in [0, 1)");
  const auto tail = static_cast<std::size_t>(std::floor(p.validation_fraction * static_cast<double>(n)));
  const std::size_t N = p.N ? p.N : n - tail;
  if (p.L < 1 || p.r < 1) throw ParseError("PASAD needs L >= 1 and r >= 1");
  if (N > n || N <= p.L)
    throw DataError(fmt::format("insufficient data: PASAD on \"{}\" needs N > L and N <= {} values (N = {}, L = {})",
                                variable, n, N, p.L));
  if (p.r > p.L) throw ParseError(fmt::format("PASAD needs r <= L (r = {}, L = {})", p.r, p.L));

  const auto L = static_cast<Eigen::Index>(p.L);
  const auto K = static_cast<Eigen::Index>(N - p.L + 1);
  Eigen::MatrixXd X(L, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index l = 0; l < L; ++l) X(l, i) = series[static_cast<std::size_t>(i + l)];

  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();

  PasadFit f;
  f.variable = std::move(variable);
  f.L = p.L;
  f.N = N;
  f.singular_values.assign(sv.begin(), sv.end());
  std::size_t rank = 0;
  const double tol = sv.size() ? sv(0) * 1e-10 : 0.0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > tol) ++rank;
  f.r = std::min<std::size_t>(p.r, std::max<std::size_t>(rank, 1));
  if (f.r < p.r)
    spdlog::warn("PASAD on \"{}\": r = {} exceeds the numerical rank {}, using r = {}", f.variable, p.r, rank, f.r);
  f.U = svd.matrixU().leftCols(static_cast<Eigen::Index>(f.r));
  f.c = f.U.transpose() * X.rowwise().mean();

  // Windows scored for the threshold: those ending in the held-out tail.
  std::size_t first_end = tail ? n - tail : p.L - 1;
  first_end = std::max(first_end, p.L - 1);
  const std::size_t last_end = tail ? n - 1 : N - 1;
  if (first_end > last_end) throw DataError("insufficient data: validation tail holds no complete window");
  const auto window_series = series.subspan(first_end + 1 - p.L, last_end - first_end + p.L);
  std::vector<double> scores(last_end - first_end + 1);
  if (p.parallel)
    kernels::departure_scores_parallel(window_series, f.U.data(), f.L, f.r, f.c.data(), scores);
  else
    kernels::departure_scores_serial(window_series, f.U.data(), f.L, f.r, f.c.data(), scores);
  f.theta = *std::max_element(scores.begin(), scores.end());
  return f;
}

namespace {

std::vector<std::string> variables_of(const ojson& h) { return h.at("variables").get<std::vector<std::string>>(); }

class PasadTrainer final : public Trainer {
 public:
  explicit PasadTrainer(const ojson& h) : variables_(variables_of(h)) {
    params_.L = h.at("lag").get<std::size_t>();
    params_.N = h.at("training_length").get<std::size_t>();
    params_.r = h.at("rank").get<std::size_t>();
    params_.validation_fraction = h.at("validation_fraction").get<double>();
  }

  void observe(const StateMessage& s) override {
    if (!initialized_) {
      if (variables_.empty())
        for (const auto& [k, v] : s.state)
          if (as_number(v)) variables_.push_back(k);
      if (variables_.empty()) throw DataError("PASAD: first training state has no numeric variable");
      initialized_ = true;
    }
    for (const auto& v : variables_) {
      auto it = s.state.find(v);
      if (it == s.state.end()) continue;
      const auto x = as_number(it->second);
      if (!x) throw DataError(fmt::format("PASAD: variable \"{}\" is not numeric", v));
      series_[v].push_back(*x);
    }
  }

  ojson finish() override {
    ojson models = ojson::array();
    for (const auto& v : variables_) {
      auto it = series_.find(v);
      if (it == series_.end()) throw DataError(fmt::format("variable \"{}\" absent from the training states", v));
      models.push_back(pasad_fit(it->second, params_, v).to_json());
    }
    return {{"models", std::move(models)}};
  }

 private:
  std::vector<std::string> variables_;
  bool initialized_ = false;
  PasadParams params_;
  std::map<std::string, std::vector<double>> series_;
};

// Sliding window kept contiguous by writing every value twice.
class Window {
 public:
  explicit Window(std::size_t L) : L_(L), buf_(2 * L) {}
  void push(double x) {
    buf_[pos_] = buf_[pos_ + L_] = x;
    pos_ = (pos_ + 1) % L_;
    if (filled_ < L_) ++filled_;
  }
  bool full() const { return filled_ == L_; }
  const double* data() const { return buf_.data() + pos_; }

 private:
  std::size_t L_, pos_ = 0, filled_ = 0;
  std::vector<double> buf_;
};

class PasadSession final : public Session {
 public:
  explicit PasadSession(const DetectorModel& model) : name_(model.detector) {
    for (const auto& m : model.payload.at("models")) {
      auto fit = PasadFit::from_json(m);
      Window w(fit.L);
      tracks_.push_back({std::move(fit), std::move(w), false, std::nullopt});
    }
  }

  void feed(const StateMessage& s, const AlertSink& sink) override {
    for (auto& t : tracks_) {
      auto it = s.state.find(t.fit.variable);
      if (it == s.state.end()) {
        if (!t.seen) continue;
        throw DataError(fmt::format("PASAD: variable \"{}\" missing from the state at {}", t.fit.variable,
                                    format_seconds(s.timestamp)));
      }
      const auto x = as_number(it->second);
      if (!x) throw DataError(fmt::format("PASAD: variable \"{}\" is not numeric", t.fit.variable));
      t.seen = true;
      t.window.push(*x);
      if (!t.window.full()) continue;
      const double d = t.fit.departure(t.window.data());
      ++scored_;
      if (scores_) scores_(s.timestamp, t.fit.variable, d);
      if (d > t.fit.theta) {
        if (!t.open) t.open = AlertEvent{name_, AlertEvent::Kind::interval, {}, s.timestamp, s.timestamp, d,
                                         t.fit.variable};
        t.open->end = s.timestamp;
        t.open->score = std::max(t.open->score, d);
      } else if (t.open) {
        close(t);
      }
    }
    flush(sink, false);
  }

  void finish(const AlertSink& sink) override {
    for (auto& t : tracks_)
      if (t.open) close(t);
    flush(sink, true);
    for (const auto& t : tracks_)
      if (!t.seen) throw DataError(fmt::format("PASAD: variable \"{}\" absent from the state stream", t.fit.variable));
  }

  ojson summary() const override { return {{"scored_windows", scored_}}; }
  void set_score_sink(ScoreSink sink) override { scores_ = std::move(sink); }

 private:
  struct Track {
    PasadFit fit;
    Window window;
    bool seen = false;
    std::optional<AlertEvent> open;
  };

  void close(Track& t) {
    closed_.push_back(std::move(*t.open));
    t.open.reset();
  }

  // Closed alerts go out in start order once no open interval can start
  // before them.
  void flush(const AlertSink& sink, bool all) {
    if (closed_.empty()) return;
    std::optional<Timestamp> bound;
    if (!all)
      for (const auto& t : tracks_)
        if (t.open) bound = bound ? std::min(*bound, t.open->start) : t.open->start;
    std::stable_sort(closed_.begin(), closed_.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    while (!closed_.empty() && (!bound || closed_.front().start <= *bound)) {
      sink(std::move(closed_.front()));
      closed_.pop_front();
    }
  }

  std::string name_;
  std::vector<Track> tracks_;
  std::deque<AlertEvent> closed_;
  std::uint64_t scored_ = 0;
  ScoreSink scores_;
};

}  // namespace

DetectorInfo pasad_info() {
  DetectorInfo d;
  d.name = "pasad";
  d.kind = {InputKind::states, OutputKind::interval};
  d.description = "subspace departure of lagged windows, one model per variable";
  d.params = {
      {"variables", ojson::array(), "variables to model; empty = every numeric variable of the first state"},
      {"lag", 50, "window length L"},
      {"training_length", 0, "training prefix N; 0 = all values before the validation tail"},
      {"rank", 2, "subspace dimension r"},
      {"validation_fraction", 0.2, "tail of the training series used for the threshold"},
  };
  d.make_trainer = [](const ojson& h) { return std::make_unique<PasadTrainer>(h); };
  d.make_session = [](const DetectorModel& m) { return std::make_unique<PasadSession>(m); };
  return d;
}

}  // namespace ipal::detect
