#include "ipal/cli/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "ipal/codec.hpp"
#include "ipal/detect/detector.hpp"
#include "ipal/error.hpp"
#include "ipal/eval/evaluator.hpp"
#include "ipal/io.hpp"
#include "ipal/lab/generator.hpp"
#include "ipal/lab/inject.hpp"
#include "ipal/scenario.hpp"
#include "ipal/state/aggregator.hpp"
#include "ipal/state/csv_import.hpp"
#include "ipal/transcriber.hpp"
#include "ipal/validate.hpp"

#ifndef IPAL_VERSION
#define IPAL_VERSION "0.0.0"
#endif

namespace ipal::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string version() { return IPAL_VERSION; }

namespace {

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return hex64(h);
}

ojson load_json(const fs::path& path) {
  try {
    return ojson::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

/// Options shared by every subcommand plus the manifest being assembled.
struct Context {
  std::string log_level = "warn";
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> args;
  std::ostream* out = nullptr;

  fs::path output(const std::string& p) const {
    if (p.empty() || out_dir.empty() || fs::path(p).is_absolute()) return p;
    return fs::path(out_dir) / p;
  }

  void write_manifest(const fs::path& primary, std::string_view command, const ojson& config,
                      const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) const {
    ojson m;
    m["tool"] = "ipal";
    m["version"] = version();
    m["command"] = command;
    m["args"] = args;
    m["config"] = config;
    ojson in = ojson::array();
    for (const auto& p : inputs)
      in.push_back({{"path", p.string()}, {"bytes", fs::file_size(p)}, {"fnv1a64", file_digest(p)}});
    m["inputs"] = std::move(in);
    ojson o = ojson::array();
    for (const auto& p : outputs) o.push_back(p.string());
    m["outputs"] = std::move(o);
    std::ofstream f(fs::path(primary.string() + ".manifest.json"));
    if (!f) throw DataError(fmt::format("cannot write manifest for {}", primary.string()));
    f << m.dump(1) << '\n';
  }
};

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::pair<double, double> parse_window(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError(fmt::format("--window expects start:end, got \"{}\"", s));
  try {
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError(fmt::format("--window expects numbers, got \"{}\"", s));
  }
}

// ---------------------------------------------------------------- transcribe

struct TranscribeOpts {
  std::string pcap, out, protocol = "modbus", rules, activities, scenarios;
  std::uint16_t port = modbus::kDefaultPort;
  double window = 5.0;
};

void cmd_transcribe(const Context& ctx, const TranscribeOpts& o) {
  TranscribeConfig cfg;
  cfg.protocol = o.protocol;
  cfg.modbus.port = o.port;
  cfg.modbus.correlation_window = duration_from_seconds(o.window);
  std::vector<fs::path> inputs{o.pcap};
  if (!o.rules.empty()) {
    cfg.modbus.rules = modbus::RuleSet::load(o.rules);
    inputs.emplace_back(o.rules);
  }
  if (!o.activities.empty()) {
    cfg.modbus.activities = modbus::ActivityMap::from_json(nlohmann::json::parse(read_text_file(o.activities)));
    inputs.emplace_back(o.activities);
  }
  if (!o.scenarios.empty()) {
    auto f = ScenarioFile::load(o.scenarios);
    normalize_scenarios(f.scenarios);
    cfg.labels = f.scenarios;
    inputs.emplace_back(o.scenarios);
  }
  const auto out = ctx.output(o.out);
  ensure_parent(out);
  MessageWriter writer(out);
  const auto summary = transcribe(o.pcap, cfg, [&](const IpalMessage& m) { writer.write(m); });
  writer.flush();
  const ojson s = {{"frames_read", summary.frames_read},
                   {"frames_transcribed", summary.frames_transcribed},
                   {"frames_skipped", summary.frames_skipped},
                   {"messages", summary.messages}};
  *ctx.out << s.dump() << '\n';
  ctx.write_manifest(out, "transcribe",
                     {{"protocol", o.protocol}, {"port", o.port}, {"correlation_window", o.window}}, inputs, {out});
}

// --------------------------------------------------------------------- state

struct StateOpts {
  std::string in, out, start = "aligned";
  double interval = 1.0;
};

void cmd_state(const Context& ctx, const StateOpts& o) {
  state::AggregatorConfig cfg;
  if (!(o.interval > 0)) throw UsageError("--interval must be positive");
  cfg.interval = duration_from_seconds(o.interval);
  if (o.start == "aligned")
    cfg.start = state::StartPolicy::aligned_to_epoch;
  else if (o.start == "first")
    cfg.start = state::StartPolicy::first_message;
  else
    throw UsageError("--start must be aligned or first");
  const auto out = ctx.output(o.out);
  ensure_parent(out);
  MessageReader reader(o.in);
  StateWriter writer(out);
  state::Aggregator agg(cfg);
  std::vector<StateMessage> buf;
  std::size_t messages = 0, states = 0;
  while (auto m = reader.next()) {
    ++messages;
    agg.push(*m, buf);
    for (const auto& s : buf) writer.write(s);
    states += buf.size();
    buf.clear();
  }
  agg.finish(buf);
  for (const auto& s : buf) writer.write(s);
  states += buf.size();
  writer.flush();
  *ctx.out << ojson{{"messages", messages}, {"states", states}}.dump() << '\n';
  ctx.write_manifest(out, "state", {{"interval", o.interval}, {"start", o.start}}, {o.in}, {out});
}

struct ImportOpts {
  std::string csv, map, out;
};

void cmd_state_import(const Context& ctx, const ImportOpts& o) {
  const auto map = state::ColumnMap::load(o.map);
  const auto out = ctx.output(o.out);
  ensure_parent(out);
  StateWriter writer(out);
  std::size_t states = 0;
  state::import_state_csv(o.csv, map, [&](StateMessage&& s) {
    writer.write(s);
    ++states;
  });
  writer.flush();
  *ctx.out << ojson{{"states", states}}.dump() << '\n';
  ctx.write_manifest(out, "state import", ojson::object(), {o.csv, o.map}, {out});
}

// ----------------------------------------------------------------------- gen

struct GenOpts {
  std::string spec, out, pcap, rules_out;
};

void cmd_gen(const Context& ctx, const GenOpts& o) {
  auto spec = lab::ScenarioSpec::load(o.spec);
  if (ctx.seed) spec.seed = *ctx.seed;
  const auto msgs = lab::generate(spec);
  const auto out = ctx.output(o.out);
  ensure_parent(out);
  write_messages(out, msgs);
  std::vector<fs::path> outputs{out};
  if (!o.pcap.empty()) {
    const auto p = ctx.output(o.pcap);
    ensure_parent(p);
    lab::export_pcap(spec, msgs, p);
    outputs.push_back(p);
  }
  if (!o.rules_out.empty()) {
    const auto p = ctx.output(o.rules_out);
    ensure_parent(p);
    std::ofstream f(p);
    f << lab::rules_for(spec).to_json().dump(1) << '\n';
    outputs.push_back(p);
  }
  *ctx.out << ojson{{"messages", msgs.size()}}.dump() << '\n';
  ctx.write_manifest(out, "gen", {{"seed", spec.seed}}, {o.spec}, outputs);
}

// -------------------------------------------------------------------- inject

struct InjectOpts {
  std::string attack, window, in, out, target, variable, scenarios, merge, name;
  double rate = 1.0, scale = 1.0, offset = 0.0, jitter = 0.0;
  std::optional<double> value;
  std::optional<std::size_t> count;
  std::uint64_t seed = 1;
};

void cmd_inject(const Context& ctx, const InjectOpts& o) {
  const auto family = lab::parse_attack_family(o.attack);
  if (!family) throw UsageError(fmt::format("unknown attack family \"{}\"", o.attack));
  const auto stream = read_messages(o.in);
  if (stream.empty()) throw DataError(fmt::format("{} holds no messages", o.in));

  lab::AttackSpec atk;
  atk.family = *family;
  atk.rate = o.rate;
  atk.count = o.count;
  atk.target = o.target;
  atk.variable = o.variable;
  atk.value = o.value;
  atk.scale = o.scale;
  atk.offset = o.offset;
  atk.prediction_jitter = o.jitter;
  atk.seed = ctx.seed.value_or(o.seed);
  atk.name = o.name;
  if (!o.window.empty()) {
    const auto [a, b] = parse_window(o.window);
    const auto base = stream.front().timestamp;
    atk.window_start = base + duration_from_seconds(a);
    atk.window_end = base + duration_from_seconds(b);
  }
  const auto res = lab::inject(stream, atk);

  const auto out = ctx.output(o.out);
  ensure_parent(out);
  write_messages(out, res.stream);

  std::vector<fs::path> inputs{o.in};
  ScenarioFile sf;
  if (!o.merge.empty()) {
    sf = ScenarioFile::load(o.merge);
    inputs.emplace_back(o.merge);
  }
  sf.scenarios.push_back(res.scenario);
  normalize_scenarios(sf.scenarios);
  sf.gaps.insert(sf.gaps.end(), res.gaps.begin(), res.gaps.end());
  std::sort(sf.gaps.begin(), sf.gaps.end());
  const auto scen = ctx.output(o.scenarios.empty() ? o.out + ".scenarios.json" : o.scenarios);
  ensure_parent(scen);
  sf.save(scen);

  *ctx.out << ojson{{"messages", res.stream.size()}, {"labeled", res.labeled}, {"removed", res.removed}}.dump()
           << '\n';
  ctx.write_manifest(out, "inject",
                     {{"attack", o.attack}, {"window", o.window}, {"rate", o.rate}, {"seed", atk.seed},
                      {"target", o.target}, {"variable", o.variable}},
                     inputs, {out, scen});
}

// --------------------------------------------------------------------- train

struct TrainOpts {
  std::string detector, config, in, model;
};

template <typename Reader, typename Sink>
void for_each_record(const fs::path& path, Sink&& sink) {
  Reader reader(path);
  while (auto r = reader.next()) sink(*r);
}

void cmd_train(const Context& ctx, const TrainOpts& o) {
  ojson config = o.config.empty() ? ojson::object() : load_json(o.config);
  detect::Training training(o.detector, config);
  if (sniff_stream_kind(o.in) == StreamKind::messages)
    for_each_record<MessageReader>(o.in, [&](const IpalMessage& m) { training.add(m); });
  else
    for_each_record<StateReader>(o.in, [&](const StateMessage& s) { training.add(s); });
  const auto model = training.finish();
  const auto out = ctx.output(o.model);
  ensure_parent(out);
  model.save(out);
  std::vector<fs::path> inputs{o.in};
  if (!o.config.empty()) inputs.emplace_back(o.config);
  *ctx.out << ojson{{"detector", model.detector}, {"records", model.summary.records}}.dump() << '\n';
  ctx.write_manifest(out, "train", model.hyperparameters, inputs, {out});
}

// -------------------------------------------------------------------- detect

struct DetectOpts {
  std::string model, in, alerts, scores;
};

void cmd_detect(const Context& ctx, const DetectOpts& o) {
  const auto model = detect::DetectorModel::load(o.model);
  detect::Detection det(model);
  const auto out = ctx.output(o.alerts);
  ensure_parent(out);
  AlertWriter writer(out);
  auto sink = [&](AlertEvent&& a) { writer.write(a); };

  std::optional<std::ofstream> scores;
  std::vector<fs::path> outputs{out};
  if (!o.scores.empty()) {
    const auto p = ctx.output(o.scores);
    ensure_parent(p);
    scores.emplace(p);
    *scores << "timestamp,series,score\n";
    det.set_score_sink([&](Timestamp t, std::string_view series, double d) {
      *scores << fmt::format("{},{},{:.17g}\n", format_seconds(t), series, d);
    });
    outputs.push_back(p);
  }

  if (sniff_stream_kind(o.in) == StreamKind::messages)
    for_each_record<MessageReader>(o.in, [&](const IpalMessage& m) { det.add(m, sink); });
  else
    for_each_record<StateReader>(o.in, [&](const StateMessage& s) { det.add(s, sink); });
  det.finish(sink);
  writer.flush();
  *ctx.out << det.summary().dump() << '\n';
  ctx.write_manifest(out, "detect", {{"detector", model.detector}}, {o.model, o.in}, outputs);
}

// ---------------------------------------------------------------------- eval

struct EvalOpts {
  std::vector<std::string> alerts;
  std::string truth, scenarios, mode = "both", out, name;
  std::optional<double> point_width;
  double grace = 0.0;
};

void cmd_eval(const Context& ctx, const EvalOpts& o) {
  const auto mode = eval::parse_mode(o.mode);
  if (!mode) throw UsageError("--mode must be point, scenario or both");
  std::vector<fs::path> inputs;
  std::vector<std::vector<AlertEvent>> all;
  for (const auto& a : o.alerts) {
    all.push_back(read_alerts(a));
    inputs.emplace_back(a);
  }
  std::vector<Scenario> scenarios;
  if (!o.scenarios.empty()) {
    scenarios = ScenarioFile::load(o.scenarios).scenarios;
    inputs.emplace_back(o.scenarios);
  }
  inputs.emplace_back(o.truth);
  const auto truth = sniff_stream_kind(o.truth) == StreamKind::messages
                         ? eval::GroundTruth::from_messages(read_messages(o.truth), std::move(scenarios))
                         : eval::GroundTruth::from_states(read_states(o.truth), std::move(scenarios));

  std::vector<AlertEvent> alerts;
  std::string name;
  if (all.size() == 1) {
    alerts = std::move(all.front());
    name = alerts.empty() ? fs::path(o.alerts.front()).stem().string() : alerts.front().detector;
  } else {
    alerts = eval::union_alerts(all);
    name = alerts.empty() ? "union" : alerts.front().detector;
  }
  if (!o.name.empty()) name = o.name;

  eval::EvalOptions opt;
  opt.mode = *mode;
  if (o.point_width) opt.point_width = duration_from_seconds(*o.point_width);
  opt.grace = duration_from_seconds(o.grace);
  const auto report = eval::evaluate(name, alerts, truth, opt);
  const auto out = ctx.output(o.out);
  ensure_parent(out);
  report.save(out);
  *ctx.out << report.dump();
  ctx.write_manifest(out, "eval", {{"mode", o.mode}, {"grace", o.grace}}, inputs, {out});
}

// ------------------------------------------------------------------- compare

struct CompareOpts {
  std::vector<std::string> reports;
  std::string out, timeline;
};

void cmd_compare(const Context& ctx, const CompareOpts& o) {
  std::vector<eval::EvalReport> reports;
  std::vector<fs::path> inputs;
  for (const auto& r : o.reports) {
    reports.push_back(eval::EvalReport::load(r));
    inputs.emplace_back(r);
  }
  const auto table = eval::comparison_csv(reports);
  std::vector<fs::path> outputs;
  if (!o.out.empty()) {
    const auto p = ctx.output(o.out);
    ensure_parent(p);
    std::ofstream(p) << table;
    outputs.push_back(p);
  }
  if (!o.timeline.empty()) {
    const auto p = ctx.output(o.timeline);
    ensure_parent(p);
    std::ofstream(p) << eval::timeline(reports).dump(1) << '\n';
    outputs.push_back(p);
  }
  *ctx.out << table;
  if (!outputs.empty()) ctx.write_manifest(outputs.front(), "compare", ojson::object(), inputs, outputs);
}

std::string detector_help() {
  std::string s = "\nDetectors and their config keys (JSON object, defaults shown):\n";
  for (const auto& d : detect::detectors()) {
    s += fmt::format("  {} ({}): {}\n", d.name, to_string(d.kind.input), d.description);
    for (const auto& p : d.params) s += fmt::format("      {} = {}  {}\n", p.key, p.default_value.dump(), p.help);
  }
  return s;
}

void report_error(std::ostream& err, std::string_view kind, std::string_view message, int code) {
  err << ojson{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ipal: transcribe industrial traffic, build process states, train and evaluate detectors", "ipal"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  Context ctx;
  ctx.args = args;
  ctx.out = &out;
  app.add_option("--log-level", ctx.log_level, "trace, debug, info, warn, error or off")->capture_default_str();
  app.add_option("--seed", ctx.seed, "seed overriding the one in gen specs and inject options");
  app.add_option("--out-dir", ctx.out_dir, "directory prefixed to relative output paths");

  std::function<void()> action;

  TranscribeOpts tr;
  auto* t = app.add_subcommand("transcribe", "capture (pcap) to an IPAL message stream");
  t->add_option("--pcap", tr.pcap, "input capture")->required()->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "output .ipal file")->required();
  t->add_option("--protocol", tr.protocol, "dissector")->capture_default_str();
  t->add_option("--port", tr.port, "Modbus/TCP server port")->capture_default_str();
  t->add_option("--rules", tr.rules, "register interpretation rules (JSON)")->check(CLI::ExistingFile);
  t->add_option("--activities", tr.activities,
                "function code overrides (JSON: {\"read\":[..],\"write\":[..],\"skip\":[..]})")
      ->check(CLI::ExistingFile);
  t->add_option("--window", tr.window, "request/response correlation window (s)")->capture_default_str();
  t->add_option("--scenarios", tr.scenarios, "attack intervals used to label messages")->check(CLI::ExistingFile);
  t->callback([&] { action = [&] { cmd_transcribe(ctx, tr); }; });

  StateOpts st;
  ImportOpts im;
  auto* s = app.add_subcommand("state", "aggregate messages into fixed-interval process states");
  s->add_option("--in", st.in, "input .ipal file")->check(CLI::ExistingFile);
  s->add_option("--out", st.out, "output .state file");
  s->add_option("--interval", st.interval, "state interval (s)")->capture_default_str();
  s->add_option("--start", st.start, "interval boundaries: aligned (multiples of the interval) or first")
      ->capture_default_str();
  auto* si = s->add_subcommand("import", "state stream from a CSV dataset");
  si->add_option("--csv", im.csv, "input CSV")->required()->check(CLI::ExistingFile);
  si->add_option("--map", im.map,
                 "column map (JSON keys: timestamp, label, malicious_tokens, benign_tokens, timestamp_format, "
                 "delimiter, decimal_point, thousands_separator, columns)")
      ->required()
      ->check(CLI::ExistingFile);
  si->add_option("--out", im.out, "output .state file")->required();
  si->callback([&] { action = [&] { cmd_state_import(ctx, im); }; });
  s->callback([&] {
    if (si->parsed()) return;
    if (st.in.empty() || st.out.empty()) throw CLI::ValidationError("state", "--in and --out are required");
    action = [&] { cmd_state(ctx, st); };
  });

  GenOpts gn;
  auto* g = app.add_subcommand("gen", "synthetic benign traffic from a scenario spec");
  g->add_option("--spec", gn.spec,
                "scenario spec (JSON: start, duration, seed, connections[{client, server, client_port, server_port, "
                "unit, period, jitter, latency, offset, spacing, messages[{function_code, address, "
                "variables[{name, type, process, value, amplitude, period, step, decimals}]}]}])")
      ->required()
      ->check(CLI::ExistingFile);
  g->add_option("--out", gn.out, "output .ipal file")->required();
  g->add_option("--pcap", gn.pcap, "also write the traffic as a Modbus/TCP capture");
  g->add_option("--rules-out", gn.rules_out, "write the register layout as transcriber rules");
  g->callback([&] { action = [&] { cmd_gen(ctx, gn); }; });

  InjectOpts in;
  auto* i = app.add_subcommand("inject", "apply one attack to a message stream");
  i->add_option("--attack", in.attack, "flooding, injection, prediction, copy, remove, swap, value-manipulation")
      ->required();
  i->add_option("--in", in.in, "input .ipal file")->required()->check(CLI::ExistingFile);
  i->add_option("--out", in.out, "output .ipal file")->required();
  i->add_option("--window", in.window, "start:end in seconds after the first record (default: whole stream)");
  i->add_option("--rate", in.rate,
                "flooding: packets per second; prediction/copy/remove/swap: per-packet probability")
      ->capture_default_str();
  i->add_option("--count", in.count, "injection: packets to insert (default one per 10 s of window)");
  i->add_option("--target", in.target, "substring of the attacked endpoint");
  i->add_option("--variable", in.variable, "value-manipulation: variable to overwrite");
  i->add_option("--value", in.value, "value-manipulation: fixed value");
  i->add_option("--scale", in.scale, "value-manipulation: multiply")->capture_default_str();
  i->add_option("--offset", in.offset, "value-manipulation: add")->capture_default_str();
  i->add_option("--jitter", in.jitter, "prediction: timing noise of forged packets (s)")->capture_default_str();
  i->add_option("--attack-seed", in.seed, "seed of this attack (the global --seed wins)")->capture_default_str();
  i->add_option("--name", in.name, "scenario name (default: the family)");
  i->add_option("--scenarios", in.scenarios, "scenario file to write (default: <out>.scenarios.json)");
  i->add_option("--merge-scenarios", in.merge, "earlier scenario file to extend")->check(CLI::ExistingFile);
  i->callback([&] { action = [&] { cmd_inject(ctx, in); }; });

  TrainOpts tn;
  auto* tr_cmd = app.add_subcommand("train", "train a detector on a benign stream");
  tr_cmd->add_option("--detector", tn.detector, "iat-mean, iat-range, dtmc, pasad, ooa")->required();
  tr_cmd->add_option("--config", tn.config, "hyperparameters (JSON object)")->check(CLI::ExistingFile);
  tr_cmd->add_option("--in", tn.in, "benign .ipal or .state file")->required()->check(CLI::ExistingFile);
  tr_cmd->add_option("--model", tn.model, "output model file")->required();
  tr_cmd->footer(detector_help());
  tr_cmd->callback([&] { action = [&] { cmd_train(ctx, tn); }; });

  DetectOpts dt;
  auto* d = app.add_subcommand("detect", "run a trained detector over a stream");
  d->add_option("--model", dt.model, "model file")->required()->check(CLI::ExistingFile);
  d->add_option("--in", dt.in, ".ipal or .state file")->required()->check(CLI::ExistingFile);
  d->add_option("--alerts", dt.alerts, "output .alerts file")->required();
  d->add_option("--scores", dt.scores, "score series CSV (detectors that produce scores)");
  d->callback([&] { action = [&] { cmd_detect(ctx, dt); }; });

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "score alerts against ground truth");
  e->add_option("--alerts", ev.alerts, "alert file; repeat to evaluate the union")->required()->check(CLI::ExistingFile);
  e->add_option("--truth", ev.truth, "labeled .ipal or .state file")->required()->check(CLI::ExistingFile);
  e->add_option("--scenarios", ev.scenarios, "attack scenarios (JSON)")->check(CLI::ExistingFile);
  e->add_option("--mode", ev.mode, "point, scenario or both")->capture_default_str();
  e->add_option("--point-width", ev.point_width, "width of a point alert in alarm intervals (s; default median record gap)");
  e->add_option("--grace", ev.grace, "detection grace after a scenario ends (s)")->capture_default_str();
  e->add_option("--name", ev.name, "detector name in the report");
  e->add_option("--out", ev.out, "output report (JSON)")->required();
  e->callback([&] { action = [&] { cmd_eval(ctx, ev); }; });

  CompareOpts cp;
  auto* c = app.add_subcommand("compare", "side-by-side table of evaluation reports");
  c->add_option("reports", cp.reports, "report files")->required()->check(CLI::ExistingFile);
  c->add_option("--out", cp.out, "table (CSV)");
  c->add_option("--timeline", cp.timeline, "alarm timeline export (JSON)");
  c->callback([&] { action = [&] { cmd_compare(ctx, cp); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) return app.exit(ex, out, err);
    err << ex.what() << "\n\n" << app.help();
    report_error(err, "usage", ex.what(), ExitCode::usage);
    return ExitCode::usage;
  }

  auto logger = std::make_shared<spdlog::logger>("ipal", std::make_shared<spdlog::sinks::ostream_sink_mt>(err));
  const auto level = spdlog::level::from_str(ctx.log_level);
  if (level == spdlog::level::off && ctx.log_level != "off") {
    report_error(err, "usage", fmt::format("unknown log level \"{}\"", ctx.log_level), ExitCode::usage);
    return ExitCode::usage;
  }
  logger->set_level(level);
  logger->set_pattern("%l: %v");
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct Restore {
    std::shared_ptr<spdlog::logger> p;
    ~Restore() { spdlog::set_default_logger(p); }
  } restore{previous};

  try {
    if (!action) throw UsageError("no subcommand given");
    action();
    return ExitCode::ok;
  } catch (const UsageError& ex) {
    report_error(err, "usage", ex.what(), ExitCode::usage);
    return ExitCode::usage;
  } catch (const DataError& ex) {
    report_error(err, "data", ex.what(), ExitCode::data_error);
    return ExitCode::data_error;
  } catch (const nlohmann::json::exception& ex) {
    report_error(err, "data", ex.what(), ExitCode::data_error);
    return ExitCode::data_error;
  } catch (const fs::filesystem_error& ex) {
    report_error(err, "data", ex.what(), ExitCode::data_error);
    return ExitCode::data_error;
  } catch (const std::exception& ex) {
    report_error(err, "internal", ex.what(), ExitCode::internal);
    return ExitCode::internal;
  }
}

}  // namespace ipal::cli
