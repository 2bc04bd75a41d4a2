#include "lanekeep/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "lanekeep/errors.hpp"
#include "lanekeep/scenario_io.hpp"

namespace lanekeep {

namespace fs = std::filesystem;

void Histogram::add(double x) {
  const double k = std::floor((x - lo) / width);
  if (k < 0) {
    ++underflow;
  } else if (k >= static_cast<double>(counts.size())) {
    ++overflow;
  } else {
    ++counts[static_cast<std::size_t>(k)];
  }
}

long Histogram::total() const {
  long n = underflow + overflow;
  for (auto c : counts) n += c;
  return n;
}

LapEvaluation summarize_lap(std::vector<LapSample> samples) {
  LapEvaluation out;
  std::stable_sort(samples.begin(), samples.end(),
                   [](const LapSample& a, const LapSample& b) { return a.s < b.s; });
  double sum = 0.0;
  for (const auto& x : samples) {
    sum += std::abs(x.d);
    out.histogram.add(x.d);
  }
  out.mean_error = samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
  out.samples = std::move(samples);
  return out;
}

LapEvaluation evaluate_lap(const LapPolicy& policy, const TrackSpec& track, Lane lane,
                           const EvaluationParams& params, const WorldConfig& wc) {
  LaneWorld world(track, wc);
  world.place(lane);
  std::vector<LapSample> samples;
  bool failed = true;
  std::optional<LapSample> termination;
  for (long k = 0; k < params.max_steps; ++k) {
    const auto cmd = policy(world.last_frame(), world);
    const auto ws = world.step(cmd.v_left, cmd.v_right);
    const LapSample sample{world.time_step(), world.progress(), ws.pose.d, ws.pose.section};
    samples.push_back(sample);
    if (std::abs(ws.pose.d) > params.fail_distance) {
      termination = sample;
      break;
    }
    if (ws.lap_complete) {
      failed = false;
      break;
    }
  }
  if (failed && !termination && !samples.empty()) termination = samples.back();
  auto out = summarize_lap(std::move(samples));
  out.failed = failed;
  out.termination = termination;
  return out;
}

LapEvaluation evaluate_lap(Controller& controller, const TrackSpec& track, Lane lane,
                           const EvaluationParams& params, const WorldConfig& wc) {
  return evaluate_lap([&](const EventFrame& f, const LaneWorld&) { return controller.step(f); }, track,
                      lane, params, wc);
}

LapPolicy dumping_policy(LapPolicy inner, const fs::path& dir, int every) {
  if (every < 1) throw ConfigError("dump interval must be >= 1");
  fs::create_directories(dir);
  auto csv = std::make_shared<std::ofstream>(dir / "events.csv");
  if (!*csv) throw ConfigError("cannot write " + (dir / "events.csv").string());
  *csv << "t,px,py,polarity\n";
  return [inner = std::move(inner), csv, dir, every](const EventFrame& f, const LaneWorld& w) {
    for (const auto& e : f.events) {
      *csv << f.t << ',' << int(e.px) << ',' << int(e.py) << ',' << (e.polarity == Polarity::on ? 1 : 0) << '\n';
    }
    if (f.t % every == 0) {
      const auto img = ViewRenderer(w.config().camera).render(w.course(), w.robot());
      char name[32];
      std::snprintf(name, sizeof name, "render_%06ld.pgm", f.t);
      std::ofstream pgm(dir / name, std::ios::binary);
      pgm << "P5\n" << kSensorSize << ' ' << kSensorSize << "\n255\n";
      for (int py = 0; py < kSensorSize; ++py) {
        for (int px = 0; px < kSensorSize; ++px) pgm.put(img.at(px, py) ? char(255) : char(0));
      }
    }
    return inner(f, w);
  };
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RStdpRun run_rstdp(const TrackSpec& track, const ExperimentConfig& config, std::uint64_t seed) {
  RStdpController ctl(config.rstdp, derive_seed(seed, 0));
  RStdpRun run;
  run.training = rstdp_train(track, ctl, config.rstdp_steps, config.stable_laps, config.world);
  run.times = training_time_report(run.training.events, config.stable_laps);
  run.left = ctl.grid(0);
  run.right = ctl.grid(1);
  return run;
}

std::unique_ptr<RStdpController> frozen_rstdp(const RStdpRun& run, const ExperimentConfig& config,
                                              std::uint64_t seed) {
  return std::make_unique<RStdpController>(config.rstdp, run.left, run.right, derive_seed(seed, 10));
}

BraitenbergWeights braitenberg_weights(const ExperimentConfig& config) {
  if (!config.braitenberg.weights_file.empty()) return load_braitenberg(config.braitenberg.weights_file);
  return braitenberg_ramp(config.braitenberg.w_low, config.braitenberg.w_high);
}

DqnRun run_dqn(const TrackSpec& track, const ExperimentConfig& config, std::uint64_t seed,
               const ProgressFn& progress) {
  DqnAgent agent(config.dqn.params, derive_seed(seed, 1));
  auto cfg = config.dqn;
  cfg.world = config.world;
  DqnRun run{agent.online(), run_dqn_training(track, cfg, agent, progress), {}, 0};
  run.q = agent.online();
  run.times = training_time_report(run.training.events, config.stable_laps);
  for (const auto& e : run.training.evaluations) run.best_greedy_steps = std::max(run.best_greedy_steps, e.action_steps);
  return run;
}

TransferRun run_transfer(const StateArchive& archive, const DenseNet& q, const ExperimentConfig& config,
                         std::uint64_t seed) {
  TransferRun run;
  run.dataset = build_dataset(archive, q, config.dataset);
  run.classifier = train_classifier(run.dataset, config.classifier, derive_seed(seed, 2));
  run.normalized = normalize_model(run.classifier.net);
  std::vector<std::size_t> probe = run.classifier.heldout_indices;
  if (probe.size() > 200) probe.resize(200);
  run.agreement = snn_agreement(run.classifier.net, run.normalized, run.dataset, probe, config.snn,
                                derive_seed(seed, 3));
  return run;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json doc;
  doc["format"] = "lanekeep-manifest/1";
  doc["scenario"] = scenario;
  doc["controller"] = controller;
  doc["seed"] = seed;
  doc["config_hash"] = config_hash;
  doc["outputs"] = outputs;
  doc["first_lap_steps"] = first_lap_steps ? nlohmann::json(*first_lap_steps) : nlohmann::json(nullptr);
  doc["stable_steps"] = stable_steps ? nlohmann::json(*stable_steps) : nlohmann::json(nullptr);
  doc["mean_error"] = mean_error ? nlohmann::json(*mean_error) : nlohmann::json(nullptr);
  return doc;
}

RunManifest RunManifest::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "lanekeep-manifest/1") throw ConfigError("not a run manifest");
    RunManifest m;
    m.scenario = doc.at("scenario");
    m.controller = doc.at("controller");
    m.seed = doc.at("seed");
    m.config_hash = doc.at("config_hash");
    m.outputs = doc.at("outputs").get<std::map<std::string, std::string>>();
    if (!doc.at("first_lap_steps").is_null()) m.first_lap_steps = doc.at("first_lap_steps").get<long>();
    if (!doc.at("stable_steps").is_null()) m.stable_steps = doc.at("stable_steps").get<long>();
    if (!doc.at("mean_error").is_null()) m.mean_error = doc.at("mean_error").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  std::ofstream out(dir / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + dir.string());
  out << m.to_json().dump(2) << '\n';
}

RunManifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw ConfigError("no manifest.json in " + dir.string());
  try {
    return RunManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
}

namespace {

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string opt(const std::optional<long>& v) { return v ? std::to_string(*v) : "failed"; }

}  // namespace

void write_lap_csv(const fs::path& path, const LapEvaluation& lap) {
  auto out = open_csv(path);
  out << "t,s,d,section\n";
  for (const auto& x : lap.samples) out << x.t << ',' << num(x.s) << ',' << num(x.d) << ',' << x.section << '\n';
}

void write_histogram_csv(const fs::path& path, const Histogram& h) {
  auto out = open_csv(path);
  out << "bin_lo,bin_hi,count\n";
  out << "-inf," << num(h.lo) << ',' << h.underflow << '\n';
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const double a = h.lo + h.width * static_cast<double>(k);
    out << num(a) << ',' << num(a + h.width) << ',' << h.counts[k] << '\n';
  }
  out << num(h.lo + h.width * static_cast<double>(h.counts.size())) << ",inf," << h.overflow << '\n';
}

void write_events_csv(const fs::path& path, std::span<const TrainingEvent> events) {
  auto out = open_csv(path);
  out << "step,kind,lane,s,section\n";
  for (const auto& e : events) {
    out << e.world_step << ',' << to_string(e.kind) << ',' << to_string(e.lane) << ',' << num(e.s) << ','
        << e.section << '\n';
  }
}

void write_weight_snapshots_csv(const fs::path& path, std::span<const WeightSnapshot> snaps) {
  auto out = open_csv(path);
  out << "step,motor,row,c0,c1,c2,c3,c4,c5,c6,c7\n";
  for (const auto& s : snaps) {
    for (int m = 0; m < 2; ++m) {
      const auto& g = m == 0 ? s.left : s.right;
      for (int r = 0; r < kRstdpRows; ++r) {
        out << s.step << ',' << (m == 0 ? "left" : "right") << ',' << r;
        for (int c = 0; c < kRstdpColumns; ++c) out << ',' << num(g[static_cast<std::size_t>(r * kRstdpColumns + c)]);
        out << '\n';
      }
    }
  }
}

void write_terminations_csv(const fs::path& path, std::span<const TrialTermination> t) {
  auto out = open_csv(path);
  out << "trial,step,s,section\n";
  for (const auto& x : t) out << x.trial << ',' << x.step << ',' << num(x.s) << ',' << x.section << '\n';
}

void write_episodes_csv(const fs::path& path, std::span<const DqnEpisode> episodes) {
  auto out = open_csv(path);
  out << "episode,lane,action_steps,cumulative_reward,reason,world_step_end\n";
  for (const auto& e : episodes) {
    out << e.episode << ',' << to_string(e.lane) << ',' << e.action_steps << ',' << num(e.cumulative_reward)
        << ',' << to_string(e.reason) << ',' << e.world_step_end << '\n';
  }
}

double mean_error_from_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<LapSample> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t, s, d;
    std::getline(ss, t, ',');
    std::getline(ss, s, ',');
    std::getline(ss, d, ',');
    samples.push_back({std::stol(t), std::stod(s), std::stod(d), 0});
  }
  return summarize_lap(std::move(samples)).mean_error;
}

std::vector<CompareRow> compare_controllers(const TrackSpec& track, const ExperimentConfig& config,
                                            std::uint64_t seed) {
  std::vector<CompareRow> rows;
  const auto& ev = config.evaluation;

  const auto rstdp = run_rstdp(track, config, seed);
  auto frozen = frozen_rstdp(rstdp, config, seed);
  rows.push_back({"rstdp", evaluate_lap(*frozen, track, Lane::outer, ev, config.world), rstdp.times.first_lap,
                  rstdp.times.stable});

  BraitenbergController braitenberg(config.rstdp, braitenberg_weights(config), derive_seed(seed, 11));
  rows.push_back({"braitenberg", evaluate_lap(braitenberg, track, Lane::outer, ev, config.world), {}, {}});

  const auto dqn = run_dqn(track, config, seed);
  DqnController dqn_ctl(dqn.q, config.dqn.params);
  rows.push_back({"dqn", evaluate_lap(dqn_ctl, track, Lane::outer, ev, config.world), dqn.times.first_lap,
                  dqn.times.stable});

  const auto transfer = run_transfer(dqn.training.archive, dqn.q, config, seed);
  SnnController snn(transfer.normalized, transfer.dataset.i_max, config.snn, derive_seed(seed, 12));
  rows.push_back({"dqn-snn", evaluate_lap(snn, track, Lane::outer, ev, config.world), {}, {}});
  return rows;
}

namespace {

TrackSpec resolve_track(const RunRequest& r) {
  if (!r.scenario_file.empty()) return load_scenario(r.scenario_file);
  return build_scenario(r.scenario);
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " path is required");
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string());
}

void write_lap(const fs::path& dir, const LapEvaluation& lap, RunManifest& m) {
  write_lap_csv(dir / "lap.csv", lap);
  write_histogram_csv(dir / "histogram.csv", lap.histogram);
  m.outputs["lap"] = "lap.csv";
  m.outputs["histogram"] = "histogram.csv";
  if (!lap.failed) m.mean_error = lap.mean_error;
}

std::unique_ptr<Controller> load_controller(const RunRequest& r) {
  const auto& c = r.config;
  if (r.controller == "braitenberg") {
    auto w = r.checkpoint.empty() ? braitenberg_weights(c) : load_braitenberg(r.checkpoint);
    return std::make_unique<BraitenbergController>(c.rstdp, w, derive_seed(r.seed, 11));
  }
  require_file(r.checkpoint, "checkpoint");
  if (r.controller == "rstdp") {
    const auto w = load_braitenberg(r.checkpoint);
    return std::make_unique<RStdpController>(c.rstdp, w.left, w.right, derive_seed(r.seed, 10));
  }
  nlohmann::json meta;
  auto net = load_checkpoint(r.checkpoint, nullptr, &meta);
  if (r.controller == "dqn") return std::make_unique<DqnController>(std::move(net), c.dqn.params);
  if (r.controller == "dqn-snn") {
    if (!meta.contains("i_max")) throw ConfigError("SNN checkpoint lacks i_max metadata");
    return std::make_unique<SnnController>(net, meta.at("i_max").get<int>(), c.snn, derive_seed(r.seed, 12));
  }
  throw ConfigError("unknown controller kind: " + r.controller);
}

}  // namespace

RunManifest run_experiment(const RunRequest& r) {
  ExperimentConfig config = r.config;
  if (r.steps) {
    config.rstdp_steps = *r.steps;
    config.dqn.total_world_steps = *r.steps;
  }
  RunManifest m;
  m.scenario = r.scenario;
  m.seed = r.seed;
  m.config_hash = hex_hash(config_hash(config));
  m.controller = r.verb;

  // Validate inputs before any simulation.
  if (r.verb == "transfer") {
    require_file(r.archive, "state archive");
    require_file(r.checkpoint, "DQN checkpoint");
  } else if (r.verb == "run-snn") {
    require_file(r.checkpoint, "SNN checkpoint");
  } else if (r.verb == "evaluate-lap") {
    if (r.controller != "braitenberg") require_file(r.checkpoint, "checkpoint");
  } else if (r.verb == "report") {
    if (r.runs.empty()) throw ConfigError("report needs at least one run directory");
  } else if (r.verb != "train-rstdp" && r.verb != "run-braitenberg" && r.verb != "train-dqn" &&
             r.verb != "compare") {
    throw ConfigError("unknown verb: " + r.verb);
  }
  const TrackSpec track = resolve_track(r);
  fs::create_directories(r.out);
  {
    std::ofstream cfg(r.out / "config.json");
    cfg << config_to_json(config).dump(2) << '\n';
    m.outputs["config"] = "config.json";
  }
  const auto& ev = config.evaluation;
  auto evaluate = [&](Controller& ctl) {
    LapPolicy policy = [&ctl](const EventFrame& f, const LaneWorld&) { return ctl.step(f); };
    if (!r.dump_dir.empty()) policy = dumping_policy(std::move(policy), r.dump_dir, r.dump_every);
    return evaluate_lap(policy, track, Lane::outer, ev, config.world);
  };

  if (r.verb == "train-rstdp") {
    m.controller = "rstdp";
    const auto run = run_rstdp(track, config, r.seed);
    write_events_csv(r.out / "events.csv", run.training.events);
    write_terminations_csv(r.out / "terminations.csv", run.training.terminations);
    write_weight_snapshots_csv(r.out / "weights.csv", run.training.snapshots);
    save_braitenberg(r.out / "rstdp_weights.json", {run.left, run.right});
    m.outputs["events"] = "events.csv";
    m.outputs["terminations"] = "terminations.csv";
    m.outputs["weights"] = "weights.csv";
    m.outputs["checkpoint"] = "rstdp_weights.json";
    m.first_lap_steps = run.times.first_lap;
    m.stable_steps = run.times.stable;
    auto ctl = frozen_rstdp(run, config, r.seed);
    write_lap(r.out, evaluate(*ctl), m);
  } else if (r.verb == "run-braitenberg") {
    m.controller = "braitenberg";
    const auto w = braitenberg_weights(config);
    save_braitenberg(r.out / "braitenberg_weights.json", w);
    m.outputs["weights"] = "braitenberg_weights.json";
    BraitenbergController ctl(config.rstdp, w, derive_seed(r.seed, 11));
    write_lap(r.out, evaluate(ctl), m);
  } else if (r.verb == "train-dqn") {
    m.controller = "dqn";
    const auto run = run_dqn(track, config, r.seed);
    write_episodes_csv(r.out / "episodes.csv", run.training.episodes);
    write_events_csv(r.out / "events.csv", run.training.events);
    {
      auto out = open_csv(r.out / "evaluations.csv");
      out << "world_step,greedy_action_steps,off_center\n";
      for (const auto& e : run.training.evaluations) {
        out << e.world_step << ',' << e.action_steps << ',' << (e.off_center ? 1 : 0) << '\n';
      }
    }
    save_checkpoint(r.out / "dqn.json", run.q);
    run.training.archive.save(r.out / "archive.bin");
    m.outputs["episodes"] = "episodes.csv";
    m.outputs["events"] = "events.csv";
    m.outputs["evaluations"] = "evaluations.csv";
    m.outputs["checkpoint"] = "dqn.json";
    m.outputs["archive"] = "archive.bin";
    m.first_lap_steps = run.times.first_lap;
    m.stable_steps = run.times.stable;
    DqnController ctl(run.q, config.dqn.params);
    write_lap(r.out, evaluate(ctl), m);
  } else if (r.verb == "transfer") {
    m.controller = "dqn-snn";
    const auto archive = StateArchive::load(r.archive);
    const auto q = load_checkpoint(r.checkpoint);
    const auto run = run_transfer(archive, q, config, r.seed);
    const nlohmann::json meta = {{"i_max", run.dataset.i_max}};
    save_checkpoint(r.out / "classifier.json", run.classifier.net, nullptr, meta);
    save_checkpoint(r.out / "normalized.json", run.normalized, nullptr, meta);
    const auto hist = run.dataset.label_histogram();
    nlohmann::json stats = {{"samples", run.dataset.size()},
                            {"i_max", run.dataset.i_max},
                            {"labels", {hist[0], hist[1], hist[2]}},
                            {"train_accuracy", run.classifier.train_accuracy},
                            {"heldout_accuracy", run.classifier.heldout_accuracy},
                            {"snn_agreement", run.agreement},
                            {"max_positive_input", max_positive_input(run.normalized)}};
    std::ofstream(r.out / "dataset.json") << stats.dump(2) << '\n';
    m.outputs["classifier"] = "classifier.json";
    m.outputs["checkpoint"] = "normalized.json";
    m.outputs["dataset"] = "dataset.json";
    SnnController ctl(run.normalized, run.dataset.i_max, config.snn, derive_seed(r.seed, 12));
    write_lap(r.out, evaluate(ctl), m);
  } else if (r.verb == "run-snn" || r.verb == "evaluate-lap") {
    RunRequest req = r;
    if (r.verb == "run-snn") req.controller = "dqn-snn";
    m.controller = req.controller;
    auto ctl = load_controller(req);
    write_lap(r.out, evaluate(*ctl), m);
  } else if (r.verb == "compare") {
    const auto rows = compare_controllers(track, config, r.seed);
    auto out = open_csv(r.out / "compare.csv");
    out << "controller,mean_error,lap_failed,first_lap_steps,stable_steps\n";
    for (const auto& row : rows) {
      out << row.controller << ',' << num(row.lap.mean_error) << ',' << (row.lap.failed ? 1 : 0) << ','
          << opt(row.first_lap_steps) << ',' << opt(row.stable_steps) << '\n';
      write_lap_csv(r.out / ("lap_" + row.controller + ".csv"), row.lap);
    }
    m.outputs["compare"] = "compare.csv";
  } else if (r.verb == "report") {
    auto out = open_csv(r.out / "report.csv");
    out << "# training times in 50 ms world steps; DQN action steps count as 10 world steps\n";
    out << "run,scenario,controller,seed,first_lap_steps,stable_steps,mean_error\n";
    for (const auto& dir : r.runs) {
      const auto rm = read_manifest(dir);
      out << dir.string() << ',' << rm.scenario << ',' << rm.controller << ',' << rm.seed << ','
          << opt(rm.first_lap_steps) << ',' << opt(rm.stable_steps) << ','
          << (rm.mean_error ? num(*rm.mean_error) : std::string("failed")) << '\n';
    }
    m.outputs["report"] = "report.csv";
  }
  write_manifest(r.out, m);
  return m;
}

}  // namespace lanekeep
