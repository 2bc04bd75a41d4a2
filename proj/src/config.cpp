#include "lanekeep/config.hpp"

#include <cstdio>
#include <fstream>

#include "lanekeep/errors.hpp"

namespace lanekeep {

namespace {

using nlohmann::json;

json camera_json(const CameraModel& c) {
  return {{"mount_height", c.mount_height},
          {"forward_offset", c.forward_offset},
          {"depression_deg", c.depression * 180.0 / kPi},
          {"horizontal_fov_deg", c.horizontal_fov * 180.0 / kPi},
          {"max_range", c.max_range}};
}

json band_json(const CropBand& b) { return {{"first_row", b.first_row}, {"rows", b.rows}}; }

json neuron_json(const LifParams& p) {
  return {{"tau_m", p.tau_m},     {"c_m", p.c_m},   {"tau_syn", p.tau_syn}, {"t_ref", p.t_ref},
          {"e_l", p.e_l},         {"v_reset", p.v_reset}, {"v_th", p.v_th}, {"i_e", p.i_e}};
}

json plasticity_json(const PlasticityParams& p) {
  return {{"a_plus", p.a_plus},   {"a_minus", p.a_minus}, {"tau_plus", p.tau_plus},
          {"tau_minus", p.tau_minus}, {"tau_c", p.tau_c}, {"tau_n", p.tau_n},
          {"w_min", p.w_min},     {"w_max", p.w_max},     {"w_init", p.w_init},
          {"c_r", p.c_r},         {"c1", p.c1}};
}

void check_keys(const json& user, const json& defaults, const std::string& where) {
  if (!user.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key: " + where + key);
    if (value.is_object() && defaults.at(key).is_object()) check_keys(value, defaults.at(key), where + key + ".");
  }
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["format"] = "lanekeep-config/1";
  doc["world"] = {{"dt", c.world.dt}, {"axle_width", c.world.axle_width}, {"camera", camera_json(c.world.camera)}};

  const auto& d = c.dqn.params;
  doc["dqn"] = {{"hidden", d.hidden},
                {"learning_rate", d.learning_rate},
                {"gamma", d.gamma},
                {"batch_size", d.batch_size},
                {"update_frequency", d.update_frequency},
                {"tau", d.tau},
                {"buffer_size", d.buffer_size},
                {"epsilon_start", d.epsilon.start},
                {"epsilon_end", d.epsilon.end},
                {"pre_training_steps", d.epsilon.pre_training_steps},
                {"annealing_steps", d.epsilon.annealing_steps},
                {"epsilon_clock", d.epsilon_in_world_steps ? "world" : "action"},
                {"double_dqn", d.double_dqn},
                {"reward_sigma", d.reward_sigma},
                {"reset_distance", d.reset_distance},
                {"max_episode_steps", d.max_episode_steps},
                {"frames_per_action", d.frames_per_action},
                {"v_straight", d.v_straight},
                {"v_turn", d.v_turn},
                {"crop", band_json(d.band)},
                {"total_world_steps", c.dqn.total_world_steps},
                {"eval_interval", c.dqn.eval_interval},
                {"eval_action_steps", c.dqn.eval_action_steps},
                {"stop_after_success", c.dqn.stop_after_success}};

  const auto& s = c.snn;
  doc["transfer"] = {{"tail_fraction", c.dataset.tail_fraction},
                     {"tail_weight", c.dataset.tail_weight},
                     {"hidden", c.classifier.hidden},
                     {"learning_rate", c.classifier.learning_rate},
                     {"batch_size", c.classifier.batch_size},
                     {"steps", c.classifier.steps},
                     {"holdout_fraction", c.classifier.holdout_fraction},
                     {"min_samples", c.classifier.min_samples},
                     {"dt_ms", s.network.dt_ms},
                     {"max_rate_hz", s.network.max_rate_hz},
                     {"threshold", s.network.threshold},
                     {"window_ticks", s.window_ticks},
                     {"trace_decay", s.trace_decay},
                     {"frames_per_state", s.frames_per_state},
                     {"v_straight", s.v_straight},
                     {"v_turn", s.v_turn},
                     {"crop", band_json(s.band)}};

  const auto& r = c.rstdp;
  doc["rstdp"] = {{"neuron", neuron_json(r.network.neuron)},
                  {"dt_ms", r.network.dt_ms},
                  {"delay_ticks", r.network.delay_ticks},
                  {"plasticity", plasticity_json(r.plasticity)},
                  {"v_max", r.steering.v_max},
                  {"v_min", r.steering.v_min},
                  {"c_turn", r.steering.c_turn},
                  {"n_max", r.steering.n_max},
                  {"max_rate_hz", r.encoding.max_rate_hz},
                  {"events_for_max_rate", r.encoding.events_for_max_rate},
                  {"crop", band_json(r.band)},
                  {"window_ms", r.window_ms},
                  {"reset_distance", r.reset_distance},
                  {"snapshot_interval", r.snapshot_interval},
                  {"steps", c.rstdp_steps},
                  {"stable_laps", c.stable_laps}};

  doc["braitenberg"] = {{"weights_file", c.braitenberg.weights_file},
                        {"w_low", c.braitenberg.w_low},
                        {"w_high", c.braitenberg.w_high}};
  doc["evaluation"] = {{"fail_distance", c.evaluation.fail_distance}, {"max_steps", c.evaluation.max_steps}};
  return doc;
}

ExperimentConfig config_from_json(const json& user) {
  const ExperimentConfig defaults;
  json doc = config_to_json(defaults);
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(user, doc, "");
  if (user.contains("format") && user.at("format") != "lanekeep-config/1") {
    throw ConfigError("unsupported config format");
  }
  doc.merge_patch(user);
  try {
    ExperimentConfig c;
    const auto& w = doc.at("world");
    c.world.dt = w.at("dt");
    c.world.axle_width = w.at("axle_width");
    const auto& cam = w.at("camera");
    c.world.camera.mount_height = cam.at("mount_height");
    c.world.camera.forward_offset = cam.at("forward_offset");
    c.world.camera.depression = deg2rad(cam.at("depression_deg").get<double>());
    c.world.camera.horizontal_fov = deg2rad(cam.at("horizontal_fov_deg").get<double>());
    c.world.camera.max_range = cam.at("max_range");

    const auto& d = doc.at("dqn");
    auto& p = c.dqn.params;
    p.hidden = d.at("hidden");
    p.learning_rate = d.at("learning_rate");
    p.gamma = d.at("gamma");
    p.batch_size = d.at("batch_size");
    p.update_frequency = d.at("update_frequency");
    p.tau = d.at("tau");
    p.buffer_size = d.at("buffer_size");
    p.epsilon.start = d.at("epsilon_start");
    p.epsilon.end = d.at("epsilon_end");
    p.epsilon.pre_training_steps = d.at("pre_training_steps");
    p.epsilon.annealing_steps = d.at("annealing_steps");
    const std::string clock = d.at("epsilon_clock");
    if (clock != "world" && clock != "action") throw ConfigError("epsilon_clock must be world or action");
    p.epsilon_in_world_steps = clock == "world";
    p.double_dqn = d.at("double_dqn");
    p.reward_sigma = d.at("reward_sigma");
    p.reset_distance = d.at("reset_distance");
    p.max_episode_steps = d.at("max_episode_steps");
    p.frames_per_action = d.at("frames_per_action");
    p.v_straight = d.at("v_straight");
    p.v_turn = d.at("v_turn");
    p.band = {d.at("crop").at("first_row"), d.at("crop").at("rows")};
    c.dqn.total_world_steps = d.at("total_world_steps");
    c.dqn.eval_interval = d.at("eval_interval");
    c.dqn.eval_action_steps = d.at("eval_action_steps");
    c.dqn.stop_after_success = d.at("stop_after_success");
    c.dqn.world = c.world;

    const auto& t = doc.at("transfer");
    c.dataset.tail_fraction = t.at("tail_fraction");
    c.dataset.tail_weight = t.at("tail_weight");
    c.classifier.hidden = t.at("hidden");
    c.classifier.learning_rate = t.at("learning_rate");
    c.classifier.batch_size = t.at("batch_size");
    c.classifier.steps = t.at("steps");
    c.classifier.holdout_fraction = t.at("holdout_fraction");
    c.classifier.min_samples = t.at("min_samples");
    c.snn.network.dt_ms = t.at("dt_ms");
    c.snn.network.max_rate_hz = t.at("max_rate_hz");
    c.snn.network.threshold = t.at("threshold");
    c.snn.window_ticks = t.at("window_ticks");
    c.snn.trace_decay = t.at("trace_decay");
    c.snn.frames_per_state = t.at("frames_per_state");
    c.snn.v_straight = t.at("v_straight");
    c.snn.v_turn = t.at("v_turn");
    c.snn.band = {t.at("crop").at("first_row"), t.at("crop").at("rows")};

    const auto& r = doc.at("rstdp");
    const auto& n = r.at("neuron");
    auto& lif = c.rstdp.network.neuron;
    lif = {n.at("tau_m"), n.at("c_m"), n.at("tau_syn"), n.at("t_ref"),
           n.at("e_l"),   n.at("v_reset"), n.at("v_th"), n.at("i_e")};
    c.rstdp.network.dt_ms = r.at("dt_ms");
    c.rstdp.network.delay_ticks = r.at("delay_ticks");
    const auto& pl = r.at("plasticity");
    auto& pp = c.rstdp.plasticity;
    pp.a_plus = pl.at("a_plus");
    pp.a_minus = pl.at("a_minus");
    pp.tau_plus = pl.at("tau_plus");
    pp.tau_minus = pl.at("tau_minus");
    pp.tau_c = pl.at("tau_c");
    pp.tau_n = pl.at("tau_n");
    pp.w_min = pl.at("w_min");
    pp.w_max = pl.at("w_max");
    pp.w_init = pl.at("w_init");
    pp.c_r = pl.at("c_r");
    pp.c1 = pl.at("c1");
    c.rstdp.steering.v_max = r.at("v_max");
    c.rstdp.steering.v_min = r.at("v_min");
    c.rstdp.steering.c_turn = r.at("c_turn");
    c.rstdp.steering.n_max = r.at("n_max");
    c.rstdp.encoding.max_rate_hz = r.at("max_rate_hz");
    c.rstdp.encoding.events_for_max_rate = r.at("events_for_max_rate");
    c.rstdp.band = {r.at("crop").at("first_row"), r.at("crop").at("rows")};
    c.rstdp.window_ms = r.at("window_ms");
    c.rstdp.reset_distance = r.at("reset_distance");
    c.rstdp.snapshot_interval = r.at("snapshot_interval");
    c.rstdp_steps = r.at("steps");
    c.stable_laps = r.at("stable_laps");
    pp.validate();

    const auto& b = doc.at("braitenberg");
    c.braitenberg.weights_file = b.at("weights_file");
    c.braitenberg.w_low = b.at("w_low");
    c.braitenberg.w_high = b.at("w_high");
    const auto& e = doc.at("evaluation");
    c.evaluation.fail_distance = e.at("fail_distance");
    c.evaluation.max_steps = e.at("max_steps");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const auto text = config_to_json(config).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lanekeep
