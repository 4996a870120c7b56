#include "mea/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace mea {

using nlohmann::json;

namespace {

json to_json(const ExperimentConfig& c) {
  const auto& cu = c.culture;
  const auto& mb = cu.membrane;
  const auto& sim = c.simulation;
  const auto& rv = c.reservoir;
  json j;
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  j["grid"] = {{"replicates", c.replicates}, {"days", c.days}};
  j["culture"] = {
      {"connection_peak", cu.connection_peak},   {"connection_sigma", cu.connection_sigma},
      {"excitatory_fraction", cu.excitatory_fraction}, {"weight_exc", cu.weight_exc},
      {"weight_inh", cu.weight_inh},             {"weight_spread", cu.weight_spread},
      {"weight_max", cu.weight_max},             {"background_rate_hz", cu.background_rate_hz},
      {"background_kick", cu.background_kick},   {"coupling_gain", cu.coupling_gain},
      {"coupling_neighbor", cu.coupling_neighbor}, {"delay_base_ms", cu.delay_base_ms},
      {"delay_per_pitch_ms", cu.delay_per_pitch_ms}, {"sample_rate_hz", cu.sample_rate_hz},
      {"membrane",
       {{"tau_ms", mb.tau_ms}, {"threshold", mb.threshold}, {"reset", mb.reset},
        {"refractory_ms", mb.refractory_ms}, {"floor", mb.floor}}}};
  j["drift"] = {{"rewire_fraction", c.drift.rewire_fraction}, {"weight_jitter_sd", c.drift.weight_jitter_sd}};
  j["simulation"] = {{"pre_s", sim.pre_s},
                     {"post_s", sim.post_s},
                     {"spontaneous_s", sim.spontaneous_s},
                     {"full_trace_path", sim.full_trace_path},
                     {"store_traces", sim.store_traces},
                     {"trace_noise_sd_uv", sim.trace_noise_sd_uv},
                     {"template",
                      {{"amplitude_uv", sim.spike_template.amplitude_uv},
                       {"duration_s", sim.spike_template.duration_s},
                       {"rebound_ratio", sim.spike_template.rebound_ratio}}}};
  j["detector"] = {{"window_s", c.detector.window_s},
                   {"thr_low", c.detector.thr_low},
                   {"thr_high", c.detector.thr_high},
                   {"refractory_s", c.detector.refractory_s}};
  j["layout"] = {{"origin", {c.layout.origin.row, c.layout.origin.col}},
                 {"pairs_per_segment", c.layout.pairs_per_segment}};
  j["pulse"] = {{"amplitude_ua", c.pulse.amplitude_ua}, {"phase_us", {c.pulse.phase_pos_us, c.pulse.phase_neg_us}}};
  j["schedule"] = {{"repetitions", c.schedule.repetitions}, {"isi_s", c.schedule.isi_s}, {"seed", c.schedule.seed}};
  j["readout"] = {{"window_s", c.readout.window_s},
                  {"mask_half_width", c.readout.mask_half_width},
                  {"windows_ms", c.windows_ms}};
  j["classifier"] = {{"learning_rate", c.classifier.learning_rate},
                     {"batch_size", c.classifier.batch_size},
                     {"epochs", c.classifier.epochs},
                     {"standardize", c.classifier.standardize},
                     {"folds", c.folds}};
  j["reservoir"] = {{"n_units", rv.model.n_units},
                    {"density", rv.model.density},
                    {"spectral_radius", rv.model.spectral_radius},
                    {"input_gain", rv.model.input_gain},
                    {"nonlinearity", rv.model.nonlinearity == Nonlinearity::tanh ? "tanh" : "softsign"},
                    {"power_burn_in", rv.model.power_burn_in},
                    {"power_iterations", rv.model.power_iterations},
                    {"noise_windows", rv.noise_windows},
                    {"noise_seeds", rv.noise_seeds},
                    {"noise_multiplier", rv.noise_multiplier},
                    {"noise_sweep", rv.noise_sweep}};
  return j;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.replicates = j.at("grid").at("replicates");
  c.days = j.at("grid").at("days");

  const auto& cu = j.at("culture");
  auto& p = c.culture;
  p.connection_peak = cu.at("connection_peak");
  p.connection_sigma = cu.at("connection_sigma");
  p.excitatory_fraction = cu.at("excitatory_fraction");
  p.weight_exc = cu.at("weight_exc");
  p.weight_inh = cu.at("weight_inh");
  p.weight_spread = cu.at("weight_spread");
  p.weight_max = cu.at("weight_max");
  p.background_rate_hz = cu.at("background_rate_hz");
  p.background_kick = cu.at("background_kick");
  p.coupling_gain = cu.at("coupling_gain");
  p.coupling_neighbor = cu.at("coupling_neighbor");
  p.delay_base_ms = cu.at("delay_base_ms");
  p.delay_per_pitch_ms = cu.at("delay_per_pitch_ms");
  p.sample_rate_hz = cu.at("sample_rate_hz");
  const auto& mb = cu.at("membrane");
  p.membrane.tau_ms = mb.at("tau_ms");
  p.membrane.threshold = mb.at("threshold");
  p.membrane.reset = mb.at("reset");
  p.membrane.refractory_ms = mb.at("refractory_ms");
  p.membrane.floor = mb.at("floor");

  c.drift.rewire_fraction = j.at("drift").at("rewire_fraction");
  c.drift.weight_jitter_sd = j.at("drift").at("weight_jitter_sd");

  const auto& sim = j.at("simulation");
  c.simulation.pre_s = sim.at("pre_s");
  c.simulation.post_s = sim.at("post_s");
  c.simulation.spontaneous_s = sim.at("spontaneous_s");
  c.simulation.full_trace_path = sim.at("full_trace_path");
  c.simulation.store_traces = sim.at("store_traces");
  c.simulation.trace_noise_sd_uv = sim.at("trace_noise_sd_uv");
  c.simulation.spike_template.amplitude_uv = sim.at("template").at("amplitude_uv");
  c.simulation.spike_template.duration_s = sim.at("template").at("duration_s");
  c.simulation.spike_template.rebound_ratio = sim.at("template").at("rebound_ratio");

  const auto& det = j.at("detector");
  c.detector.window_s = det.at("window_s");
  c.detector.thr_low = det.at("thr_low");
  c.detector.thr_high = det.at("thr_high");
  c.detector.refractory_s = det.at("refractory_s");

  const auto& origin = j.at("layout").at("origin");
  if (!origin.is_array() || origin.size() != 2) throw std::invalid_argument("layout.origin must be [row, col]");
  c.layout.origin = {origin[0].get<int>(), origin[1].get<int>()};
  c.layout.pairs_per_segment = j.at("layout").at("pairs_per_segment");

  c.pulse.amplitude_ua = j.at("pulse").at("amplitude_ua");
  const auto& phase = j.at("pulse").at("phase_us");
  if (phase.is_number()) {
    c.pulse.phase_pos_us = c.pulse.phase_neg_us = phase.get<double>();
  } else {
    if (!phase.is_array() || phase.size() != 2) throw std::invalid_argument("pulse.phase_us must be a number or [pos, neg]");
    c.pulse.phase_pos_us = phase[0];
    c.pulse.phase_neg_us = phase[1];
  }

  c.schedule.repetitions = j.at("schedule").at("repetitions");
  c.schedule.isi_s = j.at("schedule").at("isi_s");
  c.schedule.seed = j.at("schedule").at("seed").get<std::uint64_t>();

  c.readout.window_s = j.at("readout").at("window_s");
  c.readout.mask_half_width = j.at("readout").at("mask_half_width");
  c.windows_ms = j.at("readout").at("windows_ms").get<std::vector<double>>();

  const auto& cl = j.at("classifier");
  c.classifier.learning_rate = cl.at("learning_rate");
  c.classifier.batch_size = cl.at("batch_size");
  c.classifier.epochs = cl.at("epochs");
  c.classifier.standardize = cl.at("standardize");
  c.folds = cl.at("folds");

  const auto& rv = j.at("reservoir");
  c.reservoir.model.n_units = rv.at("n_units");
  c.reservoir.model.density = rv.at("density");
  c.reservoir.model.spectral_radius = rv.at("spectral_radius");
  c.reservoir.model.input_gain = rv.at("input_gain");
  const auto phi = rv.at("nonlinearity").get<std::string>();
  if (phi == "tanh") c.reservoir.model.nonlinearity = Nonlinearity::tanh;
  else if (phi == "softsign") c.reservoir.model.nonlinearity = Nonlinearity::softsign;
  else throw std::invalid_argument("reservoir.nonlinearity must be 'tanh' or 'softsign'");
  c.reservoir.model.power_burn_in = rv.at("power_burn_in");
  c.reservoir.model.power_iterations = rv.at("power_iterations");
  c.reservoir.noise_windows = rv.at("noise_windows");
  c.reservoir.noise_seeds = rv.at("noise_seeds");
  c.reservoir.noise_multiplier = rv.at("noise_multiplier");
  c.reservoir.noise_sweep = rv.at("noise_sweep").get<std::vector<double>>();
  return c;
}

void reject_unknown_keys(const json& given, const json& known, const std::string& prefix) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!known.contains(key)) throw std::invalid_argument("unknown configuration key '" + path + "'");
    if (known.at(key).is_object()) reject_unknown_keys(value, known.at(key), path);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (replicates < 1 || days < 1) throw std::invalid_argument("grid needs at least one replicate and one day");
  culture.validate();
  drift.validate();
  detector.validate();
  layout.validate();
  pulse.validate();
  readout.validate();
  classifier.validate();
  reservoir.model.validate();
  if (schedule.repetitions < 1) throw std::invalid_argument("schedule.repetitions must be >= 1");
  if (!(schedule.isi_s > 0)) throw std::invalid_argument("schedule.isi_s must be positive");
  if (!(simulation.pre_s >= 0) || !(simulation.post_s > 0) || !(simulation.spontaneous_s > 0))
    throw std::invalid_argument("simulation durations must be positive");
  if (simulation.pre_s + simulation.post_s > schedule.isi_s)
    throw std::invalid_argument("trial window is longer than the inter-stimulus interval");
  if (windows_ms.empty()) throw std::invalid_argument("readout.windows_ms must not be empty");
  for (std::size_t k = 0; k < windows_ms.size(); ++k) {
    if (!(windows_ms[k] > 0)) throw std::invalid_argument("readout windows must be positive");
    if (k > 0 && !(windows_ms[k] > windows_ms[k - 1]))
      throw std::invalid_argument("readout.windows_ms must be strictly increasing");
  }
  if (windows_ms.back() * 1e-3 >= simulation.post_s || readout.window_s >= simulation.post_s)
    throw std::invalid_argument("readout windows must end inside the post-stimulus recording");
  if (folds < 2) throw std::invalid_argument("classifier.folds must be >= 2");
  if (reservoir.noise_windows < 1 || reservoir.noise_seeds < 1)
    throw std::invalid_argument("reservoir noise calibration needs windows and seeds");
  if (reservoir.model.n_units != kChannels)
    throw std::invalid_argument("reservoir.n_units must equal the 4096 grid channels");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json given;
  try {
    given = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!given.is_object()) throw std::invalid_argument("configuration must be a JSON object");
  json merged = to_json(ExperimentConfig{});
  reject_unknown_keys(given, merged, "");
  merged.merge_patch(given);
  ExperimentConfig cfg;
  try {
    cfg = from_json(merged);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("configuration has a value of the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open configuration " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  json j = to_json(cfg);
  j.erase("output_dir");
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace mea
