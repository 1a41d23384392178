#include "run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

namespace tinyradar::cli {

namespace {

using json = nlohmann::json;
using Setter = std::function<void(RunConfig&, const json&)>;

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) throw ConfigError(key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  return v.get<double>();
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto count = [&](const std::string& key, std::function<void(RunConfig&, std::size_t)> f) {
      t[key] = [key, f](RunConfig& c, const json& v) { f(c, as_count(v, key)); };
    };
    auto real = [&](const std::string& key, std::function<void(RunConfig&, double)> f) {
      t[key] = [key, f](RunConfig& c, const json& v) { f(c, as_real(v, key)); };
    };
    count("tw", [](RunConfig& c, std::size_t v) { c.model.tw = v; });
    count("rp", [](RunConfig& c, std::size_t v) { c.model.rp = v; });
    count("sensors", [](RunConfig& c, std::size_t v) { c.model.sensors = v; });
    count("classes", [](RunConfig& c, std::size_t v) { c.model.classes = v; });
    count("filters", [](RunConfig& c, std::size_t v) { c.model.tcn_filters = v; });
    count("time_steps", [](RunConfig& c, std::size_t v) { c.model.time_steps = v; });
    t["dilations"] = [](RunConfig& c, const json& v) {
      if (!v.is_array()) throw ConfigError("dilations: expected an array of integers");
      c.model.dilations.clear();
      for (const json& d : v) c.model.dilations.push_back(as_count(d, "dilations"));
    };

    count("epochs", [](RunConfig& c, std::size_t v) { c.train.epochs = v; });
    count("batch_size", [](RunConfig& c, std::size_t v) { c.train.batch_size = v; });
    real("learning_rate", [](RunConfig& c, double v) { c.train.adam.learning_rate = v; });
    real("beta1", [](RunConfig& c, double v) { c.train.adam.beta1 = v; });
    real("beta2", [](RunConfig& c, double v) { c.train.adam.beta2 = v; });
    real("epsilon", [](RunConfig& c, double v) { c.train.adam.epsilon = v; });
    count("seed", [](RunConfig& c, std::size_t v) {
      c.train.seed = v;
      c.synth.seed = v;
    });

    count("fold", [](RunConfig& c, std::size_t v) { c.fold = v; });
    count("held_out_user", [](RunConfig& c, std::size_t v) {
      c.held_out_user = static_cast<std::uint32_t>(v);
    });
    count("split_seed", [](RunConfig& c, std::size_t v) { c.split_seed = v; });
    t["aggregation"] = [](RunConfig& c, const json& v) {
      const std::string s = v.is_string() ? v.get<std::string>() : "";
      if (s == "mean_softmax") c.aggregation = Aggregation::MeanSoftmax;
      else if (s == "majority_vote") c.aggregation = Aggregation::MajorityVote;
      else throw ConfigError("aggregation: expected \"mean_softmax\" or \"majority_vote\"");
    };
    count("calibration_sequences", [](RunConfig& c, std::size_t v) { c.calibration_sequences = v; });

    count("synth_classes", [](RunConfig& c, std::size_t v) { c.synth.classes = v; });
    count("synth_per_class", [](RunConfig& c, std::size_t v) { c.synth.per_class = v; });
    count("synth_sweeps", [](RunConfig& c, std::size_t v) { c.synth.sweeps = v; });
    count("synth_range_points", [](RunConfig& c, std::size_t v) { c.synth.range_points = v; });
    count("synth_sensors", [](RunConfig& c, std::size_t v) {
      c.synth.sensors = static_cast<std::uint32_t>(v);
    });
    count("synth_users", [](RunConfig& c, std::size_t v) {
      c.synth.users = static_cast<std::uint32_t>(v);
    });
    count("synth_sessions", [](RunConfig& c, std::size_t v) {
      c.synth.sessions = static_cast<std::uint32_t>(v);
    });
    real("synth_sweep_freq_hz", [](RunConfig& c, double v) { c.synth.sweep_freq_hz = v; });
    real("synth_range_start_m", [](RunConfig& c, double v) { c.synth.range_start_m = v; });
    real("synth_range_step_m", [](RunConfig& c, double v) { c.synth.range_step_m = v; });
    real("synth_sigma_m", [](RunConfig& c, double v) { c.synth.envelope_sigma_m = v; });
    real("synth_noise_std", [](RunConfig& c, double v) { c.synth.noise_std = v; });
    real("synth_jitter_mps", [](RunConfig& c, double v) { c.synth.velocity_jitter_mps = v; });
    real("synth_max_speed_mps", [](RunConfig& c, double v) { c.synth.max_speed_mps = v; });

    t["data_dir"] = [](RunConfig& c, const json& v) {
      if (!v.is_string()) throw ConfigError("data_dir: expected a string");
      c.data_dir = v.get<std::string>();
    };
    return t;
  }();
  return table;
}

const std::set<std::string> kSections = {"model", "train", "split", "eval", "quant", "synth", "paths"};

void apply_key(RunConfig& config, const std::string& key, const json& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown configuration key \"" + key + "\"");
  it->second(config, value);
  config.explicit_keys.insert(key);
}

}  // namespace

void apply_json(RunConfig& config, const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (kSections.count(key) && value.is_object()) {
      for (const auto& [inner, v] : value.items()) apply_key(config, inner, v);
    } else {
      apply_key(config, key, value);
    }
  }
}

void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  apply_json(config, j);
}

json to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"tw", c.model.tw},           {"rp", c.model.rp},
                {"sensors", c.model.sensors}, {"classes", c.model.classes},
                {"filters", c.model.tcn_filters}, {"time_steps", c.model.time_steps},
                {"dilations", c.model.dilations}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.adam.learning_rate},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"epsilon", c.train.adam.epsilon},
                {"seed", c.train.seed}};
  j["split"] = {{"split_seed", c.split_seed}};
  if (c.fold) j["split"]["fold"] = *c.fold;
  if (c.held_out_user) j["split"]["held_out_user"] = *c.held_out_user;
  j["eval"] = {{"aggregation",
                c.aggregation == Aggregation::MeanSoftmax ? "mean_softmax" : "majority_vote"}};
  j["quant"] = {{"calibration_sequences", c.calibration_sequences}};
  j["synth"] = {{"synth_classes", c.synth.classes},
                {"synth_per_class", c.synth.per_class},
                {"synth_sweeps", c.synth.sweeps},
                {"synth_range_points", c.synth.range_points},
                {"synth_sensors", c.synth.sensors},
                {"synth_users", c.synth.users},
                {"synth_sessions", c.synth.sessions},
                {"synth_sweep_freq_hz", c.synth.sweep_freq_hz},
                {"synth_range_start_m", c.synth.range_start_m},
                {"synth_range_step_m", c.synth.range_step_m},
                {"synth_sigma_m", c.synth.envelope_sigma_m},
                {"synth_noise_std", c.synth.noise_std},
                {"synth_jitter_mps", c.synth.velocity_jitter_mps},
                {"synth_max_speed_mps", c.synth.max_speed_mps}};
  j["paths"] = {{"data_dir", c.data_dir}};
  return j;
}

std::string config_hash(const json& resolved) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : resolved.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tinyradar::cli
