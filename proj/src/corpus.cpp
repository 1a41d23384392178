#include "tinyradar/corpus.hpp"

#include <random>

#include "tinyradar/errors.hpp"

namespace tinyradar {

void SynthCorpusConfig::validate() const {
  if (classes < 2) throw ValidationError("synth corpus: classes must be >= 2");
  if (per_class < 1) throw ValidationError("synth corpus: per_class must be >= 1");
  if (sweeps < 1 || range_points < 1) {
    throw ValidationError("synth corpus: sweeps and range_points must be >= 1");
  }
  if (!(sweep_freq_hz > 0.0) || !(range_step_m > 0.0) || !(envelope_sigma_m > 0.0)) {
    throw ValidationError("synth corpus: sweep frequency, range step and sigma must be > 0");
  }
  if (noise_std < 0.0 || velocity_jitter_mps < 0.0 || max_speed_mps < 0.0) {
    throw ValidationError("synth corpus: noise, jitter and speed must be >= 0");
  }
  if (sensors != 1 && sensors != 2) throw ValidationError("synth corpus: sensors must be 1 or 2");
  if (users < 1 || sessions < 1) throw ValidationError("synth corpus: users and sessions >= 1");
}

std::vector<double> class_velocities(const SynthCorpusConfig& config) {
  std::vector<double> v(config.classes);
  for (std::size_t k = 0; k < config.classes; ++k) {
    v[k] = -config.max_speed_mps +
           2.0 * config.max_speed_mps * static_cast<double>(k) / static_cast<double>(config.classes - 1);
  }
  return v;
}

SweepRecording synth_corpus_recording(const SynthCorpusConfig& config, std::size_t index) {
  config.validate();
  const auto velocities = class_velocities(config);
  const std::size_t cls = index % config.classes;
  std::seed_seq seq{config.seed, static_cast<std::uint64_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const double window = static_cast<double>(config.range_points) * config.range_step_m;
  const double duration = static_cast<double>(config.sweeps) / config.sweep_freq_hz;

  SynthTargetSpec spec;
  spec.velocity_mps = velocities[cls] + config.velocity_jitter_mps * unit(rng);
  spec.amplitude = 1.0 + 0.5 * unit(rng);
  const double centre = config.range_start_m + window / 2.0 + 0.15 * window * unit(rng);
  spec.initial_range_m = centre - spec.velocity_mps * duration / 2.0;
  spec.envelope_sigma_m = config.envelope_sigma_m;
  spec.noise_std = config.noise_std;
  spec.range_start_m = config.range_start_m;
  spec.range_step_m = config.range_step_m;
  spec.sensors = config.sensors;
  spec.label = static_cast<std::uint32_t>(cls);
  spec.user_id = static_cast<std::uint32_t>((index / config.classes) % config.users);
  spec.session_id =
      static_cast<std::uint32_t>((index / (config.classes * config.users)) % config.sessions);
  return synth_recording(spec, config.sweeps, config.range_points, config.sweep_freq_hz, rng());
}

std::vector<SweepRecording> synth_corpus(const SynthCorpusConfig& config) {
  config.validate();
  const std::size_t n = config.classes * config.per_class;
  std::vector<SweepRecording> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth_corpus_recording(config, i));
  return out;
}

}  // namespace tinyradar
