#pragma once

#include <cstdint>
#include <vector>

#include "tinyradar/radar_io.hpp"

namespace tinyradar {

/// Labeled single-target recordings whose classes differ by radial velocity.
/// Class k moves at velocities[k] (plus jitter) through the middle of the
/// sampled range window.
struct SynthCorpusConfig {
  std::size_t classes = 5;
  std::size_t per_class = 200;
  std::size_t sweeps = 160;
  std::size_t range_points = 64;
  double sweep_freq_hz = 160.0;
  double range_start_m = 0.07;
  double range_step_m = 5e-3;
  double envelope_sigma_m = 0.02;
  double noise_std = 0.3;
  double velocity_jitter_mps = 0.02;
  double max_speed_mps = 0.15;
  std::uint32_t sensors = 1;
  std::uint32_t users = 10;
  std::uint32_t sessions = 5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Evenly spaced class velocities in [-max_speed, +max_speed].
std::vector<double> class_velocities(const SynthCorpusConfig& config);

/// Recording `index` of the corpus; its class is index % classes and its
/// user is (index / classes) % users. Independent of the other recordings.
SweepRecording synth_corpus_recording(const SynthCorpusConfig& config, std::size_t index);

std::vector<SweepRecording> synth_corpus(const SynthCorpusConfig& config);

}  // namespace tinyradar
