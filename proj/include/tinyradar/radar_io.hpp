#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tinyradar {

using IqSample = std::complex<float>;

// Label value stored for recordings without a gesture class.
inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

// Acconeer A111 distance resolution.
inline constexpr double kDefaultRangeStepM = 0.483e-3;
// Free-space wavelength at 60 GHz.
inline constexpr double kDefaultWavelengthM = 4.9965e-3;

/// A time series of complex distance sweeps from one or two sensors.
///
/// Samples are stored sensor-major, then time, then range, which is also
/// the on-disk payload order of the TRD1 container.
struct SweepRecording {
  std::uint32_t sensors = 1;
  std::uint32_t sweeps = 0;
  std::uint32_t range_points = 0;
  std::uint32_t sweep_freq_mhz = 0;  // millihertz, as stored on disk
  std::uint32_t label = kUnlabeled;
  std::uint32_t user_id = 0;
  std::uint32_t session_id = 0;
  double range_start_m = 0.0;
  double range_step_m = kDefaultRangeStepM;
  std::vector<IqSample> samples;

  // Set by the synthesizer when the target centre leaves the sampled range
  // window for at least one sweep. Not serialized.
  bool target_left_window = false;

  double sweep_freq_hz() const { return static_cast<double>(sweep_freq_mhz) / 1000.0; }
  bool labeled() const { return label != kUnlabeled; }

  std::size_t index(std::size_t s, std::size_t t, std::size_t r) const {
    return (s * sweeps + t) * range_points + r;
  }
  IqSample at(std::size_t s, std::size_t t, std::size_t r) const { return samples[index(s, t, r)]; }
  IqSample& at(std::size_t s, std::size_t t, std::size_t r) { return samples[index(s, t, r)]; }

  // Throws ValidationError when an invariant does not hold.
  void validate() const;

  // Compares every serialized field; the synthesizer's warning flag is ignored.
  friend bool operator==(const SweepRecording& a, const SweepRecording& b);
};

/// TW consecutive sweeps of one recording, laid out (time, range, sensor).
struct RawFrame {
  std::size_t tw = 0;
  std::size_t range_points = 0;
  std::size_t sensors = 0;
  std::size_t window_index = 0;
  std::vector<IqSample> data;

  std::size_t index(std::size_t t, std::size_t r, std::size_t c) const {
    return (t * range_points + r) * sensors + c;
  }
  IqSample at(std::size_t t, std::size_t r, std::size_t c) const { return data[index(t, r, c)]; }
  IqSample& at(std::size_t t, std::size_t r, std::size_t c) { return data[index(t, r, c)]; }
};

struct SynthTargetSpec {
  double initial_range_m = 0.15;
  double velocity_mps = 0.0;
  double amplitude = 1.0;
  double envelope_sigma_m = 0.01;
  double noise_std = 0.0;
  double carrier_wavelength_m = kDefaultWavelengthM;
  double range_start_m = 0.07;
  double range_step_m = kDefaultRangeStepM;
  std::uint32_t sensors = 1;
  std::uint32_t label = kUnlabeled;
  std::uint32_t user_id = 0;
  std::uint32_t session_id = 0;
};

// TRD1 container. Layout (little-endian): "TRD1", u32 version=1, C, N, RP,
// sweep_freq [mHz], label, user_id, session_id, f64 range_start_m,
// f64 range_step_m, then C*N*RP pairs of f32 (re, im).
inline constexpr std::size_t kTrd1HeaderBytes = 4 + 8 * 4 + 2 * 8;

std::vector<std::uint8_t> encode_recording(const SweepRecording& rec);
SweepRecording decode_recording(std::span<const std::uint8_t> bytes);

SweepRecording load_recording(const std::string& path);
void save_recording(const std::string& path, const SweepRecording& rec);

/// Splits a recording into windows of `tw` sweeps advancing by `stride`.
/// Frame k covers sweeps [k*stride, k*stride + tw); partial tails are dropped.
std::vector<RawFrame> frame_stream(const SweepRecording& rec, std::size_t tw, std::size_t stride);

/// Point target with a Gaussian range envelope moving at constant velocity.
///
/// Sweep t is centred at r(t) = r0 + v*t/f_sweep and carries the round-trip
/// phase 4*pi*r(t)/lambda, plus complex white noise of total standard
/// deviation `noise_std`. Deterministic for a fixed seed.
SweepRecording synth_recording(const SynthTargetSpec& spec, std::size_t n_sweeps, std::size_t rp,
                               double sweep_freq_hz, std::uint64_t seed);

/// Doppler bin of a radial velocity in a `tw`-point DFT over slow time.
/// Negative frequencies wrap to the upper half of [0, tw).
std::size_t predict_doppler_bin(double velocity_mps, double sweep_freq_hz, std::size_t tw,
                                double wavelength_m = kDefaultWavelengthM);

// Imports a headerless little-endian dump of complex64 samples (sensor-major,
// then time, then range) into a recording. This is the entry point for users
// of the public gesture download after they export raw I/Q to that layout;
// datasets distributed as precomputed features cannot be converted back.
struct RawImportSpec {
  std::uint32_t sensors = 1;
  std::uint32_t range_points = 0;
  double sweep_freq_hz = 160.0;
  double range_start_m = 0.07;
  double range_step_m = kDefaultRangeStepM;
  std::uint32_t label = kUnlabeled;
  std::uint32_t user_id = 0;
  std::uint32_t session_id = 0;
};
SweepRecording import_raw_iq(std::span<const std::uint8_t> bytes, const RawImportSpec& spec);

}  // namespace tinyradar
