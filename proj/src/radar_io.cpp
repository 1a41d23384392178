#include "tinyradar/radar_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "tinyradar/byte_io.hpp"
#include "tinyradar/errors.hpp"

namespace tinyradar {

namespace bytes {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path + " for reading");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) {
    throw IoError("short write to " + path);
  }
}

}  // namespace bytes

namespace {

constexpr std::uint32_t kTrd1Version = 1;

}  // namespace

void SweepRecording::validate() const {
  if (sensors != 1 && sensors != 2) {
    throw ValidationError("recording: sensor count must be 1 or 2, got " + std::to_string(sensors));
  }
  if (sweeps < 1) {
    throw ValidationError("recording: needs at least one sweep");
  }
  if (range_points < 1) {
    throw ValidationError("recording: needs at least one range point");
  }
  if (sweep_freq_mhz == 0) {
    throw ValidationError("recording: sweep frequency must be positive");
  }
  if (!(range_step_m > 0.0)) {
    throw ValidationError("recording: range step must be positive");
  }
  const std::size_t expected = std::size_t{sensors} * sweeps * range_points;
  if (samples.size() != expected) {
    throw ValidationError("recording: sample count " + std::to_string(samples.size()) +
                          " does not match C*N*RP = " + std::to_string(expected));
  }
}

bool operator==(const SweepRecording& a, const SweepRecording& b) {
  auto same_bits = [](double x, double y) {
    return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
  };
  if (a.sensors != b.sensors || a.sweeps != b.sweeps || a.range_points != b.range_points ||
      a.sweep_freq_mhz != b.sweep_freq_mhz || a.label != b.label || a.user_id != b.user_id ||
      a.session_id != b.session_id || !same_bits(a.range_start_m, b.range_start_m) ||
      !same_bits(a.range_step_m, b.range_step_m) || a.samples.size() != b.samples.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a.samples[i].real()) !=
            std::bit_cast<std::uint32_t>(b.samples[i].real()) ||
        std::bit_cast<std::uint32_t>(a.samples[i].imag()) !=
            std::bit_cast<std::uint32_t>(b.samples[i].imag())) {
      return false;
    }
  }
  return true;
}

std::vector<std::uint8_t> encode_recording(const SweepRecording& rec) {
  rec.validate();
  bytes::Writer w;
  w.magic("TRD1");
  w.u32(kTrd1Version);
  w.u32(rec.sensors);
  w.u32(rec.sweeps);
  w.u32(rec.range_points);
  w.u32(rec.sweep_freq_mhz);
  w.u32(rec.label);
  w.u32(rec.user_id);
  w.u32(rec.session_id);
  w.f64(rec.range_start_m);
  w.f64(rec.range_step_m);
  for (const IqSample& s : rec.samples) {
    w.f32(s.real());
    w.f32(s.imag());
  }
  return std::move(w).take();
}

SweepRecording decode_recording(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  r.expect_magic("TRD1", "TRD1");
  const std::uint32_t version = r.u32("TRD1 header");
  if (version != kTrd1Version) {
    throw FormatError("TRD1: unsupported version " + std::to_string(version));
  }
  SweepRecording rec;
  rec.sensors = r.u32("TRD1 header");
  rec.sweeps = r.u32("TRD1 header");
  rec.range_points = r.u32("TRD1 header");
  rec.sweep_freq_mhz = r.u32("TRD1 header");
  rec.label = r.u32("TRD1 header");
  rec.user_id = r.u32("TRD1 header");
  rec.session_id = r.u32("TRD1 header");
  rec.range_start_m = r.f64("TRD1 header");
  rec.range_step_m = r.f64("TRD1 header");

  if (rec.sensors != 1 && rec.sensors != 2) {
    throw ValidationError("TRD1: sensor count must be 1 or 2, got " + std::to_string(rec.sensors));
  }
  const std::uint64_t count = std::uint64_t{rec.sensors} * rec.sweeps * rec.range_points;
  if (r.remaining() / 8 < count) {
    throw LengthError("TRD1: payload truncated, header declares " + std::to_string(count) +
                      " samples but only " + std::to_string(r.remaining()) + " bytes follow");
  }
  rec.samples.resize(static_cast<std::size_t>(count));
  for (IqSample& s : rec.samples) {
    const float re = r.f32("TRD1 payload");
    const float im = r.f32("TRD1 payload");
    s = {re, im};
  }
  r.expect_end("TRD1");
  rec.validate();
  return rec;
}

SweepRecording load_recording(const std::string& path) {
  return decode_recording(bytes::read_file(path));
}

void save_recording(const std::string& path, const SweepRecording& rec) {
  bytes::write_file(path, encode_recording(rec));
}

std::vector<RawFrame> frame_stream(const SweepRecording& rec, std::size_t tw, std::size_t stride) {
  rec.validate();
  if (tw == 0 || stride == 0) {
    throw ValidationError("frame_stream: window and stride must be >= 1");
  }
  if (tw > rec.sweeps) {
    throw EmptyResultError("frame_stream: window of " + std::to_string(tw) +
                           " sweeps exceeds recording length " + std::to_string(rec.sweeps) +
                           "; no frame can be formed");
  }
  const std::size_t count = (rec.sweeps - tw) / stride + 1;
  std::vector<RawFrame> frames;
  frames.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    RawFrame f;
    f.tw = tw;
    f.range_points = rec.range_points;
    f.sensors = rec.sensors;
    f.window_index = k;
    f.data.resize(tw * rec.range_points * rec.sensors);
    for (std::size_t t = 0; t < tw; ++t) {
      for (std::size_t r = 0; r < rec.range_points; ++r) {
        for (std::size_t c = 0; c < rec.sensors; ++c) {
          f.at(t, r, c) = rec.at(c, k * stride + t, r);
        }
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

SweepRecording synth_recording(const SynthTargetSpec& spec, std::size_t n_sweeps, std::size_t rp,
                               double sweep_freq_hz, std::uint64_t seed) {
  if (n_sweeps < 1 || rp < 1) {
    throw ValidationError("synth_recording: n_sweeps and rp must be >= 1");
  }
  if (!(spec.envelope_sigma_m > 0.0) || spec.amplitude < 0.0 || spec.noise_std < 0.0) {
    throw ValidationError("synth_recording: need sigma > 0, amplitude >= 0, noise_std >= 0");
  }
  if (!(sweep_freq_hz > 0.0) || !(spec.carrier_wavelength_m > 0.0) || !(spec.range_step_m > 0.0)) {
    throw ValidationError("synth_recording: sweep frequency, wavelength and range step must be > 0");
  }

  SweepRecording rec;
  rec.sensors = spec.sensors;
  rec.sweeps = static_cast<std::uint32_t>(n_sweeps);
  rec.range_points = static_cast<std::uint32_t>(rp);
  rec.sweep_freq_mhz = static_cast<std::uint32_t>(std::llround(sweep_freq_hz * 1000.0));
  rec.label = spec.label;
  rec.user_id = spec.user_id;
  rec.session_id = spec.session_id;
  rec.range_start_m = spec.range_start_m;
  rec.range_step_m = spec.range_step_m;
  rec.samples.assign(std::size_t{rec.sensors} * n_sweeps * rp, IqSample{});

  // Timing uses the stored (millihertz-rounded) rate so that the Doppler
  // content matches what a reader of the file would predict.
  const double fs = rec.sweep_freq_hz();
  const double window_end = spec.range_start_m + static_cast<double>(rp - 1) * spec.range_step_m;
  const double inv_two_sigma2 = 1.0 / (2.0 * spec.envelope_sigma_m * spec.envelope_sigma_m);
  const double k_phase = 4.0 * std::numbers::pi / spec.carrier_wavelength_m;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spec.noise_std / std::numbers::sqrt2);

  for (std::size_t s = 0; s < rec.sensors; ++s) {
    for (std::size_t t = 0; t < n_sweeps; ++t) {
      const double centre = spec.initial_range_m + spec.velocity_mps * static_cast<double>(t) / fs;
      if (centre < spec.range_start_m || centre > window_end) {
        rec.target_left_window = true;
      }
      const std::complex<double> carrier = std::polar(1.0, k_phase * centre);
      for (std::size_t r = 0; r < rp; ++r) {
        const double d = spec.range_start_m + static_cast<double>(r) * spec.range_step_m - centre;
        std::complex<double> v = spec.amplitude * std::exp(-d * d * inv_two_sigma2) * carrier;
        if (spec.noise_std > 0.0) {
          const double nr = noise(rng);
          const double ni = noise(rng);
          v += std::complex<double>(nr, ni);
        }
        rec.at(s, t, r) = IqSample(static_cast<float>(v.real()), static_cast<float>(v.imag()));
      }
    }
  }
  return rec;
}

std::size_t predict_doppler_bin(double velocity_mps, double sweep_freq_hz, std::size_t tw,
                                double wavelength_m) {
  if (tw == 0 || !(sweep_freq_hz > 0.0) || !(wavelength_m > 0.0)) {
    throw ValidationError("predict_doppler_bin: tw, sweep frequency and wavelength must be positive");
  }
  const double doppler_hz = 2.0 * velocity_mps / wavelength_m;
  const double nyquist = sweep_freq_hz / 2.0;
  if (!(std::abs(doppler_hz) < nyquist)) {
    std::ostringstream msg;
    msg << "predict_doppler_bin: Doppler shift " << doppler_hz
        << " Hz aliases; |2v/lambda| must stay below the Nyquist bound sweep_freq/2 = " << nyquist
        << " Hz";
    throw ValidationError(msg.str());
  }
  const double resolution = sweep_freq_hz / static_cast<double>(tw);
  const auto n = static_cast<long long>(tw);
  const long long bin = std::llround(doppler_hz / resolution);
  return static_cast<std::size_t>(((bin % n) + n) % n);
}

SweepRecording import_raw_iq(std::span<const std::uint8_t> data, const RawImportSpec& spec) {
  if (spec.range_points == 0) {
    throw ValidationError("import_raw_iq: range_points must be >= 1");
  }
  const std::size_t per_sweep = std::size_t{spec.sensors} * spec.range_points * 8;
  if (data.size() % per_sweep != 0) {
    throw LengthError("import_raw_iq: " + std::to_string(data.size()) +
                      " bytes is not a whole number of sweeps of " + std::to_string(per_sweep) +
                      " bytes");
  }
  SweepRecording rec;
  rec.sensors = spec.sensors;
  rec.range_points = spec.range_points;
  rec.sweeps = static_cast<std::uint32_t>(data.size() / per_sweep);
  rec.sweep_freq_mhz = static_cast<std::uint32_t>(std::llround(spec.sweep_freq_hz * 1000.0));
  rec.label = spec.label;
  rec.user_id = spec.user_id;
  rec.session_id = spec.session_id;
  rec.range_start_m = spec.range_start_m;
  rec.range_step_m = spec.range_step_m;
  bytes::Reader r(data);
  rec.samples.resize(data.size() / 8);
  for (IqSample& s : rec.samples) {
    const float re = r.f32("raw I/Q");
    const float im = r.f32("raw I/Q");
    s = {re, im};
  }
  rec.validate();
  return rec;
}

}  // namespace tinyradar
