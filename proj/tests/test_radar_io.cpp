#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "tinyradar/byte_io.hpp"
#include "tinyradar/corpus.hpp"
#include "tinyradar/errors.hpp"
#include "tinyradar/radar_io.hpp"

using namespace tinyradar;

namespace {

SweepRecording make_recording(std::uint32_t sensors, std::uint32_t n, std::uint32_t rp) {
  SweepRecording rec;
  rec.sensors = sensors;
  rec.sweeps = n;
  rec.range_points = rp;
  rec.sweep_freq_mhz = 160000;
  rec.label = 3;
  rec.user_id = 7;
  rec.session_id = 2;
  rec.range_start_m = 0.07;
  rec.samples.resize(std::size_t{sensors} * n * rp);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    rec.samples[i] = {static_cast<float>(i % 97) * 0.25f, -static_cast<float>(i % 13)};
  }
  return rec;
}

}  // namespace

TEST_SUITE("radar_io") {
  TEST_CASE("TRD1 round trip is bit identical") {
    const SweepRecording rec = make_recording(2, 480, 492);
    const auto bytes = encode_recording(rec);
    CHECK(bytes.size() == kTrd1HeaderBytes + 480u * 492u * 2u * 8u);
    const SweepRecording back = decode_recording(bytes);
    CHECK(back == rec);
    CHECK(encode_recording(back) == bytes);
  }

  TEST_CASE("TRD1 header layout is little endian") {
    SweepRecording rec = make_recording(1, 2, 3);
    const auto bytes = encode_recording(rec);
    CHECK(std::memcmp(bytes.data(), "TRD1", 4) == 0);
    bytes::Reader r(bytes);
    r.expect_magic("TRD1", "test");
    CHECK(r.u32("v") == 1);
    CHECK(r.u32("c") == 1);
    CHECK(r.u32("n") == 2);
    CHECK(r.u32("rp") == 3);
    CHECK(r.u32("f") == 160000);
    CHECK(r.u32("label") == 3);
    CHECK(r.u32("user") == 7);
    CHECK(r.u32("session") == 2);
    CHECK(r.f64("start") == 0.07);
    CHECK(r.f64("step") == kDefaultRangeStepM);
    CHECK(r.f32("re") == rec.samples[0].real());
  }

  TEST_CASE("TRD1 rejects malformed input") {
    const auto good = encode_recording(make_recording(1, 4, 5));
    SUBCASE("bad magic") {
      auto bad = good;
      std::memcpy(bad.data(), "XXXX", 4);
      CHECK_THROWS_AS(decode_recording(bad), FormatError);
    }
    SUBCASE("bad version") {
      auto bad = good;
      bad[4] = 2;
      CHECK_THROWS_AS(decode_recording(bad), FormatError);
    }
    SUBCASE("sensor count 3") {
      auto bad = good;
      bad[8] = 3;
      CHECK_THROWS_AS(decode_recording(bad), ValidationError);
    }
    SUBCASE("truncated payload") {
      auto bad = good;
      bad.pop_back();
      CHECK_THROWS_AS(decode_recording(bad), LengthError);
    }
    SUBCASE("truncated header") {
      std::vector<std::uint8_t> bad(good.begin(), good.begin() + 20);
      CHECK_THROWS_AS(decode_recording(bad), LengthError);
    }
    SUBCASE("trailing bytes") {
      auto bad = good;
      bad.push_back(0);
      CHECK_THROWS_AS(decode_recording(bad), LengthError);
    }
  }

  TEST_CASE("file save and load") {
    const auto path = std::filesystem::temp_directory_path() / "tinyradar_test_rec.trd";
    const SweepRecording rec = make_recording(2, 10, 7);
    save_recording(path.string(), rec);
    CHECK(load_recording(path.string()) == rec);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_recording(path.string()), IoError);
  }

  TEST_CASE("frame_stream counts and contents") {
    CHECK(frame_stream(make_recording(1, 480, 4), 32, 32).size() == 15);
    CHECK(frame_stream(make_recording(1, 64, 4), 32, 16).size() == 3);

    const SweepRecording rec = make_recording(2, 32, 4);
    const auto one = frame_stream(rec, 32, 1);
    REQUIRE(one.size() == 1);
    for (std::size_t t = 0; t < 32; ++t)
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 2; ++c) CHECK(one[0].at(t, r, c) == rec.at(c, t, r));

    const SweepRecording long_rec = make_recording(2, 100, 3);
    const auto frames = frame_stream(long_rec, 32, 32);
    REQUIRE(frames.size() == 3);
    for (std::size_t k = 0; k < frames.size(); ++k) {
      CHECK(frames[k].window_index == k);
      for (std::size_t t = 0; t < 32; ++t)
        for (std::size_t r = 0; r < 3; ++r)
          for (std::size_t c = 0; c < 2; ++c)
            CHECK(frames[k].at(t, r, c) == long_rec.at(c, k * 32 + t, r));
    }
  }

  TEST_CASE("frame_stream errors") {
    const SweepRecording rec = make_recording(1, 10, 4);
    CHECK_THROWS_AS(frame_stream(rec, 11, 1), EmptyResultError);
    CHECK_THROWS_AS(frame_stream(rec, 4, 0), ValidationError);
  }

  TEST_CASE("synth_recording static target is constant in time") {
    SynthTargetSpec spec;
    const SweepRecording rec = synth_recording(spec, 16, 200, 160.0, 1);
    for (std::size_t t = 1; t < 16; ++t)
      for (std::size_t r = 0; r < 200; ++r) CHECK(rec.at(0, t, r) == rec.at(0, 0, r));
    CHECK_FALSE(rec.target_left_window);
  }

  TEST_CASE("synth_recording phase increment follows 4 pi v / (lambda f)") {
    SynthTargetSpec spec;
    spec.velocity_mps = 0.1;
    spec.initial_range_m = 0.1;
    const SweepRecording rec = synth_recording(spec, 8, 200, 160.0, 1);
    const double expected = 4.0 * std::numbers::pi * 0.1 / (kDefaultWavelengthM * 160.0);
    CHECK(expected == doctest::Approx(1.572).epsilon(1e-3));
    // Bin nearest the target: the envelope is real, so the phase is the carrier's.
    const std::size_t r = static_cast<std::size_t>(std::lround((0.1 - 0.07) / kDefaultRangeStepM));
    for (std::size_t t = 0; t + 1 < 8; ++t) {
      const std::complex<double> a(rec.at(0, t, r).real(), rec.at(0, t, r).imag());
      const std::complex<double> b(rec.at(0, t + 1, r).real(), rec.at(0, t + 1, r).imag());
      const double step = std::arg(b / a);
      CHECK(step == doctest::Approx(expected).epsilon(1e-5));
    }
  }

  TEST_CASE("synth_recording is deterministic and seed dependent") {
    SynthTargetSpec spec;
    spec.velocity_mps = -0.05;
    spec.noise_std = 0.1;
    const auto a = synth_recording(spec, 40, 30, 160.0, 42);
    const auto b = synth_recording(spec, 40, 30, 160.0, 42);
    const auto c = synth_recording(spec, 40, 30, 160.0, 43);
    CHECK(a == b);
    CHECK_FALSE(a == c);
  }

  TEST_CASE("synth_recording flags a target leaving the window") {
    SynthTargetSpec spec;
    spec.initial_range_m = 0.08;
    spec.velocity_mps = -0.2;
    const auto rec = synth_recording(spec, 64, 50, 160.0, 1);
    CHECK(rec.target_left_window);
    spec.envelope_sigma_m = 0.0;
    CHECK_THROWS_AS(synth_recording(spec, 64, 50, 160.0, 1), ValidationError);
  }

  TEST_CASE("predict_doppler_bin") {
    CHECK(predict_doppler_bin(0.0, 160.0, 32) == 0);
    CHECK(predict_doppler_bin(0.1, 160.0, 32) == 8);
    CHECK(predict_doppler_bin(-0.1, 160.0, 32) == 24);
    CHECK(predict_doppler_bin(0.05, 160.0, 32) == 4);
    CHECK(predict_doppler_bin(-0.05, 160.0, 32) == 28);
    // 2 * 0.2 / 4.9965e-3 = 80.06 Hz is above the 80 Hz Nyquist bound.
    CHECK_THROWS_AS(predict_doppler_bin(0.2, 160.0, 32), ValidationError);
    CHECK_THROWS_AS(predict_doppler_bin(-0.2, 160.0, 32), ValidationError);
    CHECK_THROWS_WITH(predict_doppler_bin(0.2, 160.0, 32),
                      doctest::Contains("Nyquist"));
  }

  TEST_CASE("import_raw_iq") {
    std::vector<std::uint8_t> raw;
    bytes::Writer w;
    for (int i = 0; i < 2 * 3 * 4; ++i) {
      w.f32(static_cast<float>(i));
      w.f32(static_cast<float>(-i));
    }
    raw = w.data();
    RawImportSpec spec;
    spec.sensors = 2;
    spec.range_points = 4;
    const SweepRecording rec = import_raw_iq(raw, spec);
    CHECK(rec.sweeps == 3);
    CHECK(rec.at(1, 2, 3) == IqSample(23.0f, -23.0f));
    raw.pop_back();
    CHECK_THROWS_AS(import_raw_iq(raw, spec), LengthError);
  }

  TEST_CASE("synthetic corpus") {
    SynthCorpusConfig cfg;
    cfg.per_class = 4;
    const auto corpus = synth_corpus(cfg);
    REQUIRE(corpus.size() == 20);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      CHECK(corpus[i].label == i % 5);
      CHECK(corpus[i].sweeps == 160);
      CHECK_FALSE(corpus[i].target_left_window);
    }
    CHECK(synth_corpus_recording(cfg, 7) == corpus[7]);
    const auto v = class_velocities(cfg);
    CHECK(v.front() == doctest::Approx(-0.15));
    CHECK(v.back() == doctest::Approx(0.15));
  }
}
