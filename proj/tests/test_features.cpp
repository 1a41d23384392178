#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tinyradar/errors.hpp"
#include "tinyradar/features.hpp"

using namespace tinyradar;

namespace {

RawFrame random_frame(std::size_t tw, std::size_t rp, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  RawFrame f;
  f.tw = tw;
  f.range_points = rp;
  f.sensors = c;
  f.data.resize(tw * rp * c);
  for (auto& s : f.data) s = {g(rng), g(rng)};
  return f;
}

std::vector<std::complex<double>> column(const RawFrame& f, std::size_t r, std::size_t c) {
  std::vector<std::complex<double>> x(f.tw);
  for (std::size_t t = 0; t < f.tw; ++t) x[t] = {f.at(t, r, c).real(), f.at(t, r, c).imag()};
  return x;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("RFDM of a constant column is a DC spike") {
    RawFrame f;
    f.tw = 32;
    f.range_points = 3;
    f.sensors = 1;
    f.data.assign(32 * 3, IqSample(0.5f, -1.5f));
    const FeatureFrame out = compute_rfdm(f);
    CHECK(out.kind == FeatureKind::Rfdm);
    CHECK(out.data.size() == 32u * 3u);
    const double mag = std::abs(std::complex<double>(0.5, -1.5));
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(out.at(0, r, 0) == doctest::Approx(32.0 * mag).epsilon(1e-12));
      for (std::size_t k = 1; k < 32; ++k) CHECK(std::abs(out.at(k, r, 0)) < 1e-12);
    }
  }

  TEST_CASE("RFDM matches the brute-force DFT on random frames") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const RawFrame f = random_frame(8, 4, 1 + trial % 2, rng);
      const FeatureFrame out = compute_rfdm(f);
      for (std::size_t c = 0; c < f.sensors; ++c)
        for (std::size_t r = 0; r < f.range_points; ++r) {
          const auto ref = oracle::dft_magnitude(column(f, r, c));
          for (std::size_t k = 0; k < f.tw; ++k) {
            CHECK(std::abs(out.at(k, r, c) - ref[k]) <= 1e-10 * std::max(1.0, ref[k]));
          }
        }
    }
  }

  TEST_CASE("Parseval and phase invariance") {
    std::mt19937_64 rng(11);
    const RawFrame f = random_frame(32, 6, 2, rng);
    const FeatureFrame out = compute_rfdm(f);
    RawFrame rotated = f;
    const std::complex<float> rot = std::polar(1.0f, 0.7f);
    for (auto& s : rotated.data) s *= rot;
    const FeatureFrame out_rot = compute_rfdm(rotated);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t r = 0; r < 6; ++r) {
        double time_energy = 0.0, freq_energy = 0.0;
        for (std::size_t t = 0; t < 32; ++t) {
          time_energy += std::norm(std::complex<double>(f.at(t, r, c).real(), f.at(t, r, c).imag()));
          freq_energy += out.at(t, r, c) * out.at(t, r, c);
          CHECK(out_rot.at(t, r, c) == doctest::Approx(out.at(t, r, c)).epsilon(1e-5));
        }
        CHECK(std::abs(freq_energy - 32.0 * time_energy) / (32.0 * time_energy) < 1e-9);
      }
  }

  TEST_CASE("RFDM rejects non-finite samples with their index") {
    std::mt19937_64 rng(1);
    RawFrame f = random_frame(4, 3, 2, rng);
    f.at(2, 1, 1) = {std::numeric_limits<float>::quiet_NaN(), 0.0f};
    CHECK_THROWS_AS(compute_rfdm(f), NumericError);
    CHECK_THROWS_WITH(compute_rfdm(f), doctest::Contains("t=2"));
    f.at(2, 1, 1) = {0.0f, std::numeric_limits<float>::infinity()};
    CHECK_THROWS_AS(compute_rfdm(f), NumericError);
  }

  TEST_CASE("normalize_frame") {
    FeatureFrame f;
    f.tw = 2;
    f.range_points = 2;
    f.channels = 2;
    f.data = {1.0, 0.0, 4.0, 0.0, 2.0, 0.0, 3.0, 0.0};
    const FeatureFrame n = normalize_frame(f);
    CHECK(n.data == std::vector<double>{0.25, 0.0, 1.0, 0.0, 0.5, 0.0, 0.75, 0.0});
    CHECK(normalize_frame(n).data == n.data);
    FeatureFrame zero = f;
    std::fill(zero.data.begin(), zero.data.end(), 0.0);
    CHECK(normalize_frame(zero).data == zero.data);
  }

  TEST_CASE("aux feature lengths follow the feature table") {
    std::mt19937_64 rng(2);
    const RawFrame g11 = random_frame(32, 492, 2, rng);
    const RawFrame g5 = random_frame(32, 414, 1, rng);
    CHECK(aux_feature(g11, AuxKind::EnergySoR).length() == 492);
    CHECK(aux_feature(g5, AuxKind::EnergySoR).length() == 414);
    CHECK(aux_feature(g5, AuxKind::EnergySoT).length() == 32);
    CHECK(aux_feature(g5, AuxKind::VariationSoR).length() == 414);
    CHECK(aux_feature(g5, AuxKind::VariationSoT).length() == 32);
    CHECK(aux_feature(g11, AuxKind::CentreOfMass).length() == 96);
    CHECK(raw_iq_feature(g5).size() == 26496);
    CHECK(raw_iq_feature(g11).size() == 62976);
    CHECK(compute_rfdm(g5).size() == 13248);
    CHECK(compute_rfdm(g11).size() == 31488);
    CHECK(signal_variation_2d(g5).size() == 25668);
  }

  TEST_CASE("aux feature values against loops") {
    std::mt19937_64 rng(3);
    const RawFrame f = random_frame(5, 4, 2, rng);
    auto z = [&](std::size_t t, std::size_t r, std::size_t c) {
      return std::complex<double>(f.at(t, r, c).real(), f.at(t, r, c).imag());
    };
    const auto esor = aux_feature(f, AuxKind::EnergySoR).values;
    const auto esot = aux_feature(f, AuxKind::EnergySoT).values;
    const auto vsor = aux_feature(f, AuxKind::VariationSoR).values;
    const auto vsot = aux_feature(f, AuxKind::VariationSoT).values;
    for (std::size_t r = 0; r < 4; ++r) {
      double e = 0.0, v = 0.0;
      for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 2; ++c) {
          e += std::norm(z(t, r, c));
          if (t + 1 < 5) v += std::abs(z(t + 1, r, c) - z(t, r, c));
        }
      CHECK(esor[r] == doctest::Approx(e).epsilon(1e-12));
      CHECK(vsor[r] == doctest::Approx(v).epsilon(1e-12));
    }
    for (std::size_t t = 0; t < 5; ++t) {
      double e = 0.0, v = 0.0;
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 2; ++c) {
          e += std::norm(z(t, r, c));
          if (t + 1 < 5) v += std::abs(z(t + 1, r, c) - z(t, r, c));
        }
      CHECK(esot[t] == doctest::Approx(e).epsilon(1e-12));
      CHECK(vsot[t] == doctest::Approx(v).epsilon(1e-12));
    }
    CHECK(vsot[4] == 0.0);
  }

  TEST_CASE("centre of mass of a single reflector") {
    RawFrame f;
    f.tw = 3;
    f.range_points = 5;
    f.sensors = 1;
    f.data.assign(15, IqSample{});
    f.at(0, 2, 0) = {3.0f, 4.0f};
    f.at(1, 1, 0) = {1.0f, 0.0f};
    f.at(1, 3, 0) = {1.0f, 0.0f};
    const auto com = aux_feature(f, AuxKind::CentreOfMass).values;
    CHECK(com[0] == doctest::Approx(2.0));
    CHECK(com[1] == doctest::Approx(5.0));
    CHECK(com[2] == doctest::Approx(0.0));
    CHECK(com[3] == doctest::Approx(2.0));
    CHECK(com[4] == doctest::Approx(2.0));
    CHECK(com[5] == doctest::Approx(1.0));
    CHECK(com[6] == 0.0);
    CHECK(com[7] == 0.0);
  }

  TEST_CASE("aux feature edge cases") {
    RawFrame zero;
    zero.tw = 4;
    zero.range_points = 3;
    zero.sensors = 1;
    zero.data.assign(12, IqSample{});
    for (AuxKind k : {AuxKind::EnergySoR, AuxKind::EnergySoT, AuxKind::VariationSoR,
                      AuxKind::VariationSoT, AuxKind::CentreOfMass}) {
      for (double v : aux_feature(zero, k).values) CHECK(v == 0.0);
    }
    CHECK_THROWS_AS(aux_feature(zero, static_cast<AuxKind>(99)), ValidationError);
    RawFrame single = zero;
    single.tw = 1;
    single.data.resize(3);
    CHECK_THROWS_AS(aux_feature(single, AuxKind::VariationSoT), ValidationError);
    CHECK_THROWS_AS(signal_variation_2d(single), ValidationError);
  }

  TEST_CASE("signal variation planes") {
    RawFrame f;
    f.tw = 4;
    f.range_points = 2;
    f.sensors = 1;
    f.data.resize(8);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t r = 0; r < 2; ++r)
        f.at(t, r, 0) = {static_cast<float>(2 * t + r), static_cast<float>(-3.0 * t)};
    const FeatureFrame d = signal_variation_2d(f);
    CHECK(d.tw == 3);
    CHECK(d.channels == 2);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t r = 0; r < 2; ++r) {
        CHECK(d.at(t, r, 0) == 2.0);
        CHECK(d.at(t, r, 1) == -3.0);
      }
    RawFrame constant = f;
    std::fill(constant.data.begin(), constant.data.end(), IqSample(1.0f, 2.0f));
    for (double v : signal_variation_2d(constant).data) CHECK(v == 0.0);
  }

  TEST_CASE("RFDM peak of a moving synthetic target sits on the Doppler bin") {
    SynthTargetSpec spec;
    spec.velocity_mps = 0.1;
    spec.initial_range_m = 0.12;
    const auto rec = synth_recording(spec, 32, 300, 160.0, 1);
    const auto frames = frame_stream(rec, 32, 32);
    const FeatureFrame rfdm = compute_rfdm(frames[0]);
    const double mid = spec.initial_range_m + 0.1 * 16.0 / 160.0;
    const auto r = static_cast<std::size_t>(std::lround((mid - 0.07) / kDefaultRangeStepM));
    std::size_t best = 0;
    for (std::size_t k = 1; k < 32; ++k)
      if (rfdm.at(k, r, 0) > rfdm.at(best, r, 0)) best = k;
    CHECK(best == 8);
    CHECK(best == predict_doppler_bin(0.1, 160.0, 32));
  }
}
