#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "tinyradar/radar_io.hpp"

namespace tinyradar {

enum class FeatureKind { Rfdm, RawIq, SignalVariation2D };

/// Real-valued feature window laid out (time, range, channel).
///
/// RFDM frames keep one channel per sensor. RawIq and SignalVariation2D keep
/// two planes per sensor (real, imaginary), so channels = 2 * sensors.
struct FeatureFrame {
  std::size_t tw = 0;
  std::size_t range_points = 0;
  std::size_t channels = 0;
  FeatureKind kind = FeatureKind::Rfdm;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
  std::size_t index(std::size_t t, std::size_t r, std::size_t c) const {
    return (t * range_points + r) * channels + c;
  }
  double at(std::size_t t, std::size_t r, std::size_t c) const { return data[index(t, r, c)]; }
  double& at(std::size_t t, std::size_t r, std::size_t c) { return data[index(t, r, c)]; }
};

enum class AuxKind { EnergySoR, EnergySoT, VariationSoR, VariationSoT, CentreOfMass };

struct AuxFeatureVector {
  AuxKind kind = AuxKind::EnergySoR;
  std::vector<double> values;
  std::size_t length() const { return values.size(); }
};

/// Range-frequency Doppler map: per sensor and range bin, the magnitude of
/// the TW-point DFT over slow time,
///   out(f, r) = | sum_t S(t, r) exp(-2 pi i f t / TW) |.
/// Throws NumericError naming the first non-finite input sample.
FeatureFrame compute_rfdm(const RawFrame& frame);

/// Divides each channel by its maximum absolute value. All-zero channels are
/// passed through unchanged.
FeatureFrame normalize_frame(const FeatureFrame& frame);

/// Hand-crafted reductions of a raw frame. Sensors are combined by summing
/// the per-element quantity (|S|^2 or |dS|) across sensors before reducing.
///
///   EnergySoR[r]    = sum_t |S(t,r)|^2                       (length RP)
///   EnergySoT[t]    = sum_r |S(t,r)|^2                       (length TW)
///   VariationSoR[r] = sum_t |S(t+1,r) - S(t,r)|              (length RP)
///   VariationSoT[t] = sum_r |S(t+1,r) - S(t,r)|, last slot 0 (length TW)
///   CentreOfMass    = per step (mean range index, total magnitude,
///                     range variance) weighted by |S|        (length 3*TW)
AuxFeatureVector aux_feature(const RawFrame& frame, AuxKind kind);

/// First difference over slow time with real and imaginary planes kept:
/// (TW-1) x RP x (2*sensors).
FeatureFrame signal_variation_2d(const RawFrame& frame);

/// The unprocessed window as real/imaginary planes: TW x RP x (2*sensors).
FeatureFrame raw_iq_feature(const RawFrame& frame);

std::string_view to_string(AuxKind kind);
std::string_view to_string(FeatureKind kind);

}  // namespace tinyradar
