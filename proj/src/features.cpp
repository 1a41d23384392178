#include "tinyradar/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "tinyradar/errors.hpp"

namespace tinyradar {

namespace {

void check_frame(const RawFrame& frame) {
  if (frame.data.size() != frame.tw * frame.range_points * frame.sensors) {
    throw ValidationError("raw frame: data size does not match TW*RP*C");
  }
}

std::complex<double> widen(IqSample s) { return {s.real(), s.imag()}; }

}  // namespace

FeatureFrame compute_rfdm(const RawFrame& frame) {
  check_frame(frame);
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    const IqSample s = frame.data[i];
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
      const std::size_t c = i % frame.sensors;
      const std::size_t r = (i / frame.sensors) % frame.range_points;
      const std::size_t t = i / (frame.sensors * frame.range_points);
      throw NumericError("compute_rfdm: non-finite sample at (t=" + std::to_string(t) +
                         ", r=" + std::to_string(r) + ", c=" + std::to_string(c) + ")");
    }
  }

  const std::size_t tw = frame.tw;
  // Twiddles exp(-2 pi i k / TW) for k in [0, TW); index f*t mod TW.
  std::vector<std::complex<double>> twiddle(tw);
  for (std::size_t k = 0; k < tw; ++k) {
    twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) /
                                     static_cast<double>(tw));
  }

  FeatureFrame out;
  out.tw = tw;
  out.range_points = frame.range_points;
  out.channels = frame.sensors;
  out.kind = FeatureKind::Rfdm;
  out.data.assign(frame.data.size(), 0.0);

  std::vector<std::complex<double>> column(tw);
  for (std::size_t c = 0; c < frame.sensors; ++c) {
    for (std::size_t r = 0; r < frame.range_points; ++r) {
      for (std::size_t t = 0; t < tw; ++t) {
        column[t] = widen(frame.at(t, r, c));
      }
      for (std::size_t f = 0; f < tw; ++f) {
        std::complex<double> acc{};
        for (std::size_t t = 0; t < tw; ++t) {
          acc += column[t] * twiddle[(f * t) % tw];
        }
        out.at(f, r, c) = std::abs(acc);
      }
    }
  }
  return out;
}

FeatureFrame normalize_frame(const FeatureFrame& frame) {
  FeatureFrame out = frame;
  if (frame.channels == 0) {
    return out;
  }
  std::vector<double> peak(frame.channels, 0.0);
  for (std::size_t i = 0; i < frame.data.size(); ++i) {
    double& p = peak[i % frame.channels];
    p = std::max(p, std::abs(frame.data[i]));
  }
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double p = peak[i % frame.channels];
    if (p > 0.0) {
      out.data[i] /= p;
    }
  }
  return out;
}

AuxFeatureVector aux_feature(const RawFrame& frame, AuxKind kind) {
  check_frame(frame);
  const std::size_t tw = frame.tw;
  const std::size_t rp = frame.range_points;
  AuxFeatureVector out;
  out.kind = kind;

  auto energy = [&](std::size_t t, std::size_t r) {
    double e = 0.0;
    for (std::size_t c = 0; c < frame.sensors; ++c) {
      e += std::norm(widen(frame.at(t, r, c)));
    }
    return e;
  };
  auto variation = [&](std::size_t t, std::size_t r) {
    double v = 0.0;
    for (std::size_t c = 0; c < frame.sensors; ++c) {
      v += std::abs(widen(frame.at(t + 1, r, c)) - widen(frame.at(t, r, c)));
    }
    return v;
  };
  auto need_two_steps = [&] {
    if (tw < 2) {
      throw ValidationError("aux_feature: variation features need TW >= 2");
    }
  };

  switch (kind) {
    case AuxKind::EnergySoR:
      out.values.assign(rp, 0.0);
      for (std::size_t t = 0; t < tw; ++t) {
        for (std::size_t r = 0; r < rp; ++r) {
          out.values[r] += energy(t, r);
        }
      }
      break;
    case AuxKind::EnergySoT:
      out.values.assign(tw, 0.0);
      for (std::size_t t = 0; t < tw; ++t) {
        for (std::size_t r = 0; r < rp; ++r) {
          out.values[t] += energy(t, r);
        }
      }
      break;
    case AuxKind::VariationSoR:
      need_two_steps();
      out.values.assign(rp, 0.0);
      for (std::size_t t = 0; t + 1 < tw; ++t) {
        for (std::size_t r = 0; r < rp; ++r) {
          out.values[r] += variation(t, r);
        }
      }
      break;
    case AuxKind::VariationSoT:
      need_two_steps();
      out.values.assign(tw, 0.0);  // slot TW-1 stays zero
      for (std::size_t t = 0; t + 1 < tw; ++t) {
        for (std::size_t r = 0; r < rp; ++r) {
          out.values[t] += variation(t, r);
        }
      }
      break;
    case AuxKind::CentreOfMass:
      out.values.assign(3 * tw, 0.0);
      for (std::size_t t = 0; t < tw; ++t) {
        double total = 0.0;
        double first = 0.0;
        for (std::size_t r = 0; r < rp; ++r) {
          double m = 0.0;
          for (std::size_t c = 0; c < frame.sensors; ++c) {
            m += std::abs(widen(frame.at(t, r, c)));
          }
          total += m;
          first += static_cast<double>(r) * m;
        }
        if (total <= 0.0) {
          continue;
        }
        const double mean = first / total;
        double second = 0.0;
        for (std::size_t r = 0; r < rp; ++r) {
          double m = 0.0;
          for (std::size_t c = 0; c < frame.sensors; ++c) {
            m += std::abs(widen(frame.at(t, r, c)));
          }
          const double d = static_cast<double>(r) - mean;
          second += d * d * m;
        }
        out.values[3 * t] = mean;
        out.values[3 * t + 1] = total;
        out.values[3 * t + 2] = second / total;
      }
      break;
    default:
      throw ValidationError("aux_feature: unknown feature kind " +
                            std::to_string(static_cast<int>(kind)));
  }
  return out;
}

FeatureFrame signal_variation_2d(const RawFrame& frame) {
  check_frame(frame);
  if (frame.tw < 2) {
    throw ValidationError("signal_variation_2d: needs TW >= 2");
  }
  FeatureFrame out;
  out.tw = frame.tw - 1;
  out.range_points = frame.range_points;
  out.channels = 2 * frame.sensors;
  out.kind = FeatureKind::SignalVariation2D;
  out.data.resize(out.tw * out.range_points * out.channels);
  for (std::size_t t = 0; t + 1 < frame.tw; ++t) {
    for (std::size_t r = 0; r < frame.range_points; ++r) {
      for (std::size_t c = 0; c < frame.sensors; ++c) {
        const std::complex<double> d = widen(frame.at(t + 1, r, c)) - widen(frame.at(t, r, c));
        out.at(t, r, 2 * c) = d.real();
        out.at(t, r, 2 * c + 1) = d.imag();
      }
    }
  }
  return out;
}

FeatureFrame raw_iq_feature(const RawFrame& frame) {
  check_frame(frame);
  FeatureFrame out;
  out.tw = frame.tw;
  out.range_points = frame.range_points;
  out.channels = 2 * frame.sensors;
  out.kind = FeatureKind::RawIq;
  out.data.resize(out.tw * out.range_points * out.channels);
  for (std::size_t t = 0; t < frame.tw; ++t) {
    for (std::size_t r = 0; r < frame.range_points; ++r) {
      for (std::size_t c = 0; c < frame.sensors; ++c) {
        out.at(t, r, 2 * c) = frame.at(t, r, c).real();
        out.at(t, r, 2 * c + 1) = frame.at(t, r, c).imag();
      }
    }
  }
  return out;
}

std::string_view to_string(AuxKind kind) {
  switch (kind) {
    case AuxKind::EnergySoR: return "energy_sor";
    case AuxKind::EnergySoT: return "energy_sot";
    case AuxKind::VariationSoR: return "variation_sor";
    case AuxKind::VariationSoT: return "variation_sot";
    case AuxKind::CentreOfMass: return "centre_of_mass";
  }
  return "unknown";
}

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Rfdm: return "rfdm";
    case FeatureKind::RawIq: return "raw_iq";
    case FeatureKind::SignalVariation2D: return "signal_variation_2d";
  }
  return "unknown";
}

}  // namespace tinyradar
