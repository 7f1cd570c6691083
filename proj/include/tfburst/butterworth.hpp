#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "tfburst/error.hpp"

namespace tfburst {

// One biquad in direct form II transposed, a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }
};

// Cascade of second-order sections.
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

  const std::vector<Biquad>& sections() const { return sections_; }

  // Number of poles (the filter order in the usual sense).
  int order() const { return order_; }
  void set_order(int order) { order_ = order; }

  // Complex frequency response at normalized angular frequency omega (rad/sample).
  std::complex<double> response(double omega) const {
    std::complex<double> h = 1.0;
    for (const auto& s : sections_) h *= s.response(omega);
    return h;
  }

  // Single causal pass. `initial_level` seeds every section with the steady
  // state it would reach under a constant input of that level.
  void filter_inplace(std::span<double> x, double initial_level) const {
    double level = initial_level;
    for (const auto& s : sections_) {
      const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
      const double y_ss = dc * level;
      double z2 = s.b2 * level - s.a2 * y_ss;
      double z1 = s.b1 * level - s.a1 * y_ss + z2;
      for (double& v : x) {
        const double in = v;
        const double out = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * out + z2;
        z2 = s.b2 * in - s.a2 * out;
        v = out;
      }
      level = y_ss;
    }
  }

 private:
  std::vector<Biquad> sections_;
  int order_ = 0;
};

namespace detail {

using zc = std::complex<double>;

inline zc bilinear(zc s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

inline double prewarp(double f, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * f / fs);
}

// Normalized analog Butterworth prototype poles (left half plane).
inline std::vector<zc> butter_prototype(int order) {
  std::vector<zc> poles;
  poles.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    poles.push_back(std::polar(1.0, theta));
  }
  return poles;
}

// Groups digital poles into conjugate pairs (or pairs of reals) and zeros two
// at a time, producing biquads with unit numerator gain.
inline std::vector<Biquad> pair_sections(std::vector<zc> poles, std::vector<double> zeros) {
  constexpr double kRealTol = 1e-12;
  std::vector<zc> complex_upper;
  std::vector<double> reals;
  for (const auto& p : poles) {
    if (std::abs(p.imag()) <= kRealTol * std::max(1.0, std::abs(p))) {
      reals.push_back(p.real());
    } else if (p.imag() > 0) {
      complex_upper.push_back(p);
    }
  }
  std::sort(reals.begin(), reals.end());
  std::sort(complex_upper.begin(), complex_upper.end(),
            [](zc a, zc b) { return std::arg(a) < std::arg(b); });

  std::vector<Biquad> out;
  std::size_t zi = 0;
  auto next_zero = [&](double& z, bool& has) {
    has = zi < zeros.size();
    if (has) z = zeros[zi++];
  };
  auto emit = [&](double a1, double a2, int n_poles) {
    Biquad s;
    s.a1 = a1;
    s.a2 = a2;
    double z_a = 0, z_b = 0;
    bool has_a = false, has_b = false;
    next_zero(z_a, has_a);
    if (n_poles == 2) next_zero(z_b, has_b);
    // (1 - za z^-1)(1 - zb z^-1)
    s.b0 = 1.0;
    s.b1 = (has_a ? -z_a : 0.0) + (has_b ? -z_b : 0.0);
    s.b2 = (has_a && has_b) ? z_a * z_b : 0.0;
    out.push_back(s);
  };
  for (const auto& p : complex_upper) emit(-2.0 * p.real(), std::norm(p), 2);
  std::size_t i = 0;
  for (; i + 1 < reals.size(); i += 2) emit(-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1], 2);
  if (i < reals.size()) emit(-reals[i], 0.0, 1);
  return out;
}

inline void normalize_gain(SosFilter& f, double omega) {
  const double g = std::abs(f.response(omega));
  auto sections = f.sections();
  sections.front().b0 /= g;
  sections.front().b1 /= g;
  sections.front().b2 /= g;
  const int order = f.order();
  f = SosFilter(std::move(sections));
  f.set_order(order);
}

}  // namespace detail

// Digital Butterworth low-pass via the bilinear transform with pre-warping.
inline SosFilter butterworth_lowpass(int order, double cutoff_hz, double fs) {
  require(order >= 1, "butterworth: order must be >= 1");
  require(cutoff_hz > 0 && cutoff_hz < fs / 2, "butterworth: cutoff must lie in (0, fs/2)");
  const double wc = detail::prewarp(cutoff_hz, fs);
  std::vector<detail::zc> poles;
  for (const auto& p : detail::butter_prototype(order)) poles.push_back(detail::bilinear(wc * p, fs));
  std::vector<double> zeros(static_cast<std::size_t>(order), -1.0);
  SosFilter f(detail::pair_sections(std::move(poles), std::move(zeros)));
  f.set_order(order);
  detail::normalize_gain(f, 0.0);
  return f;
}

// Digital Butterworth band-pass of prototype order `order` (2*order poles).
inline SosFilter butterworth_bandpass(int order, double low_hz, double high_hz, double fs) {
  require(order >= 1, "butterworth: order must be >= 1");
  require(low_hz > 0 && low_hz < high_hz && high_hz < fs / 2,
          "butterworth: band edges must satisfy 0 < low < high < fs/2");
  const double w1 = detail::prewarp(low_hz, fs);
  const double w2 = detail::prewarp(high_hz, fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;
  std::vector<detail::zc> poles;
  for (const auto& p : detail::butter_prototype(order)) {
    const detail::zc half = p * bw / 2.0;
    const detail::zc root = std::sqrt(half * half - w0sq);
    poles.push_back(detail::bilinear(half + root, fs));
    poles.push_back(detail::bilinear(half - root, fs));
  }
  // n zeros at s = 0 (z = 1) and n at infinity (z = -1), interleaved so each
  // biquad carries one of each.
  std::vector<double> zeros;
  for (int k = 0; k < order; ++k) {
    zeros.push_back(1.0);
    zeros.push_back(-1.0);
  }
  SosFilter f(detail::pair_sections(std::move(poles), std::move(zeros)));
  f.set_order(2 * order);
  const double center = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  detail::normalize_gain(f, center);
  return f;
}

}  // namespace tfburst
