#pragma once

// Quadratic time-frequency distributions with separable Doppler-lag kernels.
//
// Discrete conventions used throughout (N = analytic signal length, fs its
// sample rate, indices taken modulo N):
//
//   K[n, m]   = z[n + m] z*[n - m],                 |m| <= (N - 1) / 2
//   R[n, m]   = h[m] * (G (*)_n K)[n, m]             (circular in n)
//   rho[n, k] = (2 / fs) * Re sum_m R[n, m] e^{-j 2 pi m k / N}
//
// so that frequency bin k sits at k * fs / (2N) Hz and the frequency axis
// spans [0, fs/2). G is the time-domain image of the Doppler window g.
// With this scaling, sum_k rho[n, k] * df = R[n, 0], the smoothed
// instantaneous energy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tfburst/error.hpp"
#include "tfburst/fft.hpp"
#include "tfburst/signal_pre.hpp"

namespace tfburst {

enum class WindowFamily { hanning, tukey, rectangular };

struct WindowSpec {
  WindowFamily family = WindowFamily::hanning;
  int length = 61;           // odd
  double shape_param = 0.0;  // Tukey taper fraction
  bool normalized = true;    // scale so the center value is 1

  void validate() const {
    require(length >= 1, "WindowSpec: length must be >= 1");
    require(length % 2 == 1, "WindowSpec: length must be odd, got " + std::to_string(length));
    require(shape_param >= 0.0 && shape_param <= 1.0, "WindowSpec: shape_param must lie in [0, 1]");
  }
};

struct KernelSpec {
  WindowSpec lag_window;      // h(tau)
  WindowSpec doppler_window;  // g(nu)
};

// Kernel used for burst detection: Hanning lag window, Tukey(0.9) Doppler
// window, both 61 samples.
inline KernelSpec default_kernel() {
  return {{WindowFamily::hanning, 61, 0.0, true}, {WindowFamily::tukey, 61, 0.9, true}};
}

// Both windows rectangular at the largest odd length <= n; for odd n this
// kernel is identically 1 and the separable TFD reduces to the WVD.
inline KernelSpec identity_kernel(std::size_t n) {
  const int len = static_cast<int>(n % 2 == 1 ? n : n - 1);
  return {{WindowFamily::rectangular, len, 0.0, true}, {WindowFamily::rectangular, len, 0.0, true}};
}

// Lag half-length for a lag window of odd length L: P = (L + 1) / 2, so the
// window covers lags |m| <= P - 1.
inline int lag_half_length(int lag_window_length) { return (lag_window_length + 1) / 2; }

struct GridSpec {
  std::size_t n_signal = 0;  // N
  std::size_t n_time = 0;
  std::size_t n_freq = 0;
  int lag_half_length = 0;   // P_h

  void validate() const {
    require(n_signal >= 1, "GridSpec: n_signal must be positive");
    require(n_time >= 1 && n_time <= n_signal, "GridSpec: need 1 <= n_time <= n_signal");
    require(n_freq >= 1 && n_freq <= n_signal, "GridSpec: need 1 <= n_freq <= n_signal");
    require(lag_half_length >= 1, "GridSpec: lag_half_length must be >= 1");
  }
};

// Real time x frequency grid, stored row-major (one row per time slice).
struct TFDMatrix {
  std::size_t n_time = 0;
  std::size_t n_freq = 0;
  std::vector<double> values;
  double slice_rate = 0;       // slices per second
  double freq_resolution = 0;  // Hz per bin
  double origin_time = 0;      // seconds, time of slice 0
  double sample_rate = 0;      // rate of the analytic signal the TFD came from
  double imag_residue = 0;     // max |Im| / max |Re| before the imaginary part was dropped

  TFDMatrix() = default;
  TFDMatrix(std::size_t rows, std::size_t cols) : n_time(rows), n_freq(cols), values(rows * cols, 0.0) {}

  double& at(std::size_t t, std::size_t k) { return values[t * n_freq + k]; }
  double at(std::size_t t, std::size_t k) const { return values[t * n_freq + k]; }

  std::span<const double> slice(std::size_t t) const {
    return std::span<const double>(values).subspan(t * n_freq, n_freq);
  }

  // Area of one grid cell in (signal samples) x (Hz).
  double cell_area() const { return freq_resolution * sample_rate / slice_rate; }

  double max_abs() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

inline std::vector<double> make_window(const WindowSpec& spec) {
  spec.validate();
  const auto len = static_cast<std::size_t>(spec.length);
  std::vector<double> w(len, 1.0);
  if (len == 1) return w;
  const double denom = static_cast<double>(len - 1);
  switch (spec.family) {
    case WindowFamily::rectangular:
      break;
    case WindowFamily::hanning:
      for (std::size_t i = 0; i < len; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
      break;
    case WindowFamily::tukey: {
      const double alpha = spec.shape_param;
      if (alpha <= 0.0) break;
      const double taper = alpha * denom / 2.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double x = static_cast<double>(std::min(i, len - 1 - i));
        if (x < taper) w[i] = 0.5 * (1.0 + std::cos(std::numbers::pi * (x / taper - 1.0)));
      }
      break;
    }
  }
  // Enforce exact symmetry.
  for (std::size_t i = 0; i < len / 2; ++i) w[len - 1 - i] = w[i];
  if (spec.normalized) {
    const double c = w[len / 2];
    require(c > 0, "make_window: window center is zero, cannot normalize");
    for (double& v : w) v /= c;
  }
  return w;
}

namespace detail {

inline std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  std::ptrdiff_t r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

// Window coefficient at signed offset `off` from the center, 0 outside.
inline double centered(const std::vector<double>& w, std::ptrdiff_t off) {
  const auto half = static_cast<std::ptrdiff_t>(w.size() / 2);
  if (off < -half || off > half) return 0.0;
  return w[static_cast<std::size_t>(off + half)];
}

inline cplx autocorrelation(std::span<const cplx> z, std::size_t n, std::ptrdiff_t m) {
  const std::size_t len = z.size();
  const auto ni = static_cast<std::ptrdiff_t>(n);
  return z[wrap(ni + m, len)] * std::conj(z[wrap(ni - m, len)]);
}

// Turns a Hermitian lag sequence (stored circularly) into a real frequency
// profile: out[k] = scale * Re FFT(seq)[k]. Returns max |Im| seen.
inline double lag_to_frequency(Fft& fft, std::span<const cplx> seq, std::span<cplx> scratch,
                               std::span<double> out, double scale) {
  fft.forward(seq, scratch);
  double max_imag = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = scale * scratch[k].real();
    max_imag = std::max(max_imag, std::abs(scale * scratch[k].imag()));
  }
  return max_imag;
}

inline void finish_residue(TFDMatrix& tfd, double max_imag) {
  const double m = tfd.max_abs();
  tfd.imag_residue = m > 0 ? max_imag / m : max_imag;
}

}  // namespace detail

// Discrete Wigner-Ville distribution on the full N x N grid.
inline TFDMatrix wigner_ville(const AnalyticSignal& z) {
  const std::size_t n = z.size();
  require(n >= 1, "wigner_ville: empty signal");
  require(z.sample_rate > 0, "wigner_ville: sample_rate must be positive");
  const auto max_lag = static_cast<std::ptrdiff_t>((n - 1) / 2);
  TFDMatrix tfd(n, n);
  tfd.sample_rate = z.sample_rate;
  tfd.slice_rate = z.sample_rate;
  tfd.freq_resolution = z.sample_rate / (2.0 * static_cast<double>(n));
  const double scale = 2.0 / z.sample_rate;

  Fft fft;
  std::vector<cplx> seq(n), scratch(n);
  double max_imag = 0;
  for (std::size_t t = 0; t < n; ++t) {
    std::fill(seq.begin(), seq.end(), cplx{});
    for (std::ptrdiff_t m = -max_lag; m <= max_lag; ++m)
      seq[detail::wrap(m, n)] = detail::autocorrelation(z.values, t, m);
    auto row = std::span<double>(tfd.values).subspan(t * n, n);
    max_imag = std::max(max_imag, detail::lag_to_frequency(fft, seq, scratch, row, scale));
  }
  detail::finish_residue(tfd, max_imag);
  return tfd;
}

// Oversampled N x N separable-kernel TFD, computed without decimation: the
// lag-windowed autocorrelation is smoothed in time by direct circular
// convolution with G(t), then transformed along lag. Quadratic in N per lag;
// intended as the reference for the decimated algorithm.
inline TFDMatrix separable_tfd_full(const AnalyticSignal& z, const KernelSpec& kernel) {
  const std::size_t n = z.size();
  require(n >= 1, "separable_tfd_full: empty signal");
  require(z.sample_rate > 0, "separable_tfd_full: sample_rate must be positive");
  kernel.lag_window.validate();
  kernel.doppler_window.validate();
  require(static_cast<std::size_t>(kernel.lag_window.length) <= n,
          "separable_tfd_full: lag window longer than signal");
  require(static_cast<std::size_t>(kernel.doppler_window.length) <= n,
          "separable_tfd_full: Doppler window longer than signal");

  const std::vector<double> h = make_window(kernel.lag_window);
  const std::vector<double> g = make_window(kernel.doppler_window);
  const auto nn = static_cast<std::ptrdiff_t>(n);
  const auto max_lag = static_cast<std::ptrdiff_t>((n - 1) / 2);
  const auto lag_reach = std::min<std::ptrdiff_t>(max_lag, static_cast<std::ptrdiff_t>(h.size() / 2));
  const auto dop_reach = static_cast<std::ptrdiff_t>(g.size() / 2);

  // G[t] = (1/N) sum_l g[l] e^{+j 2 pi l t / N}, by direct summation.
  std::vector<cplx> time_kernel(n);
  for (std::ptrdiff_t t = 0; t < nn; ++t) {
    cplx acc{};
    for (std::ptrdiff_t l = -dop_reach; l <= dop_reach; ++l) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((l * t) % nn) / static_cast<double>(n);
      acc += detail::centered(g, l) * std::polar(1.0, phase);
    }
    time_kernel[static_cast<std::size_t>(t)] = acc / static_cast<double>(n);
  }

  // smoothed[t * n + lag index] = R[t, m]
  std::vector<cplx> smoothed(n * n, cplx{});
  std::vector<cplx> column(n);
  for (std::ptrdiff_t m = -lag_reach; m <= lag_reach; ++m) {
    const double hm = detail::centered(h, m);
    if (hm == 0.0) continue;
    for (std::size_t t = 0; t < n; ++t) column[t] = hm * detail::autocorrelation(z.values, t, m);
    const std::size_t j = detail::wrap(m, n);
    for (std::size_t t = 0; t < n; ++t) {
      cplx acc{};
      for (std::size_t s = 0; s < n; ++s) acc += time_kernel[(t + n - s) % n] * column[s];
      smoothed[t * n + j] = acc;
    }
  }

  TFDMatrix tfd(n, n);
  tfd.sample_rate = z.sample_rate;
  tfd.slice_rate = z.sample_rate;
  tfd.freq_resolution = z.sample_rate / (2.0 * static_cast<double>(n));
  const double scale = 2.0 / z.sample_rate;
  Fft fft;
  std::vector<cplx> scratch(n);
  double max_imag = 0;
  for (std::size_t t = 0; t < n; ++t) {
    auto seq = std::span<const cplx>(smoothed).subspan(t * n, n);
    auto row = std::span<double>(tfd.values).subspan(t * n, n);
    max_imag = std::max(max_imag, detail::lag_to_frequency(fft, seq, scratch, row, scale));
  }
  detail::finish_residue(tfd, max_imag);
  return tfd;
}

// Storage held by the decimated algorithm, in real-valued data points.
struct WorkspaceStats {
  std::size_t buffer_reals = 0;    // vectors allocated by the algorithm, incl. output
  std::size_t fft_plan_reals = 0;  // twiddle tables of the three FFT lengths (estimate)

  std::size_t total_reals() const { return buffer_reals + fft_plan_reals; }
  std::size_t total_bytes() const { return total_reals() * sizeof(double); }
};

// Checks the decimated-grid preconditions; returns an empty string when valid.
inline std::string efficient_grid_violation(std::size_t signal_length, const KernelSpec& kernel,
                                            const GridSpec& grid) {
  if (grid.n_signal != signal_length)
    return "grid.n_signal (" + std::to_string(grid.n_signal) + ") != signal length (" +
           std::to_string(signal_length) + ")";
  if (grid.n_time == 0 || signal_length % grid.n_time != 0)
    return "n_time (" + std::to_string(grid.n_time) + ") must divide the signal length (" +
           std::to_string(signal_length) + ")";
  if (grid.n_freq == 0 || signal_length % grid.n_freq != 0)
    return "n_freq (" + std::to_string(grid.n_freq) + ") must divide the signal length (" +
           std::to_string(signal_length) + ")";
  if (grid.lag_half_length != lag_half_length(kernel.lag_window.length))
    return "lag_half_length (" + std::to_string(grid.lag_half_length) +
           ") must equal (lag window length + 1) / 2 = " +
           std::to_string(lag_half_length(kernel.lag_window.length));
  if (static_cast<std::size_t>(kernel.lag_window.length) > grid.n_freq)
    return "lag window length (" + std::to_string(kernel.lag_window.length) + ") must not exceed n_freq (" +
           std::to_string(grid.n_freq) + ")";
  if (static_cast<std::size_t>(kernel.lag_window.length) > signal_length)
    return "lag window longer than signal";
  if (static_cast<std::size_t>(kernel.doppler_window.length) > signal_length)
    return "Doppler window longer than signal";
  return {};
}

// Decimated separable-kernel TFD of shape n_time x n_freq. Processes one lag
// at a time: autocorrelation column -> FFT over time -> Doppler window ->
// fold onto n_time Doppler bins -> inverse FFT. Each decimated time row is
// then transformed over its (Hermitian, lag-limited) lag sequence. Only lags
// m >= 0 are formed; negative lags are conjugates.
inline TFDMatrix separable_tfd_efficient(const AnalyticSignal& z, const KernelSpec& kernel,
                                         const GridSpec& grid, WorkspaceStats* stats = nullptr) {
  kernel.lag_window.validate();
  kernel.doppler_window.validate();
  require(z.sample_rate > 0, "separable_tfd_efficient: sample_rate must be positive");
  if (const std::string why = efficient_grid_violation(z.size(), kernel, grid); !why.empty())
    fail(ErrorCategory::invalid_argument, "separable_tfd_efficient: " + why);

  const std::size_t n = z.size();
  const std::size_t n_time = grid.n_time;
  const std::size_t n_freq = grid.n_freq;
  const auto lags = static_cast<std::size_t>(grid.lag_half_length);
  const std::size_t time_step = n / n_time;

  const std::vector<double> h = make_window(kernel.lag_window);
  const std::vector<double> g = make_window(kernel.doppler_window);
  const auto dop_reach = static_cast<std::ptrdiff_t>(g.size() / 2);

  std::vector<cplx> column(n), doppler(n);
  std::vector<cplx> folded(n_time), time_row(n_time);
  std::vector<cplx> acf(n_time * lags, cplx{});  // acf[t * lags + m], m >= 0
  std::vector<cplx> lag_seq(n_freq), lag_spec(n_freq);
  TFDMatrix tfd(n_time, n_freq);

  Fft fft;
  const double fold_scale = static_cast<double>(n_time) / static_cast<double>(n);
  for (std::size_t m = 0; m < lags; ++m) {
    const double hm = h[h.size() / 2 + m];
    if (hm == 0.0) continue;
    const auto mi = static_cast<std::ptrdiff_t>(m);
    for (std::size_t t = 0; t < n; ++t) column[t] = hm * detail::autocorrelation(z.values, t, mi);
    fft.forward(column, doppler);
    std::fill(folded.begin(), folded.end(), cplx{});
    for (std::ptrdiff_t l = -dop_reach; l <= dop_reach; ++l)
      folded[detail::wrap(l, n_time)] += g[static_cast<std::size_t>(l + dop_reach)] * doppler[detail::wrap(l, n)];
    fft.inverse(folded, time_row);
    for (std::size_t t = 0; t < n_time; ++t) acf[t * lags + m] = fold_scale * time_row[t];
  }

  const double scale = 2.0 / z.sample_rate;
  double max_imag = 0;
  for (std::size_t t = 0; t < n_time; ++t) {
    std::fill(lag_seq.begin(), lag_seq.end(), cplx{});
    lag_seq[0] = acf[t * lags];
    for (std::size_t m = 1; m < lags; ++m) {
      lag_seq[m] = acf[t * lags + m];
      lag_seq[n_freq - m] = std::conj(acf[t * lags + m]);
    }
    auto row = std::span<double>(tfd.values).subspan(t * n_freq, n_freq);
    max_imag = std::max(max_imag, detail::lag_to_frequency(fft, lag_seq, lag_spec, row, scale));
  }

  tfd.sample_rate = z.sample_rate;
  tfd.slice_rate = z.sample_rate / static_cast<double>(time_step);
  tfd.freq_resolution = z.sample_rate / (2.0 * static_cast<double>(n_freq));
  detail::finish_residue(tfd, max_imag);

  if (stats) {
    const std::size_t complex_elems = column.capacity() + doppler.capacity() + folded.capacity() +
                                      time_row.capacity() + acf.capacity() + lag_seq.capacity() +
                                      lag_spec.capacity();
    stats->buffer_reals = 2 * complex_elems + tfd.values.capacity() + h.capacity() + g.capacity();
    stats->fft_plan_reals = 2 * (n + n_time + n_freq);
  }
  return tfd;
}

// Per-slice sum over frequency times the bin width.
inline std::vector<double> time_marginal(const TFDMatrix& tfd) {
  std::vector<double> out(tfd.n_time, 0.0);
  for (std::size_t t = 0; t < tfd.n_time; ++t) {
    double s = 0;
    for (double v : tfd.slice(t)) s += v;
    out[t] = s * tfd.freq_resolution;
  }
  return out;
}

struct CostReport {
  std::int64_t ops_full = 0;
  std::int64_t ops_efficient = 0;
  std::int64_t mem_full = 0;
  std::int64_t mem_efficient = 0;
  double reduction_ops = 0;  // percent, 100 * efficient / full
  double reduction_mem = 0;
};

// Arithmetic-operation and memory counts for the full and decimated TFDs.
//   efficient: P_h (N log2 N + Nt log2 Nt) + 1/2 Nt Nf log2 Nf
//   full:      3/2 N^2 log2 N
// Non-integer results (N not a power of two) are rounded to nearest.
inline CostReport cost_report(const GridSpec& grid) {
  grid.validate();
  const auto N = static_cast<double>(grid.n_signal);
  const auto nt = static_cast<double>(grid.n_time);
  const auto nf = static_cast<double>(grid.n_freq);
  const auto ph = static_cast<double>(grid.lag_half_length);
  CostReport r;
  r.ops_efficient = std::llround(ph * (N * std::log2(N) + nt * std::log2(nt)) + 0.5 * nt * nf * std::log2(nf));
  r.ops_full = std::llround(1.5 * N * N * std::log2(N));
  r.mem_efficient = static_cast<std::int64_t>(grid.n_time * grid.n_freq);
  r.mem_full = static_cast<std::int64_t>(grid.n_signal * grid.n_signal);
  r.reduction_ops = r.ops_full > 0 ? 100.0 * static_cast<double>(r.ops_efficient) / static_cast<double>(r.ops_full) : 0.0;
  r.reduction_mem = 100.0 * static_cast<double>(r.mem_efficient) / static_cast<double>(r.mem_full);
  return r;
}

// Published reference counts for the 36-s epoch grid (N = 4608, P_h = 31,
// 144 x 128), kept for side-by-side reporting only.
struct PublishedCosts {
  static constexpr std::int64_t ops_full = 88'941'913;
  static constexpr std::int64_t ops_efficient = 5'308'416;
  static constexpr std::int64_t mem_full = 894'319;
  static constexpr std::int64_t mem_efficient = 18'432;
  static constexpr double reduction_ops = 1.0;
  static constexpr double reduction_mem = 0.3;
};

}  // namespace tfburst
