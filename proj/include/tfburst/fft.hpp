#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace tfburst {

using cplx = std::complex<double>;

// Owning FFT workspace. Plans are cached per length inside the object, so a
// workspace must not be shared between threads; create one per computation.
//
// forward: X[k] = sum_n x[n] e^{-j2pi nk/N}
// inverse: x[n] = (1/N) sum_k X[k] e^{+j2pi nk/N}
class Fft {
 public:
  void forward(std::span<const cplx> in, std::span<cplx> out) {
    impl_.fwd(out.data(), in.data(), static_cast<Eigen::Index>(in.size()));
  }

  void inverse(std::span<const cplx> in, std::span<cplx> out) {
    impl_.inv(out.data(), in.data(), static_cast<Eigen::Index>(in.size()));
  }

  std::vector<cplx> forward(std::span<const cplx> in) {
    std::vector<cplx> out(in.size());
    forward(in, out);
    return out;
  }

  std::vector<cplx> inverse(std::span<const cplx> in) {
    std::vector<cplx> out(in.size());
    inverse(in, out);
    return out;
  }

  std::vector<cplx> forward_real(std::span<const double> in) {
    std::vector<cplx> tmp(in.begin(), in.end());
    return forward(tmp);
  }

 private:
  Eigen::FFT<double> impl_;
};

}  // namespace tfburst
