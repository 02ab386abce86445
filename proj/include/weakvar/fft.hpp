#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace weakvar::numerics {

/// In-place complex DFT of a fixed length, backed by FFTW.
/// Planning is serialized internally; execution is safe from several threads on distinct buffers.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  ~FftPlan();
  FftPlan(FftPlan&&) noexcept;
  FftPlan& operator=(FftPlan&&) noexcept;
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::size_t size() const noexcept { return n_; }

  /// Unnormalized forward transform: X_k = sum_j x_j exp(-2 pi i jk/n).
  void forward(std::span<std::complex<double>> data) const;
  /// Inverse transform including the 1/n factor.
  void inverse(std::span<std::complex<double>> data) const;

 private:
  struct Plans;
  std::size_t n_;
  std::unique_ptr<Plans> plans_;
};

}  // namespace weakvar::numerics
