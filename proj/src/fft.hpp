#pragma once

#include <complex>
#include <cstddef>

namespace pfm::wave {

// Unnormalized in-place 2D DFT over a row-major ny-by-nx array. Plans are
// created once under a global lock; execution is reentrant, so one plan can
// serve any number of threads working on their own buffers.
class Fft2d {
 public:
  Fft2d(std::size_t nx, std::size_t ny);
  ~Fft2d();
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  void forward(std::complex<double>* data) const;
  void inverse(std::complex<double>* data) const;

 private:
  void* forward_plan_;
  void* inverse_plan_;
};

}  // namespace pfm::wave
