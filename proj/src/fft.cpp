#include "fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "pfm/error.hpp"

namespace pfm::wave {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Fft2d::Fft2d(std::size_t nx, std::size_t ny) {
  std::lock_guard lock(planner_mutex());
  std::vector<std::complex<double>> scratch(nx * ny);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  // FFTW_ESTIMATE keeps plans (and therefore results) independent of timing.
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), buf, buf, FFTW_FORWARD, flags);
  inverse_plan_ = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), buf, buf, FFTW_BACKWARD, flags);
  if (forward_plan_ == nullptr || inverse_plan_ == nullptr) throw Error("fftw: plan creation failed");
}

Fft2d::~Fft2d() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void Fft2d::forward(std::complex<double>* data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), p, p);
}

void Fft2d::inverse(std::complex<double>* data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(inverse_plan_), p, p);
}

}  // namespace pfm::wave
