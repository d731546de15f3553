#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace cdecf::kernels {

// Dense f64 inner-loop kernels. Two interchangeable backends: a scalar
// reference and an AVX2 variant, selected once at startup (or forced via
// set_backend / the CDECF_KERNELS environment variable).
//
// Equivalence contract: both backends produce bit-identical results.
// Element-wise kernels perform the same per-element operation sequence
// (separate mul and add, never fused). Reductions use a fixed 4-way striped
// accumulation: four partial sums over index classes i%4, combined as
// (s0 + s1) + (s2 + s3), then any tail elements added sequentially. The
// scalar backend implements the same order explicitly.

struct Backend {
  const char* name;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[i] = x[i] + a * d[i]
  void (*add_scaled)(const double* x, double a, const double* d, double* out,
                     std::size_t n);
  // out[i] = a * x[i]
  void (*scale)(double a, const double* x, double* out, std::size_t n);
  // 4-way striped dot product (see contract above)
  double (*dot)(const double* x, const double* y, std::size_t n);
  // 4-way striped sum of squares
  double (*sum_squares)(const double* x, std::size_t n);
  // Adam step with bias correction:
  //   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g
  //   p -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
  // where bc1 = 1-b1^t, bc2 = 1-b2^t are precomputed by the caller.
  void (*adam_update)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double b1, double b2,
                      double eps, double bc1, double bc2);
};

// Active backend (AVX2 when the CPU supports it, else scalar; overridable
// by CDECF_KERNELS=scalar|avx2|auto, consulted on first use).
const Backend& backend();

// Force a backend by name ("scalar", "avx2", "auto"). Throws
// std::runtime_error if the named backend is unavailable on this CPU.
void set_backend(std::string_view name);

// Direct access for equivalence tests. avx2_backend() is nullptr when the
// build or CPU lacks AVX2.
const Backend* scalar_backend();
const Backend* avx2_backend();

inline void axpy(double a, const double* x, double* y, std::size_t n) {
  backend().axpy(a, x, y, n);
}
inline void add_scaled(const double* x, double a, const double* d, double* out,
                       std::size_t n) {
  backend().add_scaled(x, a, d, out, n);
}
inline void scale(double a, const double* x, double* out, std::size_t n) {
  backend().scale(a, x, out, n);
}
inline double dot(const double* x, const double* y, std::size_t n) {
  return backend().dot(x, y, n);
}
inline double sum_squares(const double* x, std::size_t n) {
  return backend().sum_squares(x, n);
}
inline void adam_update(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double b1, double b2,
                        double eps, double bc1, double bc2) {
  backend().adam_update(p, g, m, v, n, lr, b1, b2, eps, bc1, bc2);
}

}  // namespace cdecf::kernels
