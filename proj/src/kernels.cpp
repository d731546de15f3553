#include "cdecf/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace cdecf::kernels {

namespace scalar {

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scaled(const double* x, double a, const double* d, double* out,
                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + a * d[i];
}

void scale(double a, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t whole = n - n % 4;
  for (std::size_t i = 0; i < whole; i += 4) {
    s0 += x[i + 0] * y[i + 0];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (std::size_t i = whole; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_squares(const double* x, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t whole = n - n % 4;
  for (std::size_t i = 0; i < whole; i += 4) {
    s0 += x[i + 0] * x[i + 0];
    s1 += x[i + 1] * x[i + 1];
    s2 += x[i + 2] * x[i + 2];
    s3 += x[i + 3] * x[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (std::size_t i = whole; i < n; ++i) s += x[i] * x[i];
  return s;
}

void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double lr, double b1, double b2, double eps,
                 double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * (g[i] * g[i]);
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
  }
}

}  // namespace scalar

static const Backend kScalarBackend = {
    "scalar",          scalar::axpy, scalar::add_scaled,  scalar::scale,
    scalar::dot,       scalar::sum_squares, scalar::adam_update,
};

const Backend* scalar_backend() { return &kScalarBackend; }

#if defined(CDECF_HAVE_AVX2)
// Defined in kernels_avx2.cpp (compiled with -mavx2).
const Backend* avx2_backend_impl();

const Backend* avx2_backend() {
  if (!__builtin_cpu_supports("avx2")) return nullptr;
  return avx2_backend_impl();
}
#else
const Backend* avx2_backend() { return nullptr; }
#endif

namespace {

const Backend* resolve(std::string_view name) {
  if (name == "scalar") return scalar_backend();
  if (name == "avx2") {
    const Backend* b = avx2_backend();
    if (!b) throw std::runtime_error("AVX2 kernels unavailable on this CPU/build");
    return b;
  }
  if (name == "auto" || name.empty()) {
    const Backend* b = avx2_backend();
    return b ? b : scalar_backend();
  }
  throw std::runtime_error("unknown kernel backend: " + std::string(name));
}

const Backend* initial_backend() {
  const char* env = std::getenv("CDECF_KERNELS");
  return resolve(env ? env : "auto");
}

const Backend*& active_slot() {
  static const Backend* active = initial_backend();
  return active;
}

}  // namespace

const Backend& backend() { return *active_slot(); }

void set_backend(std::string_view name) { active_slot() = resolve(name); }

}  // namespace cdecf::kernels
