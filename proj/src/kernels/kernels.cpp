#include "vnf/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace vnf::kernels {

namespace {

bool force_scalar_flag = false;

bool env_wants_scalar() {
  const char* v = std::getenv("VIRUS_FIELD_SIMD");
  return v && std::strcmp(v, "scalar") == 0;
}

bool use_avx2() {
  static const bool cpu_ok = avx2::supported() && !env_wants_scalar();
  return cpu_ok && !force_scalar_flag;
}

}  // namespace

Isa active_isa() { return use_avx2() ? Isa::avx2 : Isa::scalar; }

void set_force_scalar(bool on) { force_scalar_flag = on; }

void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int batch, int in, int out) {
  if (use_avx2())
    avx2::dense_forward(x, w, bias, y, batch, in, out);
  else
    ref::dense_forward(x, w, bias, y, batch, in, out);
}

void dense_backward_input(const float* dy, const float* w, float* dx,
                          int batch, int in, int out) {
  if (use_avx2())
    avx2::dense_backward_input(dy, w, dx, batch, in, out);
  else
    ref::dense_backward_input(dy, w, dx, batch, in, out);
}

void dense_backward_params(const float* x, const float* dy, float* dw,
                           float* db, int batch, int in, int out) {
  if (use_avx2())
    avx2::dense_backward_params(x, dy, dw, db, batch, in, out);
  else
    ref::dense_backward_params(x, dy, dw, db, batch, in, out);
}

void relu_forward(const float* x, float* y, size_t n) {
  if (use_avx2())
    avx2::relu_forward(x, y, n);
  else
    ref::relu_forward(x, y, n);
}

void relu_backward(const float* pre, const float* dy, float* dx, size_t n) {
  if (use_avx2())
    avx2::relu_backward(pre, dy, dx, n);
  else
    ref::relu_backward(pre, dy, dx, n);
}

void adam_step(float* p, float* m, float* v, const float* g, size_t n,
               float lr, float beta1, float beta2, float eps, float bc1,
               float bc2) {
  if (use_avx2())
    avx2::adam_step(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
  else
    ref::adam_step(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}

bool all_finite(const float* x, size_t n) { return ref::all_finite(x, n); }

}  // namespace vnf::kernels
