#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

// Dense arithmetic inner loops behind the MLP and the optimizer.
//
// Every kernel exists twice: a scalar reference (the semantics) and an AVX2
// variant selected once at startup. Float entry points dispatch; the double
// overloads always run the scalar reference (they back the 64-bit oracles).
// Weight layout is input-major: W[i * out + o], so forward, weight-gradient
// and input-gradient loops all stream contiguously over the output index.
namespace vnf::kernels {

enum class Isa { scalar, avx2 };

Isa active_isa();
// Force the scalar path (tests, or VIRUS_FIELD_SIMD=scalar in the env).
void set_force_scalar(bool on);

// ---- scalar reference ----

namespace ref {

// y[b,o] = bias[o] + sum_i x[b,i] * W[i*out+o]
template <class T>
void dense_forward(const T* x, const T* w, const T* bias, T* y, int batch,
                   int in, int out) {
  for (int b = 0; b < batch; ++b) {
    const T* xb = x + size_t(b) * in;
    T* yb = y + size_t(b) * out;
    for (int o = 0; o < out; ++o) yb[o] = bias[o];
    for (int i = 0; i < in; ++i) {
      T xi = xb[i];
      const T* wr = w + size_t(i) * out;
      for (int o = 0; o < out; ++o) yb[o] += xi * wr[o];
    }
  }
}

// dx[b,i] = sum_o dy[b,o] * W[i*out+o]
template <class T>
void dense_backward_input(const T* dy, const T* w, T* dx, int batch, int in,
                          int out) {
  for (int b = 0; b < batch; ++b) {
    const T* dyb = dy + size_t(b) * out;
    T* dxb = dx + size_t(b) * in;
    for (int i = 0; i < in; ++i) {
      const T* wr = w + size_t(i) * out;
      T acc = 0;
      for (int o = 0; o < out; ++o) acc += dyb[o] * wr[o];
      dxb[i] = acc;
    }
  }
}

// dW[i*out+o] += sum_b x[b,i] * dy[b,o];  db[o] += sum_b dy[b,o]
template <class T>
void dense_backward_params(const T* x, const T* dy, T* dw, T* db, int batch,
                           int in, int out) {
  for (int b = 0; b < batch; ++b) {
    const T* xb = x + size_t(b) * in;
    const T* dyb = dy + size_t(b) * out;
    for (int o = 0; o < out; ++o) db[o] += dyb[o];
    for (int i = 0; i < in; ++i) {
      T xi = xb[i];
      T* dwr = dw + size_t(i) * out;
      for (int o = 0; o < out; ++o) dwr[o] += xi * dyb[o];
    }
  }
}

template <class T>
void relu_forward(const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// dx[i] = pre[i] > 0 ? dy[i] : 0
template <class T>
void relu_backward(const T* pre, const T* dy, T* dx, size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] = pre[i] > T(0) ? dy[i] : T(0);
}

// Bias-corrected adaptive-moment step; bc1 = 1-beta1^t, bc2 = 1-beta2^t.
template <class T>
void adam_step(T* p, T* m, T* v, const T* g, size_t n, T lr, T beta1, T beta2,
               T eps, T bc1, T bc2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    T mh = m[i] / bc1;
    T vh = v[i] / bc2;
    p[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

template <class T>
bool all_finite(const T* x, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (!std::isfinite(double(x[i]))) return false;
  return true;
}

}  // namespace ref

// ---- dispatched float entry points ----

void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int batch, int in, int out);
void dense_backward_input(const float* dy, const float* w, float* dx,
                          int batch, int in, int out);
void dense_backward_params(const float* x, const float* dy, float* dw,
                           float* db, int batch, int in, int out);
void relu_forward(const float* x, float* y, size_t n);
void relu_backward(const float* pre, const float* dy, float* dx, size_t n);
void adam_step(float* p, float* m, float* v, const float* g, size_t n,
               float lr, float beta1, float beta2, float eps, float bc1,
               float bc2);
bool all_finite(const float* x, size_t n);

// Double overloads: scalar reference, for the 64-bit oracle instantiations.
inline void dense_forward(const double* x, const double* w, const double* bias,
                          double* y, int batch, int in, int out) {
  ref::dense_forward(x, w, bias, y, batch, in, out);
}
inline void dense_backward_input(const double* dy, const double* w, double* dx,
                                 int batch, int in, int out) {
  ref::dense_backward_input(dy, w, dx, batch, in, out);
}
inline void dense_backward_params(const double* x, const double* dy,
                                  double* dw, double* db, int batch, int in,
                                  int out) {
  ref::dense_backward_params(x, dy, dw, db, batch, in, out);
}
inline void relu_forward(const double* x, double* y, size_t n) {
  ref::relu_forward(x, y, n);
}
inline void relu_backward(const double* pre, const double* dy, double* dx,
                          size_t n) {
  ref::relu_backward(pre, dy, dx, n);
}
inline void adam_step(double* p, double* m, double* v, const double* g,
                      size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2) {
  ref::adam_step(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}
inline bool all_finite(const double* x, size_t n) {
  return ref::all_finite(x, n);
}

// AVX2 implementations (compiled with -mavx2 -mfma in kernels_avx2.cpp).
namespace avx2 {
bool supported();
void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int batch, int in, int out);
void dense_backward_input(const float* dy, const float* w, float* dx,
                          int batch, int in, int out);
void dense_backward_params(const float* x, const float* dy, float* dw,
                           float* db, int batch, int in, int out);
void relu_forward(const float* x, float* y, size_t n);
void relu_backward(const float* pre, const float* dy, float* dx, size_t n);
void adam_step(float* p, float* m, float* v, const float* g, size_t n,
               float lr, float beta1, float beta2, float eps, float bc1,
               float bc2);
}  // namespace avx2

}  // namespace vnf::kernels
