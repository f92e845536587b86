// AVX2/FMA variants of the dense kernels. This translation unit is the only
// one built with -mavx2 -mfma; callers reach it through the dispatch in
// kernels.cpp after the cpuid check.

#include "vnf/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define VNF_HAVE_X86 1
#else
#define VNF_HAVE_X86 0
#endif

namespace vnf::kernels::avx2 {

bool supported() {
#if VNF_HAVE_X86 && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

#if VNF_HAVE_X86

namespace {

inline float hsum8(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 0x55));
  return _mm_cvtss_f32(lo);
}

}  // namespace

void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int batch, int in, int out) {
  for (int b = 0; b < batch; ++b) {
    const float* xb = x + size_t(b) * in;
    float* yb = y + size_t(b) * out;
    int o = 0;
    for (; o + 8 <= out; o += 8)
      _mm256_storeu_ps(yb + o, _mm256_loadu_ps(bias + o));
    for (; o < out; ++o) yb[o] = bias[o];
    for (int i = 0; i < in; ++i) {
      __m256 xi = _mm256_set1_ps(xb[i]);
      const float* wr = w + size_t(i) * out;
      o = 0;
      for (; o + 8 <= out; o += 8) {
        __m256 acc = _mm256_loadu_ps(yb + o);
        acc = _mm256_fmadd_ps(xi, _mm256_loadu_ps(wr + o), acc);
        _mm256_storeu_ps(yb + o, acc);
      }
      for (; o < out; ++o) yb[o] += xb[i] * wr[o];
    }
  }
}

void dense_backward_input(const float* dy, const float* w, float* dx,
                          int batch, int in, int out) {
  for (int b = 0; b < batch; ++b) {
    const float* dyb = dy + size_t(b) * out;
    float* dxb = dx + size_t(b) * in;
    for (int i = 0; i < in; ++i) {
      const float* wr = w + size_t(i) * out;
      __m256 acc = _mm256_setzero_ps();
      int o = 0;
      for (; o + 8 <= out; o += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(dyb + o),
                              _mm256_loadu_ps(wr + o), acc);
      float s = hsum8(acc);
      for (; o < out; ++o) s += dyb[o] * wr[o];
      dxb[i] = s;
    }
  }
}

void dense_backward_params(const float* x, const float* dy, float* dw,
                           float* db, int batch, int in, int out) {
  for (int b = 0; b < batch; ++b) {
    const float* xb = x + size_t(b) * in;
    const float* dyb = dy + size_t(b) * out;
    int o = 0;
    for (; o + 8 <= out; o += 8) {
      __m256 acc = _mm256_add_ps(_mm256_loadu_ps(db + o),
                                 _mm256_loadu_ps(dyb + o));
      _mm256_storeu_ps(db + o, acc);
    }
    for (; o < out; ++o) db[o] += dyb[o];
    for (int i = 0; i < in; ++i) {
      __m256 xi = _mm256_set1_ps(xb[i]);
      float* dwr = dw + size_t(i) * out;
      o = 0;
      for (; o + 8 <= out; o += 8) {
        __m256 acc = _mm256_loadu_ps(dwr + o);
        acc = _mm256_fmadd_ps(xi, _mm256_loadu_ps(dyb + o), acc);
        _mm256_storeu_ps(dwr + o, acc);
      }
      for (; o < out; ++o) dwr[o] += xb[i] * dyb[o];
    }
  }
}

void relu_forward(const float* x, float* y, size_t n) {
  __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_backward(const float* pre, const float* dy, float* dx, size_t n) {
  __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(dy + i)));
  }
  for (; i < n; ++i) dx[i] = pre[i] > 0.f ? dy[i] : 0.f;
}

void adam_step(float* p, float* m, float* v, const float* g, size_t n,
               float lr, float beta1, float beta2, float eps, float bc1,
               float bc2) {
  __m256 vb1 = _mm256_set1_ps(beta1), vb1c = _mm256_set1_ps(1.f - beta1);
  __m256 vb2 = _mm256_set1_ps(beta2), vb2c = _mm256_set1_ps(1.f - beta2);
  __m256 vlr = _mm256_set1_ps(lr), veps = _mm256_set1_ps(eps);
  __m256 rbc1 = _mm256_set1_ps(1.f / bc1), rbc2 = _mm256_set1_ps(1.f / bc2);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 gi = _mm256_loadu_ps(g + i);
    __m256 mi = _mm256_fmadd_ps(vb1, _mm256_loadu_ps(m + i),
                                _mm256_mul_ps(vb1c, gi));
    __m256 vi = _mm256_fmadd_ps(vb2, _mm256_loadu_ps(v + i),
                                _mm256_mul_ps(vb2c, _mm256_mul_ps(gi, gi)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    __m256 mh = _mm256_mul_ps(mi, rbc1);
    __m256 vh = _mm256_mul_ps(vi, rbc2);
    __m256 den = _mm256_add_ps(_mm256_sqrt_ps(vh), veps);
    __m256 upd = _mm256_div_ps(_mm256_mul_ps(vlr, mh), den);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
    float mh = m[i] / bc1;
    float vh = v[i] / bc2;
    p[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

#else  // !VNF_HAVE_X86

void dense_forward(const float* x, const float* w, const float* bias, float* y,
                   int batch, int in, int out) {
  ref::dense_forward(x, w, bias, y, batch, in, out);
}
void dense_backward_input(const float* dy, const float* w, float* dx,
                          int batch, int in, int out) {
  ref::dense_backward_input(dy, w, dx, batch, in, out);
}
void dense_backward_params(const float* x, const float* dy, float* dw,
                           float* db, int batch, int in, int out) {
  ref::dense_backward_params(x, dy, dw, db, batch, in, out);
}
void relu_forward(const float* x, float* y, size_t n) {
  ref::relu_forward(x, y, n);
}
void relu_backward(const float* pre, const float* dy, float* dx, size_t n) {
  ref::relu_backward(pre, dy, dx, n);
}
void adam_step(float* p, float* m, float* v, const float* g, size_t n,
               float lr, float beta1, float beta2, float eps, float bc1,
               float bc2) {
  ref::adam_step(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}

#endif

}  // namespace vnf::kernels::avx2
