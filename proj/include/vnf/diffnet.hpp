#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "vnf/common.hpp"
#include "vnf/kernels.hpp"

// Minimal dense network with explicit reverse-mode gradients. Hidden layers
// are rectified-linear, the output layer is identity; heads (exp, logistic)
// live in the field module. Templated on the scalar type: float for
// training, double for the finite-difference oracles.
namespace vnf::diffnet {

enum class Act : uint8_t { relu, identity };

template <class Real>
struct Mlp {
  std::vector<int> widths;               // layer sizes, >= 2 entries
  std::vector<std::vector<Real>> w;      // per layer, input-major [i*out+o]
  std::vector<std::vector<Real>> b;      // per layer, length out
  std::vector<Act> act;                  // per layer

  int layer_count() const { return int(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }

  size_t param_count() const {
    size_t n = 0;
    for (int l = 0; l < layer_count(); ++l) n += w[l].size() + b[l].size();
    return n;
  }
};

// Weights and biases uniform in [-1/sqrt(32), +1/sqrt(32)].
template <class Real>
Mlp<Real> mlp_init(const std::vector<int>& widths, uint64_t seed) {
  VNF_REQUIRE(widths.size() >= 2, "mlp_init: need at least two layer widths");
  for (int wd : widths) VNF_REQUIRE(wd > 0, "mlp_init: widths must be positive");
  const double r = 1.0 / std::sqrt(32.0);
  Rng rng(seed);
  Mlp<Real> m;
  m.widths = widths;
  int nl = int(widths.size()) - 1;
  m.w.resize(nl);
  m.b.resize(nl);
  m.act.assign(nl, Act::relu);
  m.act.back() = Act::identity;
  for (int l = 0; l < nl; ++l) {
    m.w[l].resize(size_t(widths[l]) * widths[l + 1]);
    m.b[l].resize(widths[l + 1]);
    for (auto& v : m.w[l]) v = Real(rng.uniform(-r, r));
    for (auto& v : m.b[l]) v = Real(rng.uniform(-r, r));
  }
  return m;
}

// Cached pre-activations and activations for one forward batch.
template <class Real>
struct MlpTape {
  int batch = 0;
  std::vector<std::vector<Real>> pre;   // per layer, batch x out
  std::vector<std::vector<Real>> post;  // per layer, batch x out (post act)
  std::vector<Real> input;              // batch x in
};

// Runs the batch through the net; tape receives everything backward needs.
// Returns a reference to the output activations (batch x out).
template <class Real>
const std::vector<Real>& mlp_forward(const Mlp<Real>& m,
                                     const std::vector<Real>& x, int batch,
                                     MlpTape<Real>& tape) {
  VNF_REQUIRE(int(x.size()) == batch * m.input_width(),
              "mlp_forward: input width mismatch");
  int nl = m.layer_count();
  tape.batch = batch;
  tape.input = x;
  tape.pre.resize(nl);
  tape.post.resize(nl);
  const std::vector<Real>* cur = &tape.input;
  for (int l = 0; l < nl; ++l) {
    int in = m.widths[l], out = m.widths[l + 1];
    tape.pre[l].assign(size_t(batch) * out, Real(0));
    kernels::dense_forward(cur->data(), m.w[l].data(), m.b[l].data(),
                           tape.pre[l].data(), batch, in, out);
    if (m.act[l] == Act::relu) {
      tape.post[l].resize(tape.pre[l].size());
      kernels::relu_forward(tape.pre[l].data(), tape.post[l].data(),
                            tape.pre[l].size());
      cur = &tape.post[l];
    } else {
      tape.post[l] = tape.pre[l];
      cur = &tape.post[l];
    }
  }
  return tape.post.back();
}

template <class Real>
struct MlpGrads {
  std::vector<std::vector<Real>> dw, db;

  void init_like(const Mlp<Real>& m) {
    dw.resize(m.layer_count());
    db.resize(m.layer_count());
    for (int l = 0; l < m.layer_count(); ++l) {
      dw[l].assign(m.w[l].size(), Real(0));
      db[l].assign(m.b[l].size(), Real(0));
    }
  }
  void zero() {
    for (auto& v : dw) std::fill(v.begin(), v.end(), Real(0));
    for (auto& v : db) std::fill(v.begin(), v.end(), Real(0));
  }
};

// Accumulates parameter gradients into g; optionally returns input grads.
template <class Real>
void mlp_backward(const Mlp<Real>& m, const MlpTape<Real>& tape,
                  const std::vector<Real>& dout, MlpGrads<Real>& g,
                  std::vector<Real>* dinput = nullptr) {
  int nl = m.layer_count();
  VNF_REQUIRE(int(tape.pre.size()) == nl, "mlp_backward: tape/params mismatch");
  VNF_REQUIRE(dout.size() == size_t(tape.batch) * m.output_width(),
              "mlp_backward: output grad shape mismatch");
  int batch = tape.batch;
  std::vector<Real> delta = dout;  // grad wrt post-activation of layer l
  std::vector<Real> tmp;
  for (int l = nl - 1; l >= 0; --l) {
    int in = m.widths[l], out = m.widths[l + 1];
    if (m.act[l] == Act::relu) {
      tmp.resize(delta.size());
      kernels::relu_backward(tape.pre[l].data(), delta.data(), tmp.data(),
                             delta.size());
      delta.swap(tmp);
    }
    const std::vector<Real>& layer_in =
        l == 0 ? tape.input : tape.post[l - 1];
    kernels::dense_backward_params(layer_in.data(), delta.data(),
                                   g.dw[l].data(), g.db[l].data(), batch, in,
                                   out);
    if (l > 0 || dinput) {
      tmp.assign(size_t(batch) * in, Real(0));
      kernels::dense_backward_input(delta.data(), m.w[l].data(), tmp.data(),
                                    batch, in, out);
      delta.swap(tmp);
    }
  }
  if (dinput) *dinput = std::move(delta);
}

// First/second moment state for one flat parameter block.
template <class Real>
struct AdamState {
  std::vector<Real> m, v;
  int64_t step = 0;
  Real lr = Real(1e-2);
  Real beta1 = Real(0.9), beta2 = Real(0.99);
  Real eps = Real(1e-15);

  void init(size_t n) {
    m.assign(n, Real(0));
    v.assign(n, Real(0));
    step = 0;
  }
};

// One update over a flat block. Rejects non-finite gradients: parameters and
// moments stay untouched and the step counter does not advance.
template <class Real>
bool adam_apply(AdamState<Real>& st, Real* params, const Real* grads,
                size_t n) {
  if (!kernels::all_finite(grads, n)) return false;
  st.step += 1;
  Real bc1 = Real(1) - Real(std::pow(double(st.beta1), double(st.step)));
  Real bc2 = Real(1) - Real(std::pow(double(st.beta2), double(st.step)));
  kernels::adam_step(params, st.m.data(), st.v.data(), grads, n, st.lr,
                     st.beta1, st.beta2, st.eps, bc1, bc2);
  return true;
}

// Optimizer state covering a whole Mlp, one flat block per layer tensor.
template <class Real>
struct MlpAdam {
  std::vector<AdamState<Real>> wst, bst;

  void init_like(const Mlp<Real>& m) {
    wst.resize(m.layer_count());
    bst.resize(m.layer_count());
    for (int l = 0; l < m.layer_count(); ++l) {
      wst[l].init(m.w[l].size());
      bst[l].init(m.b[l].size());
    }
  }
  void set_lr(Real lr) {
    for (auto& s : wst) s.lr = lr;
    for (auto& s : bst) s.lr = lr;
  }
  // Returns false (and applies nothing) if any gradient is non-finite.
  bool apply(Mlp<Real>& m, const MlpGrads<Real>& g) {
    for (int l = 0; l < m.layer_count(); ++l)
      if (!kernels::all_finite(g.dw[l].data(), g.dw[l].size()) ||
          !kernels::all_finite(g.db[l].data(), g.db[l].size()))
        return false;
    for (int l = 0; l < m.layer_count(); ++l) {
      adam_apply(wst[l], m.w[l].data(), g.dw[l].data(), g.dw[l].size());
      adam_apply(bst[l], m.b[l].data(), g.db[l].data(), g.db[l].size());
    }
    return true;
  }
};

}  // namespace vnf::diffnet
