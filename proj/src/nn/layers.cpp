#include "banet/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "banet/kern/kernels.hpp"
#include "banet/kern/scalar_math.hpp"

namespace banet::nn {

// ---------- stateless ops ----------

void softmax_inplace(std::span<double> v) {
  if (v.empty()) throw usage_error("softmax: empty input");
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : v) {
    x = kern::detail::exp_core(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  softmax_inplace(out);
  return out;
}

double cross_entropy(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<size_t>(label) >= probs.size())
    throw usage_error("cross_entropy: label out of range");
  const double p = std::max(probs[static_cast<size_t>(label)], 1e-12);
  return -std::log(p);
}

// ---------- dense ----------

DenseLayer DenseLayer::make(ParamStore& ps, const std::string& name, int in, int out) {
  DenseLayer d;
  d.in = in;
  d.out = out;
  d.w = ps.add(name + ".w", in, out);
  d.b = ps.add(name + ".b", 1, out);
  return d;
}

void DenseLayer::forward(const ParamStore& ps, const double* x, double* y,
                         Activation act) const {
  const auto w_ = ps.values(w);
  const auto b_ = ps.values(b);
  for (int j = 0; j < out; ++j) y[j] = b_[j];
  for (int i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* wrow = w_.data() + static_cast<size_t>(i) * out;
    for (int j = 0; j < out; ++j) y[j] += xi * wrow[j];
  }
  if (act == Activation::tanh) {
    for (int j = 0; j < out; ++j) y[j] = kern::detail::tanh_core(y[j]);
  } else if (act == Activation::softmax) {
    softmax_inplace({y, static_cast<size_t>(out)});
  }
}

void DenseLayer::backward(ParamStore& ps, const double* x, const double* dy,
                          double* dx) const {
  auto gw = ps.grads(w);
  auto gb = ps.grads(b);
  const auto w_ = ps.values(w);
  for (int j = 0; j < out; ++j) gb[j] += dy[j];
  for (int i = 0; i < in; ++i) {
    const double xi = x[i];
    double* gwrow = gw.data() + static_cast<size_t>(i) * out;
    const double* wrow = w_.data() + static_cast<size_t>(i) * out;
    double acc = 0.0;
    for (int j = 0; j < out; ++j) {
      gwrow[j] += xi * dy[j];
      acc += wrow[j] * dy[j];
    }
    if (dx) dx[i] = acc;
  }
}

// ---------- conv 1x1 ----------

Conv1x1 Conv1x1::make(ParamStore& ps, const std::string& name, int k) {
  Conv1x1 cv;
  cv.k = k;
  cv.w = ps.add(name + ".w", 1, k);
  cv.b = ps.add(name + ".b", 1, 1);
  return cv;
}

void conv1x1_scores(const ParamStore& ps, const Conv1x1& cv, const double* h,
                    int T, int K, int row_stride, double* out) {
  if (K != cv.k) throw usage_error("conv1x1: hidden size mismatch");
  const auto w_ = ps.values(cv.w);
  const double b0 = ps.values(cv.b)[0];
  for (int t = 0; t < T; ++t) {
    const double* row = h + static_cast<size_t>(t) * row_stride;
    double s = b0;
    for (int k = 0; k < K; ++k) s += w_[k] * row[k];
    out[t] = s;
  }
}

// ---------- LSTM ----------

LstmLayer LstmLayer::make(ParamStore& ps, const std::string& name, int in, int hid) {
  LstmLayer l;
  l.in = in;
  l.hid = hid;
  l.w = ps.add(name + ".w", in + hid, 4 * hid);
  l.b = ps.add(name + ".b", 1, 4 * hid);
  return l;
}

void LstmTape::prepare(int T, int rows, int in, int hid) {
  const size_t plane = static_cast<size_t>(T) * rows * hid;
  gates.resize(4 * plane);
  c.resize(T, rows, hid);
  tanh_c.resize(T, rows, hid);
  const size_t nk = static_cast<size_t>(rows) * hid;
  dh_acc.resize(nk);
  dc.resize(nk);
  dcp.resize(nk);
  dh_total.resize(nk);
  wt.resize(static_cast<size_t>(4 * hid) * (in + hid));
  if (zeros.size() != nk) zeros.assign(nk, 0.0); // stays all-zero, read only
}

void lstm_forward_batch(const ParamStore& ps, const LstmLayer& l, const SeqBuf& X,
                        SeqBuf& H, LstmTape& tape) {
  if (X.f != l.in) throw usage_error("lstm_forward: input dim mismatch");
  const int T = X.T, rows = X.rows, K = l.hid;
  H.resize(T, rows, K);
  tape.prepare(T, rows, l.in, K);
  const auto& kn = kern::active();
  const double* w = ps.values(l.w).data(); // (in+K) x 4K, gate column blocks
  const auto b = ps.values(l.b);
  const size_t plane = static_cast<size_t>(T) * rows * K;
  const size_t step = static_cast<size_t>(rows) * K;
  // bias prefill plus the whole-sequence input projection, one gate at a time
  for (int g = 0; g < 4; ++g) {
    double* pg = tape.gates.data() + static_cast<size_t>(g) * plane;
    for (int k = 0; k < K; ++k) pg[k] = b[static_cast<size_t>(g) * K + k];
    size_t filled = K;
    while (filled < plane) {
      const size_t chunk = std::min(filled, plane - filled);
      std::memcpy(pg + filled, pg, chunk * sizeof(double));
      filled += chunk;
    }
    kn.gemm_nn(T * rows, K, l.in, X.d.data(), l.in, w + static_cast<size_t>(g) * K,
               4 * K, pg, K);
  }
  const double* wh = w + static_cast<size_t>(l.in) * 4 * K;
  double* gi = tape.gates.data();
  double* gf = gi + plane;
  double* go = gf + plane;
  double* gg = go + plane;
  for (int t = 0; t < T; ++t) {
    const size_t off = static_cast<size_t>(t) * step;
    if (t > 0) {
      const double* hprev = H.at(t - 1);
      kn.gemm_nn(rows, K, K, hprev, K, wh + 0 * K, 4 * K, gi + off, K);
      kn.gemm_nn(rows, K, K, hprev, K, wh + 1 * K, 4 * K, gf + off, K);
      kn.gemm_nn(rows, K, K, hprev, K, wh + 2 * K, 4 * K, go + off, K);
      kn.gemm_nn(rows, K, K, hprev, K, wh + 3 * K, 4 * K, gg + off, K);
    }
    const double* c_prev = t > 0 ? tape.c.at(t - 1) : tape.zeros.data();
    kn.lstm_point_fwd(static_cast<int>(step), gi + off, gf + off, go + off, gg + off,
                      c_prev, tape.c.at(t), tape.tanh_c.at(t), H.at(t));
  }
}

void lstm_backward_batch(ParamStore& ps, const LstmLayer& l, const SeqBuf& X,
                         const SeqBuf& H, LstmTape& tape, const SeqBuf& dH,
                         SeqBuf* dX) {
  const int T = X.T, rows = X.rows, K = l.hid;
  const int zw = l.in + K;
  const auto& kn = kern::active();
  const auto w_ = ps.values(l.w);
  auto gw = ps.grads(l.w);
  auto gb = ps.grads(l.b);
  // W^T for the input/hidden gradient products
  for (int j = 0; j < zw; ++j)
    for (int g = 0; g < 4 * K; ++g)
      tape.wt[static_cast<size_t>(g) * zw + j] = w_[static_cast<size_t>(j) * 4 * K + g];
  const size_t plane = static_cast<size_t>(T) * rows * K;
  const size_t step = static_cast<size_t>(rows) * K;
  tape.dgates.resize(4 * plane);
  const double* gp[4] = {tape.gates.data(), tape.gates.data() + plane,
                         tape.gates.data() + 2 * plane, tape.gates.data() + 3 * plane};
  double* dgp[4] = {tape.dgates.data(), tape.dgates.data() + plane,
                    tape.dgates.data() + 2 * plane, tape.dgates.data() + 3 * plane};
  std::fill(tape.dc.begin(), tape.dc.end(), 0.0);
  std::vector<double>& dh_next = tape.dh_acc;
  std::fill(dh_next.begin(), dh_next.end(), 0.0);
  for (int t = T - 1; t >= 0; --t) {
    const size_t off = static_cast<size_t>(t) * step;
    kn.add_v(dH.at(t), dh_next.data(), tape.dh_total.data(), static_cast<int>(step));
    const double* c_prev = t > 0 ? tape.c.at(t - 1) : tape.zeros.data();
    kn.lstm_point_bwd(static_cast<int>(step), gp[0] + off, gp[1] + off, gp[2] + off,
                      gp[3] + off, tape.tanh_c.at(t), c_prev, tape.dh_total.data(),
                      tape.dc.data(), dgp[0] + off, dgp[1] + off, dgp[2] + off,
                      dgp[3] + off, tape.dcp.data());
    std::swap(tape.dc, tape.dcp);
    if (t > 0) {
      const double* hprev = H.at(t - 1);
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      for (int g = 0; g < 4; ++g) {
        // hidden-state weight gradients and the recurrent gradient
        kn.gemm_tn(K, K, rows, hprev, K, dgp[g] + off, K,
                   gw.data() + static_cast<size_t>(l.in) * 4 * K + g * K, 4 * K);
        kn.gemm_nn(rows, K, K, dgp[g] + off, K,
                   tape.wt.data() + (static_cast<size_t>(g) * K) * zw + l.in, zw,
                   dh_next.data(), K);
      }
    }
  }
  // whole-sequence input-side gradients
  for (int g = 0; g < 4; ++g) {
    kn.gemm_tn(l.in, K, T * rows, X.d.data(), l.in, dgp[g], K,
               gw.data() + static_cast<size_t>(g) * K, 4 * K);
    const double* dgv = dgp[g];
    for (size_t i = 0; i < static_cast<size_t>(T) * rows; ++i)
      for (int k = 0; k < K; ++k) gb[static_cast<size_t>(g) * K + k] += dgv[i * K + k];
  }
  if (dX) {
    dX->resize(T, rows, l.in);
    dX->zero();
    for (int g = 0; g < 4; ++g)
      kn.gemm_nn(T * rows, l.in, K, dgp[g], K,
                 tape.wt.data() + (static_cast<size_t>(g) * K) * zw, zw,
                 dX->d.data(), l.in);
  }
}

// ---------- dropout ----------

void make_dropout_mask(SeqBuf& mask, double p, std::span<const Rng> row_rngs) {
  if (p < 0.0 || p > 1.0) throw usage_error("dropout: p outside [0,1]");
  const double scale = p >= 1.0 ? 0.0 : 1.0 / (1.0 - p);
  const int T = mask.T, rows = mask.rows, f = mask.f;
  for (int t = 0; t < T; ++t) {
    double* row = mask.at(t);
    for (int r = 0; r < rows; ++r) {
      const Rng& rr = row_rngs[static_cast<size_t>(r)];
      for (int k = 0; k < f; ++k)
        row[static_cast<size_t>(r) * f + k] =
            rr.unit(static_cast<std::uint64_t>(t) * f + k) < p ? 0.0 : scale;
    }
  }
}

void apply_mask(const SeqBuf& mask, const SeqBuf& src, SeqBuf& dst) {
  dst.resize(src.T, src.rows, src.f);
  kern::active().mul_v(src.d.data(), mask.d.data(), dst.d.data(),
                       static_cast<int>(src.d.size()));
}

// ---------- stack ----------

LstmStack LstmStack::make(ParamStore& ps, const std::string& name,
                          std::span<const int> dims, double dropout_p) {
  LstmStack st;
  st.dropout_p = dropout_p;
  for (size_t i = 0; i + 1 < dims.size(); ++i)
    st.layers.push_back(LstmLayer::make(ps, name + std::to_string(i + 1),
                                        dims[i], dims[i + 1]));
  return st;
}

size_t LstmStack::param_count() const {
  size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

const SeqBuf& lstm_stack_forward_batch(const ParamStore& ps, const LstmStack& st,
                                       const SeqBuf& X, Mode mode,
                                       std::span<const Rng> row_rngs,
                                       StackTape& tape) {
  const size_t L = st.layers.size();
  tape.h_raw.resize(L);
  tape.h_masked.resize(L);
  tape.masks.resize(L);
  tape.taps.resize(L);
  const bool drop = mode == Mode::train && st.dropout_p > 0.0;
  const SeqBuf* in = &X;
  for (size_t l = 0; l < L; ++l) {
    if (in->f != st.layers[l].in) throw usage_error("lstm stack: chained shape mismatch");
    lstm_forward_batch(ps, st.layers[l], *in, tape.h_raw[l], tape.taps[l]);
    if (drop) {
      tape.masks[l].resize(tape.h_raw[l].T, tape.h_raw[l].rows, tape.h_raw[l].f);
      std::vector<Rng> layer_rngs;
      layer_rngs.reserve(row_rngs.size());
      for (const Rng& r : row_rngs)
        layer_rngs.push_back(r.derive(rng_tag::kDropout).derive(l));
      make_dropout_mask(tape.masks[l], st.dropout_p, layer_rngs);
      apply_mask(tape.masks[l], tape.h_raw[l], tape.h_masked[l]);
    } else {
      tape.h_masked[l] = tape.h_raw[l];
      tape.masks[l] = SeqBuf{};
    }
    in = &tape.h_masked[l];
  }
  return tape.h_masked[L - 1];
}

void lstm_stack_backward_batch(ParamStore& ps, const LstmStack& st, const SeqBuf& X,
                               StackTape& tape, SeqBuf& dH_final, SeqBuf* dX) {
  const size_t L = st.layers.size();
  SeqBuf* d = &dH_final;
  int cur = 0;
  for (size_t li = L; li-- > 0;) {
    if (tape.masks[li].d.size())
      kern::active().mul_v(d->d.data(), tape.masks[li].d.data(), d->d.data(),
                           static_cast<int>(d->d.size()));
    const SeqBuf& in = li == 0 ? X : tape.h_masked[li - 1];
    SeqBuf* din = li == 0 ? dX : &tape.d_scratch[cur];
    lstm_backward_batch(ps, st.layers[li], in, tape.h_raw[li], tape.taps[li], *d, din);
    if (li == 0) break;
    d = din;
    cur ^= 1;
  }
}

// ---------- bidirectional ----------

namespace {

void reverse_time(const SeqBuf& src, SeqBuf& dst) {
  dst.resize(src.T, src.rows, src.f);
  for (int t = 0; t < src.T; ++t)
    std::memcpy(dst.at(t), src.at(src.T - 1 - t), sizeof(double) * src.step_size());
}

} // namespace

void bilstm_forward_batch(const ParamStore& ps, const LstmLayer& fwd,
                          const LstmLayer& bwd, const SeqBuf& X, SeqBuf& H,
                          BiTape& tape) {
  if (fwd.in != bwd.in || fwd.hid != bwd.hid)
    throw usage_error("bidirectional: direction shape mismatch");
  const int T = X.T, rows = X.rows, K = fwd.hid;
  lstm_forward_batch(ps, fwd, X, tape.h_fwd, tape.fwd);
  reverse_time(X, tape.x_rev);
  lstm_forward_batch(ps, bwd, tape.x_rev, tape.h_bwd_rev, tape.bwd);
  H.resize(T, rows, 2 * K);
  for (int t = 0; t < T; ++t) {
    const double* hf = tape.h_fwd.at(t);
    const double* hb = tape.h_bwd_rev.at(T - 1 - t);
    double* out = H.at(t);
    for (int r = 0; r < rows; ++r) {
      std::memcpy(out + static_cast<size_t>(r) * 2 * K,
                  hf + static_cast<size_t>(r) * K, sizeof(double) * K);
      std::memcpy(out + static_cast<size_t>(r) * 2 * K + K,
                  hb + static_cast<size_t>(r) * K, sizeof(double) * K);
    }
  }
}

void bilstm_backward_batch(ParamStore& ps, const LstmLayer& fwd,
                           const LstmLayer& bwd, const SeqBuf& X, const SeqBuf&,
                           BiTape& tape, const SeqBuf& dH, SeqBuf* dX) {
  const int T = X.T, rows = X.rows, K = fwd.hid;
  tape.dh_scratch.resize(T, rows, K);
  for (int t = 0; t < T; ++t) {
    const double* src = dH.at(t);
    double* dst = tape.dh_scratch.at(t);
    for (int r = 0; r < rows; ++r)
      std::memcpy(dst + static_cast<size_t>(r) * K,
                  src + static_cast<size_t>(r) * 2 * K, sizeof(double) * K);
  }
  lstm_backward_batch(ps, fwd, X, tape.h_fwd, tape.fwd, tape.dh_scratch, dX);
  for (int t = 0; t < T; ++t) {
    const double* src = dH.at(T - 1 - t);
    double* dst = tape.dh_scratch.at(t);
    for (int r = 0; r < rows; ++r)
      std::memcpy(dst + static_cast<size_t>(r) * K,
                  src + static_cast<size_t>(r) * 2 * K + K, sizeof(double) * K);
  }
  lstm_backward_batch(ps, bwd, tape.x_rev, tape.h_bwd_rev, tape.bwd,
                      tape.dh_scratch, dX ? &tape.dx_rev : nullptr);
  if (dX) {
    for (int t = 0; t < T; ++t) {
      const double* rev = tape.dx_rev.at(T - 1 - t);
      double* out = dX->at(t);
      for (size_t i = 0; i < dX->step_size(); ++i) out[i] += rev[i];
    }
  }
}

// ---------- conv1d + maxpool ----------

Conv1dLayer Conv1dLayer::make(ParamStore& ps, const std::string& name, int in_ch,
                              int filters, int ksize) {
  Conv1dLayer l;
  l.in_ch = in_ch;
  l.filters = filters;
  l.ksize = ksize;
  l.w = ps.add(name + ".w", filters, in_ch * ksize);
  l.b = ps.add(name + ".b", 1, filters);
  return l;
}

void conv1d_forward_batch(const ParamStore& ps, const Conv1dLayer& l,
                          const SeqBuf& X, SeqBuf& Y) {
  if (X.f != l.in_ch) throw usage_error("conv1d: channel mismatch");
  if (X.T < l.ksize) throw usage_error("conv1d: sequence shorter than kernel");
  const int Tc = X.T - l.ksize + 1, rows = X.rows;
  Y.resize(Tc, rows, l.filters);
  const auto w_ = ps.values(l.w);
  const auto b_ = ps.values(l.b);
  for (int t = 0; t < Tc; ++t) {
    double* yt = Y.at(t);
    for (int r = 0; r < rows; ++r) {
      for (int f = 0; f < l.filters; ++f) {
        const double* wf = w_.data() + static_cast<size_t>(f) * l.in_ch * l.ksize;
        double s = b_[f];
        for (int tau = 0; tau < l.ksize; ++tau) {
          const double* xr = X.at(t + tau) + static_cast<size_t>(r) * l.in_ch;
          for (int ch = 0; ch < l.in_ch; ++ch) s += wf[ch * l.ksize + tau] * xr[ch];
        }
        yt[static_cast<size_t>(r) * l.filters + f] = s > 0.0 ? s : 0.0;
      }
    }
  }
}

void conv1d_backward_batch(ParamStore& ps, const Conv1dLayer& l, const SeqBuf& X,
                           const SeqBuf& Y, const SeqBuf& dY) {
  auto gw = ps.grads(l.w);
  auto gb = ps.grads(l.b);
  const int Tc = Y.T, rows = Y.rows;
  for (int t = 0; t < Tc; ++t) {
    const double* yt = Y.at(t);
    const double* dyt = dY.at(t);
    for (int r = 0; r < rows; ++r) {
      for (int f = 0; f < l.filters; ++f) {
        const size_t idx = static_cast<size_t>(r) * l.filters + f;
        if (yt[idx] <= 0.0) continue; // ReLU gate
        const double d = dyt[idx];
        gb[f] += d;
        double* gwf = gw.data() + static_cast<size_t>(f) * l.in_ch * l.ksize;
        for (int tau = 0; tau < l.ksize; ++tau) {
          const double* xr = X.at(t + tau) + static_cast<size_t>(r) * l.in_ch;
          for (int ch = 0; ch < l.in_ch; ++ch) gwf[ch * l.ksize + tau] += d * xr[ch];
        }
      }
    }
  }
}

void maxpool2_forward(const SeqBuf& X, SeqBuf& Y, std::vector<uint8_t>& argmax) {
  const int Tp = X.T / 2, rows = X.rows, f = X.f;
  Y.resize(Tp, rows, f);
  argmax.assign(Y.d.size(), 0);
  for (int tp = 0; tp < Tp; ++tp) {
    const double* x0 = X.at(2 * tp);
    const double* x1 = X.at(2 * tp + 1);
    double* y = Y.at(tp);
    uint8_t* am = argmax.data() + static_cast<size_t>(tp) * rows * f;
    for (size_t i = 0; i < static_cast<size_t>(rows) * f; ++i) {
      if (x0[i] >= x1[i]) {
        y[i] = x0[i];
        am[i] = 0;
      } else {
        y[i] = x1[i];
        am[i] = 1;
      }
    }
  }
}

void maxpool2_backward(const SeqBuf& dY, const std::vector<uint8_t>& argmax,
                       SeqBuf& dX) {
  dX.zero();
  const int Tp = dY.T, rows = dY.rows, f = dY.f;
  for (int tp = 0; tp < Tp; ++tp) {
    const double* dy = dY.at(tp);
    const uint8_t* am = argmax.data() + static_cast<size_t>(tp) * rows * f;
    double* d0 = dX.at(2 * tp);
    double* d1 = dX.at(2 * tp + 1);
    for (size_t i = 0; i < static_cast<size_t>(rows) * f; ++i)
      (am[i] ? d1 : d0)[i] += dy[i];
  }
}

// ---------- single-sequence wrappers ----------

namespace {

SeqBuf to_seq(const Matrix& m) {
  SeqBuf s;
  s.resize(m.rows(), 1, m.cols());
  std::memcpy(s.d.data(), m.data(), sizeof(double) * m.size());
  return s;
}

Matrix to_matrix(const SeqBuf& s) {
  Matrix m(s.T, s.f);
  std::memcpy(m.data(), s.d.data(), sizeof(double) * s.d.size());
  return m;
}

} // namespace

Matrix lstm_forward(const ParamStore& ps, const LstmLayer& l, const Matrix& X) {
  if (X.cols() != l.in) throw usage_error("lstm_forward: input dim mismatch");
  SeqBuf xs = to_seq(X), hs;
  LstmTape tape;
  lstm_forward_batch(ps, l, xs, hs, tape);
  return to_matrix(hs);
}

Matrix lstm_stack_forward(const ParamStore& ps, const LstmStack& st, const Matrix& X,
                          Mode mode, const Rng& rng) {
  SeqBuf xs = to_seq(X);
  StackTape tape;
  const Rng row_rng[1] = {rng};
  const SeqBuf& out = lstm_stack_forward_batch(ps, st, xs, mode, row_rng, tape);
  return to_matrix(out);
}

Matrix bidirectional_forward(const ParamStore& ps, const LstmLayer& fwd,
                             const LstmLayer& bwd, const Matrix& X) {
  SeqBuf xs = to_seq(X), hs;
  BiTape tape;
  bilstm_forward_batch(ps, fwd, bwd, xs, hs, tape);
  return to_matrix(hs);
}

std::vector<double> dense_forward(const ParamStore& ps, const DenseLayer& d,
                                  std::span<const double> x, Activation act) {
  if (static_cast<int>(x.size()) != d.in)
    throw usage_error("dense_forward: input length mismatch");
  std::vector<double> y(static_cast<size_t>(d.out));
  d.forward(ps, x.data(), y.data(), act);
  return y;
}

std::vector<double> conv1x1_time_forward(const ParamStore& ps, const Conv1x1& cv,
                                         const Matrix& H) {
  std::vector<double> out(static_cast<size_t>(H.rows()));
  conv1x1_scores(ps, cv, H.data(), H.rows(), H.cols(), H.cols(), out.data());
  return out;
}

// ---------- Adam ----------

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st) {
  if (params.size() != grads.size() || st.m.size() != params.size() ||
      st.v.size() != params.size())
    throw usage_error("adam_step: shape mismatch");
  st.t += 1;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

// ---------- initialization ----------

void init_uniform_glorot(std::span<double> w, int fan_in, int fan_out, const Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (size_t i = 0; i < w.size(); ++i)
    w[i] = (2.0 * rng.unit(i) - 1.0) * limit;
}

void init_dense(ParamStore& ps, const DenseLayer& d, const Rng& rng) {
  init_uniform_glorot(ps.values(d.w), d.in, d.out, rng);
}

void init_conv1x1(ParamStore& ps, const Conv1x1& cv, const Rng& rng) {
  init_uniform_glorot(ps.values(cv.w), cv.k, 1, rng);
}

void init_lstm(ParamStore& ps, const LstmLayer& l, const Rng& rng) {
  init_uniform_glorot(ps.values(l.w), l.in + l.hid, l.hid, rng);
  auto b = ps.values(l.b);
  for (int j = l.hid; j < 2 * l.hid; ++j) b[j] = 1.0; // forget gate bias
}

void init_conv1d(ParamStore& ps, const Conv1dLayer& l, const Rng& rng) {
  init_uniform_glorot(ps.values(l.w), l.in_ch * l.ksize, l.filters * l.ksize, rng);
}

} // namespace banet::nn
