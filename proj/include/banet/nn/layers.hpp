#pragma once

#include <span>
#include <string>
#include <vector>

#include "banet/nn/matrix.hpp"
#include "banet/nn/param_store.hpp"
#include "banet/nn/rng.hpp"

namespace banet::nn {

enum class Mode { train, infer };
enum class Activation { none, tanh, softmax };

// ---------- stateless ops ----------

// Stable softmax (max subtraction). Throws usage_error on empty input.
std::vector<double> softmax(std::span<const double> v);
void softmax_inplace(std::span<double> v);

// -log(probs[label]) with probs[label] clamped to >= 1e-12.
double cross_entropy(std::span<const double> probs, int label);

// ---------- batched sequence buffer, layout [T][rows][f] ----------

struct SeqBuf {
  int T = 0, rows = 0, f = 0;
  std::vector<double> d;

  // Allocates only; contents are unspecified unless zero() is called. Callers
  // that accumulate into the buffer zero it explicitly.
  void resize(int T_, int rows_, int f_) {
    T = T_;
    rows = rows_;
    f = f_;
    d.resize(static_cast<size_t>(T) * rows * f);
  }
  size_t step_size() const { return static_cast<size_t>(rows) * f; }
  double* at(int t) { return d.data() + static_cast<size_t>(t) * step_size(); }
  const double* at(int t) const { return d.data() + static_cast<size_t>(t) * step_size(); }
  void zero() { std::fill(d.begin(), d.end(), 0.0); }
};

// ---------- layers ----------

struct DenseLayer {
  int in = 0, out = 0;
  BlockId w = -1, b = -1; // w: in x out row-major

  static DenseLayer make(ParamStore& ps, const std::string& name, int in, int out);
  size_t param_count() const { return static_cast<size_t>(in) * out + out; }
  // y = act(W^T x + b)
  void forward(const ParamStore& ps, const double* x, double* y, Activation act) const;
  // Given dy w.r.t. pre-activation output, accumulates weight/bias grads and
  // (optionally) writes dx. Activation derivative is handled by the caller.
  void backward(ParamStore& ps, const double* x, const double* dy, double* dx) const;
};

struct Conv1x1 {
  int k = 0;
  BlockId w = -1, b = -1; // w: k weights, b: single bias

  static Conv1x1 make(ParamStore& ps, const std::string& name, int k);
  size_t param_count() const { return static_cast<size_t>(k) + 1; }
};

// scores[t] = w . H[t] + b for each timestep; no cross-timestep mixing.
void conv1x1_scores(const ParamStore& ps, const Conv1x1& cv, const double* h,
                    int T, int K, int row_stride, double* out);

struct LstmLayer {
  int in = 0, hid = 0;
  BlockId w = -1, b = -1; // w: (in+hid) x 4hid, gate column blocks [i|f|o|g]

  static LstmLayer make(ParamStore& ps, const std::string& name, int in, int hid);
  size_t param_count() const {
    return 4 * (static_cast<size_t>(in + hid) * hid + hid);
  }
};

struct LstmTape {
  // activated gate planes, layout [gate][T][rows][K] with gates (i, f, o, g)
  std::vector<double> gates;
  std::vector<double> dgates; // same layout, filled by the backward pass
  SeqBuf c, tanh_c;
  std::vector<double> dh_acc, dc, dcp, dh_total, wt, zeros;
  void prepare(int T, int rows, int in, int hid);
};

// X: [T][rows][in] -> H: [T][rows][hid]; zero initial state.
void lstm_forward_batch(const ParamStore& ps, const LstmLayer& l, const SeqBuf& X,
                        SeqBuf& H, LstmTape& tape);
// dH: gradient w.r.t. every h_t. Accumulates parameter grads; writes dX if given.
void lstm_backward_batch(ParamStore& ps, const LstmLayer& l, const SeqBuf& X,
                         const SeqBuf& H, LstmTape& tape, const SeqBuf& dH,
                         SeqBuf* dX);

// ---------- dropout (inverted scaling; p = 1 yields zeros) ----------

// mask[t][r][k] drawn from row_rngs[r], counter (t*f + k).
void make_dropout_mask(SeqBuf& mask, double p, std::span<const Rng> row_rngs);
void apply_mask(const SeqBuf& mask, const SeqBuf& src, SeqBuf& dst);

// ---------- LSTM stack with dropout after every layer ----------

struct LstmStack {
  std::vector<LstmLayer> layers;
  double dropout_p = 0.5;

  static LstmStack make(ParamStore& ps, const std::string& name,
                        std::span<const int> dims, double dropout_p);
  size_t param_count() const;
};

struct StackTape {
  std::vector<SeqBuf> h_raw;    // per-layer outputs before dropout
  std::vector<SeqBuf> h_masked; // inputs to the next stage
  std::vector<SeqBuf> masks;
  std::vector<LstmTape> taps;
  SeqBuf d_scratch[2]; // ping-pong buffers for the backward chain
};

// row_rngs: one stream per row (sample or sample-part); ignored in infer mode.
// Returns the final (post-dropout) output.
const SeqBuf& lstm_stack_forward_batch(const ParamStore& ps, const LstmStack& st,
                                       const SeqBuf& X, Mode mode,
                                       std::span<const Rng> row_rngs,
                                       StackTape& tape);
void lstm_stack_backward_batch(ParamStore& ps, const LstmStack& st, const SeqBuf& X,
                               StackTape& tape, SeqBuf& dH_final, SeqBuf* dX);

// ---------- bidirectional layer ----------

struct BiTape {
  SeqBuf x_rev, h_fwd, h_bwd_rev, dh_scratch, dx_rev;
  LstmTape fwd, bwd;
};

// Output [T][rows][2K]: forward pass over X concatenated with the backward
// pass over time-reversed X, re-reversed to forward time.
void bilstm_forward_batch(const ParamStore& ps, const LstmLayer& fwd,
                          const LstmLayer& bwd, const SeqBuf& X, SeqBuf& H,
                          BiTape& tape);
void bilstm_backward_batch(ParamStore& ps, const LstmLayer& fwd,
                           const LstmLayer& bwd, const SeqBuf& X, const SeqBuf& H,
                           BiTape& tape, const SeqBuf& dH, SeqBuf* dX);

// ---------- 1-d convolution over time + max pooling (conv-lstm baseline) ----------

struct Conv1dLayer {
  int in_ch = 0, filters = 0, ksize = 0;
  BlockId w = -1, b = -1; // w: filters x (in_ch*ksize)

  static Conv1dLayer make(ParamStore& ps, const std::string& name, int in_ch,
                          int filters, int ksize);
  size_t param_count() const {
    return static_cast<size_t>(filters) * in_ch * ksize + filters;
  }
};

// Valid convolution + ReLU: Y[t] over t in [0, T-ksize].
void conv1d_forward_batch(const ParamStore& ps, const Conv1dLayer& l,
                          const SeqBuf& X, SeqBuf& Y);
void conv1d_backward_batch(ParamStore& ps, const Conv1dLayer& l, const SeqBuf& X,
                           const SeqBuf& Y, const SeqBuf& dY);

// Max pool over time, window/stride 2 (odd tail dropped). argmax: 0/1 per cell.
void maxpool2_forward(const SeqBuf& X, SeqBuf& Y, std::vector<uint8_t>& argmax);
void maxpool2_backward(const SeqBuf& dY, const std::vector<uint8_t>& argmax, SeqBuf& dX);

// ---------- single-sequence wrappers ----------

Matrix lstm_forward(const ParamStore& ps, const LstmLayer& l, const Matrix& X);
Matrix lstm_stack_forward(const ParamStore& ps, const LstmStack& st, const Matrix& X,
                          Mode mode, const Rng& rng);
Matrix bidirectional_forward(const ParamStore& ps, const LstmLayer& fwd,
                             const LstmLayer& bwd, const Matrix& X);
std::vector<double> dense_forward(const ParamStore& ps, const DenseLayer& d,
                                  std::span<const double> x, Activation act);
std::vector<double> conv1x1_time_forward(const ParamStore& ps, const Conv1x1& cv,
                                         const Matrix& H);

// ---------- Adam ----------

struct AdamState {
  double lr = 0.003, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long long t = 0;
  std::vector<double> m, v;

  void init(size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
  }
};

// Standard bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st);

// ---------- initialization ----------

// Uniform +-sqrt(6/(fan_in+fan_out)).
void init_uniform_glorot(std::span<double> w, int fan_in, int fan_out, const Rng& rng);

// Glorot weights, zero biases; LSTM forget-gate bias starts at 1.
void init_dense(ParamStore& ps, const DenseLayer& d, const Rng& rng);
void init_conv1x1(ParamStore& ps, const Conv1x1& cv, const Rng& rng);
void init_lstm(ParamStore& ps, const LstmLayer& l, const Rng& rng);
void init_conv1d(ParamStore& ps, const Conv1dLayer& l, const Rng& rng);

} // namespace banet::nn
