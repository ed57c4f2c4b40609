#include "banet/zoo/model.hpp"

#include <cmath>
#include <cstring>

#include "banet/common.hpp"
#include "banet/kern/kernels.hpp"

namespace banet::zoo {

using nn::Activation;
using nn::Mode;
using nn::Rng;
using nn::SeqBuf;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::banet: return "banet";
    case Variant::banet_time: return "banet-time";
    case Variant::banet_body: return "banet-body";
    case Variant::banet_dense: return "banet-dense";
    case Variant::banet_compatible: return "banet-compatible";
    case Variant::stacked_lstm: return "stacked-lstm";
    case Variant::bi_lstm: return "bi-lstm";
    case Variant::conv_lstm: return "conv-lstm";
  }
  return "?";
}

Variant variant_from_string(std::string_view s) {
  for (Variant v : all_variants())
    if (to_string(v) == s) return v;
  throw usage_error(str_cat("unknown variant: ", s));
}

std::vector<Variant> all_variants() {
  return {Variant::banet,         Variant::banet_time,   Variant::banet_body,
          Variant::banet_dense,   Variant::banet_compatible,
          Variant::stacked_lstm,  Variant::bi_lstm,      Variant::conv_lstm};
}

bool variant_has_attention(Variant v) {
  switch (v) {
    case Variant::stacked_lstm:
    case Variant::bi_lstm:
    case Variant::conv_lstm: return false;
    default: return true;
  }
}

int ModelSpec::resolved_hidden() const {
  if (hidden > 0) return hidden;
  switch (variant) {
    case Variant::stacked_lstm:
    case Variant::conv_lstm: return 28;
    case Variant::bi_lstm: return 14;
    default: return 8;
  }
}

namespace {

bool is_banet_family(Variant v) {
  return v == Variant::banet || v == Variant::banet_time ||
         v == Variant::banet_body || v == Variant::banet_dense;
}

bool has_body_attention(Variant v) {
  return v == Variant::banet || v == Variant::banet_body || v == Variant::banet_dense;
}

// dz = (dy - (dy . y)) .* y for y = softmax(z)
void softmax_backward(const double* y, const double* dy, double* dz, int n) {
  double dot = 0.0;
  for (int i = 0; i < n; ++i) dot += dy[i] * y[i];
  for (int i = 0; i < n; ++i) dz[i] = (dy[i] - dot) * y[i];
}

} // namespace

struct Model::Work {
  SeqBuf xin;          // encoder input
  nn::StackTape stack_tape;
  std::vector<Rng> row_rngs;
  SeqBuf dH;

  std::vector<double> att;    // [B][C][T] temporal attention
  std::vector<double> hpart;  // [rows][T][K] part-major copy of the encoder output
  std::vector<double> dhpart; // same layout, attention-stage gradients
  std::vector<double> hpool;  // [B][K][C]
  std::vector<double> h1;     // [B][K][C] body fc1 tanh outputs
  std::vector<double> brow;   // [B][K][C] body softmax rows
  std::vector<double> u;      // [B][clf_in]
  std::vector<double> probs;  // [B][classes]
  std::vector<double> flat_h; // dense-variant gather scratch

  // banet-compatible input attention tape: [B][T][2][C]
  std::vector<double> cin_h1, cin_b;

  // bi-lstm
  std::vector<nn::BiTape> bi_tapes;
  std::vector<SeqBuf> bi_raw, bi_masked, bi_masks;
  SeqBuf bi_d, bi_d2;

  // conv-lstm
  SeqBuf conv_y, pool_y, lstm_h, d_lstm, d_pool, d_conv;
  std::vector<uint8_t> pool_arg;
  nn::LstmTape clstm_tape;
};

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

Model::Model(const ModelSpec& spec, std::uint64_t seed)
    : spec_(spec), seed_(seed), work_(std::make_unique<Work>()) {
  if (spec_.parts <= 0 || spec_.features_per_part <= 0 || spec_.window <= 0 ||
      spec_.lstm_layers <= 0 || spec_.classes < 2)
    throw usage_error("ModelSpec: non-positive dimension");
  if (spec_.dropout < 0.0 || spec_.dropout > 1.0)
    throw usage_error("ModelSpec: dropout outside [0,1]");

  const int C = spec_.parts, T = spec_.window, K = spec_.resolved_hidden();
  const int F = spec_.features_per_part;
  const Variant v = spec_.variant;

  std::vector<int> dims;
  if (is_banet_family(v)) {
    dims.push_back(F);
  } else if (v == Variant::banet_compatible || v == Variant::stacked_lstm) {
    dims.push_back(C * F);
  }

  if (v == Variant::banet_compatible) {
    fc1_ = nn::DenseLayer::make(ps_, "inatt.fc1", C, C);
    fc2_ = nn::DenseLayer::make(ps_, "inatt.fc2", C, C);
  }

  if (is_banet_family(v) || v == Variant::banet_compatible ||
      v == Variant::stacked_lstm) {
    for (int l = 0; l < spec_.lstm_layers; ++l) dims.push_back(K);
    stack_ = nn::LstmStack::make(ps_, "lstm", dims, spec_.dropout);
  }

  if (is_banet_family(v) || v == Variant::banet_compatible) {
    if (v == Variant::banet || v == Variant::banet_time) {
      for (int c = 0; c < C; ++c)
        tconvs_.push_back(
            nn::Conv1x1::make(ps_, str_cat("tatt.c", c + 1), K));
    } else if (v == Variant::banet_body || v == Variant::banet_compatible) {
      tconvs_.push_back(nn::Conv1x1::make(ps_, "tatt.shared", K)); // learned pooling
    } else { // banet_dense: fully-connected scorer over the T*K block, shared
      tdense_ = nn::DenseLayer::make(ps_, "tatt.dense", T * K, T);
    }
  }

  if (has_body_attention(v)) {
    fc1_ = nn::DenseLayer::make(ps_, "body.fc1", C, C);
    fc2_ = nn::DenseLayer::make(ps_, "body.fc2", C, C);
  }

  if (v == Variant::bi_lstm) {
    int in = C * F;
    for (int l = 0; l < spec_.lstm_layers; ++l) {
      bi_fwd_.push_back(nn::LstmLayer::make(ps_, str_cat("bi", l + 1, ".fwd"), in, K));
      bi_bwd_.push_back(nn::LstmLayer::make(ps_, str_cat("bi", l + 1, ".bwd"), in, K));
      in = 2 * K;
    }
  }

  if (v == Variant::conv_lstm) {
    if (spec_.window < spec_.conv_kernel)
      throw usage_error("conv-lstm: window shorter than kernel");
    conv_ = nn::Conv1dLayer::make(ps_, "conv", C * F, spec_.conv_filters,
                                  spec_.conv_kernel);
    clstm_ = nn::LstmLayer::make(ps_, "lstm", spec_.conv_filters, K);
  }

  int clf_in = 0;
  switch (v) {
    case Variant::banet:
    case Variant::banet_time:
    case Variant::banet_body:
    case Variant::banet_dense:
    case Variant::banet_compatible: clf_in = K * C; break;
    case Variant::stacked_lstm:
    case Variant::conv_lstm: clf_in = K; break;
    case Variant::bi_lstm: clf_in = 2 * K; break;
  }
  clf_ = nn::DenseLayer::make(ps_, "clf", clf_in, spec_.classes);

  // deterministic init, one stream per registered block
  const Rng init = Rng(seed_).derive(nn::rng_tag::kInit);
  int idx = 0;
  auto next = [&] { return init.derive(idx++); };
  if (v == Variant::banet_compatible) {
    nn::init_dense(ps_, fc1_, next());
    nn::init_dense(ps_, fc2_, next());
  }
  for (const auto& l : stack_.layers) nn::init_lstm(ps_, l, next());
  for (const auto& cv : tconvs_) nn::init_conv1x1(ps_, cv, next());
  if (v == Variant::banet_dense) nn::init_dense(ps_, tdense_, next());
  if (has_body_attention(v)) {
    nn::init_dense(ps_, fc1_, next());
    nn::init_dense(ps_, fc2_, next());
  }
  for (size_t l = 0; l < bi_fwd_.size(); ++l) {
    nn::init_lstm(ps_, bi_fwd_[l], next());
    nn::init_lstm(ps_, bi_bwd_[l], next());
  }
  if (v == Variant::conv_lstm) {
    nn::init_conv1d(ps_, conv_, next());
    nn::init_lstm(ps_, clstm_, next());
  }
  nn::init_dense(ps_, clf_, next());
}

Model Model::clone() const {
  Model m(spec_, seed_);
  auto src = ps_.all_values();
  auto dst = m.ps_.all_values();
  std::copy(src.begin(), src.end(), dst.begin());
  return m;
}

double Model::compute_gradients(const BatchView& batch, const Rng& rng,
                                std::vector<double>* probs_out) {
  ps_.zero_grads();
  return forward_backward(batch, Mode::train, rng, true, *work_, probs_out, nullptr);
}

double Model::mean_loss(const BatchView& batch, Mode mode, const Rng& rng) const {
  static thread_local Work w;
  return forward_backward(batch, mode, rng, false, w, nullptr, nullptr);
}

void Model::predict(const BatchView& batch, std::vector<double>& probs,
                    std::vector<AttentionRecord>* attention) const {
  if (attention && !variant_has_attention(spec_.variant))
    throw usage_error(str_cat("variant ", to_string(spec_.variant),
                              " exposes no attention scores"));
  static thread_local Work w;
  forward_backward(batch, Mode::infer, Rng(0), false, w, &probs, attention);
}

nn::Matrix Model::encode_part(std::span<const double> segment, int part) const {
  if (!is_banet_family(spec_.variant))
    throw usage_error("encode_part: banet-family variants only");
  const int T = spec_.window, C = spec_.parts, F = spec_.features_per_part;
  if (static_cast<int>(segment.size()) != T * C * F)
    throw usage_error("encode_part: segment size mismatch (columns must be 2C)");
  if (part < 0 || part >= C) throw usage_error("encode_part: part out of range");
  nn::Matrix slice(T, F);
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f) slice(t, f) = segment[t * C * F + part * F + f];
  return nn::lstm_stack_forward(ps_, stack_, slice, Mode::infer, Rng(0));
}

// The only backward=true caller is the non-const compute_gradients, so the
// const_cast below never mutates through an actually-const object.
double Model::forward_backward(const BatchView& batch, Mode mode, const Rng& rng,
                               bool backward, Work& w, std::vector<double>* probs_out,
                               std::vector<AttentionRecord>* attention) const {
  const int B = static_cast<int>(batch.x.size());
  if (B == 0) throw usage_error("empty batch");
  const bool need_loss = !batch.labels.empty() || backward;
  if (need_loss && static_cast<int>(batch.labels.size()) != B)
    throw usage_error("batch labels size mismatch");

  nn::ParamStore& gps = const_cast<nn::ParamStore&>(ps_);

  const int T = spec_.window, C = spec_.parts, F = spec_.features_per_part;
  const int K = spec_.resolved_hidden(), classes = spec_.classes;
  const int in_cols = C * F;
  const Variant v = spec_.variant;
  const auto& kn = kern::active();

  w.probs.assign(static_cast<size_t>(B) * classes, 0.0);
  w.u.assign(static_cast<size_t>(B) * clf_.in, 0.0);
  if (attention) attention->assign(static_cast<size_t>(B), AttentionRecord{});

  double loss = 0.0;
  std::vector<double> logits(classes), du(clf_.in), dlog(classes);

  auto head_forward = [&](int s) {
    const double* us = w.u.data() + static_cast<size_t>(s) * clf_.in;
    clf_.forward(ps_, us, logits.data(), Activation::none);
    nn::softmax_inplace(logits);
    std::copy(logits.begin(), logits.end(),
              w.probs.begin() + static_cast<size_t>(s) * classes);
    if (need_loss) loss += nn::cross_entropy(logits, batch.labels[s]) / B;
  };
  auto head_backward = [&](int s) {
    const double* ps_row = w.probs.data() + static_cast<size_t>(s) * classes;
    for (int cdx = 0; cdx < classes; ++cdx)
      dlog[cdx] = (ps_row[cdx] - (batch.labels[s] == cdx ? 1.0 : 0.0)) / B;
    clf_.backward(gps, w.u.data() + static_cast<size_t>(s) * clf_.in, dlog.data(),
                  du.data());
  };

  // ---------------- banet family ----------------
  if (is_banet_family(v)) {
    const int rows = B * C;
    w.xin.resize(T, rows, F);
    for (int s = 0; s < B; ++s) {
      const double* xs = batch.x[s];
      for (int t = 0; t < T; ++t) {
        const double* xr = xs + static_cast<size_t>(t) * in_cols;
        double* dst = w.xin.at(t) + static_cast<size_t>(s) * C * F;
        std::memcpy(dst, xr, sizeof(double) * C * F);
      }
    }
    w.row_rngs.clear();
    for (int s = 0; s < B; ++s) {
      const Rng sr = rng.derive(s);
      for (int c = 0; c < C; ++c) w.row_rngs.push_back(sr.derive(500 + c));
    }
    const SeqBuf& H =
        nn::lstm_stack_forward_batch(ps_, stack_, w.xin, mode, w.row_rngs, w.stack_tape);

    const bool body = has_body_attention(v);
    w.att.assign(static_cast<size_t>(B) * C * T, 0.0);
    w.hpool.assign(static_cast<size_t>(B) * K * C, 0.0);
    if (body) {
      w.h1.assign(static_cast<size_t>(B) * K * C, 0.0);
      w.brow.assign(static_cast<size_t>(B) * K * C, 0.0);
    }
    // part-major copy of H so the attention stages stream contiguously
    w.hpart.resize(static_cast<size_t>(rows) * T * K);
    for (int t = 0; t < T; ++t) {
      const double* src = H.at(t);
      for (int e = 0; e < rows; ++e)
        std::memcpy(w.hpart.data() + (static_cast<size_t>(e) * T + t) * K,
                    src + static_cast<size_t>(e) * K, sizeof(double) * K);
    }

    for (int s = 0; s < B; ++s) {
      double* hp = w.hpool.data() + static_cast<size_t>(s) * K * C;
      for (int c = 0; c < C; ++c) {
        const int e = s * C + c;
        const double* h0 = w.hpart.data() + static_cast<size_t>(e) * T * K;
        double* a = w.att.data() + (static_cast<size_t>(s) * C + c) * T;
        if (v == Variant::banet_dense) {
          tdense_.forward(ps_, h0, a, Activation::none);
        } else {
          const nn::Conv1x1& cv =
              tconvs_.size() == 1 ? tconvs_[0] : tconvs_[static_cast<size_t>(c)];
          nn::conv1x1_scores(ps_, cv, h0, T, K, K, a);
        }
        nn::softmax_inplace({a, static_cast<size_t>(T)});
        for (int t = 0; t < T; ++t) {
          const double at = a[t];
          const double* hrow = h0 + static_cast<size_t>(t) * K;
          for (int k = 0; k < K; ++k) hp[k * C + c] += at * hrow[k];
        }
      }
      if (body) {
        double* usrow = w.u.data() + static_cast<size_t>(s) * clf_.in;
        for (int k = 0; k < K; ++k) {
          const double* r = hp + static_cast<size_t>(k) * C;
          double* h1k = w.h1.data() + (static_cast<size_t>(s) * K + k) * C;
          double* bk = w.brow.data() + (static_cast<size_t>(s) * K + k) * C;
          fc1_.forward(ps_, r, h1k, Activation::tanh);
          fc2_.forward(ps_, h1k, bk, Activation::softmax);
          for (int c = 0; c < C; ++c) usrow[k * C + c] = bk[c] * r[c];
        }
      } else {
        std::memcpy(w.u.data() + static_cast<size_t>(s) * clf_.in, hp,
                    sizeof(double) * K * C);
      }
      head_forward(s);
      if (attention) {
        AttentionRecord& rec = (*attention)[static_cast<size_t>(s)];
        rec.temporal = nn::Matrix(C, T);
        std::memcpy(rec.temporal.data(), w.att.data() + static_cast<size_t>(s) * C * T,
                    sizeof(double) * C * T);
        if (body) {
          rec.body = nn::Matrix(K, C);
          std::memcpy(rec.body.data(), w.brow.data() + static_cast<size_t>(s) * K * C,
                      sizeof(double) * K * C);
          rec.body_summary.assign(C, 0.0);
          for (int k = 0; k < K; ++k)
            for (int c = 0; c < C; ++c)
              rec.body_summary[static_cast<size_t>(c)] += rec.body(k, c) / K;
        }
      }
    }

    if (backward) {
      w.dhpart.assign(static_cast<size_t>(rows) * T * K, 0.0);
      std::vector<double> dhp(static_cast<size_t>(K) * C), dz2(C), dh1(C), dz1(C),
          dr2(C), da(T), dscore(T), dpooled(K);
      for (int s = 0; s < B; ++s) {
        head_backward(s);
        double* hp = w.hpool.data() + static_cast<size_t>(s) * K * C;
        if (has_body_attention(v)) {
          for (int k = 0; k < K; ++k) {
            const double* r = hp + static_cast<size_t>(k) * C;
            const double* h1k = w.h1.data() + (static_cast<size_t>(s) * K + k) * C;
            const double* bk = w.brow.data() + (static_cast<size_t>(s) * K + k) * C;
            const double* datt = du.data() + static_cast<size_t>(k) * C;
            std::vector<double> dB(C);
            for (int c = 0; c < C; ++c) dB[c] = datt[c] * r[c];
            softmax_backward(bk, dB.data(), dz2.data(), C);
            fc2_.backward(gps, h1k, dz2.data(), dh1.data());
            for (int c = 0; c < C; ++c) dz1[c] = dh1[c] * (1.0 - h1k[c] * h1k[c]);
            fc1_.backward(gps, r, dz1.data(), dr2.data());
            for (int c = 0; c < C; ++c)
              dhp[static_cast<size_t>(k) * C + c] = datt[c] * bk[c] + dr2[c];
          }
        } else {
          std::copy(du.begin(), du.end(), dhp.begin());
        }
        for (int c = 0; c < C; ++c) {
          const int e = s * C + c;
          const double* h0 = w.hpart.data() + static_cast<size_t>(e) * T * K;
          double* dh0 = w.dhpart.data() + static_cast<size_t>(e) * T * K;
          const double* a = w.att.data() + (static_cast<size_t>(s) * C + c) * T;
          for (int k = 0; k < K; ++k) dpooled[k] = dhp[static_cast<size_t>(k) * C + c];
          for (int t = 0; t < T; ++t) {
            const double* hrow = h0 + static_cast<size_t>(t) * K;
            double acc = 0.0;
            for (int k = 0; k < K; ++k) acc += dpooled[k] * hrow[k];
            da[t] = acc;
          }
          softmax_backward(a, da.data(), dscore.data(), T);
          if (v == Variant::banet_dense) {
            std::vector<double> dflat(static_cast<size_t>(T) * K);
            tdense_.backward(gps, h0, dscore.data(), dflat.data());
            for (int t = 0; t < T; ++t) {
              double* drow = dh0 + static_cast<size_t>(t) * K;
              const double* dfl = dflat.data() + static_cast<size_t>(t) * K;
              const double at = a[t];
              for (int k = 0; k < K; ++k) drow[k] += dfl[k] + at * dpooled[k];
            }
          } else {
            const nn::Conv1x1& cv =
                tconvs_.size() == 1 ? tconvs_[0] : tconvs_[static_cast<size_t>(c)];
            auto gw = gps.grads(cv.w);
            auto gb = gps.grads(cv.b);
            const auto wv = ps_.values(cv.w);
            for (int t = 0; t < T; ++t) {
              const double ds = dscore[t], at = a[t];
              const double* hrow = h0 + static_cast<size_t>(t) * K;
              double* drow = dh0 + static_cast<size_t>(t) * K;
              gb[0] += ds;
              for (int k = 0; k < K; ++k) {
                gw[k] += ds * hrow[k];
                drow[k] += ds * wv[k] + at * dpooled[k];
              }
            }
          }
        }
      }
      // scatter the part-major gradients back to time-major for the stack
      w.dH.resize(T, rows, K);
      for (int t = 0; t < T; ++t) {
        double* dst = w.dH.at(t);
        for (int e = 0; e < rows; ++e)
          std::memcpy(dst + static_cast<size_t>(e) * K,
                      w.dhpart.data() + (static_cast<size_t>(e) * T + t) * K,
                      sizeof(double) * K);
      }
      nn::lstm_stack_backward_batch(gps, stack_, w.xin, w.stack_tape, w.dH, nullptr);
    }
  }

  // ---------------- banet-compatible ----------------
  else if (v == Variant::banet_compatible) {
    w.xin.resize(T, B, in_cols);
    w.cin_h1.assign(static_cast<size_t>(B) * T * F * C, 0.0);
    w.cin_b.assign(static_cast<size_t>(B) * T * F * C, 0.0);
    std::vector<double> rvec(C), h1v(C), bv(C);
    for (int s = 0; s < B; ++s) {
      const double* xs = batch.x[s];
      for (int t = 0; t < T; ++t) {
        const double* xr = xs + static_cast<size_t>(t) * in_cols;
        double* dst = w.xin.at(t) + static_cast<size_t>(s) * in_cols;
        for (int f = 0; f < F; ++f) {
          for (int c = 0; c < C; ++c) rvec[c] = xr[c * F + f];
          const size_t off = ((static_cast<size_t>(s) * T + t) * F + f) * C;
          fc1_.forward(ps_, rvec.data(), w.cin_h1.data() + off, Activation::tanh);
          fc2_.forward(ps_, w.cin_h1.data() + off, w.cin_b.data() + off,
                       Activation::softmax);
          for (int c = 0; c < C; ++c)
            dst[c * F + f] = w.cin_b[off + c] * rvec[c];
        }
      }
    }
    w.row_rngs.clear();
    for (int s = 0; s < B; ++s) w.row_rngs.push_back(rng.derive(s));
    const SeqBuf& H =
        nn::lstm_stack_forward_batch(ps_, stack_, w.xin, mode, w.row_rngs, w.stack_tape);
    const int hstride = B * K;
    w.att.assign(static_cast<size_t>(B) * T, 0.0);
    w.hpool.assign(static_cast<size_t>(B) * K, 0.0);
    for (int s = 0; s < B; ++s) {
      const double* h0 = H.d.data() + static_cast<size_t>(s) * K;
      double* a = w.att.data() + static_cast<size_t>(s) * T;
      nn::conv1x1_scores(ps_, tconvs_[0], h0, T, K, hstride, a);
      nn::softmax_inplace({a, static_cast<size_t>(T)});
      double* hp = w.hpool.data() + static_cast<size_t>(s) * K;
      for (int t = 0; t < T; ++t) {
        const double at = a[t];
        const double* hrow = h0 + static_cast<size_t>(t) * hstride;
        for (int k = 0; k < K; ++k) hp[k] += at * hrow[k];
      }
      double* usrow = w.u.data() + static_cast<size_t>(s) * clf_.in;
      for (int k = 0; k < K; ++k)
        for (int c = 0; c < C; ++c) usrow[k * C + c] = hp[k]; // tiled to K x C
      head_forward(s);
      if (attention) {
        AttentionRecord& rec = (*attention)[static_cast<size_t>(s)];
        rec.temporal = nn::Matrix(1, T);
        std::memcpy(rec.temporal.data(), a, sizeof(double) * T);
        rec.body = nn::Matrix(F, C);
        for (int t = 0; t < T; ++t)
          for (int f = 0; f < F; ++f)
            for (int c = 0; c < C; ++c)
              rec.body(f, c) +=
                  w.cin_b[((static_cast<size_t>(s) * T + t) * F + f) * C + c] / T;
        rec.body_summary.assign(C, 0.0);
        for (int f = 0; f < F; ++f)
          for (int c = 0; c < C; ++c) rec.body_summary[c] += rec.body(f, c) / F;
      }
    }

    if (backward) {
      w.dH.resize(T, B, K);
      w.dH.zero();
      std::vector<double> dpooled(K), da(T), dscore(T), dB(C), dz2(C), dh1(C), dz1(C);
      for (int s = 0; s < B; ++s) {
        head_backward(s);
        for (int k = 0; k < K; ++k) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c) acc += du[static_cast<size_t>(k) * C + c];
          dpooled[k] = acc;
        }
        const double* h0 = H.d.data() + static_cast<size_t>(s) * K;
        double* dh0 = w.dH.d.data() + static_cast<size_t>(s) * K;
        const double* a = w.att.data() + static_cast<size_t>(s) * T;
        for (int t = 0; t < T; ++t) {
          const double* hrow = h0 + static_cast<size_t>(t) * hstride;
          double acc = 0.0;
          for (int k = 0; k < K; ++k) acc += dpooled[k] * hrow[k];
          da[t] = acc;
        }
        softmax_backward(a, da.data(), dscore.data(), T);
        auto gw = gps.grads(tconvs_[0].w);
        auto gb = gps.grads(tconvs_[0].b);
        const auto wv = ps_.values(tconvs_[0].w);
        for (int t = 0; t < T; ++t) {
          const double ds = dscore[t], at = a[t];
          const double* hrow = h0 + static_cast<size_t>(t) * hstride;
          double* drow = dh0 + static_cast<size_t>(t) * hstride;
          gb[0] += ds;
          for (int k = 0; k < K; ++k) {
            gw[k] += ds * hrow[k];
            drow[k] += ds * wv[k] + at * dpooled[k];
          }
        }
      }
      SeqBuf dX;
      nn::lstm_stack_backward_batch(gps, stack_, w.xin, w.stack_tape, w.dH, &dX);
      std::vector<double> rvec(C);
      for (int s = 0; s < B; ++s) {
        const double* xs = batch.x[s];
        for (int t = 0; t < T; ++t) {
          const double* xr = xs + static_cast<size_t>(t) * in_cols;
          const double* dxt = dX.at(t) + static_cast<size_t>(s) * in_cols;
          for (int f = 0; f < F; ++f) {
            const size_t off = ((static_cast<size_t>(s) * T + t) * F + f) * C;
            for (int c = 0; c < C; ++c) {
              rvec[c] = xr[c * F + f];
              dB[c] = dxt[c * F + f] * rvec[c];
            }
            softmax_backward(w.cin_b.data() + off, dB.data(), dz2.data(), C);
            fc2_.backward(gps, w.cin_h1.data() + off, dz2.data(), dh1.data());
            for (int c = 0; c < C; ++c) {
              const double h = w.cin_h1[off + c];
              dz1[c] = dh1[c] * (1.0 - h * h);
            }
            fc1_.backward(gps, rvec.data(), dz1.data(), nullptr);
          }
        }
      }
    }
  }

  // ---------------- stacked-lstm ----------------
  else if (v == Variant::stacked_lstm) {
    w.xin.resize(T, B, in_cols);
    for (int s = 0; s < B; ++s)
      for (int t = 0; t < T; ++t)
        std::memcpy(w.xin.at(t) + static_cast<size_t>(s) * in_cols,
                    batch.x[s] + static_cast<size_t>(t) * in_cols,
                    sizeof(double) * in_cols);
    w.row_rngs.clear();
    for (int s = 0; s < B; ++s) w.row_rngs.push_back(rng.derive(s));
    const SeqBuf& H =
        nn::lstm_stack_forward_batch(ps_, stack_, w.xin, mode, w.row_rngs, w.stack_tape);
    for (int s = 0; s < B; ++s) {
      std::memcpy(w.u.data() + static_cast<size_t>(s) * K,
                  H.at(T - 1) + static_cast<size_t>(s) * K, sizeof(double) * K);
      head_forward(s);
    }
    if (backward) {
      w.dH.resize(T, B, K);
      w.dH.zero();
      for (int s = 0; s < B; ++s) {
        head_backward(s);
        std::memcpy(w.dH.at(T - 1) + static_cast<size_t>(s) * K, du.data(),
                    sizeof(double) * K);
      }
      nn::lstm_stack_backward_batch(gps, stack_, w.xin, w.stack_tape, w.dH, nullptr);
    }
  }

  // ---------------- bi-lstm ----------------
  else if (v == Variant::bi_lstm) {
    const size_t L = bi_fwd_.size();
    w.xin.resize(T, B, in_cols);
    for (int s = 0; s < B; ++s)
      for (int t = 0; t < T; ++t)
        std::memcpy(w.xin.at(t) + static_cast<size_t>(s) * in_cols,
                    batch.x[s] + static_cast<size_t>(t) * in_cols,
                    sizeof(double) * in_cols);
    w.bi_tapes.resize(L);
    w.bi_raw.resize(L);
    w.bi_masked.resize(L);
    w.bi_masks.resize(L);
    const bool drop = mode == Mode::train && spec_.dropout > 0.0;
    const SeqBuf* in = &w.xin;
    for (size_t l = 0; l < L; ++l) {
      nn::bilstm_forward_batch(ps_, bi_fwd_[l], bi_bwd_[l], *in, w.bi_raw[l],
                               w.bi_tapes[l]);
      if (drop) {
        w.bi_masks[l].resize(T, B, 2 * K);
        std::vector<Rng> rr;
        for (int s = 0; s < B; ++s)
          rr.push_back(rng.derive(s).derive(nn::rng_tag::kDropout).derive(l));
        nn::make_dropout_mask(w.bi_masks[l], spec_.dropout, rr);
        nn::apply_mask(w.bi_masks[l], w.bi_raw[l], w.bi_masked[l]);
      } else {
        w.bi_masked[l] = w.bi_raw[l];
        w.bi_masks[l] = SeqBuf{};
      }
      in = &w.bi_masked[l];
    }
    const SeqBuf& Hf = w.bi_masked[L - 1];
    for (int s = 0; s < B; ++s) {
      double* usrow = w.u.data() + static_cast<size_t>(s) * clf_.in;
      // forward half at the last step, backward half at the first step
      std::memcpy(usrow, Hf.at(T - 1) + static_cast<size_t>(s) * 2 * K,
                  sizeof(double) * K);
      std::memcpy(usrow + K, Hf.at(0) + static_cast<size_t>(s) * 2 * K + K,
                  sizeof(double) * K);
      head_forward(s);
    }
    if (backward) {
      w.bi_d.resize(T, B, 2 * K);
      w.bi_d.zero();
      for (int s = 0; s < B; ++s) {
        head_backward(s);
        double* dT = w.bi_d.at(T - 1) + static_cast<size_t>(s) * 2 * K;
        double* d0 = w.bi_d.at(0) + static_cast<size_t>(s) * 2 * K + K;
        for (int k = 0; k < K; ++k) dT[k] += du[k];
        for (int k = 0; k < K; ++k) d0[k] += du[K + k];
      }
      SeqBuf* d = &w.bi_d;
      for (size_t li = L; li-- > 0;) {
        if (w.bi_masks[li].d.size())
          kn.mul_v(d->d.data(), w.bi_masks[li].d.data(), d->d.data(),
                   static_cast<int>(d->d.size()));
        const SeqBuf& lin = li == 0 ? w.xin : w.bi_masked[li - 1];
        SeqBuf* din = li == 0 ? nullptr : &w.bi_d2;
        nn::bilstm_backward_batch(gps, bi_fwd_[li], bi_bwd_[li], lin, w.bi_raw[li],
                                  w.bi_tapes[li], *d, din);
        if (li == 0) break;
        std::swap(w.bi_d, w.bi_d2);
        d = &w.bi_d;
      }
    }
  }

  // ---------------- conv-lstm ----------------
  else if (v == Variant::conv_lstm) {
    w.xin.resize(T, B, in_cols);
    for (int s = 0; s < B; ++s)
      for (int t = 0; t < T; ++t)
        std::memcpy(w.xin.at(t) + static_cast<size_t>(s) * in_cols,
                    batch.x[s] + static_cast<size_t>(t) * in_cols,
                    sizeof(double) * in_cols);
    nn::conv1d_forward_batch(ps_, conv_, w.xin, w.conv_y);
    nn::maxpool2_forward(w.conv_y, w.pool_y, w.pool_arg);
    if (w.pool_y.T < 1) throw usage_error("conv-lstm: pooled sequence empty");
    nn::lstm_forward_batch(ps_, clstm_, w.pool_y, w.lstm_h, w.clstm_tape);
    const int Tp = w.pool_y.T;
    for (int s = 0; s < B; ++s) {
      std::memcpy(w.u.data() + static_cast<size_t>(s) * K,
                  w.lstm_h.at(Tp - 1) + static_cast<size_t>(s) * K,
                  sizeof(double) * K);
      head_forward(s);
    }
    if (backward) {
      w.d_lstm.resize(Tp, B, K);
      w.d_lstm.zero();
      for (int s = 0; s < B; ++s) {
        head_backward(s);
        std::memcpy(w.d_lstm.at(Tp - 1) + static_cast<size_t>(s) * K, du.data(),
                    sizeof(double) * K);
      }
      nn::lstm_backward_batch(gps, clstm_, w.pool_y, w.lstm_h, w.clstm_tape,
                              w.d_lstm, &w.d_pool);
      w.d_conv.resize(w.conv_y.T, B, conv_.filters);
      nn::maxpool2_backward(w.d_pool, w.pool_arg, w.d_conv);
      nn::conv1d_backward_batch(gps, conv_, w.xin, w.conv_y, w.d_conv);
    }
  } else {
    throw usage_error("unknown variant");
  }

  if (probs_out) *probs_out = w.probs;
  return loss;
}

} // namespace banet::zoo
