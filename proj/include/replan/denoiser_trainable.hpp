#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "replan/codebook.hpp"
#include "replan/diffusion.hpp"
#include "replan/errors.hpp"
#include "replan/rng.hpp"
#include "replan/scene_context.hpp"

namespace replan {

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  double* row(int i) { return &a[static_cast<size_t>(i) * cols]; }
  const double* row(int i) const { return &a[static_cast<size_t>(i) * cols]; }
};

struct DenoiserConfig {
  int vocab = 401;
  int seq_len = 32;
  int embed_dim = 64;
  int ffn_dim = 128;
  int time_bins = 16;
  int context_dim = SceneContext::kDim;

  bool operator==(const DenoiserConfig&) const = default;
};

// Token/position/timestep embeddings, a context projection, one single-head
// self-attention layer and a two-layer FFN (both residual), then a projection
// to vocab logits. Small enough for manual backprop in doubles.
struct DenoiserParams {
  DenoiserConfig config;
  Mat tok_emb;                   // vocab x E
  std::vector<double> mask_emb;  // E
  Mat pos_emb;                   // L x E
  Mat time_emb;                  // bins x E
  Mat ctx_w;                     // E x C
  std::vector<double> ctx_b;     // E
  Mat wq, wk, wv, wo;            // E x E
  std::vector<double> bq, bk, bv, bo;
  Mat w1;                        // F x E
  std::vector<double> b1;        // F
  Mat w2;                        // E x F
  std::vector<double> b2;        // E
  Mat out_w;                     // V x E
  std::vector<double> out_b;     // V

  static DenoiserParams zeros(const DenoiserConfig& cfg) {
    DenoiserParams p;
    p.config = cfg;
    const int e = cfg.embed_dim;
    p.tok_emb = Mat(cfg.vocab, e);
    p.mask_emb.assign(e, 0.0);
    p.pos_emb = Mat(cfg.seq_len, e);
    p.time_emb = Mat(cfg.time_bins, e);
    p.ctx_w = Mat(e, cfg.context_dim);
    p.ctx_b.assign(e, 0.0);
    p.wq = p.wk = p.wv = p.wo = Mat(e, e);
    p.bq = p.bk = p.bv = p.bo = std::vector<double>(e, 0.0);
    p.w1 = Mat(cfg.ffn_dim, e);
    p.b1.assign(cfg.ffn_dim, 0.0);
    p.w2 = Mat(e, cfg.ffn_dim);
    p.b2.assign(e, 0.0);
    p.out_w = Mat(cfg.vocab, e);
    p.out_b.assign(cfg.vocab, 0.0);
    return p;
  }

  // Small-normal init everywhere except the output projection, which starts
  // at zero so the untrained model predicts exactly uniform distributions.
  static DenoiserParams init(const DenoiserConfig& cfg, uint64_t seed) {
    DenoiserParams p = zeros(cfg);
    Rng rng(seed);
    p.for_each_tensor([&](const char* name, std::vector<double>& t) {
      if (std::string_view(name) == "out_w" || std::string_view(name) == "out_b") return;
      for (double& v : t) v = rng.normal(0.0, 0.02);
    });
    return p;
  }

  template <typename F>
  void for_each_tensor(F&& f) {
    f("tok_emb", tok_emb.a);
    f("mask_emb", mask_emb);
    f("pos_emb", pos_emb.a);
    f("time_emb", time_emb.a);
    f("ctx_w", ctx_w.a);
    f("ctx_b", ctx_b);
    f("wq", wq.a);
    f("bq", bq);
    f("wk", wk.a);
    f("bk", bk);
    f("wv", wv.a);
    f("bv", bv);
    f("wo", wo.a);
    f("bo", bo);
    f("w1", w1.a);
    f("b1", b1);
    f("w2", w2.a);
    f("b2", b2);
    f("out_w", out_w.a);
    f("out_b", out_b);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<DenoiserParams*>(this)->for_each_tensor(
        [&](const char* name, std::vector<double>& t) {
          f(name, static_cast<const std::vector<double>&>(t));
        });
  }

  size_t parameter_count() const {
    size_t n = 0;
    for_each_tensor([&](const char*, const std::vector<double>& t) { n += t.size(); });
    return n;
  }
};

struct ForwardCache {
  std::array<double, SceneContext::kDim> features{};
  int time_bucket = 0;
  std::vector<int> slot_token;    // resolved token per slot, -1 where masked
  std::vector<double> ctx_proj;   // E
  Mat h0, q, k, v, attn_w, attn, h1, z, r, h2;
};

namespace detail {

// y = w x + b
inline void affine(const Mat& w, const std::vector<double>& b, const double* x, double* y) {
  for (int i = 0; i < w.rows; ++i) {
    double acc = b[i];
    const double* wr = w.row(i);
    for (int j = 0; j < w.cols; ++j) acc += wr[j] * x[j];
    y[i] = acc;
  }
}

// y += w^T x
inline void add_transposed(const Mat& w, const double* x, double* y) {
  for (int i = 0; i < w.rows; ++i) {
    const double* wr = w.row(i);
    const double xi = x[i];
    for (int j = 0; j < w.cols; ++j) y[j] += wr[j] * xi;
  }
}

// w += x ⊗ y
inline void add_outer(Mat& w, const double* x, const double* y) {
  for (int i = 0; i < w.rows; ++i) {
    double* wr = w.row(i);
    const double xi = x[i];
    for (int j = 0; j < w.cols; ++j) wr[j] += xi * y[j];
  }
}

inline void add_into(std::vector<double>& acc, const double* x) {
  for (size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

}  // namespace detail

inline int time_bucket(int s, int total_steps, int bins) {
  if (total_steps < 1 || s < 0 || s > total_steps)
    throw std::invalid_argument("time_bucket: step out of range");
  const int b = static_cast<int>(std::floor(static_cast<double>(s) / total_steps * bins));
  return std::min(bins - 1, b);
}

inline DenoiserOutput trainable_forward(const DenoiserParams& p, const NoisySequence& noisy,
                                        const SceneContext& ctx, int s, int total_steps,
                                        ForwardCache* cache = nullptr) {
  const DenoiserConfig& cfg = p.config;
  const int L = cfg.seq_len;
  const int E = cfg.embed_dim;
  if (noisy.length() != L) throw std::invalid_argument("trainable denoiser: length mismatch");
  noisy.validate(cfg.vocab);

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.features = ctx.features;
  c.time_bucket = time_bucket(s, total_steps, cfg.time_bins);
  c.slot_token.resize(L);
  c.ctx_proj.resize(E);
  c.h0 = Mat(L, E);
  c.q = Mat(L, E);
  c.k = Mat(L, E);
  c.v = Mat(L, E);
  c.attn_w = Mat(L, L);
  c.attn = Mat(L, E);
  c.h1 = Mat(L, E);
  c.z = Mat(L, cfg.ffn_dim);
  c.r = Mat(L, cfg.ffn_dim);
  c.h2 = Mat(L, E);

  detail::affine(p.ctx_w, p.ctx_b, c.features.data(), c.ctx_proj.data());

  for (int i = 0; i < L; ++i) {
    c.slot_token[i] = noisy.mask_flags[i] ? -1 : noisy.tokens[i];
    const double* emb = c.slot_token[i] < 0 ? p.mask_emb.data() : p.tok_emb.row(c.slot_token[i]);
    double* h = c.h0.row(i);
    const double* pos = p.pos_emb.row(i);
    const double* tim = p.time_emb.row(c.time_bucket);
    for (int e = 0; e < E; ++e) h[e] = emb[e] + pos[e] + tim[e] + c.ctx_proj[e];
  }

  for (int i = 0; i < L; ++i) {
    detail::affine(p.wq, p.bq, c.h0.row(i), c.q.row(i));
    detail::affine(p.wk, p.bk, c.h0.row(i), c.k.row(i));
    detail::affine(p.wv, p.bv, c.h0.row(i), c.v.row(i));
  }

  const double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(E));
  std::vector<double> scores(L);
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      double acc = 0.0;
      const double* qi = c.q.row(i);
      const double* kj = c.k.row(j);
      for (int e = 0; e < E; ++e) acc += qi[e] * kj[e];
      scores[j] = acc * inv_sqrt_e;
    }
    softmax_row(scores.data(), L, c.attn_w.row(i));
    double* ai = c.attn.row(i);
    for (int e = 0; e < E; ++e) ai[e] = 0.0;
    for (int j = 0; j < L; ++j) {
      const double w = c.attn_w(i, j);
      const double* vj = c.v.row(j);
      for (int e = 0; e < E; ++e) ai[e] += w * vj[e];
    }
  }

  std::vector<double> tmp(E);
  for (int i = 0; i < L; ++i) {
    detail::affine(p.wo, p.bo, c.attn.row(i), tmp.data());
    double* h1 = c.h1.row(i);
    const double* h0 = c.h0.row(i);
    for (int e = 0; e < E; ++e) h1[e] = h0[e] + tmp[e];

    detail::affine(p.w1, p.b1, h1, c.z.row(i));
    double* r = c.r.row(i);
    const double* z = c.z.row(i);
    for (int f = 0; f < cfg.ffn_dim; ++f) r[f] = z[f] > 0.0 ? z[f] : 0.0;

    std::vector<double> back(E);
    detail::affine(p.w2, p.b2, r, back.data());
    double* h2 = c.h2.row(i);
    for (int e = 0; e < E; ++e) h2[e] = h1[e] + back[e];
  }

  DenoiserOutput out;
  out.length = L;
  out.vocab = cfg.vocab;
  out.logits.resize(static_cast<size_t>(L) * cfg.vocab);
  for (int i = 0; i < L; ++i)
    detail::affine(p.out_w, p.out_b, c.h2.row(i), &out.logits[static_cast<size_t>(i) * cfg.vocab]);
  return out;
}

// Exact analytic gradients for dLoss/dlogits given as `dlogits` (L x vocab).
inline DenoiserParams trainable_backward(const DenoiserParams& p, const ForwardCache& c,
                                         const Mat& dlogits) {
  const DenoiserConfig& cfg = p.config;
  const int L = cfg.seq_len;
  const int E = cfg.embed_dim;
  const int F = cfg.ffn_dim;
  if (dlogits.rows != L || dlogits.cols != cfg.vocab)
    throw std::invalid_argument("trainable_backward: gradient shape mismatch");

  DenoiserParams g = DenoiserParams::zeros(cfg);
  Mat dh0(L, E), dq(L, E), dk(L, E), dv(L, E), dattn(L, E);

  std::vector<double> dh2(E), dh1(E), dz(F), dr(F), tmp_e(E);
  for (int i = 0; i < L; ++i) {
    // output projection
    std::fill(dh2.begin(), dh2.end(), 0.0);
    const double* dl = dlogits.row(i);
    for (int vtok = 0; vtok < cfg.vocab; ++vtok) {
      const double dv_ = dl[vtok];
      if (dv_ == 0.0) continue;
      const double* h2 = c.h2.row(i);
      double* gw = g.out_w.row(vtok);
      for (int e = 0; e < E; ++e) {
        gw[e] += dv_ * h2[e];
        dh2[e] += dv_ * p.out_w(vtok, e);
      }
      g.out_b[vtok] += dv_;
    }

    // FFN block (residual)
    std::fill(dr.begin(), dr.end(), 0.0);
    detail::add_transposed(p.w2, dh2.data(), dr.data());
    detail::add_outer(g.w2, dh2.data(), c.r.row(i));
    detail::add_into(g.b2, dh2.data());
    for (int f = 0; f < F; ++f) dz[f] = c.z(i, f) > 0.0 ? dr[f] : 0.0;
    detail::add_outer(g.w1, dz.data(), c.h1.row(i));
    detail::add_into(g.b1, dz.data());
    for (int e = 0; e < E; ++e) dh1[e] = dh2[e];
    detail::add_transposed(p.w1, dz.data(), dh1.data());

    // attention output projection (residual)
    std::fill(tmp_e.begin(), tmp_e.end(), 0.0);
    detail::add_transposed(p.wo, dh1.data(), tmp_e.data());
    detail::add_outer(g.wo, dh1.data(), c.attn.row(i));
    detail::add_into(g.bo, dh1.data());
    for (int e = 0; e < E; ++e) {
      dattn(i, e) = tmp_e[e];
      dh0(i, e) = dh1[e];
    }
  }

  // attention mixing
  const double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(E));
  std::vector<double> da(L);
  for (int i = 0; i < L; ++i) {
    double dot_sum = 0.0;
    for (int j = 0; j < L; ++j) {
      double acc = 0.0;
      const double* dai = dattn.row(i);
      const double* vj = c.v.row(j);
      for (int e = 0; e < E; ++e) acc += dai[e] * vj[e];
      da[j] = acc;
      dot_sum += acc * c.attn_w(i, j);
      const double w = c.attn_w(i, j);
      double* dvj = dv.row(j);
      for (int e = 0; e < E; ++e) dvj[e] += w * dattn(i, e);
    }
    for (int j = 0; j < L; ++j) {
      const double ds = c.attn_w(i, j) * (da[j] - dot_sum) * inv_sqrt_e;
      if (ds == 0.0) continue;
      double* dqi = dq.row(i);
      double* dkj = dk.row(j);
      const double* kj = c.k.row(j);
      const double* qi = c.q.row(i);
      for (int e = 0; e < E; ++e) {
        dqi[e] += ds * kj[e];
        dkj[e] += ds * qi[e];
      }
    }
  }

  for (int i = 0; i < L; ++i) {
    detail::add_outer(g.wq, dq.row(i), c.h0.row(i));
    detail::add_into(g.bq, dq.row(i));
    detail::add_transposed(p.wq, dq.row(i), dh0.row(i));
    detail::add_outer(g.wk, dk.row(i), c.h0.row(i));
    detail::add_into(g.bk, dk.row(i));
    detail::add_transposed(p.wk, dk.row(i), dh0.row(i));
    detail::add_outer(g.wv, dv.row(i), c.h0.row(i));
    detail::add_into(g.bv, dv.row(i));
    detail::add_transposed(p.wv, dv.row(i), dh0.row(i));
  }

  // embeddings and context projection
  std::vector<double> dh0_sum(E, 0.0);
  for (int i = 0; i < L; ++i) {
    const double* d = dh0.row(i);
    if (c.slot_token[i] < 0)
      detail::add_into(g.mask_emb, d);
    else {
      double* row = g.tok_emb.row(c.slot_token[i]);
      for (int e = 0; e < E; ++e) row[e] += d[e];
    }
    double* pos = g.pos_emb.row(i);
    double* tim = g.time_emb.row(c.time_bucket);
    for (int e = 0; e < E; ++e) {
      pos[e] += d[e];
      tim[e] += d[e];
      dh0_sum[e] += d[e];
    }
  }
  detail::add_outer(g.ctx_w, dh0_sum.data(), c.features.data());
  detail::add_into(g.ctx_b, dh0_sum.data());
  return g;
}

// Denoiser interface adapter: one instance per (scene, goal) binding.
class TrainedDenoiser final : public Denoiser {
 public:
  TrainedDenoiser(std::shared_ptr<const DenoiserParams> params, SceneContext ctx)
      : params_(std::move(params)), ctx_(ctx), null_ctx_(SceneContext::null_context()) {
    if (!params_) throw std::invalid_argument("trained denoiser: null parameters");
  }

  int sequence_length() const override { return params_->config.seq_len; }
  int vocab_size() const override { return params_->config.vocab; }

  DenoiserOutput denoise(const NoisySequence& noisy, int s, int total_steps,
                         bool null_context) const override {
    return trainable_forward(*params_, noisy, null_context ? null_ctx_ : ctx_, s, total_steps);
  }

 private:
  std::shared_ptr<const DenoiserParams> params_;
  SceneContext ctx_;
  SceneContext null_ctx_;
};

// ---- checkpoint io ----

inline void save_checkpoint(const std::string& path, const DenoiserParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("checkpoint: cannot open for writing: " + path);
  const char magic[4] = {'R', 'P', 'D', 'N'};
  out.write(magic, 4);
  const uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const int32_t dims[6] = {p.config.vocab,     p.config.seq_len,  p.config.embed_dim,
                           p.config.ffn_dim,   p.config.time_bins, p.config.context_dim};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  p.for_each_tensor([&](const char* name, const std::vector<double>& t) {
    const uint32_t name_len = static_cast<uint32_t>(std::string_view(name).size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof name_len);
    out.write(name, name_len);
    const uint64_t count = t.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
  });
  if (!out) throw ValidationError("checkpoint: write failed: " + path);
}

inline DenoiserParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint: cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "RPDN")
    throw ValidationError("checkpoint: bad magic: " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != 1) throw ValidationError("checkpoint: unsupported version");
  int32_t dims[6];
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in) throw ValidationError("checkpoint: truncated header");
  DenoiserConfig cfg;
  cfg.vocab = dims[0];
  cfg.seq_len = dims[1];
  cfg.embed_dim = dims[2];
  cfg.ffn_dim = dims[3];
  cfg.time_bins = dims[4];
  cfg.context_dim = dims[5];
  if (cfg.vocab < 2 || cfg.seq_len < 2 || cfg.embed_dim < 1 || cfg.ffn_dim < 1 ||
      cfg.time_bins < 1 || cfg.context_dim != SceneContext::kDim)
    throw ValidationError("checkpoint: implausible dimensions");

  DenoiserParams p = DenoiserParams::zeros(cfg);
  p.for_each_tensor([&](const char* name, std::vector<double>& t) {
    uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof name_len);
    std::string stored(name_len, '\0');
    in.read(stored.data(), name_len);
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || stored != name || count != t.size())
      throw ValidationError("checkpoint: tensor mismatch at " + std::string(name));
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw ValidationError("checkpoint: truncated tensor " + std::string(name));
  });
  p.for_each_tensor([&](const char* name, std::vector<double>& t) {
    for (double v : t)
      if (!std::isfinite(v))
        throw ValidationError("checkpoint: non-finite value in " + std::string(name));
  });
  return p;
}

}  // namespace replan
