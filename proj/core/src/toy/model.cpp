#include "denmix/toy/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "denmix/errors.hpp"
#include "denmix/rng.hpp"

namespace denmix::toy {
namespace {

constexpr double kNormEps = 1e-6;

// --- small dense helpers --------------------------------------------------

// c = a (m x k) @ w (k x n), w raw row-major.
Mat mul(const Mat& a, const double* w, std::uint32_t k, std::uint32_t n) {
  Mat c(a.rows, n);
  for (std::uint32_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + std::size_t(i) * a.cols;
    double* crow = c.data.data() + std::size_t(i) * n;
    for (std::uint32_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      if (av == 0.0) continue;
      const double* wrow = w + std::size_t(kk) * n;
      for (std::uint32_t j = 0; j < n; ++j) crow[j] += av * wrow[j];
    }
  }
  return c;
}

// c = a (m x n) @ w^T, w raw (k x n): result m x k.
Mat mul_t(const Mat& a, const double* w, std::uint32_t k, std::uint32_t n) {
  Mat c(a.rows, k);
  for (std::uint32_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + std::size_t(i) * a.cols;
    double* crow = c.data.data() + std::size_t(i) * k;
    for (std::uint32_t j = 0; j < k; ++j) {
      const double* wrow = w + std::size_t(j) * n;
      double acc = 0.0;
      for (std::uint32_t kk = 0; kk < n; ++kk) acc += arow[kk] * wrow[kk];
      crow[j] = acc;
    }
  }
  return c;
}

// g (a.cols x b.cols) += a^T @ b.
void acc_tn(const Mat& a, const Mat& b, double* g) {
  for (std::uint32_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + std::size_t(i) * a.cols;
    const double* brow = b.data.data() + std::size_t(i) * b.cols;
    for (std::uint32_t j = 0; j < a.cols; ++j) {
      double av = arow[j];
      if (av == 0.0) continue;
      double* grow = g + std::size_t(j) * b.cols;
      for (std::uint32_t kk = 0; kk < b.cols; ++kk) grow[kk] += av * brow[kk];
    }
  }
}

void add_inplace(Mat& a, const Mat& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

// --- relative position buckets --------------------------------------------

std::uint32_t relative_bucket(std::int64_t rel, bool bidirectional,
                              std::uint32_t num_buckets, std::uint32_t max_distance) {
  std::uint32_t bucket = 0;
  std::int64_t n = -rel;  // rel = key - query
  std::uint32_t nb = num_buckets;
  if (bidirectional) {
    nb /= 2;
    if (n < 0) {
      bucket += nb;
      n = -n;
    }
  } else if (n < 0) {
    n = 0;
  }
  std::uint32_t max_exact = nb / 2;
  if (n < max_exact) return bucket + static_cast<std::uint32_t>(n);
  double v = max_exact + std::log(static_cast<double>(n) / max_exact) /
                             std::log(static_cast<double>(max_distance) / max_exact) *
                             (nb - max_exact);
  std::uint32_t vi = v >= static_cast<double>(nb - 1)
                         ? nb - 1
                         : static_cast<std::uint32_t>(v);
  return bucket + vi;
}

std::vector<std::uint32_t> bucket_table(std::uint32_t len, bool bidirectional,
                                        const ToyConfig& cfg) {
  std::vector<std::uint32_t> out(std::size_t(len) * len);
  for (std::uint32_t q = 0; q < len; ++q) {
    for (std::uint32_t k = 0; k < len; ++k) {
      out[std::size_t(q) * len + k] =
          relative_bucket(std::int64_t(k) - std::int64_t(q), bidirectional,
                          cfg.rel_buckets, cfg.rel_max_distance);
    }
  }
  return out;
}

// --- layer caches -----------------------------------------------------------

struct NormCache {
  Mat x;
  std::vector<double> inv;
};

struct AttnCache {
  NormCache pre;
  Mat n;  // normed sublayer input (query side)
  Mat q, k, v;
  std::vector<Mat> p;  // per-head attention rows
  Mat ocat;
};

struct FfnCache {
  NormCache pre;
  Mat n, gpre, u, s, f;
};

struct LayerCache {
  AttnCache self_attn;
  AttnCache cross;
  FfnCache ffn;
};

struct StackCache {
  std::vector<LayerCache> layers;
  NormCache fin;
  std::vector<std::uint32_t> buckets;
};

// --- parameter access --------------------------------------------------------

class ParamTable {
 public:
  ParamTable(const Model& m, std::vector<double>* grads)
      : model_(m), grads_(grads) {}

  const double* w(std::string_view name) const {
    return model_.params().data() + model_.tensor(name).offset;
  }
  double* g(std::string_view name) const {
    return grads_->data() + model_.tensor(name).offset;
  }
  bool has_grads() const { return grads_ != nullptr; }

 private:
  const Model& model_;
  std::vector<double>* grads_;
};

// --- RMSNorm ------------------------------------------------------------------

Mat rmsnorm_forward(const Mat& x, const double* gain, NormCache& cache) {
  cache.x = x;
  cache.inv.assign(x.rows, 0.0);
  Mat y(x.rows, x.cols);
  for (std::uint32_t i = 0; i < x.rows; ++i) {
    const double* xr = x.data.data() + std::size_t(i) * x.cols;
    double ms = 0.0;
    for (std::uint32_t j = 0; j < x.cols; ++j) ms += xr[j] * xr[j];
    ms /= x.cols;
    double inv = 1.0 / std::sqrt(ms + kNormEps);
    cache.inv[i] = inv;
    double* yr = y.data.data() + std::size_t(i) * y.cols;
    for (std::uint32_t j = 0; j < x.cols; ++j) yr[j] = xr[j] * inv * gain[j];
  }
  return y;
}

Mat rmsnorm_backward(const NormCache& cache, const double* gain, const Mat& dy,
                     double* dgain) {
  const Mat& x = cache.x;
  Mat dx(x.rows, x.cols);
  for (std::uint32_t i = 0; i < x.rows; ++i) {
    const double* xr = x.data.data() + std::size_t(i) * x.cols;
    const double* dyr = dy.data.data() + std::size_t(i) * dy.cols;
    double* dxr = dx.data.data() + std::size_t(i) * dx.cols;
    double inv = cache.inv[i];
    double dot = 0.0;
    for (std::uint32_t j = 0; j < x.cols; ++j) {
      double dr = dyr[j] * gain[j];
      dot += dr * xr[j];
      dxr[j] = dr * inv;  // first term; correction applied below
      if (dgain != nullptr) dgain[j] += dyr[j] * xr[j] * inv;
    }
    double corr = dot * inv * inv * inv / x.cols;
    for (std::uint32_t j = 0; j < x.cols; ++j) dxr[j] -= corr * xr[j];
  }
  return dx;
}

// --- attention -----------------------------------------------------------------

Mat attention_forward(const ParamTable& pt, const std::string& base,
                      const ToyConfig& cfg, const Mat& x, const Mat* memory,
                      const BoolMat* mask, const double* bias_table,
                      const std::vector<std::uint32_t>* buckets, AttnCache& cache) {
  const std::uint32_t d = cfg.d_model;
  const std::uint32_t H = cfg.heads;
  const std::uint32_t dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.n = rmsnorm_forward(x, pt.w(base + ".norm"), cache.pre);
  const Mat& kv_src = memory != nullptr ? *memory : cache.n;

  cache.q = mul(cache.n, pt.w(base + ".wq"), d, d);
  cache.k = mul(kv_src, pt.w(base + ".wk"), d, d);
  cache.v = mul(kv_src, pt.w(base + ".wv"), d, d);

  const std::uint32_t lq = cache.q.rows;
  const std::uint32_t lk = cache.k.rows;
  cache.p.assign(H, Mat());
  cache.ocat = Mat(lq, d);

  std::vector<double> scores(lk);
  for (std::uint32_t h = 0; h < H; ++h) {
    const std::uint32_t off = h * dh;
    Mat& p = cache.p[h];
    p = Mat(lq, lk);
    for (std::uint32_t qi = 0; qi < lq; ++qi) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::uint32_t ki = 0; ki < lk; ++ki) {
        if (mask != nullptr && !mask->at(qi, ki)) continue;
        double s = 0.0;
        const double* qrow = cache.q.data.data() + std::size_t(qi) * d + off;
        const double* krow = cache.k.data.data() + std::size_t(ki) * d + off;
        for (std::uint32_t j = 0; j < dh; ++j) s += qrow[j] * krow[j];
        s *= scale;
        if (bias_table != nullptr) {
          s += bias_table[std::size_t((*buckets)[std::size_t(qi) * lk + ki]) * H + h];
        }
        scores[ki] = s;
        mx = std::max(mx, s);
      }
      if (mx == -std::numeric_limits<double>::infinity()) continue;  // no keys
      double denom = 0.0;
      for (std::uint32_t ki = 0; ki < lk; ++ki) {
        if (mask != nullptr && !mask->at(qi, ki)) continue;
        denom += std::exp(scores[ki] - mx);
      }
      for (std::uint32_t ki = 0; ki < lk; ++ki) {
        if (mask != nullptr && !mask->at(qi, ki)) continue;
        p.at(qi, ki) = std::exp(scores[ki] - mx) / denom;
      }
      double* orow = cache.ocat.data.data() + std::size_t(qi) * d + off;
      for (std::uint32_t ki = 0; ki < lk; ++ki) {
        double pv = p.at(qi, ki);
        if (pv == 0.0) continue;
        const double* vrow = cache.v.data.data() + std::size_t(ki) * d + off;
        for (std::uint32_t j = 0; j < dh; ++j) orow[j] += pv * vrow[j];
      }
    }
  }
  return mul(cache.ocat, pt.w(base + ".wo"), d, d);
}

// Returns the gradient w.r.t. the sublayer input x; accumulates weight
// gradients and, for cross attention, the memory gradient.
Mat attention_backward(const ParamTable& pt, const std::string& base,
                       const ToyConfig& cfg, const AttnCache& cache,
                       const Mat* memory, const BoolMat* mask,
                       const double* bias_table, double* bias_grad,
                       const std::vector<std::uint32_t>* buckets, const Mat& dout,
                       Mat* dmemory) {
  const std::uint32_t d = cfg.d_model;
  const std::uint32_t H = cfg.heads;
  const std::uint32_t dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::uint32_t lq = cache.q.rows;
  const std::uint32_t lk = cache.k.rows;

  Mat docat = mul_t(dout, pt.w(base + ".wo"), d, d);
  acc_tn(cache.ocat, dout, pt.g(base + ".wo"));

  Mat dq(lq, d), dk(lk, d), dv(lk, d);
  for (std::uint32_t h = 0; h < H; ++h) {
    const std::uint32_t off = h * dh;
    const Mat& p = cache.p[h];
    for (std::uint32_t qi = 0; qi < lq; ++qi) {
      const double* dorow = docat.data.data() + std::size_t(qi) * d + off;
      // dP row and softmax backward folded together.
      double dotsum = 0.0;
      std::vector<double> dprow(lk, 0.0);
      for (std::uint32_t ki = 0; ki < lk; ++ki) {
        double pv = p.at(qi, ki);
        if (pv == 0.0) continue;
        const double* vrow = cache.v.data.data() + std::size_t(ki) * d + off;
        double dp = 0.0;
        for (std::uint32_t j = 0; j < dh; ++j) dp += dorow[j] * vrow[j];
        // dV accumulation.
        double* dvrow = dv.data.data() + std::size_t(ki) * d + off;
        for (std::uint32_t j = 0; j < dh; ++j) dvrow[j] += pv * dorow[j];
        dprow[ki] = dp;
        dotsum += dp * pv;
      }
      for (std::uint32_t ki = 0; ki < lk; ++ki) {
        double pv = p.at(qi, ki);
        if (pv == 0.0) continue;
        double ds = pv * (dprow[ki] - dotsum);
        if (bias_grad != nullptr) {
          bias_grad[std::size_t((*buckets)[std::size_t(qi) * lk + ki]) * H + h] += ds;
        }
        const double* krow = cache.k.data.data() + std::size_t(ki) * d + off;
        const double* qrow = cache.q.data.data() + std::size_t(qi) * d + off;
        double* dqrow = dq.data.data() + std::size_t(qi) * d + off;
        double* dkrow = dk.data.data() + std::size_t(ki) * d + off;
        for (std::uint32_t j = 0; j < dh; ++j) {
          dqrow[j] += ds * scale * krow[j];
          dkrow[j] += ds * scale * qrow[j];
        }
      }
    }
  }

  const Mat& kv_src = memory != nullptr ? *memory : cache.n;
  acc_tn(cache.n, dq, pt.g(base + ".wq"));
  acc_tn(kv_src, dk, pt.g(base + ".wk"));
  acc_tn(kv_src, dv, pt.g(base + ".wv"));

  Mat dn = mul_t(dq, pt.w(base + ".wq"), d, d);
  Mat dkv = mul_t(dk, pt.w(base + ".wk"), d, d);
  Mat dvv = mul_t(dv, pt.w(base + ".wv"), d, d);
  add_inplace(dkv, dvv);
  if (memory != nullptr) {
    add_inplace(*dmemory, dkv);
  } else {
    add_inplace(dn, dkv);
  }
  return rmsnorm_backward(cache.pre, pt.w(base + ".norm"), dn, pt.g(base + ".norm"));
}

// --- feed-forward -----------------------------------------------------------

double silu(double z) { return z / (1.0 + std::exp(-z)); }

Mat ffn_forward(const ParamTable& pt, const std::string& base, const ToyConfig& cfg,
                const Mat& x, FfnCache& cache) {
  const std::uint32_t d = cfg.d_model;
  const std::uint32_t f = cfg.d_ff;
  cache.n = rmsnorm_forward(x, pt.w(base + ".norm"), cache.pre);
  cache.gpre = mul(cache.n, pt.w(base + ".wg"), d, f);
  cache.u = mul(cache.n, pt.w(base + ".wu"), d, f);
  cache.s = cache.gpre;
  for (double& z : cache.s.data) z = silu(z);
  cache.f = cache.s;
  for (std::size_t i = 0; i < cache.f.data.size(); ++i) {
    cache.f.data[i] *= cache.u.data[i];
  }
  return mul(cache.f, pt.w(base + ".wd"), f, d);
}

Mat ffn_backward(const ParamTable& pt, const std::string& base, const ToyConfig& cfg,
                 const FfnCache& cache, const Mat& dout) {
  const std::uint32_t d = cfg.d_model;
  const std::uint32_t f = cfg.d_ff;
  Mat df = mul_t(dout, pt.w(base + ".wd"), f, d);
  acc_tn(cache.f, dout, pt.g(base + ".wd"));

  Mat du = df;
  Mat dgpre = df;
  for (std::size_t i = 0; i < df.data.size(); ++i) {
    double z = cache.gpre.data[i];
    double sg = 1.0 / (1.0 + std::exp(-z));
    du.data[i] = df.data[i] * cache.s.data[i];
    dgpre.data[i] = df.data[i] * cache.u.data[i] * sg * (1.0 + z * (1.0 - sg));
  }
  acc_tn(cache.n, dgpre, pt.g(base + ".wg"));
  acc_tn(cache.n, du, pt.g(base + ".wu"));
  Mat dn = mul_t(dgpre, pt.w(base + ".wg"), d, f);
  Mat dn2 = mul_t(du, pt.w(base + ".wu"), d, f);
  add_inplace(dn, dn2);
  return rmsnorm_backward(cache.pre, pt.w(base + ".norm"), dn, pt.g(base + ".norm"));
}

// --- stacks -------------------------------------------------------------------

struct StackShape {
  std::string prefix;        // "enc", "dec", or "net"
  bool cross = false;        // decoder stack attends to memory
  bool causal_bias = false;  // bucket direction for the shared bias table
};

Mat stack_forward(const ParamTable& pt, const ToyConfig& cfg, const StackShape& shape,
                  const Mat& x, const BoolMat& self_mask, const Mat* memory,
                  StackCache& cache) {
  cache.layers.assign(cfg.layers, LayerCache());
  cache.buckets = bucket_table(x.rows, !shape.causal_bias, cfg);
  const double* bias = pt.w(shape.prefix + ".rel_bias");

  Mat cur = x;
  for (std::uint32_t i = 0; i < cfg.layers; ++i) {
    std::string lp = shape.prefix + ".l" + std::to_string(i);
    LayerCache& lc = cache.layers[i];
    Mat attn = attention_forward(pt, lp + ".attn", cfg, cur, nullptr, &self_mask,
                                 bias, &cache.buckets, lc.self_attn);
    add_inplace(cur, attn);
    if (shape.cross) {
      Mat cx = attention_forward(pt, lp + ".cross", cfg, cur, memory, nullptr,
                                 nullptr, nullptr, lc.cross);
      add_inplace(cur, cx);
    }
    Mat ff = ffn_forward(pt, lp + ".ffn", cfg, cur, lc.ffn);
    add_inplace(cur, ff);
  }
  return rmsnorm_forward(cur, pt.w(shape.prefix + ".final_norm"), cache.fin);
}

// Returns the gradient w.r.t. the stack input; accumulates dmemory when the
// stack has cross attention.
Mat stack_backward(const ParamTable& pt, const ToyConfig& cfg, const StackShape& shape,
                   const StackCache& cache, const BoolMat& self_mask,
                   const Mat* memory, const Mat& dout, Mat* dmemory) {
  const double* bias = pt.w(shape.prefix + ".rel_bias");
  double* bias_g = pt.g(shape.prefix + ".rel_bias");

  Mat dcur = rmsnorm_backward(cache.fin, pt.w(shape.prefix + ".final_norm"), dout,
                              pt.g(shape.prefix + ".final_norm"));
  for (std::uint32_t i = cfg.layers; i-- > 0;) {
    std::string lp = shape.prefix + ".l" + std::to_string(i);
    const LayerCache& lc = cache.layers[i];
    Mat dx = ffn_backward(pt, lp + ".ffn", cfg, lc.ffn, dcur);
    add_inplace(dcur, dx);
    if (shape.cross) {
      Mat dxc = attention_backward(pt, lp + ".cross", cfg, lc.cross, memory, nullptr,
                                   nullptr, nullptr, nullptr, dcur, dmemory);
      add_inplace(dcur, dxc);
    }
    Mat dxa = attention_backward(pt, lp + ".attn", cfg, lc.self_attn, nullptr,
                                 &self_mask, bias, bias_g, &cache.buckets, dcur,
                                 nullptr);
    add_inplace(dcur, dxa);
  }
  return dcur;
}

// --- example-level plumbing -----------------------------------------------------

Mat embed_rows(const ParamTable& pt, const ToyConfig& cfg, const TokenSequence& toks) {
  const double* e = pt.w("embed");
  Mat x(static_cast<std::uint32_t>(toks.size()), cfg.d_model);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const double* row = e + std::size_t(toks[i]) * cfg.d_model;
    std::copy(row, row + cfg.d_model, x.data.data() + i * cfg.d_model);
  }
  return x;
}

void check_tokens(const TokenSequence& toks, std::uint32_t vocab_size,
                  const char* what) {
  for (TokenId t : toks) {
    if (t >= vocab_size) {
      throw ValidationError(std::string(what) + ": token id " + std::to_string(t) +
                            " outside vocabulary of size " + std::to_string(vocab_size));
    }
  }
}

struct ExampleFwd {
  // encoder-decoder
  EncDecItem ed;
  StackCache enc_cache, dec_cache;
  AttentionMaskSet masks;
  Mat enc_out;
  Mat body_out;  // final stack output feeding the logits
  // prefix decoder
  PrefixItem pf;
  StackCache net_cache;

  Mat logits;
  std::vector<TokenId> labels;     // per logits row
  std::vector<std::uint8_t> mask;  // 1 = labeled row
  std::uint32_t labeled = 0;
};

void forward_one(const Model& model, const ParamTable& pt, const Example& ex,
                 ExampleFwd& out) {
  const ToyConfig& cfg = model.config();
  if (cfg.arch == Arch::encoder_decoder) {
    out.ed = encode_enc_dec(ex, cfg);
    out.masks = build_attention_masks(Arch::encoder_decoder,
                                      static_cast<std::uint32_t>(out.ed.enc_tokens.size()),
                                      static_cast<std::uint32_t>(out.ed.dec_tokens.size()));
    Mat enc_x = embed_rows(pt, cfg, out.ed.enc_tokens);
    out.enc_out = stack_forward(pt, cfg, {"enc", false, false}, enc_x,
                                out.masks.encoder_self, nullptr, out.enc_cache);
    Mat dec_x = embed_rows(pt, cfg, out.ed.dec_tokens);
    out.body_out = stack_forward(pt, cfg, {"dec", true, true}, dec_x,
                                 out.masks.decoder_self, &out.enc_out, out.dec_cache);
    out.labels = out.ed.labels;
    out.mask.assign(out.labels.size(), 1);
  } else {
    out.pf = encode_prefix(ex, cfg);
    std::uint32_t total = static_cast<std::uint32_t>(out.pf.tokens.size());
    out.masks = build_attention_masks(Arch::prefix_lm_decoder, out.pf.input_len,
                                      total - out.pf.input_len);
    Mat x = embed_rows(pt, cfg, out.pf.tokens);
    out.body_out = stack_forward(pt, cfg, {"net", false, false}, x, out.masks.joint,
                                 nullptr, out.net_cache);
    out.labels = out.pf.labels;
    out.mask = out.pf.label_mask;
  }
  out.logits = mul(out.body_out, pt.w("out"), cfg.d_model, cfg.vocab_size);
  out.labeled = 0;
  for (std::uint8_t m : out.mask) out.labeled += m;
}

double row_ce(const Mat& logits, std::uint32_t row, TokenId label) {
  const double* r = logits.data.data() + std::size_t(row) * logits.cols;
  double mx = r[0];
  for (std::uint32_t j = 1; j < logits.cols; ++j) mx = std::max(mx, r[j]);
  double denom = 0.0;
  for (std::uint32_t j = 0; j < logits.cols; ++j) denom += std::exp(r[j] - mx);
  return std::log(denom) + mx - r[label];
}

// dlogits row = (softmax - onehot(label)) * scale.
void add_ce_grad(const Mat& logits, std::uint32_t row, TokenId label, double scale,
                 Mat& dlogits) {
  const double* r = logits.data.data() + std::size_t(row) * logits.cols;
  double* dr = dlogits.data.data() + std::size_t(row) * dlogits.cols;
  double mx = r[0];
  for (std::uint32_t j = 1; j < logits.cols; ++j) mx = std::max(mx, r[j]);
  double denom = 0.0;
  for (std::uint32_t j = 0; j < logits.cols; ++j) denom += std::exp(r[j] - mx);
  for (std::uint32_t j = 0; j < logits.cols; ++j) {
    dr[j] = std::exp(r[j] - mx) / denom * scale;
  }
  dr[label] -= scale;
}

void backward_one(const Model& model, const ParamTable& pt, ExampleFwd& fwd,
                  const Mat& dlogits) {
  const ToyConfig& cfg = model.config();
  Mat dbody = mul_t(dlogits, pt.w("out"), cfg.d_model, cfg.vocab_size);
  acc_tn(fwd.body_out, dlogits, pt.g("out"));

  double* embed_g = pt.g("embed");
  auto scatter_embed = [&](const TokenSequence& toks, const Mat& dx) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      double* row = embed_g + std::size_t(toks[i]) * cfg.d_model;
      const double* src = dx.data.data() + i * cfg.d_model;
      for (std::uint32_t j = 0; j < cfg.d_model; ++j) row[j] += src[j];
    }
  };

  if (cfg.arch == Arch::encoder_decoder) {
    Mat denc(fwd.enc_out.rows, fwd.enc_out.cols);
    Mat ddec_x = stack_backward(pt, cfg, {"dec", true, true}, fwd.dec_cache,
                                fwd.masks.decoder_self, &fwd.enc_out, dbody, &denc);
    scatter_embed(fwd.ed.dec_tokens, ddec_x);
    Mat denc_x = stack_backward(pt, cfg, {"enc", false, false}, fwd.enc_cache,
                                fwd.masks.encoder_self, nullptr, denc, nullptr);
    scatter_embed(fwd.ed.enc_tokens, denc_x);
  } else {
    Mat dx = stack_backward(pt, cfg, {"net", false, false}, fwd.net_cache,
                            fwd.masks.joint, nullptr, dbody, nullptr);
    scatter_embed(fwd.pf.tokens, dx);
  }
}

}  // namespace

// --- public surface ----------------------------------------------------------

const char* to_string(Arch a) {
  return a == Arch::encoder_decoder ? "encdec" : "prefixdec";
}

std::optional<Arch> parse_arch(std::string_view s) {
  if (s == "encdec" || s == "encoder_decoder") return Arch::encoder_decoder;
  if (s == "prefixdec" || s == "prefix_lm_decoder") return Arch::prefix_lm_decoder;
  return std::nullopt;
}

AttentionMaskSet build_attention_masks(Arch arch, std::uint32_t in_len,
                                       std::uint32_t tgt_len) {
  AttentionMaskSet set;
  if (arch == Arch::encoder_decoder) {
    set.encoder_self = BoolMat(in_len, in_len, true);
    set.decoder_self = BoolMat(tgt_len, tgt_len, false);
    for (std::uint32_t q = 0; q < tgt_len; ++q) {
      for (std::uint32_t k = 0; k <= q; ++k) set.decoder_self.set(q, k, true);
    }
    set.cross = BoolMat(tgt_len, in_len, true);
  } else {
    std::uint32_t total = in_len + tgt_len;
    set.joint = BoolMat(total, total, false);
    for (std::uint32_t q = 0; q < total; ++q) {
      for (std::uint32_t k = 0; k < total; ++k) {
        if (k < in_len || k <= q) set.joint.set(q, k, true);
      }
    }
  }
  return set;
}

Model Model::init(const ToyConfig& cfg, std::uint64_t seed) {
  if (cfg.vocab_size == 0) throw ValidationError("vocab_size must be positive");
  if (cfg.d_model == 0 || cfg.heads == 0 || cfg.layers == 0 || cfg.d_ff == 0) {
    throw ValidationError("d_model, layers, heads, and d_ff must all be positive");
  }
  if (cfg.d_model % cfg.heads != 0) {
    throw ValidationError("d_model must be divisible by heads");
  }
  if (cfg.rel_buckets < 4 || cfg.rel_buckets % 2 != 0) {
    throw ValidationError("rel_buckets must be even and at least 4");
  }
  if (cfg.rel_max_distance <= cfg.rel_buckets) {
    throw ValidationError("rel_max_distance must exceed rel_buckets");
  }
  if (cfg.start_id >= cfg.vocab_size) {
    throw ValidationError("start_id outside the vocabulary");
  }

  Model m;
  m.cfg_ = cfg;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::uint32_t r, std::uint32_t c) {
    m.layout_[std::move(name)] = TensorView{offset, r, c};
    offset += std::size_t(r) * c;
  };
  add("embed", cfg.vocab_size, cfg.d_model);
  add("out", cfg.d_model, cfg.vocab_size);
  std::vector<std::string> stacks =
      cfg.arch == Arch::encoder_decoder ? std::vector<std::string>{"enc", "dec"}
                                        : std::vector<std::string>{"net"};
  for (const std::string& s : stacks) {
    add(s + ".rel_bias", cfg.rel_buckets, cfg.heads);
    for (std::uint32_t i = 0; i < cfg.layers; ++i) {
      std::string lp = s + ".l" + std::to_string(i);
      add(lp + ".attn.norm", 1, cfg.d_model);
      for (const char* w : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo"}) {
        add(lp + w, cfg.d_model, cfg.d_model);
      }
      if (s == "dec") {
        add(lp + ".cross.norm", 1, cfg.d_model);
        for (const char* w : {".cross.wq", ".cross.wk", ".cross.wv", ".cross.wo"}) {
          add(lp + w, cfg.d_model, cfg.d_model);
        }
      }
      add(lp + ".ffn.norm", 1, cfg.d_model);
      add(lp + ".ffn.wg", cfg.d_model, cfg.d_ff);
      add(lp + ".ffn.wu", cfg.d_model, cfg.d_ff);
      add(lp + ".ffn.wd", cfg.d_ff, cfg.d_model);
    }
    add(s + ".final_norm", 1, cfg.d_model);
  }
  m.params_.assign(offset, 0.0);
  m.grads_.assign(offset, 0.0);

  RngStream root = RngStream(seed).child("toy");
  for (const auto& [name, view] : m.layout_) {
    double* p = m.params_.data() + view.offset;
    if (name.ends_with("norm")) {
      std::fill(p, p + view.size(), 1.0);
      continue;
    }
    double sigma;
    if (name == "embed") {
      sigma = 1.0;
    } else if (name.ends_with("rel_bias")) {
      sigma = 0.5;
    } else {
      sigma = 1.0 / std::sqrt(static_cast<double>(view.rows));
    }
    RngStream r = root.child(name);
    for (std::size_t i = 0; i < view.size(); ++i) p[i] = r.normal(0.0, sigma);
  }
  return m;
}

TensorView Model::tensor(std::string_view name) const {
  auto it = layout_.find(name);
  if (it == layout_.end()) {
    throw ValidationError("unknown tensor \"" + std::string(name) + "\"");
  }
  return it->second;
}

std::vector<std::string> Model::tensor_names() const {
  std::vector<std::string> out;
  out.reserve(layout_.size());
  for (const auto& [name, view] : layout_) out.push_back(name);
  return out;
}

PrefixItem encode_prefix(const Example& ex, const ToyConfig& cfg) {
  if (ex.targets.empty()) throw ValidationError("example has empty targets");
  check_tokens(ex.inputs, cfg.vocab_size, "inputs");
  check_tokens(ex.targets, cfg.vocab_size, "targets");
  PrefixItem item;
  item.input_len = static_cast<std::uint32_t>(ex.inputs.size()) + 1;
  item.tokens = ex.inputs;
  item.tokens.push_back(cfg.start_id);
  item.tokens.insert(item.tokens.end(), ex.targets.begin(), ex.targets.end() - 1);
  item.labels.assign(item.tokens.size(), 0);
  item.label_mask.assign(item.tokens.size(), 0);
  std::size_t base = ex.inputs.size();  // position of the start token
  for (std::size_t j = 0; j < ex.targets.size(); ++j) {
    item.labels[base + j] = ex.targets[j];
    item.label_mask[base + j] = 1;
  }
  if (item.tokens.size() > cfg.max_len) {
    throw ValidationError("sequence of length " + std::to_string(item.tokens.size()) +
                          " exceeds max_len " + std::to_string(cfg.max_len));
  }
  return item;
}

EncDecItem encode_enc_dec(const Example& ex, const ToyConfig& cfg) {
  if (ex.targets.empty()) throw ValidationError("example has empty targets");
  if (ex.inputs.empty()) throw ValidationError("example has empty inputs");
  check_tokens(ex.inputs, cfg.vocab_size, "inputs");
  check_tokens(ex.targets, cfg.vocab_size, "targets");
  EncDecItem item;
  item.enc_tokens = ex.inputs;
  item.dec_tokens.push_back(cfg.start_id);
  item.dec_tokens.insert(item.dec_tokens.end(), ex.targets.begin(),
                         ex.targets.end() - 1);
  item.labels = ex.targets;
  if (item.enc_tokens.size() > cfg.max_len || item.dec_tokens.size() > cfg.max_len) {
    throw ValidationError("sequence exceeds max_len " + std::to_string(cfg.max_len));
  }
  return item;
}

ForwardResult forward_loss(const Model& model, std::span<const Example> batch,
                           bool want_logits) {
  if (batch.empty()) throw ValidationError("empty batch");
  ParamTable pt(model, nullptr);
  ForwardResult res;
  double total = 0.0;
  std::uint64_t labeled = 0;
  for (const Example& ex : batch) {
    ExampleFwd fwd;
    forward_one(model, pt, ex, fwd);
    double ex_sum = 0.0;
    for (std::uint32_t row = 0; row < fwd.logits.rows; ++row) {
      if (!fwd.mask[row]) continue;
      ex_sum += row_ce(fwd.logits, row, fwd.labels[row]);
    }
    total += ex_sum;
    labeled += fwd.labeled;
    res.per_example.push_back(fwd.labeled > 0 ? ex_sum / fwd.labeled : 0.0);
    if (want_logits) res.logits.push_back(std::move(fwd.logits));
  }
  res.loss = labeled > 0 ? total / static_cast<double>(labeled) : 0.0;
  return res;
}

double forward_backward(Model& model, std::span<const Example> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  std::fill(model.grads().begin(), model.grads().end(), 0.0);
  ParamTable pt(model, &model.grads());

  std::vector<ExampleFwd> fwds(batch.size());
  std::uint64_t labeled = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    forward_one(model, pt, batch[i], fwds[i]);
    labeled += fwds[i].labeled;
  }
  if (labeled == 0) return 0.0;
  double scale = 1.0 / static_cast<double>(labeled);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ExampleFwd& fwd = fwds[i];
    Mat dlogits(fwd.logits.rows, fwd.logits.cols);
    for (std::uint32_t row = 0; row < fwd.logits.rows; ++row) {
      if (!fwd.mask[row]) continue;
      total += row_ce(fwd.logits, row, fwd.labels[row]);
      add_ce_grad(fwd.logits, row, fwd.labels[row], scale, dlogits);
    }
    backward_one(model, pt, fwd, dlogits);
  }
  return total * scale;
}

Mat sequence_logits(const Model& model, const Example& ex) {
  ParamTable pt(model, nullptr);
  ExampleFwd fwd;
  forward_one(model, pt, ex, fwd);
  return std::move(fwd.logits);
}

double prefix_sequence_loss(const Model& model, const PrefixItem& item) {
  const ToyConfig& cfg = model.config();
  if (cfg.arch != Arch::prefix_lm_decoder) {
    throw ValidationError("prefix loss needs the prefix decoder architecture");
  }
  if (item.tokens.empty() || item.input_len == 0 ||
      item.input_len > item.tokens.size()) {
    throw ValidationError("malformed prefix item");
  }
  if (item.labels.size() != item.tokens.size() ||
      item.label_mask.size() != item.tokens.size()) {
    throw ValidationError("labels and mask must align with tokens");
  }
  check_tokens(item.tokens, cfg.vocab_size, "tokens");
  check_tokens(item.labels, cfg.vocab_size, "labels");
  if (item.tokens.size() > cfg.max_len) {
    throw ValidationError("sequence exceeds max_len " + std::to_string(cfg.max_len));
  }
  std::uint32_t total_len = static_cast<std::uint32_t>(item.tokens.size());
  AttentionMaskSet masks = build_attention_masks(Arch::prefix_lm_decoder,
                                                 item.input_len,
                                                 total_len - item.input_len);
  ParamTable pt(model, nullptr);
  Mat x = embed_rows(pt, cfg, item.tokens);
  StackCache cache;
  Mat body = stack_forward(pt, cfg, {"net", false, false}, x, masks.joint, nullptr,
                           cache);
  Mat logits = mul(body, pt.w("out"), cfg.d_model, cfg.vocab_size);
  double sum = 0.0;
  std::uint32_t labeled = 0;
  for (std::uint32_t row = 0; row < logits.rows; ++row) {
    if (!item.label_mask[row]) continue;
    sum += row_ce(logits, row, item.labels[row]);
    ++labeled;
  }
  if (labeled == 0) throw ValidationError("no labeled positions");
  return sum / labeled;
}

double grad_check(Model& model, std::span<const Example> batch, double epsilon,
                  std::uint32_t samples, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  double base_loss = forward_backward(model, batch);
  (void)base_loss;
  std::vector<double> analytic = model.grads();

  std::size_t n = model.num_params();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::size_t picked = std::min<std::size_t>(samples, n);
  if (picked < n) {
    RngStream rng = RngStream(seed).child("gradcheck");
    for (std::size_t i = 0; i < picked; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
      std::swap(idx[i], idx[j]);
    }
  }

  double worst = 0.0;
  std::vector<double>& p = model.params();
  for (std::size_t i = 0; i < picked; ++i) {
    std::size_t j = idx[i];
    double old = p[j];
    p[j] = old + epsilon;
    double lp = forward_loss(model, batch).loss;
    p[j] = old - epsilon;
    double lm = forward_loss(model, batch).loss;
    p[j] = old;
    double numeric = (lp - lm) / (2.0 * epsilon);
    double a = analytic[j];
    double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-4);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace denmix::toy
