#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ptrn/linalg.hpp"
#include "ptrn/vocab.hpp"

namespace ptrn {

struct EncoderConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 2;
  int ffn_dim = 128;
  int max_len = 32;
  int vocab_size = 2048;
  uint64_t seed = 0;

  int head_dim() const { return d_model / n_heads; }
  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParams {
  Mat wq, wk, wv, wo;  // d x d
  Vec bq, bk, bv, bo;  // d
  Vec ln1_g, ln1_b;    // pre-attention norm
  Vec ln2_g, ln2_b;    // pre-ffn norm
  Mat w1;              // d x f
  Vec b1;              // f
  Mat w2;              // f x d
  Vec b2;              // d
};

struct EncoderParams {
  Mat embedding;   // V x d
  Mat positional;  // max_len x d
  std::vector<LayerParams> layers;
  Vec lnf_g, lnf_b;  // final norm
};

// Gradient buffers share the parameter layout.
using EncoderGrads = EncoderParams;

// Applies f(param, grad) to every parameter tensor pair, in a fixed order.
template <typename P, typename G, typename F>
void zip_params(P& p, G& g, F&& f) {
  f(p.embedding, g.embedding);
  f(p.positional, g.positional);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    auto& a = p.layers[l];
    auto& b = g.layers[l];
    f(a.wq, b.wq); f(a.wk, b.wk); f(a.wv, b.wv); f(a.wo, b.wo);
    f(a.bq, b.bq); f(a.bk, b.bk); f(a.bv, b.bv); f(a.bo, b.bo);
    f(a.ln1_g, b.ln1_g); f(a.ln1_b, b.ln1_b);
    f(a.ln2_g, b.ln2_g); f(a.ln2_b, b.ln2_b);
    f(a.w1, b.w1); f(a.b1, b.b1); f(a.w2, b.w2); f(a.b2, b.b2);
  }
  f(p.lnf_g, g.lnf_g);
  f(p.lnf_b, g.lnf_b);
}

// Cached activations of one forward pass, consumed by backward().
struct ForwardTrace {
  TokenSeq ids;
  Mat x0;  // embedded input, T x d
  struct LayerTrace {
    Mat in;                  // block input
    Mat ln1_hat;             // normalized pre-attention rows
    Vec ln1_inv_std;
    Mat q, k, v;             // T x d
    std::vector<Mat> attn;   // per-head softmax weights, T x T
    Mat heads;               // concatenated head outputs, T x d
    Mat mid;                 // input + attention output
    Mat ln2_hat;
    Vec ln2_inv_std;
    Mat ffn_pre;             // T x f, pre-activation
    Mat ffn_act;             // T x f, after gelu
  };
  std::vector<LayerTrace> layers;
  Mat final_in;
  Mat final_hat;
  Vec final_inv_std;
  Vec pooled;  // representation at the CLS position
};

// Pre-norm transformer encoder over token ids; the representation is the
// final-norm output at position 0 (CLS). Forward and gradient evaluation are
// const and safe to run concurrently; mutation (training) is single-writer.
class EncoderModel {
 public:
  EncoderModel() = default;
  EncoderModel(EncoderConfig cfg, EncoderParams params);

  static EncoderModel init(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return cfg_; }
  const EncoderParams& params() const { return params_; }
  EncoderParams& mutable_params() { return params_; }

  Vec encode(std::span<const int> ids) const;
  ForwardTrace trace(std::span<const int> ids) const;

  // Reverse pass from d_loss/d_pooled. Returns the T x d gradient with
  // respect to the input embedding rows as used (positional part excluded);
  // accumulates weight gradients into *grads when given.
  Mat backward(const ForwardTrace& t, const Vec& d_pooled, EncoderGrads* grads) const;

  EncoderGrads zero_grads() const;
  int64_t parameter_count() const;

 private:
  EncoderConfig cfg_;
  EncoderParams params_;
};

// Scalar objective over a batch of pooled representations (rows of `reps`).
// When d_reps is non-null it must be filled with the same-shape gradient.
struct RepObjective {
  virtual ~RepObjective() = default;
  virtual double eval(const Mat& reps, Mat* d_reps) const = 0;
};

Mat encode_batch(const EncoderModel& model, const std::vector<TokenSeq>& batch);

// Exact reverse-mode gradient of objective(representation) with respect to
// each input embedding row. Throws StageError on non-finite loss.
Mat grad_wrt_input_embeddings(const EncoderModel& model, const TokenSeq& seq,
                              const RepObjective& objective);

}  // namespace ptrn
