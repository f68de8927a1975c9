#include "ptrn/encoder.hpp"

#include <cmath>

#include "ptrn/errors.hpp"
#include "ptrn/rng.hpp"

namespace ptrn {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double phi = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  return phi + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Row-wise layer norm. Writes normalized rows into `hat` and 1/std into
// `inv_std`; returns gamma * hat + beta.
Mat layer_norm(const Mat& x, const Vec& gamma, const Vec& beta, Mat& hat, Vec& inv_std) {
  const auto rows = x.rows();
  const auto d = x.cols();
  hat.resize(rows, d);
  inv_std.resize(rows);
  Mat out(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_std(i) = is;
    hat.row(i) = (x.row(i).array() - mu) * is;
    out.row(i) = hat.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  return out;
}

// Backward of layer_norm given d_out; accumulates d_gamma/d_beta, returns d_x.
Mat layer_norm_backward(const Mat& d_out, const Mat& hat, const Vec& inv_std, const Vec& gamma,
                        Vec* d_gamma, Vec* d_beta) {
  const auto rows = d_out.rows();
  const auto d = d_out.cols();
  Mat dx(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (d_gamma) *d_gamma += d_out.row(i).cwiseProduct(hat.row(i)).transpose();
    if (d_beta) *d_beta += d_out.row(i).transpose();
    const Eigen::RowVectorXd dhat = d_out.row(i).cwiseProduct(gamma.transpose());
    const double m1 = dhat.mean();
    const double m2 = dhat.cwiseProduct(hat.row(i)).mean();
    dx.row(i) = inv_std(i) * (dhat.array() - m1 - hat.row(i).array() * m2);
  }
  return dx;
}

Mat init_matrix(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform_real(-a, a);
  return m;
}

}  // namespace

void EncoderConfig::validate() const {
  if (d_model < 1 || n_layers < 1 || n_heads < 1 || ffn_dim < 1 || max_len < 2 || vocab_size < 4)
    throw ValidationError("encoder config: all dimensions must be >= 1 (max_len >= 2, vocab >= 4)");
  if (d_model % n_heads != 0) throw ValidationError("encoder config: d_model not divisible by n_heads");
}

EncoderModel::EncoderModel(EncoderConfig cfg, EncoderParams params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
}

EncoderModel EncoderModel::init(const EncoderConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, 0xe2c0de));
  const int d = cfg.d_model;
  const int f = cfg.ffn_dim;

  EncoderParams p;
  p.embedding = init_matrix(cfg.vocab_size, d, d, rng);
  p.positional = init_matrix(cfg.max_len, d, d, rng);
  p.layers.resize(cfg.n_layers);
  for (auto& l : p.layers) {
    l.wq = init_matrix(d, d, d, rng);
    l.wk = init_matrix(d, d, d, rng);
    l.wv = init_matrix(d, d, d, rng);
    l.wo = init_matrix(d, d, d, rng);
    l.bq = Vec::Zero(d);
    l.bk = Vec::Zero(d);
    l.bv = Vec::Zero(d);
    l.bo = Vec::Zero(d);
    l.ln1_g = Vec::Ones(d);
    l.ln1_b = Vec::Zero(d);
    l.ln2_g = Vec::Ones(d);
    l.ln2_b = Vec::Zero(d);
    l.w1 = init_matrix(d, f, d, rng);
    l.b1 = Vec::Zero(f);
    l.w2 = init_matrix(f, d, f, rng);
    l.b2 = Vec::Zero(d);
  }
  p.lnf_g = Vec::Ones(d);
  p.lnf_b = Vec::Zero(d);
  return EncoderModel(cfg, std::move(p));
}

ForwardTrace EncoderModel::trace(std::span<const int> ids) const {
  const int T = static_cast<int>(ids.size());
  if (T < 1 || T > cfg_.max_len) throw ValidationError("encoder: sequence length out of range");
  for (int id : ids)
    if (id < 0 || id >= cfg_.vocab_size) throw ValidationError("encoder: token id out of range");

  const int d = cfg_.d_model;
  const int H = cfg_.n_heads;
  const int dh = cfg_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardTrace t;
  t.ids.assign(ids.begin(), ids.end());
  t.x0.resize(T, d);
  for (int i = 0; i < T; ++i)
    t.x0.row(i) = params_.embedding.row(ids[i]) + params_.positional.row(i);

  Mat x = t.x0;
  t.layers.resize(cfg_.n_layers);
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const auto& w = params_.layers[l];
    auto& lt = t.layers[l];
    lt.in = x;

    Mat a_in = layer_norm(x, w.ln1_g, w.ln1_b, lt.ln1_hat, lt.ln1_inv_std);
    lt.q = (a_in * w.wq).rowwise() + w.bq.transpose();
    lt.k = (a_in * w.wk).rowwise() + w.bk.transpose();
    lt.v = (a_in * w.wv).rowwise() + w.bv.transpose();

    lt.attn.resize(H);
    lt.heads.resize(T, d);
    for (int h = 0; h < H; ++h) {
      const auto qh = lt.q.middleCols(h * dh, dh);
      const auto kh = lt.k.middleCols(h * dh, dh);
      const auto vh = lt.v.middleCols(h * dh, dh);
      Mat scores = qh * kh.transpose() * scale;
      for (int i = 0; i < T; ++i) {
        const double m = scores.row(i).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(i).array() - m).exp();
        scores.row(i) = e / e.sum();
      }
      lt.attn[h] = scores;
      lt.heads.middleCols(h * dh, dh) = scores * vh;
    }
    lt.mid = x + ((lt.heads * w.wo).rowwise() + w.bo.transpose());

    Mat f_in = layer_norm(lt.mid, w.ln2_g, w.ln2_b, lt.ln2_hat, lt.ln2_inv_std);
    lt.ffn_pre = (f_in * w.w1).rowwise() + w.b1.transpose();
    lt.ffn_act = lt.ffn_pre.unaryExpr([](double v) { return gelu(v); });
    x = lt.mid + ((lt.ffn_act * w.w2).rowwise() + w.b2.transpose());
  }

  t.final_in = x;
  Mat y = layer_norm(x, params_.lnf_g, params_.lnf_b, t.final_hat, t.final_inv_std);
  t.pooled = y.row(0).transpose();
  return t;
}

Vec EncoderModel::encode(std::span<const int> ids) const { return trace(ids).pooled; }

Mat EncoderModel::backward(const ForwardTrace& t, const Vec& d_pooled, EncoderGrads* grads) const {
  const int T = static_cast<int>(t.ids.size());
  const int d = cfg_.d_model;
  const int H = cfg_.n_heads;
  const int dh = cfg_.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // Final norm: only the CLS row receives upstream gradient.
  Mat d_y = Mat::Zero(T, d);
  d_y.row(0) = d_pooled.transpose();
  Mat dx = layer_norm_backward(d_y, t.final_hat, t.final_inv_std, params_.lnf_g,
                               grads ? &grads->lnf_g : nullptr, grads ? &grads->lnf_b : nullptr);

  for (int l = cfg_.n_layers - 1; l >= 0; --l) {
    const auto& w = params_.layers[l];
    const auto& lt = t.layers[l];
    LayerParams* gw = grads ? &grads->layers[l] : nullptr;

    // FFN block: x_out = mid + gelu(LN2(mid) W1 + b1) W2 + b2
    const Mat d_ffn_out = dx;  // gradient reaching x_out
    Mat d_act = d_ffn_out * w.w2.transpose();
    if (gw) {
      gw->w2 += lt.ffn_act.transpose() * d_ffn_out;
      gw->b2 += d_ffn_out.colwise().sum().transpose();
    }
    Mat d_pre = d_act.cwiseProduct(lt.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }));
    Mat f_in = lt.ln2_hat;
    for (int i = 0; i < T; ++i)
      f_in.row(i) = lt.ln2_hat.row(i).cwiseProduct(w.ln2_g.transpose()) + w.ln2_b.transpose();
    if (gw) {
      gw->w1 += f_in.transpose() * d_pre;
      gw->b1 += d_pre.colwise().sum().transpose();
    }
    Mat d_fin = d_pre * w.w1.transpose();
    Mat d_mid = dx + layer_norm_backward(d_fin, lt.ln2_hat, lt.ln2_inv_std, w.ln2_g,
                                         gw ? &gw->ln2_g : nullptr, gw ? &gw->ln2_b : nullptr);

    // Attention block: mid = in + (heads Wo + bo)
    Mat d_heads = d_mid * w.wo.transpose();
    if (gw) {
      gw->wo += lt.heads.transpose() * d_mid;
      gw->bo += d_mid.colwise().sum().transpose();
    }
    Mat dq = Mat::Zero(T, d), dk = Mat::Zero(T, d), dv = Mat::Zero(T, d);
    for (int h = 0; h < H; ++h) {
      const auto vh = lt.v.middleCols(h * dh, dh);
      const auto qh = lt.q.middleCols(h * dh, dh);
      const auto kh = lt.k.middleCols(h * dh, dh);
      const Mat d_oh = d_heads.middleCols(h * dh, dh);
      const Mat& a = lt.attn[h];
      Mat d_a = d_oh * vh.transpose();
      dv.middleCols(h * dh, dh) = a.transpose() * d_oh;
      // softmax backward, row-wise
      Mat d_s(T, T);
      for (int i = 0; i < T; ++i) {
        const double dot = d_a.row(i).cwiseProduct(a.row(i)).sum();
        d_s.row(i) = a.row(i).cwiseProduct((d_a.row(i).array() - dot).matrix());
      }
      dq.middleCols(h * dh, dh) = d_s * kh * scale;
      dk.middleCols(h * dh, dh) = d_s.transpose() * qh * scale;
    }
    Mat a_in = lt.ln1_hat;
    for (int i = 0; i < T; ++i)
      a_in.row(i) = lt.ln1_hat.row(i).cwiseProduct(w.ln1_g.transpose()) + w.ln1_b.transpose();
    if (gw) {
      gw->wq += a_in.transpose() * dq;
      gw->wk += a_in.transpose() * dk;
      gw->wv += a_in.transpose() * dv;
      gw->bq += dq.colwise().sum().transpose();
      gw->bk += dk.colwise().sum().transpose();
      gw->bv += dv.colwise().sum().transpose();
    }
    Mat d_ain = dq * w.wq.transpose() + dk * w.wk.transpose() + dv * w.wv.transpose();
    dx = d_mid + layer_norm_backward(d_ain, lt.ln1_hat, lt.ln1_inv_std, w.ln1_g,
                                     gw ? &gw->ln1_g : nullptr, gw ? &gw->ln1_b : nullptr);
  }

  if (grads) {
    for (int i = 0; i < T; ++i) {
      grads->embedding.row(t.ids[i]) += dx.row(i);
      grads->positional.row(i) += dx.row(i);
    }
  }
  return dx;
}

EncoderGrads EncoderModel::zero_grads() const {
  EncoderGrads g;
  g.layers.resize(params_.layers.size());
  zip_params(params_, g, [](const auto& p, auto& grad) {
    grad = std::remove_reference_t<decltype(grad)>::Zero(p.rows(), p.cols());
  });
  return g;
}

int64_t EncoderModel::parameter_count() const {
  int64_t n = 0;
  EncoderParams& p = const_cast<EncoderParams&>(params_);
  zip_params(p, p, [&n](auto& a, auto&) { n += a.size(); });
  return n;
}

Mat encode_batch(const EncoderModel& model, const std::vector<TokenSeq>& batch) {
  Mat reps(static_cast<Eigen::Index>(batch.size()), model.config().d_model);
  for (size_t i = 0; i < batch.size(); ++i) reps.row(static_cast<Eigen::Index>(i)) = model.encode(batch[i]).transpose();
  return reps;
}

Mat grad_wrt_input_embeddings(const EncoderModel& model, const TokenSeq& seq,
                              const RepObjective& objective) {
  ForwardTrace t = model.trace(seq);
  Mat reps(1, model.config().d_model);
  reps.row(0) = t.pooled.transpose();
  Mat d_reps;
  const double loss = objective.eval(reps, &d_reps);
  if (!std::isfinite(loss)) throw StageError("gradient", "objective returned non-finite loss");
  return model.backward(t, d_reps.row(0).transpose(), nullptr);
}

}  // namespace ptrn
