#include "dret/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "dret/errors.hpp"
#include "dret/io.hpp"
#include "dret/rng.hpp"

namespace dret {

namespace {

constexpr double kLnEps = 1e-5;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_deriv(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
         x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// Row-wise layer norm. Fills xhat (normalized rows) and invstd.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& scale,
                           const Eigen::MatrixXd& bias, Eigen::MatrixXd& xhat,
                           Eigen::VectorXd& invstd) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  xhat.resize(rows, cols);
  invstd.resize(rows);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + kLnEps);
    invstd(r) = is;
    xhat.row(r) = (x.row(r).array() - mean) * is;
    out.row(r) = xhat.row(r).cwiseProduct(scale.row(0)) + bias.row(0);
  }
  return out;
}

// Backward of layer_norm. Accumulates into d_scale/d_bias, returns dx.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& xhat,
                                    const Eigen::VectorXd& invstd, const Eigen::MatrixXd& scale,
                                    Eigen::MatrixXd& d_scale, Eigen::MatrixXd& d_bias) {
  const auto rows = dy.rows();
  const auto cols = dy.cols();
  Eigen::MatrixXd dx(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    d_scale.row(0) += dy.row(r).cwiseProduct(xhat.row(r));
    d_bias.row(0) += dy.row(r);
    const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(scale.row(0));
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = dxhat.cwiseProduct(xhat.row(r)).mean();
    dx.row(r) = invstd(r) * (dxhat.array() - mean_dxhat -
                             xhat.row(r).array() * mean_dxhat_xhat)
                    .matrix();
  }
  (void)cols;
  return dx;
}

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.symmetric(scale);
  return m;
}

// Forward pass for one item. Writes the full activation record into `item`.
Embedding forward_item(const EncoderParams& params, const std::vector<int>& ids, ItemCache& item) {
  const auto& cfg = params.config;
  const int T = static_cast<int>(ids.size());
  const int d = cfg.d_model;
  const int nh = cfg.n_heads;
  const int dh = d / nh;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  item.ids = ids;
  item.eos_pos = 0;
  for (int t = 0; t < T; ++t)
    if (ids[t] == kEosId) item.eos_pos = t;

  Eigen::MatrixXd x(T, d);
  for (int t = 0; t < T; ++t)
    x.row(t) = params.token_embedding.row(ids[t]) + params.position_embedding.row(t);

  item.layers.resize(cfg.n_layers);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& lp = params.layers[l];
    auto& lc = item.layers[l];
    lc.x_in = x;
    const Eigen::MatrixXd a = layer_norm(x, lp.ln1_scale, lp.ln1_bias, lc.ln1_norm, lc.ln1_invstd);
    lc.q = a * lp.wq;
    lc.k = a * lp.wk;
    lc.v = a * lp.wv;
    lc.context.resize(T, d);
    lc.probs.resize(nh);
    for (int h = 0; h < nh; ++h) {
      const auto qh = lc.q.middleCols(h * dh, dh);
      const auto kh = lc.k.middleCols(h * dh, dh);
      const auto vh = lc.v.middleCols(h * dh, dh);
      Eigen::MatrixXd scores = qh * kh.transpose() * inv_sqrt_dh;
      // Causal mask plus PAD-key mask. With right padding the causal mask
      // already hides PAD keys from every real position.
      for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j)
          if (j > i || (ids[j] == kPadId && j != i))
            scores(i, j) = -std::numeric_limits<double>::infinity();
      Eigen::MatrixXd& p = lc.probs[h];
      p.resize(T, T);
      for (int i = 0; i < T; ++i) {
        const double row_max = scores.row(i).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(i).array() - row_max).exp();
        p.row(i) = e / e.sum();
      }
      lc.context.middleCols(h * dh, dh) = p * vh;
    }
    x += lc.context * lp.wo;
    lc.x_mid = x;
    const Eigen::MatrixXd b = layer_norm(x, lp.ln2_scale, lp.ln2_bias, lc.ln2_norm, lc.ln2_invstd);
    lc.mlp_pre = b * lp.w_up;
    lc.mlp_act = lc.mlp_pre.unaryExpr([](double v) { return gelu(v); });
    x += lc.mlp_act * lp.w_down;
  }

  item.x_final = x;
  const Eigen::MatrixXd y =
      layer_norm(x, params.final_scale, params.final_bias, item.final_norm, item.final_invstd);
  return y.row(item.eos_pos).transpose();
}

// Accumulates parameter gradients for one item into `grads`.
void backward_item(const EncoderParams& params, const ItemCache& item,
                   const Eigen::RowVectorXd& grad_embedding, EncoderParams& grads) {
  const auto& cfg = params.config;
  const int T = static_cast<int>(item.ids.size());
  const int d = cfg.d_model;
  const int nh = cfg.n_heads;
  const int dh = d / nh;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(T, d);
  dy.row(item.eos_pos) = grad_embedding;
  Eigen::MatrixXd dx = layer_norm_backward(dy, item.final_norm, item.final_invstd,
                                           params.final_scale, grads.final_scale,
                                           grads.final_bias);

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& lp = params.layers[l];
    const auto& lc = item.layers[l];
    auto& lg = grads.layers[l];

    // MLP block: x_out = x_mid + gelu(ln2(x_mid) * w_up) * w_down
    const Eigen::MatrixXd b =
        (lc.ln2_norm.array().rowwise() * lp.ln2_scale.row(0).array()).matrix().rowwise() +
        lp.ln2_bias.row(0);
    const Eigen::MatrixXd d_act = dx * lp.w_down.transpose();
    lg.w_down += lc.mlp_act.transpose() * dx;
    const Eigen::MatrixXd d_pre =
        d_act.cwiseProduct(lc.mlp_pre.unaryExpr([](double v) { return gelu_deriv(v); }));
    const Eigen::MatrixXd db = d_pre * lp.w_up.transpose();
    lg.w_up += b.transpose() * d_pre;
    dx += layer_norm_backward(db, lc.ln2_norm, lc.ln2_invstd, lp.ln2_scale, lg.ln2_scale,
                              lg.ln2_bias);

    // Attention block: x_mid = x_in + context * wo
    const Eigen::MatrixXd a =
        (lc.ln1_norm.array().rowwise() * lp.ln1_scale.row(0).array()).matrix().rowwise() +
        lp.ln1_bias.row(0);
    const Eigen::MatrixXd d_ctx = dx * lp.wo.transpose();
    lg.wo += lc.context.transpose() * dx;
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(T, d);
    Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(T, d);
    Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(T, d);
    for (int h = 0; h < nh; ++h) {
      const auto vh = lc.v.middleCols(h * dh, dh);
      const auto qh = lc.q.middleCols(h * dh, dh);
      const auto kh = lc.k.middleCols(h * dh, dh);
      const auto& p = lc.probs[h];
      const Eigen::MatrixXd d_ctx_h = d_ctx.middleCols(h * dh, dh);
      const Eigen::MatrixXd dp = d_ctx_h * vh.transpose();
      dv.middleCols(h * dh, dh) = p.transpose() * d_ctx_h;
      Eigen::MatrixXd ds(T, T);
      for (int i = 0; i < T; ++i) {
        const double dot = dp.row(i).cwiseProduct(p.row(i)).sum();
        ds.row(i) = (dp.row(i).array() - dot) * p.row(i).array();
      }
      dq.middleCols(h * dh, dh) = ds * kh * inv_sqrt_dh;
      dk.middleCols(h * dh, dh) = ds.transpose() * qh * inv_sqrt_dh;
    }
    lg.wq += a.transpose() * dq;
    lg.wk += a.transpose() * dk;
    lg.wv += a.transpose() * dv;
    const Eigen::MatrixXd da =
        dq * lp.wq.transpose() + dk * lp.wk.transpose() + dv * lp.wv.transpose();
    dx += layer_norm_backward(da, lc.ln1_norm, lc.ln1_invstd, lp.ln1_scale, lg.ln1_scale,
                              lg.ln1_bias);
  }

  for (int t = 0; t < T; ++t) {
    grads.token_embedding.row(item.ids[t]) += dx.row(t);
    grads.position_embedding.row(t) += dx.row(t);
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size != kVocabSize) throw UsageError("vocab_size must be 259");
  if (d_model < 1 || n_heads < 1 || n_layers < 0) throw UsageError("invalid encoder dimensions");
  if (d_model % n_heads != 0) throw UsageError("d_model must be divisible by n_heads");
  if (max_seq_len < 4) throw UsageError("max_seq_len must be >= 4");
}

TokenSequence tokenize(const std::string& text, int max_seq_len) {
  TokenSequence seq;
  seq.ids.reserve(std::min<std::size_t>(text.size() + 2, max_seq_len));
  seq.ids.push_back(kBosId);
  for (unsigned char byte : text) {
    if (static_cast<int>(seq.ids.size()) >= max_seq_len - 1) break;
    seq.ids.push_back(static_cast<int>(byte));
  }
  seq.ids.push_back(kEosId);
  return seq;
}

EncoderParams init_params(const EncoderConfig& config) {
  config.validate();
  EncoderParams params;
  params.config = config;
  const int d = config.d_model;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(config.seed);
  params.token_embedding = uniform_matrix(config.vocab_size, d, scale, rng);
  params.position_embedding = uniform_matrix(config.max_seq_len, d, scale, rng);
  params.layers.resize(config.n_layers);
  for (auto& layer : params.layers) {
    layer.wq = uniform_matrix(d, d, scale, rng);
    layer.wk = uniform_matrix(d, d, scale, rng);
    layer.wv = uniform_matrix(d, d, scale, rng);
    layer.wo = uniform_matrix(d, d, scale, rng);
    layer.w_up = uniform_matrix(d, 4 * d, scale, rng);
    layer.w_down = uniform_matrix(4 * d, d, scale, rng);
    layer.ln1_scale = Eigen::MatrixXd::Ones(1, d);
    layer.ln1_bias = Eigen::MatrixXd::Zero(1, d);
    layer.ln2_scale = Eigen::MatrixXd::Ones(1, d);
    layer.ln2_bias = Eigen::MatrixXd::Zero(1, d);
  }
  params.final_scale = Eigen::MatrixXd::Ones(1, d);
  params.final_bias = Eigen::MatrixXd::Zero(1, d);
  return params;
}

EncoderParams zeros_like(const EncoderParams& params) {
  EncoderParams zeros = params;
  zeros.for_each_tensor([](const std::string&, Eigen::MatrixXd& t) { t.setZero(); });
  return zeros;
}

Embedding encode(const EncoderParams& params, const std::string& rendered_text) {
  const TokenSequence seq = tokenize(rendered_text, params.config.max_seq_len);
  ItemCache scratch;
  return forward_item(params, seq.ids, scratch);
}

Eigen::MatrixXd forward_batch(const EncoderParams& params, const std::vector<TokenSequence>& batch,
                              EncoderCache* cache) {
  if (batch.empty()) throw UsageError("forward_batch requires a non-empty batch");
  std::size_t max_len = 0;
  for (const auto& seq : batch) max_len = std::max(max_len, seq.ids.size());
  Eigen::MatrixXd embeddings(batch.size(), params.config.d_model);
  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.items.assign(batch.size(), {});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<int> ids = batch[i].ids;
    ids.resize(max_len, kPadId);  // right padding, masked out of attention
    embeddings.row(i) = forward_item(params, ids, c.items[i]).transpose();
  }
  return embeddings;
}

EncoderParams backward_batch(const EncoderParams& params, const EncoderCache& cache,
                             const Eigen::MatrixXd& grad_wrt_embeddings) {
  if (static_cast<std::size_t>(grad_wrt_embeddings.rows()) != cache.items.size() ||
      grad_wrt_embeddings.cols() != params.config.d_model)
    throw DataError("grad_wrt_embeddings shape does not match the cached batch");
  EncoderParams grads = zeros_like(params);
  // Fixed accumulation order over items keeps results reproducible.
  for (std::size_t i = 0; i < cache.items.size(); ++i)
    backward_item(params, cache.items[i], grad_wrt_embeddings.row(i), grads);
  return grads;
}

namespace {

constexpr std::uint32_t kCkptMagic = 0x44524554;  // "DRET"
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_i64(std::ostream& out, std::int64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>(static_cast<std::uint64_t>(v) >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::int64_t get_i64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<std::int64_t>(v);
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    put_u32(out, kCkptMagic);
    put_u32(out, kCkptVersion);
    put_i64(out, params.config.vocab_size);
    put_i64(out, params.config.d_model);
    put_i64(out, params.config.n_layers);
    put_i64(out, params.config.n_heads);
    put_i64(out, params.config.max_seq_len);
    put_i64(out, static_cast<std::int64_t>(params.config.seed));
    params.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) {
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c) {
          std::uint64_t bits;
          const double v = t(r, c);
          std::memcpy(&bits, &v, 8);
          put_i64(out, static_cast<std::int64_t>(bits));
        }
    });
  });
}

EncoderParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  if (get_u32(in) != kCkptMagic) throw DataError("not a checkpoint file: " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kCkptVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  EncoderConfig config;
  config.vocab_size = static_cast<int>(get_i64(in));
  config.d_model = static_cast<int>(get_i64(in));
  config.n_layers = static_cast<int>(get_i64(in));
  config.n_heads = static_cast<int>(get_i64(in));
  config.max_seq_len = static_cast<int>(get_i64(in));
  config.seed = static_cast<std::uint64_t>(get_i64(in));
  try {
    config.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("corrupt checkpoint config: ") + e.what());
  }
  EncoderParams params = init_params(config);
  params.for_each_tensor([&](const std::string&, Eigen::MatrixXd& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const std::uint64_t bits = static_cast<std::uint64_t>(get_i64(in));
        double v;
        std::memcpy(&v, &bits, 8);
        t(r, c) = v;
      }
  });
  in.peek();
  if (!in.eof()) throw DataError("trailing bytes in checkpoint: " + path);
  return params;
}

}  // namespace dret
