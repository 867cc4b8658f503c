#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dret/pairgen.hpp"

namespace dret {

inline constexpr int kPadId = 256;
inline constexpr int kBosId = 257;
inline constexpr int kEosId = 258;
inline constexpr int kVocabSize = 259;  // 256 bytes + PAD + BOS + EOS

struct EncoderConfig {
  int vocab_size = kVocabSize;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 2;
  int max_seq_len = 128;
  std::uint64_t seed = 0;

  void validate() const;  // throws UsageError
  bool operator==(const EncoderConfig&) const = default;
};

struct TokenSequence {
  std::vector<int> ids;  // last id is EOS
};

// BOS + UTF-8 bytes, truncated to max_seq_len-1, then EOS.
TokenSequence tokenize(const std::string& text, int max_seq_len);

struct LayerParams {
  Eigen::MatrixXd wq, wk, wv, wo;      // d_model x d_model
  Eigen::MatrixXd w_up, w_down;        // d_model x 4*d_model, 4*d_model x d_model
  Eigen::MatrixXd ln1_scale, ln1_bias; // 1 x d_model
  Eigen::MatrixXd ln2_scale, ln2_bias; // 1 x d_model
};

struct EncoderParams {
  EncoderConfig config;
  Eigen::MatrixXd token_embedding;     // vocab_size x d_model
  Eigen::MatrixXd position_embedding;  // max_seq_len x d_model
  std::vector<LayerParams> layers;
  Eigen::MatrixXd final_scale, final_bias;  // 1 x d_model

  // Visits every tensor in declaration order (the checkpoint order).
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn("token_embedding", token_embedding);
    fn("position_embedding", position_embedding);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& layer = layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      fn(p + "wq", layer.wq);
      fn(p + "wk", layer.wk);
      fn(p + "wv", layer.wv);
      fn(p + "wo", layer.wo);
      fn(p + "w_up", layer.w_up);
      fn(p + "w_down", layer.w_down);
      fn(p + "ln1_scale", layer.ln1_scale);
      fn(p + "ln1_bias", layer.ln1_bias);
      fn(p + "ln2_scale", layer.ln2_scale);
      fn(p + "ln2_bias", layer.ln2_bias);
    }
    fn("final_scale", final_scale);
    fn("final_bias", final_bias);
  }

  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    const_cast<EncoderParams*>(this)->for_each_tensor(
        [&](const std::string& name, Eigen::MatrixXd& t) {
          fn(name, static_cast<const Eigen::MatrixXd&>(t));
        });
  }
};

using Embedding = Eigen::VectorXd;

// Deterministic for a fixed (config, seed): weights uniform in
// [-1/sqrt(d_model), 1/sqrt(d_model)], norm scales 1, biases 0.
EncoderParams init_params(const EncoderConfig& config);

EncoderParams zeros_like(const EncoderParams& params);

// Per-item activation record kept by forward_batch for the backward pass.
struct LayerCache {
  Eigen::MatrixXd x_in;                  // input to the attention block
  Eigen::MatrixXd ln1_norm;              // normalized rows (pre scale/bias)
  Eigen::VectorXd ln1_invstd;
  Eigen::MatrixXd q, k, v;
  std::vector<Eigen::MatrixXd> probs;    // per head, T x T softmax rows
  Eigen::MatrixXd context;               // concatenated head outputs
  Eigen::MatrixXd x_mid;                 // after attention residual
  Eigen::MatrixXd ln2_norm;
  Eigen::VectorXd ln2_invstd;
  Eigen::MatrixXd mlp_pre;               // before the nonlinearity
  Eigen::MatrixXd mlp_act;               // after the nonlinearity
};

struct ItemCache {
  std::vector<int> ids;
  int eos_pos = 0;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd x_final;               // input to the final norm
  Eigen::MatrixXd final_norm;            // normalized rows (pre scale/bias)
  Eigen::VectorXd final_invstd;
};

struct EncoderCache {
  std::vector<ItemCache> items;
};

// Encodes already-rendered text (instruction template with "{}" filled in).
Embedding encode(const EncoderParams& params, const std::string& rendered_text);

inline Embedding encode(const EncoderParams& params, const std::string& instruction_template,
                        const std::string& text) {
  return encode(params, render_instruction(instruction_template, text));
}

// Row i of the result is the EOS-pooled embedding of batch[i].
Eigen::MatrixXd forward_batch(const EncoderParams& params, const std::vector<TokenSequence>& batch,
                              EncoderCache* cache);

// Exact gradients of sum_i <grad_wrt_embeddings[i], embedding_i> w.r.t. every
// parameter tensor. grad_wrt_embeddings is n x d_model.
EncoderParams backward_batch(const EncoderParams& params, const EncoderCache& cache,
                             const Eigen::MatrixXd& grad_wrt_embeddings);

void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

}  // namespace dret
