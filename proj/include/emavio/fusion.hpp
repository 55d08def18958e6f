#pragma once

// Visual-inertial feature fusion and pose regression.
//
// The flat [F_V; F_I] vector is viewed as S tokens of width d. Token rows are
// the attention positions; projections act per token (Q = F W_q^T, ...).

#include <cstddef>
#include <string>
#include <utility>

#include "emavio/ops.hpp"
#include "emavio/parameter.hpp"
#include "emavio/rng.hpp"
#include "emavio/tensor.hpp"

namespace emavio {

enum class FusionMode { kLstm, kSelfAttention, kEma };
// Which pair of attention operands the external memories re-express.
enum class MemoryTarget { kQueryKey, kQueryValue };
// Norm() inside the memory transform.
enum class MemoryNorm { kDouble, kSoftmax };

FusionMode parse_fusion_mode(const std::string& text);
std::string to_string(FusionMode mode);
MemoryTarget parse_memory_target(const std::string& text);
std::string to_string(MemoryTarget target);
MemoryNorm parse_memory_norm(const std::string& text);
std::string to_string(MemoryNorm norm);

struct FusionConfig {
  FusionMode mode = FusionMode::kEma;
  std::size_t tokens = 4;        // S
  std::size_t token_dim = 64;    // d
  std::size_t memory_slots = 32; // m
  std::size_t lstm_hidden = 64;
  MemoryTarget memory_target = MemoryTarget::kQueryKey;
  MemoryNorm memory_norm = MemoryNorm::kDouble;
  bool scale_logits = false;  // divide Q K^T by sqrt(d)
};

// Concatenates the feature vectors and views them as tokens x token_dim.
// Throws ConfigError when the total width does not factor that way.
Tensor fuse_concat(const Tensor& visual, const Tensor& inertial, std::size_t tokens, std::size_t token_dim);

struct AttentionWeights {
  Tensor query, key, value, output;  // d x d
  // m x d memories. In query-value mode the key memories act on V.
  Tensor query_memory1, query_memory2, key_memory1, key_memory2;
};

struct AttentionOptions {
  bool scale_logits = false;
  MemoryNorm memory_norm = MemoryNorm::kDouble;
  MemoryTarget memory_target = MemoryTarget::kQueryKey;
};

// F_att = (softmax(Q K^T) V) W_a^T + F. `attention_map`, when given, receives
// the S x S row-stochastic matrix.
Tensor self_attention(const Tensor& features, const AttentionWeights& w, const AttentionOptions& options = {},
                      Tensor* attention_map = nullptr);

// Norm(X M1^T) M2. Double normalization: softmax over memory slots, then
// divide by the sum over tokens.
Tensor memory_attend(const Tensor& x, const Tensor& memory1, const Tensor& memory2, MemoryNorm norm);

// (Q_att, K_att) from the query and key memories.
std::pair<Tensor, Tensor> memory_transform(const Tensor& query, const Tensor& key, const AttentionWeights& w,
                                           MemoryNorm norm = MemoryNorm::kDouble);

// Self-attention with the memory-transformed operands.
Tensor ema_fuse(const Tensor& features, const AttentionWeights& w, const AttentionOptions& options = {},
                Tensor* attention_map = nullptr);

// Dispatches on FusionMode and owns the fusion parameters.
class FusionBlock {
 public:
  FusionBlock(const FusionConfig& config, ParameterSet& params, Rng& rng, const std::string& prefix = "fusion");

  // tokens: S x d. Returns S x d for attention modes, [lstm_hidden] for LSTM.
  Tensor forward(const Tensor& tokens, Tensor* attention_map = nullptr) const;
  std::size_t output_size() const;
  std::size_t macs() const;

  const FusionConfig& config() const { return config_; }
  const AttentionWeights& attention() const { return attention_; }
  AttentionOptions options() const;

 private:
  FusionConfig config_;
  AttentionWeights attention_;
  ops::LstmWeights lstm_;
};

// Two linear layers with a ReLU in between; no activation on the 6 outputs
// (t then psi).
class PoseRegressor {
 public:
  PoseRegressor(std::size_t input, std::size_t hidden, ParameterSet& params, Rng& rng,
                const std::string& prefix = "regressor");
  Tensor forward(const Tensor& fused) const;
  std::size_t macs() const { return input_ * hidden_ + hidden_ * 6; }

 private:
  std::size_t input_, hidden_;
  Tensor w1_, b1_, w2_, b2_;
};

}  // namespace emavio
