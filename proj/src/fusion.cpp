#include "emavio/fusion.hpp"

#include <cmath>

#include "emavio/error.hpp"

namespace emavio {

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "lstm") return FusionMode::kLstm;
  if (text == "self_attention") return FusionMode::kSelfAttention;
  if (text == "ema") return FusionMode::kEma;
  throw ConfigError("unknown fusion mode '" + text + "' (expected lstm, self_attention or ema)");
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kLstm: return "lstm";
    case FusionMode::kSelfAttention: return "self_attention";
    case FusionMode::kEma: return "ema";
  }
  return "?";
}

MemoryTarget parse_memory_target(const std::string& text) {
  if (text == "qk") return MemoryTarget::kQueryKey;
  if (text == "qv") return MemoryTarget::kQueryValue;
  throw ConfigError("unknown memory target '" + text + "' (expected qk or qv)");
}

std::string to_string(MemoryTarget target) { return target == MemoryTarget::kQueryKey ? "qk" : "qv"; }

MemoryNorm parse_memory_norm(const std::string& text) {
  if (text == "double") return MemoryNorm::kDouble;
  if (text == "softmax") return MemoryNorm::kSoftmax;
  throw ConfigError("unknown memory norm '" + text + "' (expected double or softmax)");
}

std::string to_string(MemoryNorm norm) { return norm == MemoryNorm::kDouble ? "double" : "softmax"; }

Tensor fuse_concat(const Tensor& visual, const Tensor& inertial, std::size_t tokens, std::size_t token_dim) {
  if (visual.rank() != 1 || inertial.rank() != 1) {
    throw DimensionError("fuse_concat: expected feature vectors, got " + shape_str(visual.shape()) + " and " +
                         shape_str(inertial.shape()));
  }
  const std::size_t total = visual.numel() + inertial.numel();
  if (tokens == 0 || token_dim == 0 || tokens * token_dim != total) {
    throw ConfigError("fuse_concat: " + std::to_string(total) + " fused features do not form " +
                      std::to_string(tokens) + " tokens of width " + std::to_string(token_dim));
  }
  return ops::reshape(ops::concat({visual, inertial}, 0), {tokens, token_dim});
}

namespace {

void require_tokens(const char* op, const Tensor& f, const AttentionWeights& w) {
  if (f.rank() != 2 || w.query.rank() != 2 || w.query.dim(1) != f.dim(1)) {
    throw DimensionError(std::string(op) + ": features " + shape_str(f.shape()) + " vs projection " +
                         shape_str(w.query.shape()));
  }
}

Tensor attend(const Tensor& features, const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& output,
              bool scale_logits, Tensor* attention_map) {
  Tensor logits = ops::matmul_nt(q, k);
  if (scale_logits) logits = ops::scale(logits, 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
  const Tensor map = ops::softmax(logits, 1);
  if (attention_map) *attention_map = map;
  const Tensor a = ops::matmul(map, v);
  return ops::add(ops::linear(a, output, Tensor{}), features);
}

}  // namespace

Tensor self_attention(const Tensor& features, const AttentionWeights& w, const AttentionOptions& options,
                      Tensor* attention_map) {
  require_tokens("self_attention", features, w);
  const Tensor q = ops::linear(features, w.query, Tensor{});
  const Tensor k = ops::linear(features, w.key, Tensor{});
  const Tensor v = ops::linear(features, w.value, Tensor{});
  return attend(features, q, k, v, w.output, options.scale_logits, attention_map);
}

Tensor memory_attend(const Tensor& x, const Tensor& memory1, const Tensor& memory2, MemoryNorm norm) {
  if (memory1.rank() != 2 || memory1.dim(0) == 0) throw ConfigError("memory_attend: memory must have at least one slot");
  if (memory1.shape() != memory2.shape()) {
    throw DimensionError("memory_attend: memory shapes " + shape_str(memory1.shape()) + " vs " +
                         shape_str(memory2.shape()));
  }
  Tensor weights = ops::softmax(ops::matmul_nt(x, memory1), 1);
  if (norm == MemoryNorm::kDouble) weights = ops::normalize_sum(weights, 0);
  return ops::matmul(weights, memory2);
}

std::pair<Tensor, Tensor> memory_transform(const Tensor& query, const Tensor& key, const AttentionWeights& w,
                                           MemoryNorm norm) {
  return {memory_attend(query, w.query_memory1, w.query_memory2, norm),
          memory_attend(key, w.key_memory1, w.key_memory2, norm)};
}

Tensor ema_fuse(const Tensor& features, const AttentionWeights& w, const AttentionOptions& options,
                Tensor* attention_map) {
  require_tokens("ema_fuse", features, w);
  const Tensor q = ops::linear(features, w.query, Tensor{});
  const Tensor k = ops::linear(features, w.key, Tensor{});
  const Tensor v = ops::linear(features, w.value, Tensor{});
  if (options.memory_target == MemoryTarget::kQueryKey) {
    auto [q_att, k_att] = memory_transform(q, k, w, options.memory_norm);
    return attend(features, q_att, k_att, v, w.output, options.scale_logits, attention_map);
  }
  auto [q_att, v_att] = memory_transform(q, v, w, options.memory_norm);
  return attend(features, q_att, k, v_att, w.output, options.scale_logits, attention_map);
}

FusionBlock::FusionBlock(const FusionConfig& config, ParameterSet& params, Rng& rng, const std::string& prefix)
    : config_(config) {
  const std::size_t d = config.token_dim;
  if (config.tokens == 0 || d == 0) throw ConfigError("fusion: tokens and token_dim must be positive");
  if (config.mode == FusionMode::kLstm) {
    const std::size_t h = config.lstm_hidden;
    if (h == 0) throw ConfigError("fusion: lstm_hidden must be positive");
    lstm_.input = params.add_uniform(prefix + ".lstm.input_weight", {4 * h, d}, h, rng);
    lstm_.hidden = params.add_uniform(prefix + ".lstm.hidden_weight", {4 * h, h}, h, rng);
    lstm_.bias = params.add_uniform(prefix + ".lstm.bias", {4 * h}, h, rng);
    return;
  }
  attention_.query = params.add_uniform(prefix + ".query", {d, d}, d, rng);
  attention_.key = params.add_uniform(prefix + ".key", {d, d}, d, rng);
  attention_.value = params.add_uniform(prefix + ".value", {d, d}, d, rng);
  attention_.output = params.add_uniform(prefix + ".output", {d, d}, d, rng);
  if (config.mode == FusionMode::kEma) {
    const std::size_t m = config.memory_slots;
    if (m == 0) throw ConfigError("fusion: memory_slots must be positive");
    // memory1 maps d -> m logits (fan-in d); memory2 mixes m normalized weights.
    attention_.query_memory1 = params.add_uniform(prefix + ".query_memory1", {m, d}, d, rng);
    attention_.query_memory2 = params.add_uniform(prefix + ".query_memory2", {m, d}, 1, rng);
    attention_.key_memory1 = params.add_uniform(prefix + ".key_memory1", {m, d}, d, rng);
    attention_.key_memory2 = params.add_uniform(prefix + ".key_memory2", {m, d}, 1, rng);
  }
}

AttentionOptions FusionBlock::options() const {
  return {config_.scale_logits, config_.memory_norm, config_.memory_target};
}

Tensor FusionBlock::forward(const Tensor& tokens, Tensor* attention_map) const {
  if (tokens.shape() != Shape{config_.tokens, config_.token_dim}) {
    throw ConfigError("fusion: expected tokens [" + std::to_string(config_.tokens) + "x" +
                      std::to_string(config_.token_dim) + "], got " + shape_str(tokens.shape()));
  }
  switch (config_.mode) {
    case FusionMode::kSelfAttention: return self_attention(tokens, attention_, options(), attention_map);
    case FusionMode::kEma: return ema_fuse(tokens, attention_, options(), attention_map);
    case FusionMode::kLstm: break;
  }
  const std::size_t h = config_.lstm_hidden;
  Tensor hidden = Tensor::zeros({h});
  Tensor cell = Tensor::zeros({h});
  for (std::size_t s = 0; s < config_.tokens; ++s) {
    const Tensor x = ops::reshape(ops::slice(tokens, 0, s, s + 1), {config_.token_dim});
    auto [hn, cn] = ops::lstm_cell(x, hidden, cell, lstm_);
    hidden = hn;
    cell = cn;
  }
  return hidden;
}

std::size_t FusionBlock::output_size() const {
  return config_.mode == FusionMode::kLstm ? config_.lstm_hidden : config_.tokens * config_.token_dim;
}

std::size_t FusionBlock::macs() const {
  const std::size_t S = config_.tokens, d = config_.token_dim;
  if (config_.mode == FusionMode::kLstm) {
    const std::size_t h = config_.lstm_hidden;
    return S * 4 * h * (d + h);
  }
  // Q, K, V and output projections, Q K^T, A V.
  std::size_t total = 4 * S * d * d + 2 * S * S * d;
  // Two memory transforms of two matmuls each.
  if (config_.mode == FusionMode::kEma) total += 4 * S * config_.memory_slots * d;
  return total;
}

PoseRegressor::PoseRegressor(std::size_t input, std::size_t hidden, ParameterSet& params, Rng& rng,
                             const std::string& prefix)
    : input_(input), hidden_(hidden) {
  if (input == 0 || hidden == 0) throw ConfigError("regressor: dimensions must be positive");
  w1_ = params.add_uniform(prefix + ".fc1.weight", {hidden, input}, input, rng);
  b1_ = params.add_uniform(prefix + ".fc1.bias", {hidden}, input, rng);
  w2_ = params.add_uniform(prefix + ".fc2.weight", {6, hidden}, hidden, rng);
  b2_ = params.add_uniform(prefix + ".fc2.bias", {6}, hidden, rng);
}

Tensor PoseRegressor::forward(const Tensor& fused) const {
  const Tensor flat = ops::reshape(fused, {fused.numel()});
  if (flat.numel() != input_) {
    throw ConfigError("regressor: expected " + std::to_string(input_) + " inputs, got " + std::to_string(flat.numel()));
  }
  return ops::linear(ops::relu(ops::linear(flat, w1_, b1_)), w2_, b2_);
}

}  // namespace emavio
