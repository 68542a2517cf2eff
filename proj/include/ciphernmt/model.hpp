#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ciphernmt/subword.hpp"
#include "ciphernmt/tape.hpp"

namespace ciphernmt {

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int embed_dim = 64;
  int ffn_dim = 128;
  double dropout = 0.1;
  double attention_dropout = 0.0;
  int vocab_size = 0;
  int max_len = 256;
  uint64_t seed = 1;
  bool tie_output = false;

  // transformer_iwslt-style preset: 6 layers, 4 heads, 512/1024, dropout
  // 0.3/0.1. Far beyond desk scale but expressible.
  static ModelConfig iwslt();

  void validate() const;  // embed_dim % heads == 0, dropout in [0,1), vocab > 0
};

template <class T>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<MatX<T>> values;
  std::vector<MatX<T>> grads;
  std::unordered_map<std::string, int> by_name;

  int add(const std::string& name, int rows, int cols);
  int find(const std::string& name) const;  // -1 when absent
  MatX<T>& value(const std::string& name);
  const MatX<T>& value(const std::string& name) const;

  void zero_grads();
  int64_t param_count() const;
  bool all_finite() const;
  T max_abs_diff(const ParamStore<T>& other) const;

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    out.names = names;
    out.by_name = by_name;
    out.values.reserve(values.size());
    out.grads.reserve(values.size());
    for (const auto& v : values) {
      out.values.push_back(v.template cast<U>());
      out.grads.push_back(MatX<U>::Zero(v.rows(), v.cols()));
    }
    return out;
  }
};

struct DecodeConfig {
  int beam = 5;
  double len_penalty = 1.0;
  int max_len = 200;
};

// Encoder-decoder transformer with post-layernorm residual blocks, sinusoidal
// positions, ReLU feed-forward. One tape-based forward serves training,
// inference and finite-difference checks; float instantiation is the
// training mode, double the verify mode.
template <class T>
class TransformerModel {
 public:
  explicit TransformerModel(const ModelConfig& cfg);
  TransformerModel(const ModelConfig& cfg, ParamStore<T> params);

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  struct ForwardResult {
    int logits = -1;                    // tape node, [len(tgt_in) x vocab]
    std::vector<MatX<T>> enc_layers;    // filled when trace_encoder
  };

  // Teacher-forced forward. src gets eos appended internally; tgt_in must be
  // bos-prefixed (see teacher_input). Deterministic when training=false or
  // dropout is zero.
  ForwardResult forward(Tape<T>& tape, const std::vector<int>& src,
                        const std::vector<int>& tgt_in, bool training, Rng* dropout_rng,
                        bool trace_encoder = false) const;

  // Beam search with length-normalized scoring (logprob / len^penalty).
  // beam=1 is exactly greedy; the greedy chain always stays in the beam, so
  // wider beams never score below the greedy result. Stops at eos or max_len.
  std::vector<int> decode(const std::vector<int>& src, const DecodeConfig& dc) const;

  // Per-layer encoder outputs for one sentence (rows = positions incl. the
  // appended eos anchor).
  std::vector<MatX<T>> encoder_activations(const std::vector<int>& src) const;

  // Unsmoothed per-token-mean NLL of tgt given src; no recording.
  double sentence_nll(const std::vector<int>& src, const std::vector<int>& tgt) const;

  static std::vector<int> teacher_input(const std::vector<int>& tgt);
  static std::vector<int> teacher_output(const std::vector<int>& tgt);

 private:
  struct LayerIds;  // per-forward param node handles
  int attention(Tape<T>& tape, int q_in, int kv_in, const std::string& prefix, bool causal,
                bool training, Rng* rng, std::unordered_map<std::string, int>& pids) const;
  int param_node(Tape<T>& tape, const std::string& name,
                 std::unordered_map<std::string, int>& pids) const;
  MatX<T> positional(int len) const;

  ModelConfig cfg_;
  ParamStore<T> params_;
};

using TrainModel = TransformerModel<float>;
using VerifyModel = TransformerModel<double>;

}  // namespace ciphernmt
