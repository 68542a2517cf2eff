#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "ciphernmt/corpus.hpp"
#include "ciphernmt/losses.hpp"
#include "ciphernmt/model.hpp"

namespace ciphernmt {

struct TrainConfig {
  double peak_lr = 6e-4;
  long warmup_steps = 8000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  long max_steps = 100000;
  int patience = 15;
  long validate_every = 1000;
  int checkpoint_keep = 5;
  int average_last = 5;
  uint64_t seed = 1;
  std::string mode = "cipherdaug";  // baseline | naive | naive_pivot | cipherdaug
  int batch_tokens = 4096;
  long log_every = 50;
  bool dev_bleu = false;
  int dev_beam = 5;
  double dev_len_penalty = 1.0;
  std::string out_dir;  // checkpoints land here; empty keeps training in memory

  void validate() const;
};

// Linear warmup to peak_lr at `warmup`, then peak_lr * sqrt(warmup / step).
double lr_schedule(long step, double peak_lr, long warmup);

template <class T>
struct AdamState {
  std::vector<MatX<T>> m;
  std::vector<MatX<T>> v;
  long t = 0;

  void init(const ParamStore<T>& params);
  void step(ParamStore<T>& params, double lr, double beta1, double beta2, double eps);
};

struct StepRecord {
  long step = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct DevRecord {
  long step = 0;
  double dev_loss = 0.0;
  double dev_bleu = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<DevRecord> validations;
  long best_step = -1;
  double best_metric = std::numeric_limits<double>::infinity();
  std::string stop_reason;
  std::vector<std::string> checkpoints;  // ring contents, oldest first
  std::string best_checkpoint;
  std::string averaged_checkpoint;
};

struct TrainData {
  // anchored modes (baseline / cipherdaug)
  TokenizedViews views;
  // naive modes
  std::vector<TaggedExample> tagged;
  int tgt_tag_id = -1;

  std::vector<std::vector<int>> dev_src;
  std::vector<std::vector<int>> dev_tgt;
  const Tokenizer* tokenizer = nullptr;  // needed for dev BLEU detokenization
};

template <class T>
TrainResult train_model(TransformerModel<T>& model, const TrainData& data, const TrainConfig& tc,
                        const LossConfig& lc, const std::string& config_echo, std::ostream* log);

}  // namespace ciphernmt
