#pragma once

#include <vector>

#include "ciphernmt/corpus.hpp"
#include "ciphernmt/model.hpp"
#include "ciphernmt/tape.hpp"

namespace ciphernmt {

struct LossConfig {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double beta = 5.0;
  double tau = 1.0;
  double label_smoothing = 0.1;
  long agreement_warmup_steps = 2000;
  bool symmetric_kl = true;  // one-sided KL(flat(anchor) || cipher) when false

  void validate() const;
};

// Per-batch decomposition, per-token means. beta_effective is what actually
// weighted the agreement term (0 during warmup), so
// total == alpha1*anchor_nll + alpha2*cipher_nll + beta_effective*agreement.
struct LossBreakdown {
  double anchor_nll = 0.0;
  double cipher_nll = 0.0;
  double agreement = 0.0;
  double total = 0.0;
  double beta_effective = 0.0;
  long token_count = 0;
};

double beta_effective(const LossConfig& cfg, long step);

// Label-smoothed cross entropy, mean over unmasked rows. weights: one entry
// per row, 0 masking a pad row; all rows count as 1 when omitted.
double nll_loss_value(const MatX<double>& logits, const std::vector<int>& targets,
                      double label_smoothing, const std::vector<double>* weights = nullptr);

// Mean over rows of the (flattened, symmetric) KL agreement.
double agreement_loss_value(const MatX<double>& a, const MatX<double>& b, double tau,
                            bool symmetric = true);

// softmax(z / tau) per row; Eq-5-style flattening as described in prose.
MatX<double> flatten_distribution(const MatX<double>& logits, double tau);

// CipherDAug objective over one anchored batch:
//   total = alpha1 NLL(anchor) + alpha2 NLL(cipher) + beta_eff * agreement
// with beta_eff = 0 while step < agreement_warmup_steps (the agreement value
// is still computed for the breakdown, but carries no gradient then).
// Batches without a cipher view reduce to alpha1 * NLL(anchor), which is the
// baseline objective. backward=true accumulates parameter gradients.
template <class T>
LossBreakdown cipherdaug_batch_loss(const TransformerModel<T>& model, const AnchoredBatch& batch,
                                    const LossConfig& cfg, long step, bool training,
                                    Rng* dropout_rng, bool backward);

// Plain tagged-union NLL over one naive batch (tag prepended to the source).
template <class T>
LossBreakdown naive_batch_loss(const TransformerModel<T>& model, const TaggedBatch& batch,
                               const LossConfig& cfg, bool training, Rng* dropout_rng,
                               bool backward);

// Summed per-direction NLL terms for aligned views of the same sentences;
// the Eq-1/Eq-2 shape, mostly exercised by tests.
struct MultisourceResult {
  double loss_sum = 0.0;
  int terms = 0;
};

template <class T>
MultisourceResult naive_multisource_loss(const TransformerModel<T>& model,
                                         const std::vector<TaggedExample>& directions,
                                         double label_smoothing);

}  // namespace ciphernmt
