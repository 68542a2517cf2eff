#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ciphernmt {

enum class BleuSmoothing { kNone, kExp };

struct BleuReport {
  double bleu = 0.0;  // percent, [0, 100]
  std::array<double, 4> precisions{};  // values used in the geometric mean
  double brevity_penalty = 1.0;
  long hyp_len = 0;
  long ref_len = 0;
  std::array<long, 4> matches{};  // raw clipped counts
  std::array<long, 4> totals{};
};

// Clipped n-gram precision BLEU with brevity penalty over pre-tokenized
// lines. Orders with no n-grams in the whole hypothesis corpus are dropped
// from the geometric mean; exp smoothing halves a pseudo-count per
// zero-match order (the mteval/"smooth:exp" rule).
BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& hyps,
                       const std::vector<std::vector<std::string>>& refs, int max_n = 4,
                       BleuSmoothing smoothing = BleuSmoothing::kNone);

double sentence_bleu(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                     BleuSmoothing smoothing = BleuSmoothing::kExp);

struct BootstrapResult {
  double p_value = 1.0;
  double win_rate_a = 0.5;  // ties count half
  double bleu_a = 0.0;
  double bleu_b = 0.0;
  int wins_a = 0;
  int wins_b = 0;
  int ties = 0;
  int samples = 0;
};

// Paired bootstrap resampling: per resample, draw sentence indices with
// replacement and score both systems on the same draw. The p-value is the
// fraction of resamples where the overall lower-scoring system wins or ties.
// Resample r uses the deterministic stream derive_seed(seed, r).
BootstrapResult bootstrap_compare(const std::vector<std::vector<std::string>>& sys_a,
                                  const std::vector<std::vector<std::string>>& sys_b,
                                  const std::vector<std::vector<std::string>>& refs,
                                  int samples = 1000, uint64_t seed = 1);

std::vector<std::vector<std::string>> tokenize_lines(const std::vector<std::string>& lines);

}  // namespace ciphernmt
