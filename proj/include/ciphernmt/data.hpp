#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ciphernmt {

// Aligned sentence pairs, one sentence per line. Pairs where either side is
// empty after trimming are dropped on load (both files stay aligned).
struct ParallelCorpus {
  std::string src_lang;
  std::string tgt_lang;
  std::vector<std::pair<std::string, std::string>> pairs;

  size_t size() const { return pairs.size(); }
};

// One enciphered copy of a corpus: source lines ROT-k'd, targets shared with
// the anchor corpus index-for-index.
struct AugmentedDataset {
  int key = 0;
  std::vector<std::pair<std::string, std::string>> pairs;

  size_t size() const { return pairs.size(); }
};

ParallelCorpus load_parallel_corpus(const std::string& src_path, const std::string& tgt_path,
                                    const std::string& src_lang, const std::string& tgt_lang);

ParallelCorpus make_corpus(std::vector<std::pair<std::string, std::string>> pairs,
                           const std::string& src_lang = "src",
                           const std::string& tgt_lang = "tgt");

}  // namespace ciphernmt
