#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ciphernmt/cipher.hpp"
#include "ciphernmt/data.hpp"
#include "ciphernmt/subword.hpp"

namespace ciphernmt {

// Direction tag surface form, e.g. <2en>, <2de1>.
std::string direction_tag(const std::string& lang);

// One training example in the multilingual (tagged) setting. The tag becomes
// the first source token when the example is materialized for the model.
struct TaggedExample {
  int tag_id = 0;
  std::vector<int> src;  // without the tag
  std::vector<int> tgt;
  int corpus_index = 0;
};

// Tokenized anchor/cipher views sharing targets index-for-index.
struct TokenizedViews {
  std::vector<std::vector<int>> anchor_src;
  std::vector<std::vector<std::vector<int>>> cipher_src;  // [key][index]
  std::vector<std::vector<int>> tgt;
  std::vector<int> keys;  // cipher key values, aligned with cipher_src

  size_t size() const { return anchor_src.size(); }
};

TokenizedViews tokenize_views(const ParallelCorpus& corpus,
                              const std::vector<AugmentedDataset>& ciphered,
                              const Tokenizer& tokenizer);

// Directions: {src->tgt} plus {ROT-k(src)->tgt for all k}; with pivot also
// {ROT-k(src)->src for all k}. (|K|+1)n examples, or (2|K|+1)n with pivot.
std::vector<TaggedExample> build_naive_dataset(const ParallelCorpus& corpus,
                                               const std::vector<AugmentedDataset>& ciphered,
                                               const Tokenizer& tokenizer, bool pivot);

// Tag names the naive dataset requires, in registration order:
// <2tgt>, and with pivot also <2src>.
std::vector<std::string> naive_tags(const std::string& src_lang, const std::string& tgt_lang,
                                    bool pivot);

struct BatchSentence {
  int corpus_index = 0;
  std::vector<int> anchor_src;
  std::vector<int> cipher_src;  // empty when the batch has no cipher view
  std::vector<int> tgt;
};

struct AnchoredBatch {
  int key = -1;  // cipher key value; -1 for anchor-only batches
  std::vector<BatchSentence> sentences;
};

// One epoch of anchored batches. Every (index, key) combination is visited
// exactly once per epoch; keys alternate round-robin across batches. The
// token budget counts the longer of the anchor/cipher source sides.
// With no keys the stream degrades to anchor-only batches, which is exactly
// what baseline training consumes.
std::vector<AnchoredBatch> build_anchored_batches(const TokenizedViews& views, int batch_tokens,
                                                  uint64_t shuffle_seed);

struct TaggedBatch {
  std::vector<TaggedExample> examples;
};

std::vector<TaggedBatch> build_tagged_batches(const std::vector<TaggedExample>& examples,
                                              int batch_tokens, uint64_t shuffle_seed);

}  // namespace ciphernmt
