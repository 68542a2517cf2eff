#include "ciphernmt/corpus.hpp"

#include <algorithm>

#include "ciphernmt/errors.hpp"
#include "ciphernmt/util/rng.hpp"

namespace ciphernmt {

std::string direction_tag(const std::string& lang) { return "<2" + lang + ">"; }

namespace {

void check_alignment(const ParallelCorpus& corpus, const std::vector<AugmentedDataset>& ciphered) {
  for (const auto& d : ciphered) {
    if (d.size() != corpus.size())
      throw DataError("augmented dataset for key " + std::to_string(d.key) + " has " +
                      std::to_string(d.size()) + " pairs, anchor has " +
                      std::to_string(corpus.size()));
    for (size_t i = 0; i < d.size(); ++i) {
      if (d.pairs[i].second != corpus.pairs[i].second)
        throw DataError("target mismatch at line " + std::to_string(i + 1) + " for key " +
                        std::to_string(d.key));
    }
  }
}

// shuffle, then sort small windows by target length so batches pack tightly
// without making length globally monotone over the epoch
std::vector<int> batch_order(size_t n, const std::vector<std::vector<int>>& tgt, uint64_t seed) {
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  rng.shuffle(idx);
  constexpr size_t kWindow = 64;
  for (size_t w = 0; w < n; w += kWindow) {
    const size_t end = std::min(n, w + kWindow);
    std::stable_sort(idx.begin() + w, idx.begin() + end,
                     [&](int a, int b) { return tgt[a].size() < tgt[b].size(); });
  }
  return idx;
}

}  // namespace

TokenizedViews tokenize_views(const ParallelCorpus& corpus,
                              const std::vector<AugmentedDataset>& ciphered,
                              const Tokenizer& tokenizer) {
  check_alignment(corpus, ciphered);
  TokenizedViews v;
  v.anchor_src.reserve(corpus.size());
  v.tgt.reserve(corpus.size());
  for (const auto& [src, tgt] : corpus.pairs) {
    v.anchor_src.push_back(tokenizer.segment(src).ids);
    v.tgt.push_back(tokenizer.segment(tgt).ids);
  }
  for (const auto& d : ciphered) {
    std::vector<std::vector<int>> side;
    side.reserve(d.size());
    for (const auto& [src, tgt] : d.pairs) side.push_back(tokenizer.segment(src).ids);
    v.cipher_src.push_back(std::move(side));
    v.keys.push_back(d.key);
  }
  return v;
}

std::vector<std::string> naive_tags(const std::string& src_lang, const std::string& tgt_lang,
                                    bool pivot) {
  std::vector<std::string> tags{direction_tag(tgt_lang)};
  if (pivot) tags.push_back(direction_tag(src_lang));
  return tags;
}

std::vector<TaggedExample> build_naive_dataset(const ParallelCorpus& corpus,
                                               const std::vector<AugmentedDataset>& ciphered,
                                               const Tokenizer& tokenizer, bool pivot) {
  check_alignment(corpus, ciphered);
  const int tgt_tag = tokenizer.vocab().tag_id(direction_tag(corpus.tgt_lang));
  const int src_tag = pivot ? tokenizer.vocab().tag_id(direction_tag(corpus.src_lang)) : -1;

  std::vector<TaggedExample> out;
  out.reserve(corpus.size() * (ciphered.size() * (pivot ? 2 : 1) + 1));
  for (size_t i = 0; i < corpus.size(); ++i) {
    TaggedExample e;
    e.tag_id = tgt_tag;
    e.corpus_index = static_cast<int>(i);
    e.src = tokenizer.segment(corpus.pairs[i].first).ids;
    e.tgt = tokenizer.segment(corpus.pairs[i].second).ids;
    out.push_back(std::move(e));
  }
  for (const auto& d : ciphered) {
    for (size_t i = 0; i < d.size(); ++i) {
      TaggedExample e;
      e.tag_id = tgt_tag;
      e.corpus_index = static_cast<int>(i);
      e.src = tokenizer.segment(d.pairs[i].first).ids;
      e.tgt = tokenizer.segment(d.pairs[i].second).ids;
      out.push_back(std::move(e));
    }
  }
  if (pivot) {
    for (const auto& d : ciphered) {
      for (size_t i = 0; i < d.size(); ++i) {
        TaggedExample e;
        e.tag_id = src_tag;
        e.corpus_index = static_cast<int>(i);
        e.src = tokenizer.segment(d.pairs[i].first).ids;
        e.tgt = tokenizer.segment(corpus.pairs[i].first).ids;
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

std::vector<AnchoredBatch> build_anchored_batches(const TokenizedViews& views, int batch_tokens,
                                                  uint64_t shuffle_seed) {
  if (batch_tokens < 1) throw DataError("batch_tokens must be positive");
  const size_t n = views.size();
  const size_t streams = views.keys.empty() ? 1 : views.keys.size();

  std::vector<std::vector<AnchoredBatch>> per_key(streams);
  for (size_t s = 0; s < streams; ++s) {
    const bool has_cipher = !views.keys.empty();
    const auto order = batch_order(n, views.tgt, derive_seed(shuffle_seed, s));
    AnchoredBatch batch;
    batch.key = has_cipher ? views.keys[s] : -1;
    long budget_used = 0;
    for (int idx : order) {
      const auto& anchor = views.anchor_src[idx];
      const size_t cipher_len = has_cipher ? views.cipher_src[s][idx].size() : 0;
      const long cost = static_cast<long>(std::max(anchor.size(), cipher_len));
      if (cost > batch_tokens)
        throw DataError("batch_tokens=" + std::to_string(batch_tokens) +
                        " is smaller than the longest sentence (" + std::to_string(cost) +
                        " tokens)");
      if (budget_used + cost > batch_tokens && !batch.sentences.empty()) {
        per_key[s].push_back(std::move(batch));
        batch = AnchoredBatch{};
        batch.key = has_cipher ? views.keys[s] : -1;
        budget_used = 0;
      }
      BatchSentence sent;
      sent.corpus_index = idx;
      sent.anchor_src = anchor;
      if (has_cipher) sent.cipher_src = views.cipher_src[s][idx];
      sent.tgt = views.tgt[idx];
      batch.sentences.push_back(std::move(sent));
      budget_used += cost;
    }
    if (!batch.sentences.empty()) per_key[s].push_back(std::move(batch));
    Rng rng(derive_seed(shuffle_seed, 1000 + s));
    rng.shuffle(per_key[s]);
  }

  // round-robin over keys at the batch level
  std::vector<AnchoredBatch> out;
  size_t remaining = 0;
  for (const auto& v : per_key) remaining += v.size();
  out.reserve(remaining);
  for (size_t i = 0; remaining > 0; ++i) {
    for (size_t s = 0; s < streams; ++s) {
      if (i < per_key[s].size()) {
        out.push_back(std::move(per_key[s][i]));
        --remaining;
      }
    }
  }
  return out;
}

std::vector<TaggedBatch> build_tagged_batches(const std::vector<TaggedExample>& examples,
                                              int batch_tokens, uint64_t shuffle_seed) {
  if (batch_tokens < 1) throw DataError("batch_tokens must be positive");
  std::vector<int> idx(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(derive_seed(shuffle_seed, 0));
  rng.shuffle(idx);
  constexpr size_t kWindow = 64;
  for (size_t w = 0; w < idx.size(); w += kWindow) {
    const size_t end = std::min(idx.size(), w + kWindow);
    std::stable_sort(idx.begin() + w, idx.begin() + end, [&](int a, int b) {
      return examples[a].tgt.size() < examples[b].tgt.size();
    });
  }

  std::vector<TaggedBatch> out;
  TaggedBatch batch;
  long budget_used = 0;
  for (int i : idx) {
    const auto& e = examples[i];
    const long cost = static_cast<long>(std::max(e.src.size() + 1, e.tgt.size()));
    if (cost > batch_tokens)
      throw DataError("batch_tokens=" + std::to_string(batch_tokens) +
                      " is smaller than the longest sentence (" + std::to_string(cost) +
                      " tokens)");
    if (budget_used + cost > batch_tokens && !batch.examples.empty()) {
      out.push_back(std::move(batch));
      batch = TaggedBatch{};
      budget_used = 0;
    }
    batch.examples.push_back(e);
    budget_used += cost;
  }
  if (!batch.examples.empty()) out.push_back(std::move(batch));
  Rng rng2(derive_seed(shuffle_seed, 1));
  rng2.shuffle(out);
  return out;
}

}  // namespace ciphernmt
