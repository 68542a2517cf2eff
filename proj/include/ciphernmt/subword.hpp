#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ciphernmt {

// Word-boundary marker prefixed to word-initial symbols. U+2581.
extern const std::string kDefaultMarker;

// Ordered BPE merges. Applying them in order to any pretokenized word is
// deterministic; ties during learning break lexicographically on (left,
// right) so builds are reproducible.
struct MergeTable {
  std::vector<std::pair<std::string, std::string>> merges;
  std::string marker = "\xE2\x96\x81";  // U+2581
};

// Joint symbol inventory. Special tokens and language tags occupy the lowest
// indices and never collide with learned subwords.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumSpecial = 4;

  std::vector<std::string> tokens;  // full list: specials, tags, learned
  std::vector<int64_t> freqs;       // aligned with tokens; 0 for specials/tags
  int num_tags = 0;

  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(tokens.size()); }
  // kUnk when the token is unknown
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens[id]; }
  int64_t freq(const std::string& token) const;
  bool is_tag(int id) const { return id >= kNumSpecial && id < kNumSpecial + num_tags; }
  int tag_id(const std::string& tag) const;  // throws DataError when unregistered
};

struct Segmentation {
  std::vector<int> ids;
  std::vector<std::string> pieces;
  bool detokenizable = true;  // false when any piece fell back to unk
};

// Greedy BPE over the concatenated word-frequency dictionary of all corpora:
// repeatedly merge the most frequent adjacent symbol pair, num_merges times
// or until no pair occurs at least twice.
MergeTable learn_bpe(const std::vector<std::vector<std::string>>& corpora, int num_merges,
                     const std::string& marker = kDefaultMarker);

// Splits a word into its initial symbols (marker + first codepoint, then one
// symbol per codepoint) and applies merges in learned order.
std::vector<std::string> apply_bpe_word(const std::string& word, const MergeTable& merges);

// Builds the vocabulary over segmented corpora: specials, then tags, then
// learned tokens ordered by (frequency desc, token asc).
Vocab build_vocab(const std::vector<std::vector<std::string>>& corpora, const MergeTable& merges,
                  const std::vector<std::string>& tags = {});

// Applies merges and maps pieces to vocab ids with caching; pure per sentence.
class Tokenizer {
 public:
  Tokenizer(MergeTable merges, Vocab vocab);

  Segmentation segment(const std::string& sentence) const;
  std::vector<std::string> segment_pieces(const std::string& sentence) const;
  // join pieces, strip markers: inverts segment for marker-free input
  std::string detokenize(const std::vector<std::string>& pieces) const;

  const MergeTable& merges() const { return merges_; }
  const Vocab& vocab() const { return vocab_; }

 private:
  MergeTable merges_;
  Vocab vocab_;
  mutable std::unordered_map<std::string, std::vector<std::string>> cache_;
};

struct SideStats {
  std::string name;
  int64_t distinct_types = 0;
  int64_t total_tokens = 0;
};

struct VocabStats {
  std::vector<SideStats> sides;
  int64_t union_types = 0;
  std::unordered_map<std::string, int64_t> frequencies;  // over all sides
};

VocabStats vocab_stats(const std::vector<std::pair<std::string, std::vector<std::string>>>& sides,
                       const MergeTable& merges);

// Merge-table file: one merge per line, "left<SPACE>right", ordered.
void save_merges(const std::string& path, const MergeTable& merges);
MergeTable load_merges(const std::string& path, const std::string& marker = kDefaultMarker);

// Vocab file: "token<TAB>frequency" per line; tags first, then learned
// tokens; index = line number + fixed special block size.
void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path, int num_tags = -1);

}  // namespace ciphernmt
