#include "ciphernmt/subword.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ciphernmt/errors.hpp"
#include "ciphernmt/util/textio.hpp"
#include "ciphernmt/util/utf8.hpp"

namespace ciphernmt {

const std::string kDefaultMarker = "\xE2\x96\x81";  // U+2581

namespace {

const char* kSpecialTokens[Vocab::kNumSpecial] = {"<pad>", "<unk>", "<s>", "</s>"};

std::vector<std::string> word_symbols(const std::string& word, const std::string& marker) {
  const auto cps = utf8_decode(word);
  std::vector<std::string> syms;
  syms.reserve(cps.size());
  for (size_t i = 0; i < cps.size(); ++i) {
    std::string s = i == 0 ? marker : std::string();
    utf8_append(s, cps[i]);
    syms.push_back(std::move(s));
  }
  return syms;
}

// left-to-right, non-overlapping
void merge_in_word(std::vector<std::string>& syms, const std::string& left,
                   const std::string& right) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
      out.push_back(left + right);
      i += 2;
    } else {
      out.push_back(std::move(syms[i]));
      ++i;
    }
  }
  syms = std::move(out);
}

bool looks_like_tag(const std::string& tok) {
  return tok.size() > 3 && tok.rfind("<2", 0) == 0 && tok.back() == '>';
}

}  // namespace

int Vocab::id(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnk : it->second;
}

int64_t Vocab::freq(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? 0 : freqs[it->second];
}

int Vocab::tag_id(const std::string& tag) const {
  auto it = index.find(tag);
  if (it == index.end() || !is_tag(it->second))
    throw DataError("unregistered direction tag: " + tag);
  return it->second;
}

MergeTable learn_bpe(const std::vector<std::vector<std::string>>& corpora, int num_merges,
                     const std::string& marker) {
  if (num_merges < 0) throw DataError("num_merges must be >= 0");
  bool any = false;
  std::map<std::string, int64_t> word_counts;
  for (const auto& corpus : corpora) {
    for (const auto& line : corpus) {
      for (const auto& w : split_ws(line)) {
        ++word_counts[w];
        any = true;
      }
    }
  }
  if (!any) throw DataError("learn_bpe: all corpora are empty");

  struct Word {
    std::vector<std::string> syms;
    int64_t count;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [w, c] : word_counts) words.push_back({word_symbols(w, marker), c});

  struct PairEntry {
    int64_t count = 0;
    std::set<int> words;
  };
  // std::map iterates in lexicographic (left, right) order, which is the
  // tie-break rule: the first entry at max count is the smallest pair.
  std::map<std::pair<std::string, std::string>, PairEntry> stats;

  auto add_word_stats = [&](int wi, int64_t sign) {
    const Word& w = words[wi];
    for (size_t i = 0; i + 1 < w.syms.size(); ++i) {
      auto key = std::make_pair(w.syms[i], w.syms[i + 1]);
      auto& e = stats[key];
      e.count += sign * w.count;
      if (sign > 0) {
        e.words.insert(wi);
      }
    }
  };
  for (size_t wi = 0; wi < words.size(); ++wi) add_word_stats(static_cast<int>(wi), +1);

  MergeTable table;
  table.marker = marker;
  table.merges.reserve(static_cast<size_t>(num_merges));
  for (int m = 0; m < num_merges; ++m) {
    // prune empties, then pick max count (ties: lexicographically smallest)
    std::pair<std::string, std::string> best;
    int64_t best_count = 0;
    for (auto it = stats.begin(); it != stats.end();) {
      if (it->second.count <= 0) {
        it = stats.erase(it);
        continue;
      }
      if (it->second.count > best_count) {
        best_count = it->second.count;
        best = it->first;
      }
      ++it;
    }
    if (best_count < 2) break;

    const auto affected = stats[best].words;  // copy; rebuilding mutates stats
    for (int wi : affected) {
      add_word_stats(wi, -1);
      // stale word-sets are fine: rebuilds recompute pair membership below
      for (size_t i = 0; i + 1 < words[wi].syms.size(); ++i) {
        auto key = std::make_pair(words[wi].syms[i], words[wi].syms[i + 1]);
        auto it = stats.find(key);
        if (it != stats.end()) it->second.words.erase(wi);
      }
      merge_in_word(words[wi].syms, best.first, best.second);
      add_word_stats(wi, +1);
    }
    table.merges.push_back(best);
  }
  return table;
}

std::vector<std::string> apply_bpe_word(const std::string& word, const MergeTable& merges) {
  auto syms = word_symbols(word, merges.marker);
  if (syms.size() < 2) return syms;
  for (const auto& [left, right] : merges.merges) {
    if (syms.size() < 2) break;
    bool present = false;
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      if (syms[i] == left && syms[i + 1] == right) {
        present = true;
        break;
      }
    }
    if (present) merge_in_word(syms, left, right);
  }
  return syms;
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& corpora, const MergeTable& merges,
                  const std::vector<std::string>& tags) {
  std::unordered_map<std::string, std::vector<std::string>> cache;
  std::unordered_map<std::string, int64_t> counts;
  for (const auto& corpus : corpora) {
    for (const auto& line : corpus) {
      for (const auto& w : split_ws(line)) {
        auto it = cache.find(w);
        if (it == cache.end()) it = cache.emplace(w, apply_bpe_word(w, merges)).first;
        for (const auto& piece : it->second) ++counts[piece];
      }
    }
  }

  Vocab v;
  for (const char* s : kSpecialTokens) {
    v.tokens.emplace_back(s);
    v.freqs.push_back(0);
  }
  for (const auto& tag : tags) {
    v.tokens.push_back(tag);
    v.freqs.push_back(0);
  }
  v.num_tags = static_cast<int>(tags.size());

  std::vector<std::pair<std::string, int64_t>> learned(counts.begin(), counts.end());
  std::sort(learned.begin(), learned.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<std::string> reserved(v.tokens.begin(), v.tokens.end());
  for (auto& [tok, cnt] : learned) {
    if (reserved.count(tok)) continue;  // specials/tags never collide with learned subwords
    v.tokens.push_back(tok);
    v.freqs.push_back(cnt);
  }
  for (int i = 0; i < v.size(); ++i) v.index[v.tokens[i]] = i;
  return v;
}

Tokenizer::Tokenizer(MergeTable merges, Vocab vocab)
    : merges_(std::move(merges)), vocab_(std::move(vocab)) {}

std::vector<std::string> Tokenizer::segment_pieces(const std::string& sentence) const {
  std::vector<std::string> pieces;
  for (const auto& w : split_ws(sentence)) {
    auto it = cache_.find(w);
    if (it == cache_.end()) it = cache_.emplace(w, apply_bpe_word(w, merges_)).first;
    pieces.insert(pieces.end(), it->second.begin(), it->second.end());
  }
  return pieces;
}

Segmentation Tokenizer::segment(const std::string& sentence) const {
  Segmentation seg;
  seg.pieces = segment_pieces(sentence);
  seg.ids.reserve(seg.pieces.size());
  for (const auto& p : seg.pieces) {
    const int id = vocab_.id(p);
    if (id == Vocab::kUnk && p != vocab_.token(Vocab::kUnk)) seg.detokenizable = false;
    seg.ids.push_back(id);
  }
  return seg;
}

std::string Tokenizer::detokenize(const std::vector<std::string>& pieces) const {
  std::string joined;
  for (const auto& p : pieces) joined += p;
  std::string out;
  size_t i = 0;
  const std::string& m = merges_.marker;
  while (i < joined.size()) {
    if (joined.compare(i, m.size(), m) == 0) {
      out += ' ';
      i += m.size();
    } else {
      out += joined[i];
      ++i;
    }
  }
  if (!out.empty() && out.front() == ' ') out.erase(out.begin());
  return out;
}

VocabStats vocab_stats(const std::vector<std::pair<std::string, std::vector<std::string>>>& sides,
                       const MergeTable& merges) {
  VocabStats stats;
  std::unordered_map<std::string, std::vector<std::string>> cache;
  std::set<std::string> all_types;
  for (const auto& [name, lines] : sides) {
    SideStats side;
    side.name = name;
    std::set<std::string> types;
    for (const auto& line : lines) {
      for (const auto& w : split_ws(line)) {
        auto it = cache.find(w);
        if (it == cache.end()) it = cache.emplace(w, apply_bpe_word(w, merges)).first;
        for (const auto& piece : it->second) {
          types.insert(piece);
          ++stats.frequencies[piece];
          ++side.total_tokens;
        }
      }
    }
    all_types.insert(types.begin(), types.end());
    side.distinct_types = static_cast<int64_t>(types.size());
    stats.sides.push_back(std::move(side));
  }
  stats.union_types = static_cast<int64_t>(all_types.size());
  return stats;
}

void save_merges(const std::string& path, const MergeTable& merges) {
  std::vector<std::string> lines;
  lines.reserve(merges.merges.size());
  for (const auto& [l, r] : merges.merges) lines.push_back(l + " " + r);
  write_lines(path, lines);
}

MergeTable load_merges(const std::string& path, const std::string& marker) {
  MergeTable table;
  table.marker = marker;
  int lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    const size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size())
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 'left right'");
    table.merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return table;
}

void save_vocab(const std::string& path, const Vocab& vocab) {
  std::vector<std::string> lines;
  for (int i = Vocab::kNumSpecial; i < vocab.size(); ++i) {
    lines.push_back(vocab.tokens[i] + "\t" + std::to_string(vocab.freqs[i]));
  }
  write_lines(path, lines);
}

Vocab load_vocab(const std::string& path, int num_tags) {
  Vocab v;
  for (const char* s : kSpecialTokens) {
    v.tokens.emplace_back(s);
    v.freqs.push_back(0);
  }
  int lineno = 0;
  for (const auto& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected token<TAB>frequency");
    v.tokens.push_back(line.substr(0, tab));
    v.freqs.push_back(std::stoll(line.substr(tab + 1)));
  }
  if (num_tags < 0) {
    num_tags = 0;
    for (int i = Vocab::kNumSpecial; i < v.size() && looks_like_tag(v.tokens[i]); ++i) ++num_tags;
  }
  v.num_tags = num_tags;
  for (int i = 0; i < v.size(); ++i) v.index[v.tokens[i]] = i;
  return v;
}

}  // namespace ciphernmt
