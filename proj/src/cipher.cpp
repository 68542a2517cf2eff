#include "ciphernmt/cipher.hpp"

#include <set>

#include "ciphernmt/errors.hpp"
#include "ciphernmt/util/utf8.hpp"

namespace ciphernmt {

CipherSpec make_cipher_spec(Alphabet alphabet, const std::vector<int>& keys, bool rotate_upper) {
  CipherSpec spec;
  spec.rotate_upper = rotate_upper;
  const int n = static_cast<int>(alphabet.size());
  spec.alphabet = std::move(alphabet);
  std::set<int> seen;
  for (int k : keys) {
    if (k < 0) throw DataError("cipher key must be non-negative: " + std::to_string(k));
    const int eff = k % n;
    if (eff == 0) throw DataError("identity key (k mod |alphabet| == 0) not allowed in key set");
    if (!seen.insert(eff).second)
      throw DataError("duplicate key modulo alphabet size: " + std::to_string(k));
    spec.keys.push_back(CipherKey{k});
  }
  return spec;
}

std::string encipher_text(const std::string& text, CipherKey key, const Alphabet& alphabet,
                          bool rotate_upper) {
  const int n = static_cast<int>(alphabet.size());
  const int k = ((key.k % n) + n) % n;
  if (k == 0) return text;
  auto cps = utf8_decode(text);
  for (auto& cp : cps) {
    auto it = alphabet.lower_index.find(cp);
    if (it != alphabet.lower_index.end()) {
      cp = alphabet.lower[(it->second + k) % n];
      continue;
    }
    if (rotate_upper && !alphabet.upper.empty()) {
      auto ui = alphabet.upper_index.find(cp);
      if (ui != alphabet.upper_index.end()) cp = alphabet.upper[(ui->second + k) % n];
    }
  }
  return utf8_encode(cps);
}

std::string decipher_text(const std::string& text, CipherKey key, const Alphabet& alphabet,
                          bool rotate_upper) {
  const int n = static_cast<int>(alphabet.size());
  const int k = ((key.k % n) + n) % n;
  return encipher_text(text, CipherKey{n - k}, alphabet, rotate_upper);
}

std::string encipher_codepoint_block(const std::string& text, CipherKey key, char32_t block_start,
                                     uint32_t block_size) {
  if (block_size < 2) throw DataError("codepoint block size must be >= 2");
  const uint32_t k = static_cast<uint32_t>(key.k) % block_size;
  auto cps = utf8_decode(text);
  for (auto& cp : cps) {
    if (cp >= block_start && cp < block_start + block_size) {
      cp = block_start + (cp - block_start + k) % block_size;
    }
  }
  return utf8_encode(cps);
}

std::vector<AugmentedDataset> encipher_corpus(const ParallelCorpus& corpus,
                                              const CipherSpec& spec) {
  if (corpus.pairs.empty()) throw DataError("cannot encipher an empty corpus");
  std::vector<AugmentedDataset> out;
  out.reserve(spec.keys.size());
  for (const CipherKey key : spec.keys) {
    AugmentedDataset d;
    d.key = key.k;
    d.pairs.reserve(corpus.size());
    for (const auto& [src, tgt] : corpus.pairs) {
      d.pairs.emplace_back(encipher_text(src, key, spec.alphabet, spec.rotate_upper), tgt);
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::string cipher_lang_code(const std::string& lang, int key) {
  return lang + std::to_string(key);
}

}  // namespace ciphernmt
