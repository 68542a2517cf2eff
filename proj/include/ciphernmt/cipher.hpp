#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ciphernmt/alphabet.hpp"
#include "ciphernmt/data.hpp"

namespace ciphernmt {

struct CipherKey {
  int k = 0;  // non-negative; effective rotation is k mod |alphabet|
};

// Distinct, nonzero-mod keys over one alphabet.
struct CipherSpec {
  Alphabet alphabet;
  std::vector<CipherKey> keys;
  bool rotate_upper = true;
};

CipherSpec make_cipher_spec(Alphabet alphabet, const std::vector<int>& keys,
                            bool rotate_upper = true);

// Rotates alphabet letters by k mod |alphabet|; everything else (whitespace,
// digits, punctuation, characters outside the alphabet) passes through
// unchanged. Total on any input; character count is preserved.
std::string encipher_text(const std::string& text, CipherKey key, const Alphabet& alphabet,
                          bool rotate_upper = true);

std::string decipher_text(const std::string& text, CipherKey key, const Alphabet& alphabet,
                          bool rotate_upper = true);

// Codepoint-block variant for non-alphabetic scripts: codepoints c with
// block_start <= c < block_start+block_size rotate within the block.
std::string encipher_codepoint_block(const std::string& text, CipherKey key, char32_t block_start,
                                     uint32_t block_size);

// One dataset per key: source lines enciphered, target lines unchanged,
// line order preserved, |D_k| == |D|.
std::vector<AugmentedDataset> encipher_corpus(const ParallelCorpus& corpus,
                                              const CipherSpec& spec);

// Cipher "language" code for key k applied to a language, e.g. de + 1 -> de1.
std::string cipher_lang_code(const std::string& lang, int key);

}  // namespace ciphernmt
