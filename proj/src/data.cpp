#include "ciphernmt/data.hpp"

#include "ciphernmt/errors.hpp"
#include "ciphernmt/util/textio.hpp"

namespace ciphernmt {

namespace {
bool blank(const std::string& s) {
  for (char c : s)
    if (c != ' ' && c != '\t' && c != '\r') return false;
  return true;
}
}  // namespace

ParallelCorpus load_parallel_corpus(const std::string& src_path, const std::string& tgt_path,
                                    const std::string& src_lang, const std::string& tgt_lang) {
  const auto src = read_lines(src_path);
  const auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size())
    throw DataError("parallel files differ in length: " + src_path + " has " +
                    std::to_string(src.size()) + " lines, " + tgt_path + " has " +
                    std::to_string(tgt.size()));
  ParallelCorpus c;
  c.src_lang = src_lang;
  c.tgt_lang = tgt_lang;
  c.pairs.reserve(src.size());
  for (size_t i = 0; i < src.size(); ++i) {
    if (blank(src[i]) || blank(tgt[i])) continue;
    c.pairs.emplace_back(src[i], tgt[i]);
  }
  return c;
}

ParallelCorpus make_corpus(std::vector<std::pair<std::string, std::string>> pairs,
                           const std::string& src_lang, const std::string& tgt_lang) {
  ParallelCorpus c;
  c.src_lang = src_lang;
  c.tgt_lang = tgt_lang;
  c.pairs = std::move(pairs);
  return c;
}

}  // namespace ciphernmt
