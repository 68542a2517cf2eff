#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ciphernmt {

// Reads UTF-8 text, one sentence per line, LF endings (CR stripped if present).
std::vector<std::string> read_lines(const std::string& path);

// Writes lines with LF endings.
void write_lines(const std::string& path, const std::vector<std::string>& lines);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);
std::string fnv1a64_hex(const std::string& bytes);
std::string file_checksum(const std::string& path);

std::vector<std::string> split_ws(const std::string& line);
std::string join(const std::vector<std::string>& toks, const std::string& sep = " ");

}  // namespace ciphernmt
