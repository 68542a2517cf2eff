#include "ciphernmt/checkpoint.hpp"

#include <cstring>

#include "ciphernmt/errors.hpp"
#include "ciphernmt/util/textio.hpp"

namespace ciphernmt {

namespace {

constexpr char kMagic[8] = {'C', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

struct Reader {
  const std::string& buf;
  size_t at = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (at + n > buf.size()) throw DataError("checkpoint truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    at += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    at += 8;
    return v;
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(at, n);
    at += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                     const std::string& config_text) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put_u32(buf, kVersion);
  put_u64(buf, config_text.size());
  buf += config_text;
  put_u32(buf, static_cast<uint32_t>(params.names.size()));
  for (size_t i = 0; i < params.names.size(); ++i) {
    const auto& name = params.names[i];
    const auto& m = params.values[i];
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf += name;
    put_u32(buf, static_cast<uint32_t>(m.rows()));
    put_u32(buf, static_cast<uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f32(buf, m(r, c));
  }
  put_u64(buf, fnv1a64(buf.data(), buf.size()));
  write_file(path, buf);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < sizeof(kMagic) + 12 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file: " + path);
  const uint64_t stored = [&] {
    Reader tail(buf);
    tail.at = buf.size() - 8;
    return tail.u64();
  }();
  if (fnv1a64(buf.data(), buf.size() - 8) != stored)
    throw DataError("checkpoint checksum mismatch: " + path);

  Reader r(buf);
  r.at = sizeof(kMagic);
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config_text = r.bytes(r.u64());
  const uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = r.bytes(r.u32());
    const uint32_t rows = r.u32();
    const uint32_t cols = r.u32();
    const int idx = ckpt.params.add(name, static_cast<int>(rows), static_cast<int>(cols));
    auto& m = ckpt.params.values[idx];
    for (uint32_t rr = 0; rr < rows; ++rr)
      for (uint32_t cc = 0; cc < cols; ++cc) m(rr, cc) = r.f32();
  }
  return ckpt;
}

Checkpoint average_checkpoints(const std::vector<std::string>& paths) {
  if (paths.empty()) throw DataError("average_checkpoints: need at least one checkpoint");
  Checkpoint first = load_checkpoint(paths[0]);
  std::vector<MatX<double>> acc;
  acc.reserve(first.params.values.size());
  for (const auto& m : first.params.values) acc.push_back(m.cast<double>());
  std::string config_text = first.config_text;
  for (size_t p = 1; p < paths.size(); ++p) {
    Checkpoint c = load_checkpoint(paths[p]);
    if (c.params.names != first.params.names)
      throw DataError("checkpoint tensor names differ: " + paths[p]);
    for (size_t i = 0; i < acc.size(); ++i) {
      if (c.params.values[i].rows() != acc[i].rows() ||
          c.params.values[i].cols() != acc[i].cols())
        throw DataError("checkpoint tensor shape mismatch for " + first.params.names[i] +
                        " in " + paths[p]);
      acc[i] += c.params.values[i].cast<double>();
    }
    config_text = c.config_text;
  }
  Checkpoint out;
  out.config_text = config_text;
  const double inv = 1.0 / static_cast<double>(paths.size());
  for (size_t i = 0; i < acc.size(); ++i) {
    const auto& name = first.params.names[i];
    const int idx = out.params.add(name, static_cast<int>(acc[i].rows()),
                                   static_cast<int>(acc[i].cols()));
    out.params.values[idx] = (acc[i] * inv).cast<float>();
  }
  return out;
}

}  // namespace ciphernmt
