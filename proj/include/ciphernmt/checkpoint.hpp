#pragma once

#include <string>
#include <vector>

#include "ciphernmt/model.hpp"

namespace ciphernmt {

// Versioned binary container: magic, format version, config echo, named
// 2-D tensors (float32 little-endian, row-major), trailing checksum.
struct Checkpoint {
  std::string config_text;  // ini echo of the run configuration
  ParamStore<float> params;
};

void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                     const std::string& config_text);

template <class T>
void save_checkpoint_as(const std::string& path, const ParamStore<T>& params,
                        const std::string& config_text) {
  save_checkpoint(path, params.template cast<float>(), config_text);
}

Checkpoint load_checkpoint(const std::string& path);

// Arithmetic mean per tensor over m checkpoints with identical shapes;
// config echo taken from the last one.
Checkpoint average_checkpoints(const std::vector<std::string>& paths);

}  // namespace ciphernmt
