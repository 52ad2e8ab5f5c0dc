#pragma once

#include <string>
#include <utility>

#include "rtn/net.hpp"

namespace rtn {

// Checkpoint layout (bit-exact): magic "RTNC", u32 LE version = 1,
// u64 LE header length, UTF-8 JSON header {cfg fields, ordered tensor
// table of (name, shape)}, then each tensor's raw little-endian float32
// values in table order, no padding.
void save_checkpoint(const ModelParams<float>& params, const RtnConfig& cfg,
                     const std::string& path);

std::pair<ModelParams<float>, RtnConfig> load_checkpoint(const std::string& path);

}  // namespace rtn
