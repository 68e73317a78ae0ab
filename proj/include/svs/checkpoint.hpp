#pragma once

#include <filesystem>

#include "svs/network.hpp"

namespace svs {

// Binary checkpoint: magic "SVSN", u32 LE format version, length-prefixed
// key=value config block, then per parameter: u32 LE name length, name bytes,
// u32 LE rank, u32 LE dims, raw 32-bit LE values. Save/load round-trips are
// bit-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     const SvsNet<float>& net);
SvsNet<float> load_checkpoint(const std::filesystem::path& path);

std::string encode_config(const NetworkConfig& cfg);
NetworkConfig decode_config(const std::string& text);

}  // namespace svs
