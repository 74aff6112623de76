#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "vgent/selector/model.hpp"

namespace vgent::selector {

inline constexpr char kCheckpointMagic[8] = {'V', 'G', 'E', 'N', 'T', 'S', 'E', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian): magic, u32 version, u32 length + config JSON,
// u32 blob count, then per blob u32 name length, name, u32 rows, u32 cols,
// rows*cols f64 in column-major order; trailing u64 FNV-1a of all prior bytes.
// The frozen encoder is not stored; it is rebuilt from the config's seed.
std::string serialize_checkpoint(const SelectorModel<double>& model);
SelectorModel<double> deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const SelectorModel<double>& model);
SelectorModel<double> load_checkpoint(const std::filesystem::path& path);

// The trailing checksum of the serialized form.
std::uint64_t checkpoint_checksum(const SelectorModel<double>& model);

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace vgent::selector
