#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdsr/sdsr.hpp"

namespace sdsr {

/// Container layout, all integers little-endian:
///   "SDSR" | u32 format_version | u64 n | n bytes UTF-8 JSON config |
///   for each level j: low_j, high_j | mapping
/// where each matrix is u64 rows | u64 cols | rows·cols f64, row-major.
std::vector<std::uint8_t> serialize_model(const SdsrModel& model);

/// Rejects bad magic, unknown versions and truncation with a FormatError
/// naming the byte offset, and validates the dimension chain.
SdsrModel deserialize_model(std::span<const std::uint8_t> bytes);

void write_model(const SdsrModel& model, const std::filesystem::path& path);
SdsrModel read_model(const std::filesystem::path& path);

std::string config_to_json(const SdsrConfig& cfg);
SdsrConfig config_from_json(std::string_view json);

}  // namespace sdsr
