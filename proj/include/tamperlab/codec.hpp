#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tamperlab/raster.hpp"

namespace tamperlab {

using Bytes = std::vector<std::uint8_t>;

/// Decodes PNG (8/16-bit gray or RGB) or baseline JPEG into [0,1] intensities.
/// 8-bit v maps to v/255, 16-bit v to v/65535. Images with alpha are rejected.
Image decode_image(const Bytes& bytes);
Image load_image(const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const Bytes& bytes);

/// 8-bit PNG, round(v * 255) per channel.
Bytes encode_png8(const Image& img);
/// 16-bit single-channel PNG, round(v * 65535) with v clamped to [0,1].
Bytes encode_png16(const FloatMap& map);
/// 8-bit gray PNG: true -> 255, false -> 0.
Bytes encode_mask_png(const BinaryLabel& mask);

void save_image(const Image& img, const std::filesystem::path& path);
void save_mask(const BinaryLabel& mask, const std::filesystem::path& path);
void save_diff_map(const FloatMap& diff, const std::filesystem::path& path);

/// Re-reads a saved mask: first channel > 0.5.
BinaryLabel load_mask(const std::filesystem::path& path);

} // namespace tamperlab
