#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "granulometer/raster.hpp"

namespace granulometer::io {

enum class ImageFormat { Pgm, Png };

using Bytes = std::vector<std::uint8_t>;

/// Decodes a binary PGM (P5, maxval 255) or an 8-bit grayscale PNG; the
/// format is sniffed from the magic bytes. Trailing bytes after the PGM
/// payload are rejected.
Raster decode_raster(std::span<const std::uint8_t> bytes);

/// Canonical encoding: PGM header is exactly "P5\n<w> <h>\n255\n".
Bytes encode_raster(const Raster& raster, ImageFormat format);

/// 16-bit P5 (maxval 65535, big-endian samples) for label maps.
Bytes encode_label_map(const LabelMap& labels);
LabelMap decode_label_map(std::span<const std::uint8_t> bytes);

struct TracedCircle {
  double cx_px = 0.0;
  double cy_px = 0.0;
  double radius_px = 0.0;
  double diameter_mm = 0.0;
};

/// Parses `cx_px,cy_px,radius_px,diameter_mm` records. Blank lines and
/// lines starting with '#' are skipped; a header line naming the columns
/// is accepted.
std::vector<TracedCircle> read_scale_annotation(std::string_view text);
std::string write_scale_annotation(std::span<const TracedCircle> circles);

Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

Raster load_raster(const std::filesystem::path& path);
void save_raster(const std::filesystem::path& path, const Raster& raster);

/// Fixed-notation number formatting used by every CSV/JSON writer so that
/// outputs are byte-stable.
std::string format_number(double value, int precision = 6);

/// Splits one CSV line on commas and trims surrounding whitespace.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace granulometer::io
