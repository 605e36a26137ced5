#include "granulometer/io.hpp"

#include <png.h>

#include <csetjmp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace granulometer::io {
namespace {

constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

struct PnmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t payload_offset = 0;
};

// Netpbm header tokens are separated by whitespace; '#' comments run to end of line.
PnmHeader parse_pnm_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(ErrorCode::MalformedHeader, "missing P5 magic");
  }
  std::size_t pos = 2;
  auto next_int = [&](const char* what) -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) ++pos;
    if (start == pos || pos - start > 9) {
      throw Error(ErrorCode::MalformedHeader, std::string("bad ") + what);
    }
    long value = 0;
    for (std::size_t i = start; i < pos; ++i) value = value * 10 + (bytes[i] - '0');
    return value;
  };
  PnmHeader h;
  h.width = static_cast<int>(next_int("width"));
  h.height = static_cast<int>(next_int("height"));
  long maxval = next_int("maxval");
  if (h.width <= 0 || h.height <= 0) throw Error(ErrorCode::MalformedHeader, "non-positive dimensions");
  if (maxval <= 0 || maxval > 65535) throw Error(ErrorCode::MalformedHeader, "maxval out of range");
  h.maxval = static_cast<int>(maxval);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw Error(ErrorCode::MalformedHeader, "missing separator before payload");
  }
  h.payload_offset = pos + 1;
  return h;
}

Raster decode_pgm(std::span<const std::uint8_t> bytes) {
  PnmHeader h = parse_pnm_header(bytes);
  if (h.maxval != 255) throw Error(ErrorCode::UnsupportedDepth, "maxval must be 255");
  const std::size_t count = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  const std::size_t available = bytes.size() - h.payload_offset;
  if (available < count) throw Error(ErrorCode::TruncatedPayload, "payload shorter than width x height");
  if (available > count) throw Error(ErrorCode::MalformedHeader, "trailing bytes after payload");
  std::vector<std::uint8_t> samples(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload_offset), bytes.end());
  return Raster(h.width, h.height, std::move(samples));
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t len) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->pos + len > state->bytes.size()) png_error(png, "truncated");
  std::memcpy(out, state->bytes.data() + state->pos, len);
  state->pos += len;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_noop(png_structp) {}

struct PngErrorSink {
  char message[256] = {0};
};

void png_error_record(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof sink->message, "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

// The setjmp frames below hold only trivially destructible locals; all
// owning objects live in the callers.
bool png_read_header(png_structp png, png_infop info, png_uint_32* w, png_uint_32* h, int* depth, int* color) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_info(png, info);
  png_get_IHDR(png, info, w, h, depth, color, nullptr, nullptr, nullptr);
  return true;
}

bool png_read_rows(png_structp png, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  return true;
}

bool png_write_all(png_structp png, png_infop info, const Raster* raster) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster->width()), static_cast<png_uint_32>(raster->height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::uint8_t* base = raster->samples().data();
  for (int y = 0; y < raster->height(); ++y) {
    // libpng takes a non-const row pointer but does not modify it.
    png_write_row(png, const_cast<png_bytep>(base + raster->index(0, y)));
  }
  png_write_end(png, nullptr);
  return true;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  PngErrorSink sink;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_record, png_warning_ignore);
  if (png == nullptr) throw Error(ErrorCode::Io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadState state{bytes, 0};
  png_set_read_fn(png, &state, png_read_from_span);

  png_uint_32 w = 0, h = 0;
  int depth = 0, color = 0;
  if (!png_read_header(png, info, &w, &h, &depth, &color)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::MalformedHeader, std::string("png: ") + sink.message);
  }
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::UnsupportedDepth, "png must be 8-bit grayscale");
  }
  if (w > (1u << 24) || h > (1u << 24)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::MalformedHeader, "png dimensions too large");
  }

  std::vector<std::uint8_t> samples(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = samples.data() + static_cast<std::size_t>(y) * w;
  const bool ok = png_read_rows(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw Error(ErrorCode::TruncatedPayload, std::string("png: ") + sink.message);
  return Raster(static_cast<int>(w), static_cast<int>(h), std::move(samples));
}

Bytes encode_png(const Raster& raster) {
  Bytes out;
  PngErrorSink sink;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_record, png_warning_ignore);
  if (png == nullptr) throw Error(ErrorCode::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  const bool ok = png_write_all(png, info, &raster);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw Error(ErrorCode::Io, std::string("png: ") + sink.message);
  return out;
}

Bytes pnm_header(int width, int height, int maxval) {
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" + std::to_string(maxval) + "\n";
  return Bytes(header.begin(), header.end());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  // std::from_chars for double is available in libstdc++ 11.
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Raster decode_raster(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
    return decode_png(bytes);
  }
  return decode_pgm(bytes);
}

Bytes encode_raster(const Raster& raster, ImageFormat format) {
  if (raster.empty()) throw Error(ErrorCode::InvalidArgument, "cannot encode empty raster");
  if (format == ImageFormat::Png) return encode_png(raster);
  Bytes out = pnm_header(raster.width(), raster.height(), 255);
  auto samples = raster.samples();
  out.insert(out.end(), samples.begin(), samples.end());
  return out;
}

Bytes encode_label_map(const LabelMap& labels) {
  if (labels.empty()) throw Error(ErrorCode::InvalidArgument, "cannot encode empty label map");
  Bytes out = pnm_header(labels.width(), labels.height(), 65535);
  out.reserve(out.size() + labels.size() * 2);
  for (std::uint16_t v : labels.samples()) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

LabelMap decode_label_map(std::span<const std::uint8_t> bytes) {
  PnmHeader h = parse_pnm_header(bytes);
  if (h.maxval != 65535) throw Error(ErrorCode::UnsupportedDepth, "label map maxval must be 65535");
  const std::size_t count = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  const std::size_t available = bytes.size() - h.payload_offset;
  if (available < 2 * count) throw Error(ErrorCode::TruncatedPayload, "label payload too short");
  if (available > 2 * count) throw Error(ErrorCode::MalformedHeader, "trailing bytes after label payload");
  std::vector<std::uint16_t> samples(count);
  for (std::size_t i = 0; i < count; ++i) {
    samples[i] = static_cast<std::uint16_t>((bytes[h.payload_offset + 2 * i] << 8) | bytes[h.payload_offset + 2 * i + 1]);
  }
  return LabelMap(h.width, h.height, std::move(samples));
}

std::vector<TracedCircle> read_scale_annotation(std::string_view text) {
  std::vector<TracedCircle> circles;
  std::size_t line_no = 0;
  while (!text.empty()) {
    std::size_t eol = text.find('\n');
    std::string_view line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    TracedCircle c;
    double* targets[4] = {&c.cx_px, &c.cy_px, &c.radius_px, &c.diameter_mm};
    bool numeric = true;
    for (int i = 0; i < 4; ++i) numeric = numeric && parse_double(fields[static_cast<std::size_t>(i)], *targets[i]);
    if (!numeric) {
      if (circles.empty() && fields[0] == "cx_px") continue;  // header
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": non-numeric field");
    }
    if (c.radius_px <= 0.0) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": radius must be > 0");
    if (c.diameter_mm <= 0.0) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": diameter must be > 0");
    }
    circles.push_back(c);
  }
  if (circles.empty()) throw Error(ErrorCode::EmptyAnnotation, "no traced scale objects");
  return circles;
}

std::string write_scale_annotation(std::span<const TracedCircle> circles) {
  std::string out = "cx_px,cy_px,radius_px,diameter_mm\n";
  for (const auto& c : circles) {
    out += format_number(c.cx_px, 3) + "," + format_number(c.cy_px, 3) + "," + format_number(c.radius_px, 3) + "," +
           format_number(c.diameter_mm, 3) + "\n";
  }
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text_file(const std::filesystem::path& path) {
  Bytes bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Raster load_raster(const std::filesystem::path& path) { return decode_raster(read_file(path)); }

void save_raster(const std::filesystem::path& path, const Raster& raster) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  write_file(path, encode_raster(raster, ext == ".png" ? ImageFormat::Png : ImageFormat::Pgm));
}

std::string format_number(double value, int precision) {
  if (!std::isfinite(value)) return value > 0 ? "inf" : (value < 0 ? "-inf" : "nan");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  std::string s(buf);
  if (s == "-0" || (s.starts_with("-0.") && s.find_first_not_of("0.", 1) == std::string::npos)) s.erase(0, 1);
  return s;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    fields.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace granulometer::io
