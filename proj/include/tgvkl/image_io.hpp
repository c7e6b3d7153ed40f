#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tgvkl/image.hpp"

namespace tgvkl {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};
class MalformedHeader : public FormatError {
 public:
  using FormatError::FormatError;
};
class UnsupportedBitDepth : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedPayload : public FormatError {
 public:
  using FormatError::FormatError;
};

enum class ImageFormat { PgmAscii, PgmBinary, PngGray, Csv };

inline ImageFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pgm") return ImageFormat::PgmBinary;
  if (ext == ".png") return ImageFormat::PngGray;
  if (ext == ".csv" || ext == ".txt") return ImageFormat::Csv;
  throw IoError("cannot infer image format from extension of " + path.string());
}

/// stored = (value - offset) * scale, rounded and clamped to [0, maxval].
struct PixelMapping {
  double offset = 0.0;
  double scale = 1.0;
  int maxval = 255;

  [[nodiscard]] double to_stored(double v) const { return (v - offset) * scale; }
  [[nodiscard]] double from_stored(double s) const { return s / scale + offset; }
};

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

class PgmCursor {
 public:
  explicit PgmCursor(std::string_view s) : s_(s) {}

  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::optional<long long> integer() {
    skip_space_and_comments();
    long long v = 0;
    const char* first = s_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), v);
    if (ec != std::errc() || ptr == first) return std::nullopt;
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }

  [[nodiscard]] bool at_end() {
    skip_space_and_comments();
    return pos_ >= s_.size();
  }

  std::size_t& pos() { return pos_; }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

inline Image parse_pgm(std::string_view bytes, const std::string& name, int* maxval_out = nullptr) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw MalformedHeader(name + ": missing P2/P5 magic");
  }
  const bool binary = bytes[1] == '5';
  PgmCursor cur(bytes.substr(2));
  const auto w = cur.integer();
  const auto h = cur.integer();
  const auto maxval = cur.integer();
  if (!w || !h || !maxval || *w <= 0 || *h <= 0) {
    throw MalformedHeader(name + ": bad width/height/maxval fields");
  }
  if (*maxval <= 0 || *maxval > 65535) {
    throw UnsupportedBitDepth(name + ": maxval " + std::to_string(*maxval) +
                              " outside 1..65535");
  }
  const auto rows = static_cast<std::size_t>(*h);
  const auto cols = static_cast<std::size_t>(*w);
  std::vector<double> px(rows * cols);
  if (binary) {
    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t p = cur.pos() + 2;
    if (p >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[p]))) {
      throw MalformedHeader(name + ": missing separator before raster");
    }
    ++p;
    const std::size_t bpp = *maxval > 255 ? 2 : 1;
    if (bytes.size() - p < px.size() * bpp) {
      throw TruncatedPayload(name + ": raster has " + std::to_string(bytes.size() - p) +
                             " bytes, expected " + std::to_string(px.size() * bpp));
    }
    for (std::size_t k = 0; k < px.size(); ++k) {
      const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + p + k * bpp);
      px[k] = bpp == 2 ? static_cast<double>((b[0] << 8) | b[1]) : static_cast<double>(b[0]);
    }
  } else {
    for (std::size_t k = 0; k < px.size(); ++k) {
      if (cur.at_end()) {
        throw TruncatedPayload(name + ": expected " + std::to_string(px.size()) +
                               " samples, got " + std::to_string(k));
      }
      const auto v = cur.integer();
      if (!v || *v < 0 || *v > *maxval) throw MalformedHeader(name + ": bad sample value");
      px[k] = static_cast<double>(*v);
    }
  }
  if (maxval_out != nullptr) *maxval_out = static_cast<int>(*maxval);
  return Image(rows, cols, std::move(px));
}

struct PngBuffers {
  std::vector<unsigned char> raster;
  std::vector<png_bytep> rows;
  int depth = 8;
};

struct PngErrorState {
  std::jmp_buf jump;
  char message[256] = {0};
};

extern "C" inline void png_error_to_jump(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof st->message, "%s", msg);
  std::longjmp(st->jump, 1);
}

extern "C" inline void png_silent_warning(png_structp, png_const_charp) {}

inline Image read_png(const std::filesystem::path& path, int* maxval_out = nullptr) {
  const std::string name = path.string();
  std::FILE* fp = std::fopen(name.c_str(), "rb");
  if (fp == nullptr) throw IoError("cannot open " + name);
  unsigned char sig[8] = {0};
  if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    std::fclose(fp);
    throw MalformedHeader(name + ": not a PNG file");
  }
  PngErrorState st;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, png_error_to_jump, png_silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(name + ": libpng initialization failed");
  }
  // Objects touched after setjmp returns are kept trivially destructible.
  volatile int phase = 0;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int depth = 0;
  int color = 0;
  auto* const buf = new PngBuffers();
  if (setjmp(st.jump) != 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    delete buf;
    if (phase == 0) throw MalformedHeader(name + ": " + st.message);
    throw TruncatedPayload(name + ": " + st.message);
  }
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    delete buf;
    if (color != PNG_COLOR_TYPE_GRAY) {
      throw FormatError(name + ": only grayscale PNG without alpha is supported");
    }
    throw UnsupportedBitDepth(name + ": PNG bit depth " + std::to_string(depth));
  }
  const std::size_t bpp = depth == 16 ? 2 : 1;
  const std::size_t stride = static_cast<std::size_t>(width) * bpp;
  buf->raster.resize(stride * height);
  buf->rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) buf->rows[r] = buf->raster.data() + r * stride;
  phase = 1;
  png_read_image(png, buf->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  Image img(height, width);
  for (std::size_t k = 0; k < img.size(); ++k) {
    const unsigned char* b = buf->raster.data() + k * bpp;
    img[k] = bpp == 2 ? static_cast<double>((b[0] << 8) | b[1]) : static_cast<double>(b[0]);
  }
  delete buf;
  if (maxval_out != nullptr) *maxval_out = bpp == 2 ? 65535 : 255;
  return img;
}

inline void write_png(const std::vector<std::uint16_t>& stored, Dims d, int maxval,
                      const std::filesystem::path& path) {
  const std::string name = path.string();
  std::FILE* fp = std::fopen(name.c_str(), "wb");
  if (fp == nullptr) throw IoError("cannot write " + name);
  PngErrorState st;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, png_error_to_jump, png_silent_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError(name + ": libpng initialization failed");
  }
  auto* const buf = new PngBuffers();
  buf->depth = maxval > 255 ? 16 : 8;
  buf->raster.resize(d.size() * (buf->depth / 8));
  buf->rows.resize(d.rows);
  if (setjmp(st.jump) != 0) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    delete buf;
    throw IoError(name + ": " + st.message);
  }
  const std::size_t bpp = buf->depth == 16 ? 2 : 1;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (bpp == 2) {
      buf->raster[2 * k] = static_cast<unsigned char>(stored[k] >> 8);
      buf->raster[2 * k + 1] = static_cast<unsigned char>(stored[k] & 0xFF);
    } else {
      buf->raster[k] = static_cast<unsigned char>(stored[k]);
    }
  }
  for (std::size_t r = 0; r < d.rows; ++r) buf->rows[r] = buf->raster.data() + r * d.cols * bpp;
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(d.cols), static_cast<png_uint_32>(d.rows),
               buf->depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, buf->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  const bool closed = std::fclose(fp) == 0;
  delete buf;
  if (!closed) throw IoError("write failed for " + name);
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

}  // namespace detail

/// Shortest decimal text that parses back to exactly v.
inline std::string format_double(double v) { return detail::format_double(v); }

inline Image read_csv(const std::filesystem::path& path) {
  const std::string text = detail::read_file_bytes(path);
  const std::string name = path.string();
  std::vector<double> px;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t p = 0;
    while (true) {
      std::size_t comma = line.find(',', p);
      std::string_view field = line.substr(p, comma == std::string_view::npos ? line.npos
                                                                              : comma - p);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw MalformedHeader(name + ": bad number on row " + std::to_string(rows + 1));
      }
      px.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      p = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw TruncatedPayload(name + ": row " + std::to_string(rows + 1) + " has " +
                             std::to_string(count) + " values, expected " +
                             std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw TruncatedPayload(name + ": empty CSV");
  return Image(rows, cols, std::move(px));
}

inline std::string csv_text(const Image& img) {
  std::string out;
  out.reserve(img.size() * 20);
  for (std::size_t i = 0; i < img.rows(); ++i) {
    for (std::size_t j = 0; j < img.cols(); ++j) {
      if (j > 0) out += ',';
      out += detail::format_double(img(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_csv(const Image& img, const std::filesystem::path& path) {
  detail::write_file_bytes(path, csv_text(img));
}

inline Image read_image(const std::filesystem::path& path, ImageFormat format) {
  switch (format) {
    case ImageFormat::PgmAscii:
    case ImageFormat::PgmBinary:
      return detail::parse_pgm(detail::read_file_bytes(path), path.string());
    case ImageFormat::PngGray:
      return detail::read_png(path);
    case ImageFormat::Csv:
      return read_csv(path);
  }
  throw IoError("unknown format");
}

inline Image read_image(const std::filesystem::path& path) {
  return read_image(path, format_from_path(path));
}

/// Pixels divided by the container maxval; CSV values are taken as they are.
inline Image read_unit_image(const std::filesystem::path& path) {
  const ImageFormat f = format_from_path(path);
  int maxval = 0;
  Image img = f == ImageFormat::Csv ? read_csv(path)
              : f == ImageFormat::PngGray
                  ? detail::read_png(path, &maxval)
                  : detail::parse_pgm(detail::read_file_bytes(path), path.string(), &maxval);
  if (maxval > 0) {
    for (double& v : img) v /= maxval;
  }
  return img;
}

/// Identity when every pixel is already an integer in [0, maxval];
/// otherwise the affine map sending [min, max] onto [0, maxval].
inline PixelMapping choose_mapping(const Image& img, int maxval) {
  if (maxval < 1 || maxval > 65535) throw std::invalid_argument("maxval outside 1..65535");
  double lo = img[0];
  double hi = img[0];
  bool integral = true;
  for (double v : img) {
    if (!std::isfinite(v)) throw std::invalid_argument("write_image: non-finite pixel");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    integral = integral && v == std::round(v);
  }
  if (integral && lo >= 0.0 && hi <= maxval) return {0.0, 1.0, maxval};
  if (hi == lo) return {lo, 1.0, maxval};
  return {lo, maxval / (hi - lo), maxval};
}

struct WriteOptions {
  int maxval = 255;
  std::optional<PixelMapping> mapping;
  bool sidecar = false;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".map");
}

inline PixelMapping read_mapping_sidecar(const std::filesystem::path& image_path) {
  const std::string text = detail::read_file_bytes(sidecar_path(image_path));
  PixelMapping m;
  std::istringstream in(text);
  std::string tok;
  int seen = 0;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "offset") {
      m.offset = std::stod(val);
      ++seen;
    } else if (key == "scale") {
      m.scale = std::stod(val);
      ++seen;
    } else if (key == "maxval") {
      m.maxval = std::stoi(val);
      ++seen;
    }
  }
  if (seen != 3) throw MalformedHeader("incomplete mapping sidecar for " + image_path.string());
  return m;
}

inline PixelMapping write_image(const Image& img, const std::filesystem::path& path,
                                ImageFormat format, const WriteOptions& opts = {}) {
  if (format == ImageFormat::Csv) {
    if (!all_finite(img)) throw std::invalid_argument("write_image: non-finite pixel");
    write_csv(img, path);
    return {};
  }
  const PixelMapping m = opts.mapping ? *opts.mapping : choose_mapping(img, opts.maxval);
  std::vector<std::uint16_t> stored(img.size());
  for (std::size_t k = 0; k < img.size(); ++k) {
    if (!std::isfinite(img[k])) throw std::invalid_argument("write_image: non-finite pixel");
    const double s = std::clamp(std::round(m.to_stored(img[k])), 0.0,
                                static_cast<double>(m.maxval));
    stored[k] = static_cast<std::uint16_t>(s);
  }
  if (format == ImageFormat::PngGray) {
    detail::write_png(stored, img.dims(), m.maxval, path);
  } else {
    std::string out = (format == ImageFormat::PgmAscii ? "P2\n" : "P5\n") +
                      std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n" +
                      std::to_string(m.maxval) + "\n";
    if (format == ImageFormat::PgmAscii) {
      for (std::size_t i = 0; i < img.rows(); ++i) {
        for (std::size_t j = 0; j < img.cols(); ++j) {
          if (j > 0) out += ' ';
          out += std::to_string(stored[flat_index(i, j, img.cols())]);
        }
        out += '\n';
      }
    } else {
      for (std::uint16_t s : stored) {
        if (m.maxval > 255) out += static_cast<char>(s >> 8);
        out += static_cast<char>(s & 0xFF);
      }
    }
    detail::write_file_bytes(path, out);
  }
  if (opts.sidecar) {
    detail::write_file_bytes(sidecar_path(path), "offset=" + detail::format_double(m.offset) +
                                                     " scale=" + detail::format_double(m.scale) +
                                                     " maxval=" + std::to_string(m.maxval) +
                                                     "\n");
  }
  return m;
}

inline PixelMapping write_image(const Image& img, const std::filesystem::path& path,
                                const WriteOptions& opts = {}) {
  return write_image(img, path, format_from_path(path), opts);
}

}  // namespace tgvkl
