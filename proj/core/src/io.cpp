#include "tstereo/io.hpp"

#include <png.h>

#include <Eigen/SVD>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "tstereo/error.hpp"

namespace tstereo {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

fs::path temp_sibling(const fs::path& path) { return fs::path(path.string() + ".tmp"); }

void commit_temp(const fs::path& tmp, const fs::path& path) {
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

std::uint32_t byteswap32(std::uint32_t x) {
  return (x >> 24) | ((x >> 8) & 0xFF00u) | ((x << 8) & 0xFF0000u) | (x << 24);
}

void put_f32_le(std::string& out, float value) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
  char buf[4];
  std::memcpy(buf, &bits, 4);
  out.append(buf, 4);
}

void put_u32_le(std::string& out, std::uint32_t value) {
  if constexpr (std::endian::native == std::endian::big) value = byteswap32(value);
  char buf[4];
  std::memcpy(buf, &value, 4);
  out.append(buf, 4);
}

std::uint32_t get_u32(const char* p, bool little) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if ((std::endian::native == std::endian::little) != little) bits = byteswap32(bits);
  return bits;
}

float get_f32(const char* p, bool little) { return std::bit_cast<float>(get_u32(p, little)); }

std::string at_byte(std::size_t offset) { return "byte " + std::to_string(offset); }
std::string at_line(int line) { return "line " + std::to_string(line); }

// Netpbm-style header tokenizer: whitespace separated, '#' comments to end of line.
class HeaderReader {
 public:
  HeaderReader(const std::string& data, const fs::path& path) : data_(data), path_(path.string()) {}

  std::string token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) fail(start, "unexpected end of header");
    return data_.substr(start, pos_ - start);
  }

  long integer(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    const std::string tok = token();
    long value = 0;
    const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || end != tok.data() + tok.size()) fail(start, std::string("invalid ") + what);
    return value;
  }

  double real(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    const std::string tok = token();
    double value = 0.0;
    const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || end != tok.data() + tok.size() || !std::isfinite(value))
      fail(start, std::string("invalid ") + what);
    return value;
  }

  // Exactly one whitespace byte separates the header from the payload.
  std::size_t end_of_header() {
    if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_])))
      fail(pos_, "missing whitespace after header");
    return pos_ + 1;
  }

  std::size_t position() const noexcept { return pos_; }

  [[noreturn]] void fail(std::size_t offset, const std::string& what) const {
    throw ParseError(path_, at_byte(offset), what);
  }

 private:
  void skip_space() {
    while (pos_ < data_.size()) {
      if (data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(data_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

constexpr long kMaxDimension = 1 << 16;

// ---- libpng (classic API). setjmp frames hold only trivially destructible state.

struct PngErrorBuffer {
  char message[256] = "libpng error";
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<PngErrorBuffer*>(png_get_error_ptr(png));
  std::snprintf(buf->message, sizeof(buf->message), "%s", msg);
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

struct PngInfo {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int channels = 0;
};

// Reads the header and sets up transforms. Returns false on error.
bool png_read_header(png_structp png, png_infop info, std::FILE* file, PngInfo* out) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, file);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_bit_depth(png, info) == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  out->channels = png_get_channels(png, info);
  return true;
}

bool png_read_rows(png_structp png, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  return true;
}

struct RawPng {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int channels = 0;
  std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

RawPng read_png_raw(const fs::path& path) {
  std::FILE* file = std::fopen(path.string().c_str(), "rb");
  if (!file) throw IoError("cannot open " + path.string());
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, file) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    std::fclose(file);
    throw ParseError(path.string(), at_byte(0), "not a PNG file");
  }
  PngErrorBuffer err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(file);
    throw IoError("libpng initialization failed");
  }
  png_set_sig_bytes(png, 8);
  PngInfo header;
  bool ok = png_read_header(png, info, file, &header);
  RawPng out;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (ok) {
    if (header.width > kMaxDimension || header.height > kMaxDimension) {
      std::snprintf(err.message, sizeof(err.message), "image too large");
      ok = false;
    } else {
      const std::size_t row_bytes = png_get_rowbytes(png, info);
      buffer.resize(row_bytes * header.height);
      rows.resize(header.height);
      for (png_uint_32 y = 0; y < header.height; ++y) rows[y] = buffer.data() + y * row_bytes;
      ok = png_read_rows(png, rows.data());
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(file);
  if (!ok) throw ParseError(path.string(), "png", err.message);

  out.width = static_cast<int>(header.width);
  out.height = static_cast<int>(header.height);
  out.bit_depth = header.bit_depth;
  out.channels = header.channels;
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    std::memcpy(out.samples.data(), buffer.data(), n * 2);
  } else {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

bool png_write_all(png_structp png, png_infop info, std::FILE* file, png_uint_32 width, png_uint_32 height,
                   png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, file);
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (std::endian::native == std::endian::little) png_set_swap(png);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

void write_png16_gray(const fs::path& path, int width, int height, const std::vector<std::uint16_t>& samples) {
  const fs::path tmp = temp_sibling(path);
  std::FILE* file = std::fopen(tmp.string().c_str(), "wb");
  if (!file) throw IoError("cannot open " + tmp.string() + " for writing");
  PngErrorBuffer err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler, png_warning_handler);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  bool ok = png && info;
  if (ok) {
    std::vector<std::uint16_t> copy = samples;  // libpng's swap transform works in place
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
      rows[y] = reinterpret_cast<png_bytep>(copy.data() + static_cast<std::size_t>(y) * width);
    ok = png_write_all(png, info, file, width, height, rows.data());
  }
  png_destroy_write_struct(&png, &info);
  const bool closed = std::fclose(file) == 0;
  if (!ok || !closed) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw IoError("failed to write " + path.string() + ": " + err.message);
  }
  commit_temp(tmp, path);
}

// ---- PGM

struct RawPgm {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};

RawPgm read_pgm_raw(const fs::path& path) {
  const std::string data = read_file(path);
  HeaderReader header(data, path);
  if (header.token() != "P5") header.fail(0, "expected binary PGM magic 'P5'");
  RawPgm out;
  const long w = header.integer("width");
  const long h = header.integer("height");
  const long maxval = header.integer("maxval");
  if (w < 1 || h < 1 || w > kMaxDimension || h > kMaxDimension) header.fail(3, "invalid dimensions");
  if (maxval < 1 || maxval > 65535) header.fail(header.position(), "maxval must lie in [1, 65535]");
  const std::size_t start = header.end_of_header();
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() != start + n * bytes_per)
    header.fail(std::min(data.size(), start + n * bytes_per),
                "payload size " + std::to_string(data.size() - start) + " does not match " +
                    std::to_string(n * bytes_per));
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.maxval = static_cast<int>(maxval);
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + start + i * bytes_per);
    out.samples[i] = bytes_per == 2 ? static_cast<std::uint16_t>((p[0] << 8) | p[1]) : p[0];
  }
  return out;
}

// ---- text helpers

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size() && std::isfinite(out);
}

// Shortest text that parses back to the same double.
std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed to write " + tmp.string());
  }
  commit_temp(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed to read " + path.string());
  return std::move(ss).str();
}

void write_pfm(const fs::path& path, const Image<double>& map) {
  if (map.empty()) throw ConfigError("write_pfm: empty map");
  std::string out = "Pf\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n-1.0\n";
  out.reserve(out.size() + map.size() * 4);
  for (int v = map.height() - 1; v >= 0; --v)
    for (int u = 0; u < map.width(); ++u) put_f32_le(out, static_cast<float>(map(u, v)));
  write_file_atomic(path, out);
}

Image<double> read_pfm(const fs::path& path) {
  const std::string data = read_file(path);
  HeaderReader header(data, path);
  const std::string magic = header.token();
  if (magic == "PF") header.fail(0, "color PFM ('PF') is not supported");
  if (magic != "Pf") header.fail(0, "expected PFM magic 'Pf'");
  const long w = header.integer("width");
  const long h = header.integer("height");
  if (w < 1 || h < 1 || w > kMaxDimension || h > kMaxDimension) header.fail(3, "invalid dimensions");
  const std::size_t scale_at = header.position();
  const double scale = header.real("scale");
  if (scale == 0.0) header.fail(scale_at, "scale must be non-zero");
  const bool little = scale < 0.0;
  const std::size_t start = header.end_of_header();
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() != start + 4 * n)
    header.fail(std::min(data.size(), start + 4 * n),
                "payload holds " + std::to_string(data.size() - start) + " bytes, expected " + std::to_string(4 * n));
  Image<double> map(static_cast<int>(w), static_cast<int>(h));
  const char* p = data.data() + start;
  for (int v = map.height() - 1; v >= 0; --v)
    for (int u = 0; u < map.width(); ++u, p += 4) map(u, v) = get_f32(p, little);
  return map;
}

void write_disp_png16(const fs::path& path, const DisparityMap& disparity, const Mask& valid) {
  if (!disparity.same_shape(valid)) throw ConfigError("write_disp_png16: mask shape mismatch");
  if (disparity.empty()) throw ConfigError("write_disp_png16: empty map");
  std::vector<std::uint16_t> samples(disparity.size(), 0);
  for (int v = 0; v < disparity.height(); ++v)
    for (int u = 0; u < disparity.width(); ++u) {
      if (!valid(u, v)) continue;
      const double d = disparity(u, v);
      if (!(d >= 0.0 && d < 256.0))
        throw DomainError("write_disp_png16: disparity " + std::to_string(d) + " outside [0, 256)");
      samples[static_cast<std::size_t>(v) * disparity.width() + u] =
          static_cast<std::uint16_t>(std::min(std::lround(d * 256.0), 65535L));
    }
  write_png16_gray(path, disparity.width(), disparity.height(), samples);
}

SemiDenseDisparity read_disp_png16(const fs::path& path) {
  const RawPng raw = read_png_raw(path);
  if (raw.bit_depth != 16 || raw.channels != 1)
    throw ParseError(path.string(), "png", "disparity PNG must be 16-bit single channel (got " +
                                               std::to_string(raw.bit_depth) + "-bit, " +
                                               std::to_string(raw.channels) + " channel(s))");
  SemiDenseDisparity out{DisparityMap(raw.width, raw.height, 0.0), Mask(raw.width, raw.height, 0)};
  for (int v = 0; v < raw.height; ++v)
    for (int u = 0; u < raw.width; ++u) {
      const std::uint16_t s = raw.samples[static_cast<std::size_t>(v) * raw.width + u];
      if (s == 0) continue;
      out.values(u, v) = s / 256.0;
      out.valid(u, v) = 1;
    }
  return out;
}

void write_image_png16(const fs::path& path, const GrayImage& image) {
  if (image.empty()) throw ConfigError("write_image_png16: empty image");
  std::vector<std::uint16_t> samples(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(image.pixels()[i], 0.0, 1.0) * 65535.0));
  write_png16_gray(path, image.width(), image.height(), samples);
}

GrayImage read_image(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path.string());
  char magic[2] = {};
  probe.read(magic, 2);
  probe.close();
  if (magic[0] == 'P' && magic[1] == '5') {
    const RawPgm raw = read_pgm_raw(path);
    GrayImage out(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.samples.size(); ++i)
      out.pixels()[i] = static_cast<double>(raw.samples[i]) / raw.maxval;
    return out;
  }
  const RawPng raw = read_png_raw(path);
  if (raw.channels != 1 && raw.channels != 3)
    throw ParseError(path.string(), "png", "unsupported channel count " + std::to_string(raw.channels));
  const double maxval = raw.bit_depth == 16 ? 65535.0 : 255.0;
  GrayImage out(raw.width, raw.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint16_t* s = raw.samples.data() + i * raw.channels;
    const double value = raw.channels == 1 ? s[0] : 0.299 * s[0] + 0.587 * s[1] + 0.114 * s[2];
    out.pixels()[i] = value / maxval;
  }
  return out;
}

void write_mask_pgm(const fs::path& path, const Mask& mask) {
  if (mask.empty()) throw ConfigError("write_mask_pgm: empty mask");
  std::string out = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  for (std::uint8_t m : mask.pixels()) out.push_back(static_cast<char>(m ? 255 : 0));
  write_file_atomic(path, out);
}

Mask read_mask_pgm(const fs::path& path) {
  const RawPgm raw = read_pgm_raw(path);
  Mask out(raw.width, raw.height, 0);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) out.pixels()[i] = raw.samples[i] != 0 ? 1 : 0;
  return out;
}

std::vector<StampedPose> read_poses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<StampedPose> out;
  std::string line;
  int line_no = 0;
  std::size_t expected_tokens = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto tokens = split_ws(body);
    const auto fail = [&](const std::string& what) { throw ParseError(path.string(), at_line(line_no), what); };
    if (tokens.size() != 8 && tokens.size() != 12)
      fail("expected 8 (TUM) or 12 (KITTI) values, found " + std::to_string(tokens.size()));
    if (expected_tokens == 0) expected_tokens = tokens.size();
    if (tokens.size() != expected_tokens) fail("pose format changes within the file");
    std::vector<double> x(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
      if (!parse_double(tokens[i], x[i])) fail("invalid number '" + tokens[i] + "'");
    try {
      if (tokens.size() == 8) {
        if (Eigen::Vector4d(x[4], x[5], x[6], x[7]).norm() < 1e-12) fail("zero quaternion");
        out.push_back({x[0], Pose::from_quaternion({x[1], x[2], x[3]}, x[4], x[5], x[6], x[7])});
      } else {
        Eigen::Matrix3d r;
        r << x[0], x[1], x[2], x[4], x[5], x[6], x[8], x[9], x[10];
        const Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix3d projected = svd.matrixU() * svd.matrixV().transpose();
        if ((projected - r).cwiseAbs().maxCoeff() > 1e-3 || projected.determinant() < 0.0)
          fail("rotation block is not a rotation matrix");
        out.push_back({static_cast<double>(out.size()), Pose(projected, {x[3], x[7], x[11]})});
      }
    } catch (const ConfigError& e) {
      fail(e.what());
    }
  }
  if (in.bad()) throw IoError("failed to read " + path.string());
  return out;
}

void write_poses_tum(const fs::path& path, const std::vector<StampedPose>& poses) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& p : poses) {
    const Eigen::Quaterniond q = p.pose.quaternion();
    const Eigen::Vector3d& t = p.pose.translation();
    for (double x : {p.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z()}) out += format_double(x) + " ";
    out += format_double(q.w()) + "\n";
  }
  write_file_atomic(path, out);
}

CameraModel read_camera(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<std::string, double> values;
  std::string line;
  int line_no = 0;
  static const char* const kKeys[] = {"fx", "fy", "cx", "cy", "baseline", "width", "height"};
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), at_line(line_no), "expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys))
      throw ParseError(path.string(), at_line(line_no),
                       "unknown key '" + key + "' (accepted: fx, fy, cx, cy, baseline, width, height)");
    double x = 0.0;
    if (!parse_double(value, x)) throw ParseError(path.string(), at_line(line_no), "invalid number '" + value + "'");
    values[key] = x;
  }
  for (const char* key : kKeys)
    if (!values.count(key)) throw ParseError(path.string(), "end", std::string("missing key '") + key + "'");
  for (const char* key : {"width", "height"})
    if (values[key] != std::floor(values[key]) || values[key] > kMaxDimension)
      throw ParseError(path.string(), "end", std::string(key) + " must be an integer");
  CameraModel cam{values["fx"], values["fy"], values["cx"], values["cy"], values["baseline"],
                  static_cast<int>(values["width"]), static_cast<int>(values["height"])};
  try {
    cam.validate();
  } catch (const ConfigError& e) {
    throw ParseError(path.string(), "end", e.what());
  }
  return cam;
}

void write_camera(const fs::path& path, const CameraModel& cam) {
  std::string out;
  out += "fx = " + format_double(cam.fx) + "\n";
  out += "fy = " + format_double(cam.fy) + "\n";
  out += "cx = " + format_double(cam.cx) + "\n";
  out += "cy = " + format_double(cam.cy) + "\n";
  out += "baseline = " + format_double(cam.baseline) + "\n";
  out += "width = " + std::to_string(cam.width) + "\n";
  out += "height = " + std::to_string(cam.height) + "\n";
  write_file_atomic(path, out);
}

void write_fusion_weights(const fs::path& path, const FusionWeights& weights) {
  weights.validate();
  std::string out = "TCSW";
  put_u32_le(out, 1);
  put_u32_le(out, static_cast<std::uint32_t>(weights.feature_count));
  for (const auto* block : {&weights.w_z, &weights.w_r, &weights.w_q, &weights.b_z, &weights.b_r, &weights.b_q})
    for (double x : *block) put_f32_le(out, static_cast<float>(x));
  write_file_atomic(path, out);
}

FusionWeights read_fusion_weights(const fs::path& path) {
  const std::string data = read_file(path);
  const auto fail = [&](std::size_t offset, const std::string& what) {
    throw ParseError(path.string(), at_byte(offset), what);
  };
  if (data.size() < 12 || data.compare(0, 4, "TCSW") != 0) fail(0, "missing 'TCSW' magic");
  const std::uint32_t version = get_u32(data.data() + 4, true);
  if (version != 1) fail(4, "unsupported version " + std::to_string(version));
  const std::uint32_t f = get_u32(data.data() + 8, true);
  if (f < 1 || f > 4096) fail(8, "invalid feature count " + std::to_string(f));
  const std::size_t expected = 12 + 4 * (3 * std::size_t{f} * 2 * f + 3 * std::size_t{f});
  if (data.size() != expected)
    fail(std::min(data.size(), expected),
         "file holds " + std::to_string(data.size()) + " bytes, expected " + std::to_string(expected));
  FusionWeights w = FusionWeights::zeros(static_cast<int>(f));
  const char* p = data.data() + 12;
  for (auto* block : {&w.w_z, &w.w_r, &w.w_q, &w.b_z, &w.b_r, &w.b_q})
    for (double& x : *block) {
      x = get_f32(p, true);
      if (!std::isfinite(x)) fail(static_cast<std::size_t>(p - data.data()), "non-finite weight");
      p += 4;
    }
  return w;
}

std::string frame_stem(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

}  // namespace tstereo
