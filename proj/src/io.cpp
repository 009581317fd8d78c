#include "oodbench/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace oodbench::io {

namespace {

static_assert(sizeof(float) == 4, "float must be 32-bit");

std::uint32_t to_le32(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for reading: " + path.string());
  return f;
}

}  // namespace

void write_f32_blob(const std::vector<double>& values, const std::filesystem::path& path) {
  std::ofstream f = open_out(path);
  std::vector<std::uint32_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = static_cast<float>(values[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    buf[i] = to_le32(bits);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (!f) throw DataError("short write: " + path.string());
}

std::vector<double> read_f32_blob(const std::filesystem::path& path) {
  std::ifstream f = open_in(path);
  f.seekg(0, std::ios::end);
  const std::streamoff bytes = f.tellg();
  f.seekg(0, std::ios::beg);
  if (bytes < 0 || bytes % 4 != 0)
    throw DataError("float32 blob size is not a multiple of 4: " + path.string());
  std::vector<std::uint32_t> buf(static_cast<std::size_t>(bytes / 4));
  f.read(reinterpret_cast<char*>(buf.data()), bytes);
  if (!f) throw DataError("short read: " + path.string());
  std::vector<double> out(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const std::uint32_t bits = to_le32(buf[i]);
    float v;
    std::memcpy(&v, &bits, 4);
    out[i] = static_cast<double>(v);
  }
  return out;
}

void save_image_f32(const Image2D& im, const std::filesystem::path& stem) {
  std::filesystem::path raw = stem;
  raw += ".f32";
  write_f32_blob(im.data, raw);
  ordered_json side;
  side["width"] = im.width;
  side["height"] = im.height;
  std::filesystem::path meta = stem;
  meta += ".json";
  write_json_file(side, meta);
}

Image2D load_image_f32(const std::filesystem::path& path) {
  std::filesystem::path stem = path;
  if (stem.extension() == ".f32") stem.replace_extension();
  std::filesystem::path raw = stem;
  raw += ".f32";
  std::filesystem::path meta = stem;
  meta += ".json";
  const ordered_json side = read_json_file(meta);
  if (!side.contains("width") || !side.contains("height"))
    throw DataError("sidecar missing width/height: " + meta.string());
  const int w = side.at("width").get<int>();
  const int h = side.at("height").get<int>();
  std::vector<double> values = read_f32_blob(raw);
  if (w <= 0 || h <= 0 || values.size() != static_cast<std::size_t>(w) * h)
    throw DataError("pixel count does not match sidecar dimensions: " + raw.string());
  Image2D im(w, h);
  im.data = std::move(values);
  return im;
}

void save_pgm16(const Image2D& im, const std::filesystem::path& path) {
  std::ofstream f = open_out(path);
  f << "P5\n" << im.width << " " << im.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(im.width) * 2);
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) {
      const double v = std::clamp(im.at(x, y), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      row[2 * x] = static_cast<unsigned char>(q >> 8);
      row[2 * x + 1] = static_cast<unsigned char>(q & 0xFF);
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw DataError("short write: " + path.string());
}

namespace {

int next_pnm_token(std::istream& in, const std::filesystem::path& path) {
  // Skips whitespace and '#' comment lines, then reads one integer.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) throw DataError("malformed PGM header: " + path.string());
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  in.unget();
  return value;
}

}  // namespace

Image2D load_pgm(const std::filesystem::path& path) {
  std::ifstream f = open_in(path);
  char magic[2] = {0, 0};
  f.read(magic, 2);
  if (!f || magic[0] != 'P' || magic[1] != '5')
    throw DataError("not a binary PGM (P5) file: " + path.string());
  const int w = next_pnm_token(f, path);
  const int h = next_pnm_token(f, path);
  const int maxval = next_pnm_token(f, path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw DataError("unsupported PGM geometry: " + path.string());
  f.get();  // single whitespace byte before the raster
  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raster(static_cast<std::size_t>(w) * h * bytes_per_sample);
  f.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!f) throw DataError("truncated PGM raster: " + path.string());
  Image2D im(w, h);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    int v;
    if (bytes_per_sample == 2) {
      v = (raster[2 * i] << 8) | raster[2 * i + 1];
    } else {
      v = raster[i];
    }
    im.data[i] = static_cast<double>(v) / maxval;
  }
  return im;
}

void write_json_file(const ordered_json& j, const std::filesystem::path& path) {
  std::ofstream f = open_out(path);
  f << j.dump(2) << "\n";
  if (!f) throw DataError("short write: " + path.string());
}

ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream f = open_in(path);
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_text_file(const std::string& text, const std::filesystem::path& path) {
  std::ofstream f = open_out(path);
  f << text;
  if (!f) throw DataError("short write: " + path.string());
}

}  // namespace oodbench::io
