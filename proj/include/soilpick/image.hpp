#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace soilpick {

struct Rgb {
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;

  float& operator[](int c) { return c == 0 ? r : (c == 1 ? g : b); }
  float operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major 2D raster. Pixel (u, v) is column u, row v.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("Image: negative size");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int u, int v) { return data_[index(u, v)]; }
  const T& operator()(int u, int v) const { return data_[index(u, v)]; }

  /// Edge-replicating access.
  const T& clamped(int u, int v) const {
    return (*this)(std::clamp(u, 0, width_ - 1), std::clamp(v, 0, height_ - 1));
  }

  bool contains(int u, int v) const noexcept {
    return u >= 0 && v >= 0 && u < width_ && v < height_;
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int u, int v) const noexcept {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RgbImage = Image<Rgb>;
/// Binary mask, values in {0, 1}.
using Mask = Image<std::uint8_t>;
/// Per-pixel depth in meters; NaN marks a pixel with no sensor return.
using DepthImage = Image<double>;

inline std::size_t count_ones(const Mask& m) {
  return static_cast<std::size_t>(std::count(m.pixels().begin(), m.pixels().end(), 1));
}

namespace detail {

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline void read_netpbm_header(std::istream& in, const std::string& magic, int& w, int& h) {
  std::string m;
  in >> m;
  if (m != magic) throw std::runtime_error("expected " + magic + " image, got '" + m + "'");
  int maxval = 0;
  auto next_int = [&in]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      in >> std::ws;
    }
    int x = 0;
    if (!(in >> x)) throw std::runtime_error("malformed netpbm header");
    return x;
  };
  w = next_int();
  h = next_int();
  maxval = next_int();
  if (maxval != 255) throw std::runtime_error("only 8-bit netpbm images are supported");
  if (w <= 0 || h <= 0) throw std::runtime_error("netpbm image has zero size");
  in.get();  // single whitespace before raster
}

}  // namespace detail

/// Binary PPM (P6), 8 bits per channel.
inline void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * 3);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const Rgb& p = img(u, v);
      row[3 * u] = detail::to_byte(p.r);
      row[3 * u + 1] = detail::to_byte(p.g);
      row[3 * u + 2] = detail::to_byte(p.b);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

inline RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  int w = 0, h = 0;
  detail::read_netpbm_header(in, "P6", w, h);
  RgbImage img(w, h);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
  for (int v = 0; v < h; ++v) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
      throw std::runtime_error("truncated PPM " + path.string());
    for (int u = 0; u < w; ++u)
      img(u, v) = Rgb{row[3 * u] / 255.0f, row[3 * u + 1] / 255.0f, row[3 * u + 2] / 255.0f};
  }
  return img;
}

/// Binary PGM (P5). Mask pixels are written as 0 / 255.
inline void write_pgm(const std::filesystem::path& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  for (auto p : mask.pixels()) out.put(static_cast<char>(p ? 255 : 0));
}

/// Reads a PGM and thresholds it at 128 into a binary mask.
inline Mask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  int w = 0, h = 0;
  detail::read_netpbm_header(in, "P5", w, h);
  Mask mask(w, h);
  std::vector<std::uint8_t> raw(mask.size());
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw std::runtime_error("truncated PGM " + path.string());
  for (std::size_t i = 0; i < raw.size(); ++i) mask.pixels()[i] = raw[i] >= 128 ? 1 : 0;
  return mask;
}

}  // namespace soilpick
