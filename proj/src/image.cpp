#include "fibertrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "fibertrack/common.hpp"

namespace fibertrack {

Image quantize(const FloatImage& src) {
  Image out(src.width, src.height);
  for (std::size_t i = 0; i < src.px.size(); ++i) {
    const double v = std::lround(src.px[i]);
    out.pixels()[i] = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

FloatImage to_float(const Image& src) {
  FloatImage out(src.width(), src.height());
  for (std::size_t i = 0; i < src.size(); ++i) out.px[i] = src.pixels()[i];
  return out;
}

double bilinear_sample(const Image& img, double x, double y) {
  const int w = img.width();
  const int h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(x), w - 2 >= 0 ? w - 2 : 0);
  const int y0 = std::min(static_cast<int>(y), h - 2 >= 0 ? h - 2 : 0);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = img.at(x0, y0);
  const double v10 = img.at(x1, y0);
  const double v01 = img.at(x0, y1);
  const double v11 = img.at(x1, y1);
  return v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy) + v01 * (1 - fx) * fy + v11 * fx * fy;
}

FloatImage gaussian_blur(const FloatImage& src, double sigma) {
  if (sigma <= 0.0) return src;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  const int w = src.width;
  const int h = src.height;
  FloatImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += kernel[i + radius] * src.at(xx, y);
      }
      tmp.at(x, y) = acc;
    }
  }
  FloatImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += kernel[i + radius] * tmp.at(x, yy);
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

int connected_components(const Image& mask, std::vector<int>& labels_out) {
  const int w = mask.width();
  const int h = mask.height();
  labels_out.assign(static_cast<std::size_t>(w) * h, -1);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(x, y) == 0 || labels_out[static_cast<std::size_t>(y) * w + x] >= 0) continue;
      const int id = next++;
      stack.clear();
      stack.emplace_back(x, y);
      labels_out[static_cast<std::size_t>(y) * w + x] = id;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = cx + dx;
            const int ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            auto& lab = labels_out[static_cast<std::size_t>(ny) * w + nx];
            if (mask.at(nx, ny) != 0 && lab < 0) {
              lab = id;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
    }
  }
  return next;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()),
            static_cast<std::streamsize>(img.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError("not a binary PGM: " + path.string());
  auto next_token = [&in, &path]() {
    std::string tok;
    for (;;) {
      if (!(in >> tok)) throw DataError("truncated PGM header: " + path.string());
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
  };
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval != 255) throw DataError("unsupported PGM: " + path.string());
  in.get();  // single whitespace after header
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels().data()), static_cast<std::streamsize>(img.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.size()))
    throw DataError("truncated PGM data: " + path.string());
  return img;
}

RgbImage to_rgb(const Image& gray) {
  RgbImage out(gray.width(), gray.height());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    out.px[i * 3 + 0] = gray.pixels()[i];
    out.px[i * 3 + 1] = gray.pixels()[i];
    out.px[i * 3 + 2] = gray.pixels()[i];
  }
  return out;
}

void draw_box(RgbImage& img, double x1, double y1, double x2, double y2,
              uint8_t r, uint8_t g, uint8_t b) {
  const int ix1 = std::clamp(static_cast<int>(std::lround(x1)), 0, img.width - 1);
  const int iy1 = std::clamp(static_cast<int>(std::lround(y1)), 0, img.height - 1);
  const int ix2 = std::clamp(static_cast<int>(std::lround(x2)), 0, img.width - 1);
  const int iy2 = std::clamp(static_cast<int>(std::lround(y2)), 0, img.height - 1);
  for (int x = ix1; x <= ix2; ++x) {
    img.set(x, iy1, r, g, b);
    img.set(x, iy2, r, g, b);
  }
  for (int y = iy1; y <= iy2; ++y) {
    img.set(ix1, y, r, g, b);
    img.set(ix2, y, r, g, b);
  }
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.px.data()),
            static_cast<std::streamsize>(img.px.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace fibertrack
