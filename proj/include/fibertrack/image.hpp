#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fibertrack {

// 8-bit grayscale raster. Binary masks use the same type with values {0, 255}.
class Image {
 public:
  Image() = default;
  Image(int width, int height, uint8_t fill = 0)
      : width_(width), height_(height), px_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return px_.empty(); }
  std::size_t size() const { return px_.size(); }

  uint8_t& at(int x, int y) { return px_[static_cast<std::size_t>(y) * width_ + x]; }
  uint8_t at(int x, int y) const { return px_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<uint8_t>& pixels() const { return px_; }
  std::vector<uint8_t>& pixels() { return px_; }

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<uint8_t> px_;
};

// Double-precision working buffer for rendering and filtering.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<double> px;

  FloatImage() = default;
  FloatImage(int w, int h, double fill = 0.0)
      : width(w), height(h), px(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return px[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return px[static_cast<std::size_t>(y) * width + x]; }
};

Image quantize(const FloatImage& src);
FloatImage to_float(const Image& src);

// Samples with bilinear interpolation; coordinates outside the image clamp to
// the border pixel.
double bilinear_sample(const Image& img, double x, double y);

// Separable Gaussian blur, kernel truncated at 3 sigma.
FloatImage gaussian_blur(const FloatImage& src, double sigma);

// 8-connected components of the nonzero pixels. Returns per-pixel component
// ids (-1 for background) and the component count. Ids are assigned in
// raster-scan order, so labeling is deterministic.
int connected_components(const Image& mask, std::vector<int>& labels_out);

// Binary PGM (P5) with a fixed header layout so identical images serialize to
// identical bytes.
void write_pgm(const std::filesystem::path& path, const Image& img);
Image read_pgm(const std::filesystem::path& path);

// 24-bit binary PPM (P6) for overlay rendering.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> px;  // interleaved rgb

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), px(static_cast<std::size_t>(w) * h * 3, 0) {}
  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    auto* p = &px[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
};

RgbImage to_rgb(const Image& gray);
void draw_box(RgbImage& img, double x1, double y1, double x2, double y2,
              uint8_t r, uint8_t g, uint8_t b);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

}  // namespace fibertrack
