#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lpknn {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

// Row-major color image with channels in [0,1] (8-bit values divided by 255).
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  RgbImage() = default;
  RgbImage(int w, int h);

  [[nodiscard]] std::size_t size() const { return pixels.size(); }
  [[nodiscard]] const Rgb& at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  Rgb& at(int row, int col) {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }

  // Interleaved 8-bit RGB, row-major.
  static RgbImage from_rgb8(int w, int h, std::span<const std::uint8_t> rgb);
  [[nodiscard]] std::vector<std::uint8_t> to_rgb8() const;
};

// Single-channel 8-bit image (trimaps, ground truth, output masks).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);

  [[nodiscard]] std::size_t size() const { return pixels.size(); }
  [[nodiscard]] std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  std::uint8_t& at(int row, int col) {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
};

// 8-bit interleaved raster as it comes off a decoder.
struct Raster8 {
  int width = 0;
  int height = 0;
  int channels = 3;  // 1 or 3
  std::vector<std::uint8_t> data;
};

struct Dimensions {
  int width = 0;
  int height = 0;
};

// Decoders sniff the format from the leading bytes: PNG, BMP and JPEG.
// Every decode path yields 3-channel RGB; gray sources are replicated.
Raster8 decode_raster(std::span<const std::uint8_t> bytes);
Dimensions probe_dimensions(std::span<const std::uint8_t> bytes);

RgbImage decode_rgb(std::span<const std::uint8_t> bytes);
// Gray sources decode exactly; color sources with r==g==b take that value,
// otherwise Rec.601 luma rounded to nearest.
GrayImage decode_gray(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
RgbImage read_rgb(const std::filesystem::path& path);
GrayImage read_gray(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const GrayImage& image);
std::vector<std::uint8_t> encode_png(const Raster8& raster);
std::vector<std::uint8_t> encode_bmp(const GrayImage& image);
std::vector<std::uint8_t> encode_bmp(const Raster8& raster);

// Format chosen by extension (.png or .bmp).
void write_gray(const std::filesystem::path& path, const GrayImage& image);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace lpknn
