#include "lpknn/image.hpp"

#include <algorithm>
#include <array>
#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <jpeglib.h>
#include <png.h>

#include "lpknn/error.hpp"

namespace lpknn {

RgbImage::RgbImage(int w, int h)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h) {}

RgbImage RgbImage::from_rgb8(int w, int h, std::span<const std::uint8_t> rgb) {
  if (w < 1 || h < 1) throw DimensionError("image must be at least 1x1");
  if (rgb.size() != static_cast<std::size_t>(w) * h * 3) {
    throw DimensionError("rgb buffer size does not match " + std::to_string(w) +
                         "x" + std::to_string(h));
  }
  RgbImage img(w, h);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = {rgb[3 * i] / 255.0, rgb[3 * i + 1] / 255.0,
                     rgb[3 * i + 2] / 255.0};
  }
  return img;
}

std::vector<std::uint8_t> RgbImage::to_rgb8() const {
  std::vector<std::uint8_t> out(pixels.size() * 3);
  auto q = [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    out[3 * i] = q(pixels[i].r);
    out[3 * i + 1] = q(pixels[i].g);
    out[3 * i + 2] = q(pixels[i].b);
  }
  return out;
}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

namespace {

enum class Format { kPng, kBmp, kJpeg, kUnknown };

Format sniff(std::span<const std::uint8_t> b) {
  if (b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0) return Format::kPng;
  if (b.size() >= 2 && b[0] == 'B' && b[1] == 'M') return Format::kBmp;
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) {
    return Format::kJpeg;
  }
  return Format::kUnknown;
}

// ---- PNG ------------------------------------------------------------------

Raster8 decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + msg);
  }
  image.format = PNG_FORMAT_RGB;
  Raster8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = 3;
  out.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + msg);
  }
  return out;
}

Dimensions probe_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + msg);
  }
  Dimensions d{static_cast<int>(image.width), static_cast<int>(image.height)};
  png_image_free(&image);
  return d;
}

// ---- JPEG -----------------------------------------------------------------

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Plain-C shaped so nothing with a destructor lives across setjmp.
bool jpeg_decode_into(const std::uint8_t* data, std::size_t size, Raster8* out,
                      char* message, bool header_only) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    std::strncpy(message, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  out->width = static_cast<int>(cinfo.image_width);
  out->height = static_cast<int>(cinfo.image_height);
  out->channels = 3;
  if (header_only) {
    jpeg_destroy_decompress(&cinfo);
    return true;
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const std::size_t stride = static_cast<std::size_t>(cinfo.output_width) * 3;
  out->data.resize(stride * cinfo.output_height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out->data.data() + stride * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

Raster8 decode_jpeg(std::span<const std::uint8_t> bytes, bool header_only) {
  Raster8 out;
  char message[JMSG_LENGTH_MAX] = {0};
  if (!jpeg_decode_into(bytes.data(), bytes.size(), &out, message, header_only)) {
    throw DecodeError(std::string("jpeg: ") + message);
  }
  return out;
}

// ---- BMP ------------------------------------------------------------------

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    return bytes_[at] | (bytes_[at + 1] << 8) | (bytes_[at + 2] << 16) |
           (static_cast<std::uint32_t>(bytes_[at + 3]) << 24);
  }
  std::int32_t i32(std::size_t at) const {
    return static_cast<std::int32_t>(u32(at));
  }
  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return static_cast<std::uint16_t>(bytes_[at] | (bytes_[at + 1] << 8));
  }
  std::uint8_t u8(std::size_t at) const {
    need(at, 1);
    return bytes_[at];
  }
  void need(std::size_t at, std::size_t n) const {
    if (at + n > bytes_.size()) throw DecodeError("bmp: truncated file");
  }

 private:
  std::span<const std::uint8_t> bytes_;
};

struct BmpHeader {
  int width = 0;
  int height = 0;
  bool top_down = false;
  int bpp = 0;
  std::uint32_t compression = 0;
  std::uint32_t data_offset = 0;
  std::uint32_t dib_size = 0;
  std::uint32_t colors_used = 0;
  std::uint32_t masks[3] = {0, 0, 0};
};

constexpr std::uint32_t kBiRgb = 0;
constexpr std::uint32_t kBiRle8 = 1;
constexpr std::uint32_t kBiBitfields = 3;

BmpHeader parse_bmp_header(const ByteReader& rd) {
  BmpHeader h;
  h.data_offset = rd.u32(10);
  h.dib_size = rd.u32(14);
  if (h.dib_size == 12) {
    h.width = rd.u16(18);
    h.height = rd.u16(20);
    h.bpp = rd.u16(24);
  } else if (h.dib_size >= 40) {
    h.width = rd.i32(18);
    std::int32_t height = rd.i32(22);
    h.top_down = height < 0;
    h.height = height < 0 ? -height : height;
    h.bpp = rd.u16(28);
    h.compression = rd.u32(30);
    h.colors_used = rd.u32(46);
    if (h.compression == kBiBitfields) {
      // Masks follow a 40-byte header, or live inside larger headers.
      for (int i = 0; i < 3; ++i) h.masks[i] = rd.u32(54 + 4 * i);
    }
  } else {
    throw DecodeError("bmp: unsupported header size " + std::to_string(h.dib_size));
  }
  if (h.width < 1 || h.height < 1) throw DecodeError("bmp: empty image");
  return h;
}

int mask_shift(std::uint32_t mask) {
  int s = 0;
  while (mask && !(mask & 1u)) {
    mask >>= 1;
    ++s;
  }
  return s;
}

std::uint8_t mask_channel(std::uint32_t px, std::uint32_t mask) {
  if (!mask) return 0;
  const int shift = mask_shift(mask);
  const std::uint32_t max = mask >> shift;
  const std::uint32_t v = (px & mask) >> shift;
  return static_cast<std::uint8_t>((v * 255 + max / 2) / max);
}

Raster8 decode_bmp(std::span<const std::uint8_t> bytes) {
  ByteReader rd(bytes);
  const BmpHeader h = parse_bmp_header(rd);
  Raster8 out;
  out.width = h.width;
  out.height = h.height;
  out.channels = 3;
  out.data.assign(static_cast<std::size_t>(h.width) * h.height * 3, 0);

  std::vector<std::array<std::uint8_t, 3>> palette;
  if (h.bpp <= 8) {
    const std::size_t entry = h.dib_size == 12 ? 3 : 4;
    std::size_t count = h.colors_used ? h.colors_used : (1u << h.bpp);
    const std::size_t at = 14 + h.dib_size;
    palette.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t p = at + i * entry;
      palette[i] = {rd.u8(p + 2), rd.u8(p + 1), rd.u8(p)};
    }
  }

  auto put = [&](int file_row, int col, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b) {
    const int row = h.top_down ? file_row : h.height - 1 - file_row;
    std::uint8_t* px =
        out.data.data() + (static_cast<std::size_t>(row) * h.width + col) * 3;
    px[0] = r;
    px[1] = g;
    px[2] = b;
  };
  auto put_index = [&](int file_row, int col, std::uint32_t idx) {
    if (idx >= palette.size()) throw DecodeError("bmp: palette index out of range");
    const auto& c = palette[idx];
    put(file_row, col, c[0], c[1], c[2]);
  };

  if (h.compression == kBiRle8) {
    if (h.bpp != 8) throw DecodeError("bmp: RLE8 requires 8 bpp");
    std::size_t p = h.data_offset;
    int row = 0;
    int col = 0;
    while (row < h.height) {
      const std::uint8_t count = rd.u8(p);
      const std::uint8_t value = rd.u8(p + 1);
      p += 2;
      if (count > 0) {
        for (int i = 0; i < count && col < h.width; ++i) put_index(row, col++, value);
      } else if (value == 0) {
        ++row;
        col = 0;
      } else if (value == 1) {
        break;
      } else if (value == 2) {
        col += rd.u8(p);
        row += rd.u8(p + 1);
        p += 2;
      } else {
        for (int i = 0; i < value; ++i) {
          if (col < h.width && row < h.height) put_index(row, col++, rd.u8(p + i));
        }
        p += value + (value & 1);
      }
    }
    return out;
  }

  if (h.compression != kBiRgb && h.compression != kBiBitfields) {
    throw DecodeError("bmp: unsupported compression " + std::to_string(h.compression));
  }
  const std::size_t stride =
      ((static_cast<std::size_t>(h.bpp) * h.width + 31) / 32) * 4;
  rd.need(h.data_offset, stride * h.height);
  for (int r = 0; r < h.height; ++r) {
    const std::size_t base = h.data_offset + stride * r;
    for (int c = 0; c < h.width; ++c) {
      switch (h.bpp) {
        case 1:
        case 4:
        case 8: {
          const std::size_t bit = static_cast<std::size_t>(c) * h.bpp;
          const std::uint8_t byte = rd.u8(base + bit / 8);
          const int shift = 8 - h.bpp - static_cast<int>(bit % 8);
          put_index(r, c, (byte >> shift) & ((1u << h.bpp) - 1));
          break;
        }
        case 16: {
          const std::uint32_t px = rd.u16(base + 2 * c);
          if (h.compression == kBiBitfields) {
            put(r, c, mask_channel(px, h.masks[0]), mask_channel(px, h.masks[1]),
                mask_channel(px, h.masks[2]));
          } else {
            put(r, c, mask_channel(px, 0x7C00), mask_channel(px, 0x03E0),
                mask_channel(px, 0x001F));
          }
          break;
        }
        case 24: {
          const std::size_t p = base + 3 * static_cast<std::size_t>(c);
          put(r, c, rd.u8(p + 2), rd.u8(p + 1), rd.u8(p));
          break;
        }
        case 32: {
          const std::uint32_t px = rd.u32(base + 4 * static_cast<std::size_t>(c));
          if (h.compression == kBiBitfields) {
            put(r, c, mask_channel(px, h.masks[0]), mask_channel(px, h.masks[1]),
                mask_channel(px, h.masks[2]));
          } else {
            put(r, c, (px >> 16) & 0xFF, (px >> 8) & 0xFF, px & 0xFF);
          }
          break;
        }
        default:
          throw DecodeError("bmp: unsupported bit depth " + std::to_string(h.bpp));
      }
    }
  }
  return out;
}

void push_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(x & 0xFF);
  v.push_back(x >> 8);
}
void push_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back((x >> (8 * i)) & 0xFF);
}

std::vector<std::uint8_t> bmp_bytes(int width, int height, int bpp,
                                    std::span<const std::uint8_t> pixels) {
  const std::uint32_t palette_bytes = bpp == 8 ? 256 * 4 : 0;
  const std::uint32_t stride = ((bpp * width + 31) / 32) * 4;
  const std::uint32_t offset = 14 + 40 + palette_bytes;
  std::vector<std::uint8_t> v;
  v.reserve(offset + stride * height);
  v.push_back('B');
  v.push_back('M');
  push_u32(v, offset + stride * height);
  push_u32(v, 0);
  push_u32(v, offset);
  push_u32(v, 40);
  push_u32(v, static_cast<std::uint32_t>(width));
  push_u32(v, static_cast<std::uint32_t>(height));
  push_u16(v, 1);
  push_u16(v, static_cast<std::uint16_t>(bpp));
  push_u32(v, kBiRgb);
  push_u32(v, stride * height);
  push_u32(v, 2835);
  push_u32(v, 2835);
  push_u32(v, bpp == 8 ? 256 : 0);
  push_u32(v, 0);
  if (bpp == 8) {
    for (int i = 0; i < 256; ++i) {
      v.push_back(i);
      v.push_back(i);
      v.push_back(i);
      v.push_back(0);
    }
  }
  const int channels = bpp / 8;
  for (int r = height - 1; r >= 0; --r) {
    const std::uint8_t* row =
        pixels.data() + static_cast<std::size_t>(r) * width * channels;
    for (int c = 0; c < width; ++c) {
      if (channels == 1) {
        v.push_back(row[c]);
      } else {
        v.push_back(row[3 * c + 2]);
        v.push_back(row[3 * c + 1]);
        v.push_back(row[3 * c]);
      }
    }
    for (std::uint32_t pad = width * channels; pad < stride; ++pad) v.push_back(0);
  }
  return v;
}

std::vector<std::uint8_t> png_bytes(int width, int height, int channels,
                                    std::span<const std::uint8_t> pixels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0,
                                 nullptr)) {
    throw Error(std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0,
                                 nullptr)) {
    throw Error(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

}  // namespace

Raster8 decode_raster(std::span<const std::uint8_t> bytes) {
  switch (sniff(bytes)) {
    case Format::kPng:
      return decode_png(bytes);
    case Format::kBmp:
      return decode_bmp(bytes);
    case Format::kJpeg:
      return decode_jpeg(bytes, false);
    case Format::kUnknown:
      break;
  }
  throw DecodeError("unrecognized image format");
}

Dimensions probe_dimensions(std::span<const std::uint8_t> bytes) {
  switch (sniff(bytes)) {
    case Format::kPng:
      return probe_png(bytes);
    case Format::kBmp: {
      const BmpHeader h = parse_bmp_header(ByteReader(bytes));
      return {h.width, h.height};
    }
    case Format::kJpeg: {
      const Raster8 r = decode_jpeg(bytes, true);
      return {r.width, r.height};
    }
    case Format::kUnknown:
      break;
  }
  throw DecodeError("unrecognized image format");
}

RgbImage decode_rgb(std::span<const std::uint8_t> bytes) {
  const Raster8 r = decode_raster(bytes);
  return RgbImage::from_rgb8(r.width, r.height, r.data);
}

GrayImage decode_gray(std::span<const std::uint8_t> bytes) {
  const Raster8 r = decode_raster(bytes);
  GrayImage g(r.width, r.height);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    const std::uint8_t red = r.data[3 * i];
    const std::uint8_t green = r.data[3 * i + 1];
    const std::uint8_t blue = r.data[3 * i + 2];
    if (red == green && green == blue) {
      g.pixels[i] = red;
    } else {
      g.pixels[i] = static_cast<std::uint8_t>(
          std::lround(0.299 * red + 0.587 * green + 0.114 * blue));
    }
  }
  return g;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RgbImage read_rgb(const std::filesystem::path& path) {
  try {
    return decode_rgb(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

GrayImage read_gray(const std::filesystem::path& path) {
  try {
    return decode_gray(read_file(path));
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  return png_bytes(image.width, image.height, 1, image.pixels);
}

std::vector<std::uint8_t> encode_png(const Raster8& raster) {
  return png_bytes(raster.width, raster.height, raster.channels, raster.data);
}

std::vector<std::uint8_t> encode_bmp(const GrayImage& image) {
  return bmp_bytes(image.width, image.height, 8, image.pixels);
}

std::vector<std::uint8_t> encode_bmp(const Raster8& raster) {
  return bmp_bytes(raster.width, raster.height, raster.channels * 8, raster.data);
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

void write_gray(const std::filesystem::path& path, const GrayImage& image) {
  const std::string ext = lower_extension(path);
  if (ext == ".bmp") {
    write_file(path, encode_bmp(image));
  } else if (ext == ".png" || ext.empty()) {
    write_file(path, encode_png(image));
  } else {
    throw ParamError("unsupported mask extension '" + ext + "' (use .png or .bmp)");
  }
}

}  // namespace lpknn
