#include "depthproj/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

namespace depthproj {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw Error("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp message) { throw Error(std::string("libpng: ") + message); }
void png_warn(png_structp, png_const_charp) {}

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
  if (image.size() == 0) throw Error("refusing to write an empty image to " + path.string());
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw Error("png_create_info_struct failed");

  const auto w = static_cast<png_uint_32>(image.cols());
  const auto h = static_cast<png_uint_32>(image.rows());
  png_init_io(png, file.get());
  png_set_IHDR(png, info, w, h, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const double top = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bytes = bit_depth == 16 ? 2 : 1;
  std::vector<png_byte> row(w * bytes);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      const double v = image(y, x);
      const auto q = static_cast<unsigned>(std::clamp(std::isfinite(v) ? std::round(v) : 0.0, 0.0, top));
      if (bytes == 2) {
        row[2 * x] = static_cast<png_byte>(q >> 8);  // PNG samples are big-endian
        row[2 * x + 1] = static_cast<png_byte>(q & 0xFF);
      } else {
        row[x] = static_cast<png_byte>(q);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

}  // namespace

LoadedImage read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  if (!info) throw Error("png_create_info_struct failed");

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth < 8) depth = 8;
  png_set_strip_alpha(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);

  std::vector<png_byte> buffer(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  LoadedImage out;
  out.bit_depth = depth;
  out.pixels.resize(h, w);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      double c[3] = {0, 0, 0};
      for (int k = 0; k < std::min(channels, 3); ++k) {
        const std::size_t i = static_cast<std::size_t>(x) * channels + k;
        if (depth == 16) {
          std::uint16_t v;
          std::memcpy(&v, rows[y] + 2 * i, 2);
          c[k] = v;
        } else {
          c[k] = rows[y][i];
        }
      }
      out.pixels(y, x) = channels >= 3 ? 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2] : c[0];
    }
  }
  return out;
}

void write_png8(const std::filesystem::path& path, const Image& image) { write_png(path, image, 8); }
void write_png16(const std::filesystem::path& path, const Image& image) { write_png(path, image, 16); }

Image resample(const Image& image, int width, int height) {
  if (image.size() == 0 || width <= 0 || height <= 0) throw std::invalid_argument("resample needs non-empty sizes");
  const double sx = static_cast<double>(image.cols()) / width;
  const double sy = static_cast<double>(image.rows()) / height;
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.rows() - 1));
    const auto y0 = static_cast<Eigen::Index>(fy);
    const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, image.rows() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.cols() - 1));
      const auto x0 = static_cast<Eigen::Index>(fx);
      const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, image.cols() - 1);
      const double tx = fx - x0;
      out(y, x) = (1 - ty) * ((1 - tx) * image(y0, x0) + tx * image(y0, x1)) +
                  ty * ((1 - tx) * image(y1, x0) + tx * image(y1, x1));
    }
  }
  return out;
}

}  // namespace depthproj
