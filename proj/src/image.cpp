#include "svs/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace svs {

bool is_binary_mask(const Image8& img) {
  for (std::uint8_t v : img.px)
    if (v != 0 && v != 255) return false;
  return true;
}

std::uint8_t quantize_u8(double v) {
  const double r = std::floor(v + 0.5);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return std::uint8_t(r);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const Image8& img) {
  if (img.h <= 0 || img.w <= 0) throw io_error("write_png: empty image");
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw io_error(strcat("write_png: cannot open ", path.string()));

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw io_error("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error(strcat("write_png: failure writing ", path.string()));
  }
  png_init_io(png, fp.get());
  // pinned settings keep output bytes reproducible
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, png_uint_32(img.w), png_uint_32(img.h), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index y = 0; y < img.h; ++y)
    png_write_row(png, const_cast<png_bytep>(&img.px[std::size_t(y * img.w)]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw io_error(strcat("read_png: cannot open ", path.string()));

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw io_error("read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw io_error("read_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error(strcat("read_png: failure reading ", path.string()));
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error(strcat("read_png: ", path.string(),
                          " is not 8-bit grayscale"));
  }
  Image8 img{Index(h), Index(w)};
  for (png_uint_32 y = 0; y < h; ++y)
    png_read_row(png, &img.px[std::size_t(y) * w], nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace svs
