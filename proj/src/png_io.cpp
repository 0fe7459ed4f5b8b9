#include "spf/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "spf/error.hpp"

namespace spf {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_gray_png(const std::string& path, int height, int width,
                    const std::vector<std::uint8_t>& pixels) {
  if (height < 1 || width < 1 ||
      pixels.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw IoError("png write: pixel buffer does not match " + std::to_string(height) + "x" +
                  std::to_string(width));
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("png write: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write: allocation failure");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y)
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width);

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write: libpng error for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_gray_png(const std::string& path, int& height, int& width) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("png read: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read: allocation failure");
  }
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read: not a decodable PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read: " + path + " is not 8-bit grayscale (color type " +
                  std::to_string(color) + ", depth " + std::to_string(depth) + ")");
  }
  height = static_cast<int>(png_get_image_height(png, info));
  width = static_cast<int>(png_get_image_width(png, info));
  pixels.resize(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y)
    rows[static_cast<std::size_t>(y)] = pixels.data() + static_cast<std::size_t>(y) * width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

void probe_gray_png(const std::string& path, int& height, int& width) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("png probe: missing file " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png probe: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png probe: not a PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  height = static_cast<int>(png_get_image_height(png, info));
  width = static_cast<int>(png_get_image_width(png, info));
  png_destroy_read_struct(&png, &info, nullptr);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8)
    throw IoError("png probe: " + path + " is not 8-bit grayscale");
}

}  // namespace spf
