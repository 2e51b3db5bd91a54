#include "wildseg/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace wildseg::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void decode_error(const std::filesystem::path& path, const char* why) {
  fail("DecodeError", path.string() + " (" + why + ")");
}

void write_impl(const std::filesystem::path& path, int width, int height, int color_type,
                int channels, const std::uint8_t* bytes) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) fail("IoError", "cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail("IoError", "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("IoError", "libpng write failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RawImage read(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) decode_error(path, "cannot open");

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) decode_error(path, "not a PNG");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    decode_error(path, "libpng init failed");
  }
  RawImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    decode_error(path, "corrupt data");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  img.bytes.resize(stride * img.height);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = img.bytes.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Frame read_rgb(const std::filesystem::path& path) {
  const RawImage raw = read(path);
  Frame f(raw.width, raw.height);
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    const std::uint8_t* p = raw.bytes.data() + i * raw.channels;
    if (raw.channels >= 3) {
      f.data[i] = {p[0], p[1], p[2]};
    } else {
      f.data[i] = {p[0], p[0], p[0]};
    }
  }
  return f;
}

void write_rgb(const std::filesystem::path& path, const Frame& frame) {
  static_assert(sizeof(Rgb) == 3);
  write_impl(path, frame.width, frame.height, PNG_COLOR_TYPE_RGB, 3,
             reinterpret_cast<const std::uint8_t*>(frame.data.data()));
}

void write_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& gray) {
  write_impl(path, gray.width, gray.height, PNG_COLOR_TYPE_GRAY, 1, gray.data.data());
}

}  // namespace wildseg::png
