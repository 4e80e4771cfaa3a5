#include "lidarseg/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "lidarseg/errors.hpp"

namespace lidarseg::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void on_png_error(png_structp png_ptr, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png_ptr));
  if (what) *what = msg;
  png_longjmp(png_ptr, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
};

// libpng reports errors by longjmp; the two functions below keep every piece of
// state they mutate behind pointers so nothing lives only in registers.
bool encode(png_structp png_ptr, png_infop info_ptr, std::FILE* fp, int width, int height, int channels,
            std::vector<png_bytep>* rows) {
  if (setjmp(png_jmpbuf(png_ptr))) return false;
  png_init_io(png_ptr, fp);
  png_set_IHDR(png_ptr, info_ptr, width, height, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png_ptr, info_ptr);
  png_write_image(png_ptr, rows->data());
  png_write_end(png_ptr, nullptr);
  return true;
}

bool decode(png_structp png_ptr, png_infop info_ptr, std::FILE* fp, int want_channels, Decoded* out) {
  if (setjmp(png_jmpbuf(png_ptr))) return false;
  png_init_io(png_ptr, fp);
  png_set_sig_bytes(png_ptr, 8);
  png_read_info(png_ptr, info_ptr);
  const png_byte color = png_get_color_type(png_ptr, info_ptr);
  const png_byte depth = png_get_bit_depth(png_ptr, info_ptr);
  if (depth == 16) png_set_strip_16(png_ptr);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png_ptr);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png_ptr);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png_ptr);
  const bool is_gray = (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA);
  if (want_channels == 3 && is_gray) png_set_gray_to_rgb(png_ptr);
  if (want_channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(png_ptr, 1, -1, -1);
  png_read_update_info(png_ptr, info_ptr);

  out->width = static_cast<int>(png_get_image_width(png_ptr, info_ptr));
  out->height = static_cast<int>(png_get_image_height(png_ptr, info_ptr));
  out->channels = png_get_channels(png_ptr, info_ptr);
  out->pixels.resize(static_cast<std::size_t>(out->width) * out->height * out->channels);
  out->rows.resize(static_cast<std::size_t>(out->height));
  for (int r = 0; r < out->height; ++r)
    out->rows[r] = out->pixels.data() + static_cast<std::size_t>(r) * out->width * out->channels;
  png_read_image(png_ptr, out->rows.data());
  png_read_end(png_ptr, nullptr);
  return true;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot open for writing: " + path.string());

  std::string err;
  png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png_ptr) throw DataError("libpng: out of memory writing " + path.string());
  png_infop info_ptr = png_create_info_struct(png_ptr);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r)
    rows[r] = const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(r) * width * channels);

  const bool ok = info_ptr && encode(png_ptr, info_ptr, fp.get(), width, height, channels, &rows);
  png_destroy_write_struct(&png_ptr, info_ptr ? &info_ptr : nullptr);
  if (!ok) throw DataError("libpng error writing " + path.string() + ": " + err);
  if (std::fflush(fp.get()) != 0) throw DataError("failed writing " + path.string());
}

// Decodes to 8-bit gray (want_channels = 1) or RGB (want_channels = 3).
Decoded read_png(const std::filesystem::path& path, int want_channels) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image: " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw DataError("not a PNG file: " + path.string());

  std::string err;
  png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png_ptr) throw DataError("libpng: out of memory reading " + path.string());
  png_infop info_ptr = png_create_info_struct(png_ptr);

  Decoded out;
  const bool ok = info_ptr && decode(png_ptr, info_ptr, fp.get(), want_channels, &out);
  png_destroy_read_struct(&png_ptr, info_ptr ? &info_ptr : nullptr, nullptr);
  if (!ok) throw DataError("libpng error reading " + path.string() + ": " + err);
  if (out.channels != want_channels)
    throw DataError("unexpected channel count " + std::to_string(out.channels) + " in " + path.string());
  return out;
}

}  // namespace

std::uint8_t quantize(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void write_gray(const std::filesystem::path& path, const Plane<std::uint8_t>& plane) {
  std::vector<std::uint8_t> px(plane.begin(), plane.end());
  write_png(path, plane.width(), plane.height(), 1, px);
}

Plane<std::uint8_t> read_gray(const std::filesystem::path& path) {
  Decoded d = read_png(path, 1);
  Plane<std::uint8_t> out(d.height, d.width);
  std::copy(d.pixels.begin(), d.pixels.end(), out.begin());
  return out;
}

void write_rgb(const std::filesystem::path& path, const RgbImage& image) {
  const int w = image.size.width, h = image.size.height;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
  for (int r = 0; r < h; ++r)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(r) * w + x) * 3 + c] = quantize(image.at(c, r, x));
  write_png(path, w, h, 3, px);
}

RgbImage read_rgb(const std::filesystem::path& path) {
  Decoded d = read_png(path, 3);
  RgbImage img({d.width, d.height});
  for (int r = 0; r < d.height; ++r)
    for (int x = 0; x < d.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, r, x) = static_cast<float>(d.pixels[(static_cast<std::size_t>(r) * d.width + x) * 3 + c]) / 255.0f;
  return img;
}

void write_mask(const std::filesystem::path& path, const MaskPlane& binary) {
  Plane<std::uint8_t> px(binary.size());
  for (std::size_t i = 0; i < binary.pixel_count(); ++i) px[i] = binary[i] ? 255 : 0;
  write_gray(path, px);
}

MaskPlane read_mask(const std::filesystem::path& path) {
  Plane<std::uint8_t> px = read_gray(path);
  for (auto& v : px) {
    if (v != 0 && v != 255) throw DataError(path.string() + ": mask pixel value " + std::to_string(v) + " is not 0 or 255");
    v = v ? 1 : 0;
  }
  return px;
}

}  // namespace lidarseg::png
