#include "c2am/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

// jpeglib.h expects FILE and size_t declared beforehand.
#include <jpeglib.h>

#include "c2am/errors.hpp"

namespace c2am {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

bool has_png_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

template <typename Pixel>
std::vector<Pixel> simplified_png_read(const std::filesystem::path& path, png_uint_32 format, int channels,
                                       int& height, int& width) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw FormatError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<Pixel> buffer(static_cast<std::size_t>(image.height) * image.width * channels);
  if (png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    throw FormatError("cannot decode PNG " + path.string() + ": " + message);
  }
  height = static_cast<int>(image.height);
  width = static_cast<int>(image.width);
  return buffer;
}

void simplified_png_write(const std::filesystem::path& path, png_uint_32 format, int height, int width,
                          const void* buffer, const void* colormap = nullptr, int colormap_entries = 0) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  image.colormap_entries = static_cast<png_uint_32>(colormap_entries);
  if (png_image_write_to_file(&image, path.c_str(), 0, buffer, 0, colormap) == 0) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

RgbImage read_jpeg(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  jpeg_decompress_struct info;
  JpegErrorManager err;
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  RgbImage out;
  if (setjmp(err.jump) != 0) {
    jpeg_destroy_decompress(&info);
    throw FormatError("cannot decode JPEG " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&info);
  jpeg_stdio_src(&info, file.get());
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  out = RgbImage(static_cast<int>(info.output_height), static_cast<int>(info.output_width));
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(info.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return out;
}

// Standard VOC palette: bit-interleaved class index.
std::vector<png_byte> voc_palette() {
  std::vector<png_byte> palette(256 * 3, 0);
  for (int i = 0; i < 256; ++i) {
    int label = i;
    int r = 0;
    int g = 0;
    int b = 0;
    for (int shift = 7; shift >= 0; --shift) {
      r |= ((label >> 0) & 1) << shift;
      g |= ((label >> 1) & 1) << shift;
      b |= ((label >> 2) & 1) << shift;
      label >>= 3;
    }
    palette[i * 3 + 0] = static_cast<png_byte>(r);
    palette[i * 3 + 1] = static_cast<png_byte>(g);
    palette[i * 3 + 2] = static_cast<png_byte>(b);
  }
  return palette;
}

}  // namespace

RgbImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("image not found: " + path.string());
  if (!has_png_signature(path)) return read_jpeg(path);
  RgbImage out;
  out.pixels = simplified_png_read<std::uint8_t>(path, PNG_FORMAT_RGB, 3, out.height, out.width);
  return out;
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& image) {
  simplified_png_write(path, PNG_FORMAT_RGB, image.height, image.width, image.pixels.data());
}

void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& image) {
  simplified_png_write(path, PNG_FORMAT_GRAY, image.height, image.width, image.values.data());
}

Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path) {
  Grid<std::uint8_t> out;
  out.values = simplified_png_read<std::uint8_t>(path, PNG_FORMAT_GRAY, 1, out.height, out.width);
  return out;
}

Grid<int> read_label_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png)) != 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("cannot decode label PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_png(png, info, PNG_TRANSFORM_PACKING | PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_STRIP_ALPHA, nullptr);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);
  Grid<int> labels(height, width, 0);
  const bool single = color == PNG_COLOR_TYPE_PALETTE || color == PNG_COLOR_TYPE_GRAY;
  for (int r = 0; r < height && single; ++r) {
    for (int c = 0; c < width; ++c) labels(r, c) = rows[r][c * channels];
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!single) throw FormatError("label PNG " + path.string() + " must be indexed or grayscale");
  return labels;
}

void write_label_png(const std::filesystem::path& path, const Grid<int>& labels) {
  std::vector<std::uint8_t> buffer(labels.values.size());
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    const int v = labels.values[i];
    if (v < 0 || v > 255) throw InputError("label " + std::to_string(v) + " does not fit an indexed PNG");
    buffer[i] = static_cast<std::uint8_t>(v);
  }
  const std::vector<png_byte> palette_bytes = voc_palette();
  std::vector<png_color> palette(256);
  for (int i = 0; i < 256; ++i) {
    palette[i] = png_color{palette_bytes[i * 3], palette_bytes[i * 3 + 1], palette_bytes[i * 3 + 2]};
  }
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png)) != 0) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot write label PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(labels.width), static_cast<png_uint_32>(labels.height), 8,
               PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_PLTE(png, info, palette.data(), 256);
  png_write_info(png, info);
  for (int r = 0; r < labels.height; ++r) {
    png_write_row(png, buffer.data() + static_cast<std::size_t>(r) * labels.width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace c2am
