// Copyright 2026 The BlockSplat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "blocksplat/image_io.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace blocksplat {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr OpenFile(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw Error(ErrorCode::kUnreadableFile,
                "cannot open " + path.string());
  }
  return f;
}

bool HasPngSignature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

// Decodes any PNG into 8- or 16-bit samples with the requested channel count.
Image DecodePng(const std::filesystem::path& path, bool want_16bit_gray) {
  FilePtr f = OpenFile(path, "rb");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kUnreadableFile, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kUnreadableFile, "corrupt PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (want_16bit_gray) {
    if (bit_depth != 16 || (color_type != PNG_COLOR_TYPE_GRAY &&
                            color_type != PNG_COLOR_TYPE_GRAY_ALPHA)) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw Error(ErrorCode::kUnreadableFile,
                  "expected 16-bit grayscale PNG: " + path.string());
    }
    png_set_strip_alpha(png);
    png_set_swap(png);  // host little-endian
  } else {
    if (bit_depth == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY ||
        color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(png);
    }
  }
  png_read_update_info(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  if (want_16bit_gray) {
    Image out(static_cast<int>(w), static_cast<int>(h), 1);
    for (png_uint_32 y = 0; y < h; ++y) {
      for (png_uint_32 x = 0; x < w; ++x) {
        uint16_t v;
        std::memcpy(&v, rows[y] + 2 * x, 2);
        out.at(x, y) = v;
      }
    }
    return out;
  }
  Image out(static_cast<int>(w), static_cast<int>(h), 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = rows[y][3 * x + c] / 255.0;
      }
    }
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void JpegErrorExit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

Image DecodeJpeg(const std::filesystem::path& path) {
  FilePtr f = OpenFile(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = JpegErrorExit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::kUnreadableFile, "corrupt JPEG " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width);
  const int h = static_cast<int>(cinfo.output_height);
  Image out(w, h, 3);
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    const int y = static_cast<int>(cinfo.output_scanline);
    JSAMPROW ptr = row.data();
    jpeg_read_scanlines(&cinfo, &ptr, 1);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = row[3 * x + c] / 255.0;
    }
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

void EncodePng(const std::filesystem::path& path, int w, int h, int channels,
               int bit_depth, const std::vector<unsigned char>& bytes) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "PNG encode failed " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  const size_t rowbytes = static_cast<size_t>(w) * channels * (bit_depth / 8);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + y * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image LoadRgbImage(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingFile, "missing image " + path.string());
  }
  if (HasPngSignature(path)) return DecodePng(path, false);
  return DecodeJpeg(path);
}

void WritePng8(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument, "PNG needs 1 or 3 channels");
  }
  std::vector<unsigned char> bytes(image.data.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(image.data[i], 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  EncodePng(path, image.width, image.height, image.channels, 8, bytes);
}

Image LoadPng16Gray(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kUnreadableFile, "missing PNG " + path.string());
  }
  return DecodePng(path, true);
}

void WritePng16Gray(const std::filesystem::path& path, const Image& raw) {
  if (raw.channels != 1) {
    throw Error(ErrorCode::kInvalidArgument, "16-bit PNG needs 1 channel");
  }
  std::vector<unsigned char> bytes(raw.data.size() * 2);
  for (size_t i = 0; i < raw.data.size(); ++i) {
    const auto v = static_cast<uint16_t>(
        std::clamp(std::lround(raw.data[i]), 0L, 65535L));
    std::memcpy(bytes.data() + 2 * i, &v, 2);
  }
  EncodePng(path, raw.width, raw.height, 1, 16, bytes);
}

Image ReadPfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();  // single whitespace before the raster
  if (!in || magic != "Pf" || w <= 0 || h <= 0 || scale == 0.0) {
    throw Error(ErrorCode::kUnreadableFile,
                "not a single-channel PFM: " + path.string());
  }
  const bool little_endian = scale < 0.0;
  Image out(w, h, 1);
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 4);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::kUnreadableFile, "truncated PFM " + path.string());
  }
  for (int row = 0; row < h; ++row) {
    for (int x = 0; x < w; ++x) {
      unsigned char* p = raw.data() + (static_cast<size_t>(row) * w + x) * 4;
      if (!little_endian) std::reverse(p, p + 4);
      float v;
      std::memcpy(&v, p, 4);
      out.at(x, h - 1 - row) = v;
    }
  }
  return out;
}

void WritePfm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1) {
    throw Error(ErrorCode::kInvalidArgument, "PFM writer needs 1 channel");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "Pf\n" << image.width << ' ' << image.height << "\n-1.0\n";
  for (int row = image.height - 1; row >= 0; --row) {
    for (int x = 0; x < image.width; ++x) {
      const float v = static_cast<float>(image.at(x, row));
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
}

Image Downsample(const Image& image, int factor) {
  if (factor <= 1) return image;
  const int w = image.width / factor;
  const int h = image.height / factor;
  Image out(w, h, image.channels);
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        double sum = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) {
            sum += image.at(x * factor + dx, y * factor + dy, c);
          }
        }
        out.at(x, y, c) = sum * inv;
      }
    }
  }
  return out;
}

}  // namespace blocksplat
