// Copyright 2026 The DUNet Authors. All Rights Reserved.
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

#include "dunet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "dunet/errors.hpp"

namespace dunet {

Image8 make_rgb(const GrayImage& r, const GrayImage& g, const GrayImage& b) {
  if (r.rows() != g.rows() || r.cols() != g.cols() || r.rows() != b.rows() || r.cols() != b.cols()) {
    throw DimensionError("make_rgb: channel planes differ in size");
  }
  Image8 out{static_cast<int>(r.rows()), static_cast<int>(r.cols()), 3, {}};
  out.pixels.resize(static_cast<std::size_t>(r.size()) * 3);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(y, x, 0) = r(y, x);
      out.at(y, x, 1) = g(y, x);
      out.at(y, x, 2) = b(y, x);
    }
  }
  return out;
}

Image8 to_image(const GrayImage& gray) {
  Image8 out{static_cast<int>(gray.rows()), static_cast<int>(gray.cols()), 1, {}};
  out.pixels.assign(gray.data(), gray.data() + gray.size());
  return out;
}

GrayImage to_gray_plane(const Image8& image) {
  if (image.channels != 1) {
    throw DimensionError("expected a single-channel image, got " + std::to_string(image.channels) + " channels");
  }
  GrayImage out(image.height, image.width);
  std::copy(image.pixels.begin(), image.pixels.end(), out.data());
  return out;
}

namespace {

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Image8 decode_pnm(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  auto next_int = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw IoError(path.string() + ": malformed PNM header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };
  const int channels = bytes[1] == '5' ? 1 : 3;
  const long width = next_int(), height = next_int(), maxval = next_int();
  if (maxval != 255) throw IoError(path.string() + ": only 8-bit PNM (maxval 255) is supported");
  if (width <= 0 || height <= 0) throw IoError(path.string() + ": empty image");
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(width * height * channels);
  if (bytes.size() < pos + need) throw IoError(path.string() + ": truncated raster");
  Image8 img{static_cast<int>(height), static_cast<int>(width), channels, {}};
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

Image8 decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 img{static_cast<int>(image.height), static_cast<int>(image.width), color ? 3 : 1, {}};
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(path.string() + ": " + image.message);
  }
  return img;
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return decode_pnm(bytes, path);
  throw IoError(path.string() + ": unsupported image format (expected PNG, binary PGM or PPM)");
}

void write_image(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw DimensionError("write_image: channels must be 1 or 3");
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
      throw IoError(path.string() + ": " + image.message);
    }
    return;
  }
  if (ext == ".pgm" || ext == ".ppm") {
    if ((ext == ".pgm") != (img.channels == 1)) {
      throw DimensionError(path.string() + ": extension does not match channel count");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("short write to " + path.string());
    return;
  }
  throw IoError(path.string() + ": unsupported output extension (use .png, .pgm or .ppm)");
}

GrayImage read_gray(const std::filesystem::path& path) {
  const Image8 img = read_image(path);
  if (img.channels == 1) return to_gray_plane(img);
  GrayImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) out(y, x) = img.at(y, x, 1);
  }
  return out;
}

void write_gray(const std::filesystem::path& path, const GrayImage& image) { write_image(path, to_image(image)); }

Mask binarize(const GrayImage& gt) { return (gt > std::uint8_t(127)).cast<std::uint8_t>(); }

}  // namespace dunet
