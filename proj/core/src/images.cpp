// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "cxrgan/checkpoint.h"
#include "cxrgan/dataio.h"
#include "cxrgan/error.h"

namespace cxrgan {
std::vector<char> encode_png(const GrayImage& image) {
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height)) {
    throw DataError("encode_png: pixel buffer does not match " + std::to_string(image.width) + "x" +
                    std::to_string(image.height));
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("PNG encode failed: " + msg);
  }
  std::vector<char> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("PNG encode failed: " + msg);
  }
  out.resize(size);
  return out;
}

GrayImage decode_png(const std::vector<char>& bytes, const std::string& source) {
  // Signature (8) + IHDR length and tag (8) + width and height (8), then depth and colour type.
  if (bytes.size() < 26 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw DataError(source + ": not a PNG file");
  }
  const int depth = static_cast<unsigned char>(bytes[24]);
  const int color = static_cast<unsigned char>(bytes[25]);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    throw DataError(source + ": unsupported PNG format (bit depth " + std::to_string(depth) + ", colour type " +
                    std::to_string(color) + "); only 8-bit grayscale is accepted");
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw DataError(source + ": " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  GrayImage out{static_cast<int>(img.width), static_cast<int>(img.height), {}};
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError(source + ": " + msg);
  }
  return out;
}

GrayImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path), path.string()); }

void write_png(const GrayImage& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_png(image));
}

double pixel_to_unit(std::uint8_t p) { return static_cast<double>(p) / 127.5 - 1.0; }

std::uint8_t unit_to_pixel(double v) {
  const double c = std::clamp(v, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround((c + 1.0) * 127.5));
}

Array images_to_array(const std::vector<GrayImage>& images) {
  if (images.empty()) throw DataError("no images to stack");
  const int r = images[0].width;
  for (const auto& im : images) {
    if (im.width != r || im.height != r) {
      throw DataError("images must be square and equally sized; found " + std::to_string(im.width) + "x" +
                      std::to_string(im.height) + " next to " + std::to_string(r) + "x" + std::to_string(r));
    }
  }
  Array out({static_cast<int>(images.size()), 1, r, r});
  std::size_t k = 0;
  for (const auto& im : images) {
    for (std::uint8_t p : im.pixels) out[k++] = pixel_to_unit(p);
  }
  return out;
}

GrayImage array_to_image(const Array& batch, int index) {
  if (batch.rank() != 4 || batch.dim(1) != 1) throw ShapeError("expected a [N,1,H,W] batch, got " + to_string(batch.shape()));
  GrayImage img{batch.dim(3), batch.dim(2), {}};
  const std::size_t per = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(per);
  const double* src = batch.raw() + static_cast<std::size_t>(index) * per;
  for (std::size_t i = 0; i < per; ++i) img.pixels[i] = unit_to_pixel(src[i]);
  return img;
}

GrayImage image_grid(const Array& batch, int cols) {
  if (batch.rank() != 4 || batch.dim(1) != 1) throw ShapeError("expected a [N,1,H,W] batch, got " + to_string(batch.shape()));
  const int n = batch.dim(0);
  const int h = batch.dim(2), w = batch.dim(3);
  cols = std::max(1, std::min(cols, n));
  const int rows = (n + cols - 1) / cols;
  GrayImage grid{cols * w, rows * h, std::vector<std::uint8_t>(static_cast<std::size_t>(cols * w) * (rows * h), 0)};
  for (int i = 0; i < n; ++i) {
    const GrayImage tile = array_to_image(batch, i);
    const int gx = (i % cols) * w, gy = (i / cols) * h;
    for (int y = 0; y < h; ++y) {
      std::copy_n(tile.pixels.data() + static_cast<std::size_t>(y) * w, w,
                  grid.pixels.data() + static_cast<std::size_t>(gy + y) * grid.width + gx);
    }
  }
  return grid;
}

GrayImage resize_down(const GrayImage& image, int resolution) {
  if (image.width != image.height || resolution < 1 || image.width % resolution != 0) {
    throw DataError("cannot resize a " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                    " image to " + std::to_string(resolution));
  }
  const int f = image.width / resolution;
  if (f == 1) return image;
  GrayImage out{resolution, resolution, std::vector<std::uint8_t>(static_cast<std::size_t>(resolution) * resolution)};
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      int s = 0;
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) s += image.pixels[static_cast<std::size_t>(y * f + dy) * image.width + x * f + dx];
      }
      out.pixels[static_cast<std::size_t>(y) * resolution + x] =
          static_cast<std::uint8_t>((s + f * f / 2) / (f * f));
    }
  }
  return out;
}

// ------------------------------------------------------ Augmentation

AugmentConfig AugmentConfig::none() { return AugmentConfig{0.0, 0.0, 0.0, 0.0, 0.0, 0.0}; }

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

void augment_plane(std::span<double> plane, int size, double lo, double hi, const AugmentConfig& config, Rng rng) {
  if (plane.size() != static_cast<std::size_t>(size) * static_cast<std::size_t>(size)) {
    throw ShapeError("augment: plane is not " + std::to_string(size) + "x" + std::to_string(size));
  }
  const double angle_deg = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg);
  const bool flip = rng.uniform() < config.flip_prob;
  const double brightness = rng.uniform(1.0 - config.brightness, 1.0 + config.brightness);
  const double contrast = rng.uniform(1.0 - config.contrast, 1.0 + config.contrast);

  if (angle_deg != 0.0) {
    const std::vector<double> src(plane.begin(), plane.end());
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const double c = 0.5 * (size - 1);
    auto at = [&](int y, int x) { return src[static_cast<std::size_t>(reflect(y, size)) * size + reflect(x, size)]; };
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        // Inverse map of the output pixel into the source.
        const double sx = c + ca * (x - c) + sa * (y - c);
        const double sy = c - sa * (x - c) + ca * (y - c);
        const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        const double fx = sx - x0, fy = sy - y0;
        plane[static_cast<std::size_t>(y) * size + x] =
            (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) + fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
      }
    }
  }
  if (flip) {
    for (int y = 0; y < size; ++y) std::reverse(plane.begin() + y * size, plane.begin() + (y + 1) * size);
  }
  if (brightness != 1.0 || contrast != 1.0) {
    // Work in [0, 1] so brightness scales toward black and contrast blends with the mean.
    const double span = hi - lo;
    double mean = 0.0;
    for (double& v : plane) {
      v = std::clamp(brightness * (v - lo) / span, 0.0, 1.0);
      mean += v;
    }
    mean /= static_cast<double>(plane.size());
    for (double& v : plane) v = lo + span * std::clamp(mean + contrast * (v - mean), 0.0, 1.0);
  }
  for (double& v : plane) v = std::clamp(v, lo, hi);
}

GrayImage augment(const GrayImage& image, const AugmentConfig& config, std::uint64_t seed) {
  if (image.width != image.height) throw DataError("augment: image must be square");
  std::vector<double> plane(image.pixels.begin(), image.pixels.end());
  augment_plane(plane, image.width, 0.0, 255.0, config, Rng(seed).split("augment"));
  GrayImage out = image;
  for (std::size_t i = 0; i < plane.size(); ++i) out.pixels[i] = static_cast<std::uint8_t>(std::lround(plane[i]));
  return out;
}

}  // namespace cxrgan
