// Copyright 2026 The qdiff Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qdiff/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qdiff/io.hpp"
#include "qdiff/parallel.hpp"
#include "qdiff/rng.hpp"

namespace qdiff::data {

namespace {

constexpr char kBatchMagic[] = "QDIFFIMG";
constexpr std::uint32_t kBatchVersion = 1;

std::uint32_t read_be32(io::ByteReader& r) {
  const auto b = r.bytes(4);
  return (std::uint32_t(std::uint8_t(b[0])) << 24) | (std::uint32_t(std::uint8_t(b[1])) << 16) |
         (std::uint32_t(std::uint8_t(b[2])) << 8) | std::uint32_t(std::uint8_t(b[3]));
}

bool is_gzip(std::string_view bytes) {
  return bytes.size() >= 2 && std::uint8_t(bytes[0]) == 0x1f && std::uint8_t(bytes[1]) == 0x8b;
}

}  // namespace

std::size_t IdxTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string gunzip(std::string_view bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw std::runtime_error("gunzip: inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  char buf[1 << 15];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw io::FormatError("gunzip: corrupt or truncated gzip stream");
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw io::FormatError("gunzip: truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

IdxTensor parse_idx(std::string_view bytes) {
  if (is_gzip(bytes)) return parse_idx(gunzip(bytes));
  io::ByteReader r(bytes);
  if (bytes.size() < 4) throw io::FormatError("idx: truncated header");
  const auto magic = r.bytes(4);
  if (magic[0] != 0 || magic[1] != 0) throw io::FormatError("idx: bad magic");
  if (std::uint8_t(magic[2]) != 0x08) throw io::FormatError("idx: only unsigned-byte (0x08) payloads are supported");
  const int ndims = std::uint8_t(magic[3]);
  if (ndims == 0) throw io::FormatError("idx: zero dimensions");
  IdxTensor t;
  try {
    for (int i = 0; i < ndims; ++i) t.dims.push_back(read_be32(r));
  } catch (const io::FormatError&) {
    throw io::FormatError("idx: truncated dimension list");
  }
  const std::size_t n = t.element_count();
  if (r.remaining() < n) throw io::FormatError("idx: payload truncated");
  if (r.remaining() > n) throw io::FormatError("idx: trailing bytes after payload");
  const auto payload = r.bytes(n);
  t.data.assign(payload.begin(), payload.end());
  return t;
}

std::string write_idx(const IdxTensor& t) {
  if (t.dims.empty() || t.dims.size() > 255) throw std::invalid_argument("write_idx: bad dimension count");
  if (t.data.size() != t.element_count()) throw std::invalid_argument("write_idx: data size does not match dims");
  std::string out{'\0', '\0', '\x08', static_cast<char>(t.dims.size())};
  for (auto d : t.dims)
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((d >> s) & 0xff));
  out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size());
  return out;
}

IdxTensor load_idx(const std::filesystem::path& path) { return parse_idx(io::read_file(path)); }

std::vector<double> downsample(std::span<const double> img28, double input_max) {
  constexpr std::size_t n_in = kMnistSide;
  if (img28.size() != n_in * n_in) throw std::invalid_argument("downsample: expected 784 pixels");
  if (!(input_max > 0)) throw std::invalid_argument("downsample: input_max must be positive");
  for (double v : img28)
    if (!(v >= 0 && v <= input_max)) throw std::invalid_argument("downsample: pixel out of range");
  constexpr double ratio = double(n_in) / double(kSide);
  struct Tap {
    std::size_t lo, hi;
    double w_hi;
  };
  std::array<Tap, kSide> taps{};
  for (std::size_t i = 0; i < kSide; ++i) {
    const double src = std::clamp((double(i) + 0.5) * ratio - 0.5, 0.0, double(n_in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[i] = {lo, std::min(lo + 1, n_in - 1), src - double(lo)};
  }
  std::vector<double> out(kPixels);
  for (std::size_t r = 0; r < kSide; ++r) {
    const auto& ty = taps[r];
    for (std::size_t c = 0; c < kSide; ++c) {
      const auto& tx = taps[c];
      const auto at = [&](std::size_t y, std::size_t x) { return img28[y * n_in + x]; };
      const double top = (1 - tx.w_hi) * at(ty.lo, tx.lo) + tx.w_hi * at(ty.lo, tx.hi);
      const double bot = (1 - tx.w_hi) * at(ty.hi, tx.lo) + tx.w_hi * at(ty.hi, tx.hi);
      out[r * kSide + c] = std::clamp(((1 - ty.w_hi) * top + ty.w_hi * bot) / input_max, 0.0, 1.0);
    }
  }
  return out;
}

void ImageBatch::validate() const {
  if (!labels.empty() && labels.size() != images.size())
    throw std::invalid_argument("ImageBatch: label count does not match image count");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != kPixels)
      throw std::invalid_argument("ImageBatch: image " + std::to_string(i) + " does not have 256 pixels");
    for (double v : images[i])
      if (!(v >= 0 && v <= 1)) throw std::invalid_argument("ImageBatch: image " + std::to_string(i) + " has a pixel outside [0,1]");
  }
}

ImageBatch from_idx(const IdxTensor& images, const IdxTensor* labels, std::size_t limit, int threads) {
  if (images.dims.size() != 3 || images.dims[1] != kMnistSide || images.dims[2] != kMnistSide)
    throw std::invalid_argument("from_idx: expected a count x 28 x 28 image tensor");
  std::size_t count = images.dims[0];
  if (labels) {
    if (labels->dims.size() != 1 || labels->dims[0] != count)
      throw std::invalid_argument("from_idx: label tensor does not match image count");
  }
  if (limit > 0) count = std::min(count, limit);
  ImageBatch batch;
  batch.images.resize(count);
  constexpr std::size_t px = kMnistSide * kMnistSide;
  parallel_for(count, threads, [&](std::size_t i) {
    std::vector<double> raw(images.data.begin() + i * px, images.data.begin() + (i + 1) * px);
    batch.images[i] = downsample(raw, 255.0);
  });
  if (labels) batch.labels.assign(labels->data.begin(), labels->data.begin() + count);
  return batch;
}

std::vector<std::vector<double>> mode_templates(const SyntheticSpec& spec) {
  if (spec.n_modes < 2) throw std::invalid_argument("synth_modes: need at least two modes");
  std::vector<std::vector<double>> out;
  const auto make = [](auto&& high) {
    std::vector<double> t(kPixels);
    for (std::size_t r = 0; r < kSide; ++r)
      for (std::size_t c = 0; c < kSide; ++c) t[r * kSide + c] = high(r, c) ? kTemplateHigh : kTemplateLow;
    return t;
  };
  for (std::size_t m = 0; m < spec.n_modes; ++m) {
    switch (m) {
      case 0: out.push_back(make([](auto r, auto) { return (r / 2) % 2 == 0; })); break;
      case 1: out.push_back(make([](auto r, auto) { return (r / 2) % 2 == 1; })); break;
      case 2: out.push_back(make([](auto, auto c) { return (c / 2) % 2 == 0; })); break;
      case 3: out.push_back(make([](auto, auto c) { return (c / 2) % 2 == 1; })); break;
      case 4: out.push_back(make([](auto r, auto c) { return r >= 4 && r < 12 && c >= 4 && c < 12; })); break;
      case 5: out.push_back(make([](auto r, auto c) { return r < 2 || r >= 14 || c < 2 || c >= 14; })); break;
      default: {
        auto rng = substream(spec.pattern_seed, {m});
        std::bernoulli_distribution coin(0.5);
        std::array<bool, 16> blocks{};
        for (auto& b : blocks) b = coin(rng);
        out.push_back(make([&](auto r, auto c) { return blocks[(r / 4) * 4 + c / 4]; }));
      }
    }
  }
  return out;
}

ImageBatch synth_modes(const SyntheticSpec& spec, std::uint64_t seed) {
  if (!(spec.noise_sigma >= 0)) throw std::invalid_argument("synth_modes: noise_sigma must be >= 0");
  const auto templates = mode_templates(spec);
  ImageBatch batch;
  for (std::size_t m = 0; m < spec.n_modes; ++m) {
    for (std::size_t k = 0; k < spec.count_per_mode; ++k) {
      auto img = templates[m];
      if (spec.noise_sigma > 0) {
        auto rng = substream(seed, {m, k});
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (auto& v : img) v = std::clamp(v + noise(rng), 0.0, 1.0);
      }
      batch.images.push_back(std::move(img));
      batch.labels.push_back(static_cast<int>(m));
    }
  }
  return batch;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

NearestMode nearest_template(std::span<const double> img, const std::vector<std::vector<double>>& templates) {
  NearestMode best{0, -2.0};
  for (std::size_t m = 0; m < templates.size(); ++m) {
    const double c = cosine_similarity(img, templates[m]);
    if (c > best.cosine) best = {m, c};
  }
  return best;
}

std::string serialize_batch(const ImageBatch& batch) {
  batch.validate();
  io::ByteWriter w;
  w.bytes({kBatchMagic, 8});
  w.put<std::uint32_t>(kBatchVersion);
  w.put<std::uint64_t>(batch.size());
  w.put<std::uint64_t>(kPixels);
  w.put<std::uint8_t>(batch.labels.empty() ? 0 : 1);
  for (const auto& img : batch.images) w.f64s(img);
  for (int l : batch.labels) w.put<std::int32_t>(l);
  return w.str();
}

ImageBatch deserialize_batch(std::string_view bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 8 || r.bytes(8) != std::string_view(kBatchMagic, 8))
    throw io::FormatError("image cache: bad magic");
  if (r.get<std::uint32_t>() != kBatchVersion) throw io::FormatError("image cache: unsupported version");
  const auto count = r.get<std::uint64_t>();
  if (r.get<std::uint64_t>() != kPixels) throw io::FormatError("image cache: unexpected image size");
  const bool has_labels = r.get<std::uint8_t>() != 0;
  if (count > r.remaining() / (kPixels * sizeof(double))) throw io::FormatError("image cache: truncated");
  ImageBatch batch;
  batch.images.assign(count, std::vector<double>(kPixels));
  for (auto& img : batch.images) r.f64s(img);
  if (has_labels)
    for (std::uint64_t i = 0; i < count; ++i) batch.labels.push_back(r.get<std::int32_t>());
  if (r.remaining() != 0) throw io::FormatError("image cache: trailing bytes");
  batch.validate();
  return batch;
}

void save_batch(const ImageBatch& batch, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_batch(batch));
}

ImageBatch load_batch(const std::filesystem::path& path) { return deserialize_batch(io::read_file(path)); }

std::string to_pgm(std::span<const double> img, std::size_t width, std::size_t height) {
  if (img.size() != width * height) throw std::invalid_argument("to_pgm: size mismatch");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (double v : img) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(c * 255.0))));
  }
  return out;
}

}  // namespace qdiff::data
