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

#pragma once

// Image datasets: MNIST IDX files, 28x28 -> 16x16 resampling, synthetic modes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qdiff::data {

inline constexpr std::size_t kSide = 16;
inline constexpr std::size_t kPixels = kSide * kSide;
inline constexpr std::size_t kMnistSide = 28;

/// Unsigned-byte IDX tensor.
struct IdxTensor {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t element_count() const;
};

/// Parses IDX bytes (type 0x08 only). Gzip input is inflated first.
/// Throws io::FormatError.
IdxTensor parse_idx(std::string_view bytes);
std::string write_idx(const IdxTensor& t);
IdxTensor load_idx(const std::filesystem::path& path);

/// Inflates a gzip stream.
std::string gunzip(std::string_view bytes);

/// Bilinear 28x28 -> 16x16 (pixel-centre aligned, edges clamped), then
/// divides by `input_max` so the result lies in [0, 1].
std::vector<double> downsample(std::span<const double> img28, double input_max = 255.0);

struct ImageBatch {
  std::vector<std::vector<double>> images;  // row-major 16x16
  std::vector<int> labels;                  // empty or one per image

  std::size_t size() const { return images.size(); }
  /// Throws unless every image has 256 pixels in [0, 1] and labels match.
  void validate() const;
};

/// Builds a batch from an IDX image tensor (count x 28 x 28) and optional
/// label tensor. `limit` = 0 keeps every image.
ImageBatch from_idx(const IdxTensor& images, const IdxTensor* labels, std::size_t limit = 0,
                    int threads = 1);

struct SyntheticSpec {
  std::size_t n_modes = 2;
  std::uint64_t pattern_seed = 0;
  double noise_sigma = 0.05;
  std::size_t count_per_mode = 100;
};

inline constexpr double kTemplateLow = 0.1;
inline constexpr double kTemplateHigh = 0.9;

/// Mode templates. The first six are fixed layouts (horizontal stripes and
/// their complement, vertical stripes and their complement, centred block,
/// border frame); the rest are random 4x4 block patterns drawn from pattern_seed.
std::vector<std::vector<double>> mode_templates(const SyntheticSpec& spec);

/// count_per_mode samples of each mode, grouped by mode, with clamped
/// Gaussian pixel noise. Labels are the mode indices.
ImageBatch synth_modes(const SyntheticSpec& spec, std::uint64_t seed);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct NearestMode {
  std::size_t index = 0;
  double cosine = 0.0;
};
NearestMode nearest_template(std::span<const double> img, const std::vector<std::vector<double>>& templates);

/// Binary cache: "QDIFFIMG", u32 version, u64 count, u64 pixels, u8 has_labels,
/// f64 pixels per image, then i32 labels.
std::string serialize_batch(const ImageBatch& batch);
ImageBatch deserialize_batch(std::string_view bytes);
void save_batch(const ImageBatch& batch, const std::filesystem::path& path);
ImageBatch load_batch(const std::filesystem::path& path);

/// P5 PGM, 16x16, values clamped to [0, 1] and scaled to 0..255.
std::string to_pgm(std::span<const double> img, std::size_t width = kSide, std::size_t height = kSide);

}  // namespace qdiff::data
