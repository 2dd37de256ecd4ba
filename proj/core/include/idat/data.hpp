#pragma once

#include <filesystem>
#include <vector>

#include "idat/rng.hpp"
#include "idat/tensor.hpp"

namespace idat {

enum class Split { kTrain, kVal, kTest };

// Immutable image-classification dataset: images in [0,1], dense labels.
struct Dataset {
  Tensor images;  // [N x H x W x C]
  std::vector<int> labels;
  int num_classes = 0;
  Split split = Split::kTrain;

  int count() const { return images.dim(0); }
  int height() const { return images.dim(1); }
  int width() const { return images.dim(2); }
  int channels() const { return images.dim(3); }
};

struct SyntheticSpec {
  int num_classes = 10;
  int samples_per_class = 100;
  int image_size = 32;
  int channels = 3;
  float noise = 0.05f;
  uint64_t seed = 0;

  void validate() const;
};

// Per-class prototype images (uniform [0,1], keyed by {seed, class}) plus
// Gaussian pixel noise clamped back into [0,1]. The same spec always yields
// the same bytes; different splits draw noise from disjoint streams.
Dataset generate_synthetic(const SyntheticSpec& spec, Split split = Split::kTrain);

// The class prototype alone (noise-free), for oracle checks.
Tensor synthetic_prototype(const SyntheticSpec& spec, int class_id);

// IDDS file layout (all integers little-endian): magic "IDDS", u32 fields
// {version, N, H, W, C, K}, N u32 labels, then N*H*W*C raw float32 pixels.
// Labels must be dense: every class in [0, K) appears at least once.
inline constexpr uint32_t kDatasetVersion = 1;

void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

// Bilinear resample (align_corners=false) of every image to size x size.
Dataset resize_dataset(const Dataset& ds, int size);
Tensor bilinear_resize(const Tensor& image, int out_h, int out_w);

struct Batch {
  Tensor images;  // [b x H x W x C]
  std::vector<int> labels;
};

// Deterministic epoch batching: a permutation drawn from stream
// {seed, kBatchOrder + epoch}, split into consecutive batches; the last
// partial batch is kept.
std::vector<Batch> make_batches(const Dataset& ds, int batch_size,
                                uint64_t seed, long epoch);

}  // namespace idat
