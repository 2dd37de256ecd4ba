#include "idat/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace idat {

void SyntheticSpec::validate() const {
  if (num_classes < 1 || samples_per_class < 1 || image_size < 1 || channels < 1) {
    throw ConfigError("synthetic spec fields must be positive");
  }
  if (noise < 0.0f) throw ConfigError("synthetic noise level must be >= 0");
}

namespace {

uint64_t noise_stream_base(Split split) {
  switch (split) {
    case Split::kTrain: return stream::kTrainNoise;
    case Split::kVal: return stream::kValNoise;
    case Split::kTest: return stream::kTestNoise;
  }
  return stream::kTrainNoise;
}

}  // namespace

Tensor synthetic_prototype(const SyntheticSpec& spec, int class_id) {
  spec.validate();
  Tensor proto({spec.image_size, spec.image_size, spec.channels});
  Rng rng(spec.seed, stream::kPrototype + static_cast<uint64_t>(class_id));
  for (float& v : proto.values()) v = rng.next_float();
  return proto;
}

Dataset generate_synthetic(const SyntheticSpec& spec, Split split) {
  spec.validate();
  const int n = spec.num_classes * spec.samples_per_class;
  const std::size_t pixels =
      static_cast<std::size_t>(spec.image_size) * spec.image_size * spec.channels;
  Dataset ds;
  ds.images = Tensor({n, spec.image_size, spec.image_size, spec.channels});
  ds.labels.resize(static_cast<std::size_t>(n));
  ds.num_classes = spec.num_classes;
  ds.split = split;
  auto out = ds.images.values();
  std::size_t row = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    const Tensor proto = synthetic_prototype(spec, k);
    auto pv = proto.values();
    Rng noise(spec.seed, noise_stream_base(split) + static_cast<uint64_t>(k));
    for (int s = 0; s < spec.samples_per_class; ++s) {
      float* dst = out.data() + row * pixels;
      if (spec.noise == 0.0f) {
        std::copy(pv.begin(), pv.end(), dst);
      } else {
        for (std::size_t i = 0; i < pixels; ++i) {
          dst[i] = std::clamp(pv[i] + noise.normal(0.0f, spec.noise), 0.0f, 1.0f);
        }
      }
      ds.labels[row] = k;
      ++row;
    }
  }
  return ds;
}

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF),
                              static_cast<unsigned char>((v >> 16) & 0xFF),
                              static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw LoadError(std::string("dataset truncated while reading ") + what);
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError("cannot open dataset for writing: " + path.string());
  os.write("IDDS", 4);
  put_u32(os, kDatasetVersion);
  put_u32(os, static_cast<uint32_t>(ds.count()));
  put_u32(os, static_cast<uint32_t>(ds.height()));
  put_u32(os, static_cast<uint32_t>(ds.width()));
  put_u32(os, static_cast<uint32_t>(ds.channels()));
  put_u32(os, static_cast<uint32_t>(ds.num_classes));
  for (int label : ds.labels) put_u32(os, static_cast<uint32_t>(label));
  auto v = ds.images.values();
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * 4));
  if (!os) throw LoadError("write failure on dataset: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open dataset: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "IDDS", 4) != 0) {
    throw LoadError("not an IDDS dataset file (bad magic): " + path.string());
  }
  const uint32_t version = get_u32(is, "version");
  if (version != kDatasetVersion) {
    throw LoadError("unsupported dataset version " + std::to_string(version));
  }
  const uint32_t n = get_u32(is, "sample count");
  const uint32_t h = get_u32(is, "height");
  const uint32_t w = get_u32(is, "width");
  const uint32_t c = get_u32(is, "channels");
  const uint32_t k = get_u32(is, "class count");
  constexpr uint32_t kMaxDim = 4096;
  if (n == 0 || h == 0 || w == 0 || c == 0 || k == 0 || n > (1u << 28) ||
      h > kMaxDim || w > kMaxDim || c > 64 || k > (1u << 20)) {
    throw LoadError("malformed dataset header (implausible field)");
  }
  // Exact size check up front: catches truncation, trailing bytes, and any
  // header mutation that changes the payload length, before allocating.
  const uint64_t expected_bytes =
      28ull + 4ull * n + 4ull * n * h * w * c;
  std::error_code ec;
  const uint64_t actual_bytes = std::filesystem::file_size(path, ec);
  if (ec) throw LoadError("cannot stat dataset: " + path.string());
  if (actual_bytes != expected_bytes) {
    throw LoadError("dataset size mismatch: header implies " +
                    std::to_string(expected_bytes) + " bytes, file has " +
                    std::to_string(actual_bytes));
  }

  Dataset ds;
  ds.num_classes = static_cast<int>(k);
  ds.labels.resize(n);
  std::vector<char> seen(k, 0);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t label = get_u32(is, "label");
    if (label >= k) {
      throw LoadError("label " + std::to_string(label) + " at index " +
                      std::to_string(i) + " out of range [0, " +
                      std::to_string(k) + ")");
    }
    ds.labels[i] = static_cast<int>(label);
    seen[label] = 1;
  }
  for (uint32_t cls = 0; cls < k; ++cls) {
    if (!seen[cls]) {
      throw LoadError("class " + std::to_string(cls) +
                      " declared in header but absent from labels");
    }
  }
  const std::size_t numel = static_cast<std::size_t>(n) * h * w * c;
  std::vector<float> pixels(numel);
  if (!is.read(reinterpret_cast<char*>(pixels.data()),
               static_cast<std::streamsize>(numel * 4))) {
    throw LoadError("dataset truncated: expected " + std::to_string(numel) +
                    " pixels");
  }
  is.peek();
  if (!is.eof()) throw LoadError("trailing bytes after dataset payload");
  for (std::size_t i = 0; i < numel; ++i) {
    if (!(pixels[i] >= 0.0f && pixels[i] <= 1.0f)) {
      throw LoadError("pixel value outside [0, 1] at flat index " +
                      std::to_string(i));
    }
  }
  ds.images = Tensor({static_cast<int>(n), static_cast<int>(h),
                      static_cast<int>(w), static_cast<int>(c)},
                     std::move(pixels));
  return ds;
}

Tensor bilinear_resize(const Tensor& image, int out_h, int out_w) {
  if (image.rank() != 3) {
    throw DimensionError("bilinear_resize expects [H x W x C], got " +
                         shape_str(image.shape()));
  }
  const int in_h = image.dim(0), in_w = image.dim(1), c = image.dim(2);
  if (in_h == out_h && in_w == out_w) return image.clone();
  Tensor out({out_h, out_w, c});
  auto vi = image.values();
  auto vo = out.values();
  const double sy = static_cast<double>(in_h) / out_h;
  const double sx = static_cast<double>(in_w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < c; ++ch) {
        auto px = [&](int y, int x) {
          return static_cast<double>(
              vi[(static_cast<std::size_t>(y) * in_w + x) * c + ch]);
        };
        const double top = px(y0, x0) * (1.0 - wx) + px(y0, x1) * wx;
        const double bot = px(y1, x0) * (1.0 - wx) + px(y1, x1) * wx;
        vo[(static_cast<std::size_t>(oy) * out_w + ox) * c + ch] =
            static_cast<float>(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Dataset resize_dataset(const Dataset& ds, int size) {
  if (ds.height() == size && ds.width() == size) return ds;
  Dataset out;
  out.labels = ds.labels;
  out.num_classes = ds.num_classes;
  out.split = ds.split;
  out.images = Tensor({ds.count(), size, size, ds.channels()});
  const std::size_t in_px =
      static_cast<std::size_t>(ds.height()) * ds.width() * ds.channels();
  const std::size_t out_px =
      static_cast<std::size_t>(size) * size * ds.channels();
  auto vi = ds.images.values();
  auto vo = out.images.values();
  for (int i = 0; i < ds.count(); ++i) {
    Tensor img({ds.height(), ds.width(), ds.channels()},
               std::vector<float>(vi.begin() + static_cast<std::ptrdiff_t>(i * in_px),
                                  vi.begin() + static_cast<std::ptrdiff_t>((i + 1) * in_px)));
    Tensor resized = bilinear_resize(img, size, size);
    auto vr = resized.values();
    std::copy(vr.begin(), vr.end(), vo.begin() + static_cast<std::ptrdiff_t>(i * out_px));
  }
  return out;
}

std::vector<Batch> make_batches(const Dataset& ds, int batch_size,
                                uint64_t seed, long epoch) {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (ds.count() < 1) throw UsageError("cannot batch an empty dataset");
  const int n = ds.count();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, stream::kBatchOrder + static_cast<uint64_t>(epoch));
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const std::size_t pixels =
      static_cast<std::size_t>(ds.height()) * ds.width() * ds.channels();
  auto vi = ds.images.values();
  std::vector<Batch> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    Batch batch;
    batch.images = Tensor({b, ds.height(), ds.width(), ds.channels()});
    batch.labels.resize(static_cast<std::size_t>(b));
    auto vo = batch.images.values();
    for (int i = 0; i < b; ++i) {
      const int src = order[static_cast<std::size_t>(start + i)];
      std::copy(vi.begin() + static_cast<std::ptrdiff_t>(src * pixels),
                vi.begin() + static_cast<std::ptrdiff_t>((src + 1) * pixels),
                vo.begin() + static_cast<std::ptrdiff_t>(i * pixels));
      batch.labels[static_cast<std::size_t>(i)] = ds.labels[static_cast<std::size_t>(src)];
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace idat
