#include "idat/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace idat {
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
    throw LoadError(std::string("checkpoint truncated while reading ") + what);
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, std::span<const float> values) {
  static_assert(sizeof(float) == 4);
  // Floats are stored little-endian; this build targets LE hosts.
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size() * 4));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter> params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError("cannot open checkpoint for writing: " + path.string());
  os.write("IDAT", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<uint32_t>(params.size()));
  for (const Parameter& p : params) {
    put_u32(os, static_cast<uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.tensor.shape();
    put_u32(os, static_cast<uint32_t>(shape.size()));
    for (int d : shape) put_u32(os, static_cast<uint32_t>(d));
    const unsigned char flag = p.trainable ? 1 : 0;
    os.write(reinterpret_cast<const char*>(&flag), 1);
    put_f32(os, p.tensor.values());
  }
  if (!os) throw LoadError("write failure on checkpoint: " + path.string());
}

std::vector<Parameter> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "IDAT", 4) != 0) {
    throw LoadError("not a checkpoint file (bad magic): " + path.string());
  }
  const uint32_t version = get_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version) +
                    " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const uint32_t count = get_u32(is, "parameter count");
  std::vector<Parameter> params;
  params.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(is, "name length");
    if (name_len == 0 || name_len > 4096) {
      throw LoadError("implausible parameter name length " + std::to_string(name_len));
    }
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      throw LoadError("checkpoint truncated while reading a name");
    }
    const uint32_t rank = get_u32(is, "rank");
    if (rank == 0 || rank > 8) {
      throw LoadError("implausible tensor rank " + std::to_string(rank) +
                      " for parameter '" + name + "'");
    }
    std::vector<int> shape(rank);
    std::size_t numel = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      const uint32_t d = get_u32(is, "dimension");
      if (d == 0 || d > (1u << 28)) {
        throw LoadError("implausible dimension for parameter '" + name + "'");
      }
      shape[r] = static_cast<int>(d);
      numel *= d;
    }
    unsigned char flag = 0;
    if (!is.read(reinterpret_cast<char*>(&flag), 1)) {
      throw LoadError("checkpoint truncated while reading the trainable flag");
    }
    std::vector<float> data(numel);
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(numel * 4))) {
      throw LoadError("checkpoint truncated while reading data for '" + name + "'");
    }
    params.push_back(Parameter{std::move(name),
                               Tensor(std::move(shape), std::move(data)),
                               flag != 0});
  }
  is.peek();
  if (!is.eof()) throw LoadError("trailing bytes after checkpoint payload");
  return params;
}

void load_into_model(Model& model, const std::vector<Parameter>& params,
                     bool strict) {
  std::size_t matched = 0;
  for (const Parameter& src : params) {
    if (!model.has_param(src.name)) {
      throw LoadError("checkpoint parameter '" + src.name +
                      "' does not exist in the target model");
    }
    Parameter& dst = model.param(src.name);
    if (dst.tensor.shape() != src.tensor.shape()) {
      throw LoadError("shape mismatch for '" + src.name + "': model " +
                      shape_str(dst.tensor.shape()) + " vs checkpoint " +
                      shape_str(src.tensor.shape()));
    }
    auto out = dst.tensor.values();
    auto in = src.tensor.values();
    std::copy(in.begin(), in.end(), out.begin());
    dst.trainable = src.trainable;
    dst.tensor.set_requires_grad(src.trainable);
    ++matched;
  }
  if (strict && matched != model.parameters().size()) {
    throw LoadError("checkpoint covers " + std::to_string(matched) + " of " +
                    std::to_string(model.parameters().size()) +
                    " model parameters");
  }
}

}  // namespace idat
