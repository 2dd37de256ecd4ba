#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "idat/ops.hpp"
#include "idat/rng.hpp"
#include "idat/tensor.hpp"

namespace idat {

enum class AdapterVariant { kSequential, kParallel, kParallelShared };

const char* to_string(AdapterVariant v);
AdapterVariant adapter_variant_from_string(std::string_view s);

// Bottleneck adapter configuration: down-projection to hidden_dim, GELU,
// up-projection back to the block width. scaling applies to the parallel
// variants only.
struct AdapterSpec {
  AdapterVariant variant = AdapterVariant::kParallel;
  int hidden_dim = 4;
  float scaling = 0.1f;
};

struct ViTConfig {
  int image_size = 32;
  int patch_size = 8;
  int channels = 3;
  int depth = 4;
  int width = 64;
  int heads = 4;
  int mlp_ratio = 4;
  int num_classes = 10;

  void validate() const;
  int patch_count() const { return (image_size / patch_size) * (image_size / patch_size); }
  int token_count() const { return patch_count() + 1; }  // + CLS
  int patch_dim() const { return patch_size * patch_size * channels; }
  int mlp_hidden() const { return mlp_ratio * width; }
};

struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

struct TrainableCount {
  long long total = 0;
  long long adapters = 0;
  long long head = 0;
  long long other = 0;
};

// Pre-norm Vision Transformer classifier over square images. Tokens are
// non-overlapping patches plus a learned CLS token; the CLS row of the final
// layer feeds a linear head. Adapters are injected per inject_adapters and
// follow one of three wirings inside each block:
//   sequential:       z = y + (A(h) + h),  h = MLP(LN2(y))
//   parallel:         z = y + MLP(LN2(y)) + s*A(LN2(y))
//   parallel_shared:  y = x + MHSA(LN1(x)) + s*A(LN1(x));
//                     z = y + MLP(LN2(y)) + s*A(LN2(y))   (one A per block)
// with A(u) = W_up(gelu(W_down(u))) throughout.
class Model {
 public:
  static Model build(const ViTConfig& config, Rng& rng);

  const ViTConfig& config() const { return config_; }
  const std::optional<AdapterSpec>& adapter_spec() const { return adapter_; }

  // Logits for a [B x H x W x C] batch (or a single [H x W x C] image).
  Tensor forward(const Tensor& images, Tape* tape = nullptr) const;

  // Token embedding of a single [H x W x C] image: [(N+1) x width].
  Tensor patch_embed(const Tensor& image, Tape* tape = nullptr) const;

  // One transformer block applied to a [T x width] token matrix.
  Tensor block_forward(const Tensor& tokens, int block_index,
                       Tape* tape = nullptr) const;

  // Creates adapter parameters in every block, freezes the backbone, keeps
  // the head trainable. W_down ~ U(-1/sqrt(width), 1/sqrt(width)); W_up and
  // both biases start at zero so the injected model computes the same
  // function as the frozen one.
  void inject_adapters(const AdapterSpec& spec, Rng& rng);

  // Marks every parameter outside the classification head non-trainable.
  void freeze_backbone();

  // Replaces head weights with a fresh initialization (used when moving a
  // pretrained backbone to a new task).
  void reinit_head(Rng& rng);

  TrainableCount trainable_param_count() const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  Parameter& param(std::string_view name);
  const Parameter& param(std::string_view name) const;
  bool has_param(std::string_view name) const;

  void zero_grads();

  Model clone() const;

 private:
  Model() = default;

  Tensor p(const std::string& name) const { return param(name).tensor; }
  Tensor adapter_apply(const Tensor& x, int block_index, Tape* tape) const;
  Tensor embed_tokens(const Tensor& images, Tape* tape) const;
  void add_param(std::string name, Tensor t, bool trainable);

  ViTConfig config_;
  std::optional<AdapterSpec> adapter_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Rearranges one [H x W x C] image (or a [B x H x W x C] batch) into patch
// rows: token (py, px) flattened row-major as (dy, dx, c). Pure data
// movement; not recorded on any tape.
Tensor patchify(const Tensor& images, int patch_size);

bool is_adapter_param(std::string_view name);
bool is_head_param(std::string_view name);

}  // namespace idat
