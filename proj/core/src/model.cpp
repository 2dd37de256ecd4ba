#include "idat/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace idat {

namespace {
constexpr float kLayerNormEps = 1e-5f;
}

const char* to_string(AdapterVariant v) {
  switch (v) {
    case AdapterVariant::kSequential: return "sequential";
    case AdapterVariant::kParallel: return "parallel";
    case AdapterVariant::kParallelShared: return "parallel_shared";
  }
  return "?";
}

AdapterVariant adapter_variant_from_string(std::string_view s) {
  if (s == "sequential") return AdapterVariant::kSequential;
  if (s == "parallel") return AdapterVariant::kParallel;
  if (s == "parallel_shared") return AdapterVariant::kParallelShared;
  throw ConfigError("unknown adapter variant '" + std::string(s) +
                    "' (expected sequential|parallel|parallel_shared)");
}

void ViTConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || channels <= 0 || depth <= 0 ||
      width <= 0 || heads <= 0 || mlp_ratio <= 0 || num_classes <= 0) {
    throw ConfigError("ViT config fields must all be positive");
  }
  if (image_size % patch_size != 0) {
    throw ConfigError("image_size " + std::to_string(image_size) +
                      " not divisible by patch_size " + std::to_string(patch_size));
  }
  if (width % heads != 0) {
    throw ConfigError("width " + std::to_string(width) +
                      " not divisible by heads " + std::to_string(heads));
  }
}

bool is_adapter_param(std::string_view name) {
  return name.find(".adapter.") != std::string_view::npos;
}

bool is_head_param(std::string_view name) {
  return name.rfind("head.", 0) == 0;
}

Tensor patchify(const Tensor& images, int patch_size) {
  if (images.rank() != 3 && images.rank() != 4) {
    throw DimensionError("patchify expects [H x W x C] or [B x H x W x C], got " +
                         shape_str(images.shape()));
  }
  const bool batched = images.rank() == 4;
  const int batch = batched ? images.dim(0) : 1;
  const int h = images.dim(batched ? 1 : 0);
  const int w = images.dim(batched ? 2 : 1);
  const int c = images.dim(batched ? 3 : 2);
  if (h % patch_size != 0 || w % patch_size != 0) {
    throw DimensionError("image " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible into " + std::to_string(patch_size) +
                         "-pixel patches");
  }
  const int grid_h = h / patch_size, grid_w = w / patch_size;
  const int pdim = patch_size * patch_size * c;
  Tensor out({batch * grid_h * grid_w, pdim});
  auto vi = images.values();
  auto vo = out.values();
  std::size_t row = 0;
  for (int b = 0; b < batch; ++b) {
    const std::size_t img_off = static_cast<std::size_t>(b) * h * w * c;
    for (int py = 0; py < grid_h; ++py) {
      for (int px = 0; px < grid_w; ++px) {
        float* dst = vo.data() + row * pdim;
        for (int dy = 0; dy < patch_size; ++dy) {
          const std::size_t src = img_off +
              (static_cast<std::size_t>(py * patch_size + dy) * w +
               static_cast<std::size_t>(px) * patch_size) * c;
          std::copy(vi.begin() + static_cast<std::ptrdiff_t>(src),
                    vi.begin() + static_cast<std::ptrdiff_t>(src + static_cast<std::size_t>(patch_size) * c),
                    dst + static_cast<std::size_t>(dy) * patch_size * c);
        }
        ++row;
      }
    }
  }
  return out;
}

void Model::add_param(std::string name, Tensor t, bool trainable) {
  t.set_requires_grad(trainable);
  index_[name] = params_.size();
  params_.push_back(Parameter{std::move(name), std::move(t), trainable});
}

Parameter& Model::param(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw InternalError("unknown parameter '" + std::string(name) + "'");
  }
  return params_[it->second];
}

const Parameter& Model::param(std::string_view name) const {
  return const_cast<Model*>(this)->param(name);
}

bool Model::has_param(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

Model Model::build(const ViTConfig& config, Rng& rng) {
  config.validate();
  Model m;
  m.config_ = config;
  const int d = config.width;
  const int hid = config.mlp_hidden();

  auto normal_init = [&rng](std::vector<int> shape, float stddev) {
    Tensor t(std::move(shape));
    for (float& v : t.values()) v = rng.normal(0.0f, stddev);
    return t;
  };
  const float std0 = 0.02f;

  m.add_param("patch_embed.weight", normal_init({config.patch_dim(), d}, std0), true);
  m.add_param("patch_embed.bias", Tensor({d}), true);
  m.add_param("cls_token", normal_init({1, d}, std0), true);
  m.add_param("pos_embed", normal_init({config.token_count(), d}, std0), true);
  for (int b = 0; b < config.depth; ++b) {
    const std::string pre = "block." + std::to_string(b) + ".";
    m.add_param(pre + "ln1.gamma", Tensor::full({d}, 1.0f), true);
    m.add_param(pre + "ln1.beta", Tensor({d}), true);
    for (const char* which : {"wq", "wk", "wv", "wo"}) {
      m.add_param(pre + "attn." + which, normal_init({d, d}, std0), true);
    }
    for (const char* which : {"bq", "bk", "bv", "bo"}) {
      m.add_param(pre + "attn." + which, Tensor({d}), true);
    }
    m.add_param(pre + "ln2.gamma", Tensor::full({d}, 1.0f), true);
    m.add_param(pre + "ln2.beta", Tensor({d}), true);
    m.add_param(pre + "mlp.w1", normal_init({d, hid}, std0), true);
    m.add_param(pre + "mlp.b1", Tensor({hid}), true);
    m.add_param(pre + "mlp.w2", normal_init({hid, d}, std0), true);
    m.add_param(pre + "mlp.b2", Tensor({d}), true);
  }
  m.add_param("ln_final.gamma", Tensor::full({d}, 1.0f), true);
  m.add_param("ln_final.beta", Tensor({d}), true);
  m.add_param("head.weight", normal_init({d, config.num_classes}, std0), true);
  m.add_param("head.bias", Tensor({config.num_classes}), true);
  return m;
}

Tensor Model::adapter_apply(const Tensor& x, int block_index, Tape* tape) const {
  const std::string pre = "block." + std::to_string(block_index) + ".adapter.";
  Tensor h = add(matmul(x, p(pre + "w_down"), tape), p(pre + "b_down"), tape);
  h = gelu(h, tape);
  return add(matmul(h, p(pre + "w_up"), tape), p(pre + "b_up"), tape);
}

namespace {

// Per-image multi-head self-attention over a [B*T x d] token matrix.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int batch,
                 int tokens, int heads, Tape* tape) {
  const int d = q.dim(1);
  const int head_dim = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> per_image;
  per_image.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    Tensor qi = slice_rows(q, i * tokens, tokens, tape);
    Tensor ki = slice_rows(k, i * tokens, tokens, tape);
    Tensor vi = slice_rows(v, i * tokens, tokens, tape);
    std::vector<Tensor> per_head;
    per_head.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      Tensor qh = slice_cols(qi, h * head_dim, head_dim, tape);
      Tensor kh = slice_cols(ki, h * head_dim, head_dim, tape);
      Tensor vh = slice_cols(vi, h * head_dim, head_dim, tape);
      Tensor scores = scale(matmul(qh, transpose(kh, tape), tape), inv_sqrt, tape);
      Tensor weights = softmax(scores, 1, tape);
      per_head.push_back(matmul(weights, vh, tape));
    }
    per_image.push_back(concat(per_head, 1, tape));
  }
  return concat(per_image, 0, tape);
}

}  // namespace

Tensor Model::block_forward(const Tensor& tokens, int block_index, Tape* tape) const {
  if (block_index < 0 || block_index >= config_.depth) {
    throw UsageError("block index " + std::to_string(block_index) +
                     " out of range for depth " + std::to_string(config_.depth));
  }
  if (tokens.rank() != 2 || tokens.dim(1) != config_.width) {
    throw DimensionError("block_forward expects [T x " +
                         std::to_string(config_.width) + "] tokens, got " +
                         shape_str(tokens.shape()));
  }
  if (tokens.dim(0) % config_.token_count() != 0) {
    throw DimensionError("token rows must be a multiple of " +
                         std::to_string(config_.token_count()));
  }
  const int batch = tokens.dim(0) / config_.token_count();
  const int t = config_.token_count();
  const std::string pre = "block." + std::to_string(block_index) + ".";
  const AdapterVariant variant =
      adapter_ ? adapter_->variant : AdapterVariant::kSequential;
  const bool has_adapter = adapter_.has_value();
  const double s = has_adapter ? adapter_->scaling : 0.0;

  Tensor a = layer_norm(tokens, p(pre + "ln1.gamma"), p(pre + "ln1.beta"),
                        kLayerNormEps, tape);
  Tensor q = add(matmul(a, p(pre + "attn.wq"), tape), p(pre + "attn.bq"), tape);
  Tensor k = add(matmul(a, p(pre + "attn.wk"), tape), p(pre + "attn.bk"), tape);
  Tensor v = add(matmul(a, p(pre + "attn.wv"), tape), p(pre + "attn.bv"), tape);
  Tensor o = attention(q, k, v, batch, t, config_.heads, tape);
  o = add(matmul(o, p(pre + "attn.wo"), tape), p(pre + "attn.bo"), tape);

  Tensor y;
  if (has_adapter && variant == AdapterVariant::kParallelShared) {
    y = add(add(tokens, o, tape),
            scale(adapter_apply(a, block_index, tape), s, tape), tape);
  } else {
    y = add(tokens, o, tape);
  }

  Tensor b = layer_norm(y, p(pre + "ln2.gamma"), p(pre + "ln2.beta"),
                        kLayerNormEps, tape);
  Tensor h = add(matmul(b, p(pre + "mlp.w1"), tape), p(pre + "mlp.b1"), tape);
  h = gelu(h, tape);
  Tensor mlp_out = add(matmul(h, p(pre + "mlp.w2"), tape), p(pre + "mlp.b2"), tape);

  if (!has_adapter) return add(y, mlp_out, tape);
  switch (variant) {
    case AdapterVariant::kSequential: {
      Tensor adapted = add(adapter_apply(mlp_out, block_index, tape), mlp_out, tape);
      return add(y, adapted, tape);
    }
    case AdapterVariant::kParallel:
    case AdapterVariant::kParallelShared:
      return add(add(y, mlp_out, tape),
                 scale(adapter_apply(b, block_index, tape), s, tape), tape);
  }
  throw ConfigError("unknown adapter variant");
}

Tensor Model::patch_embed(const Tensor& image, Tape* tape) const {
  if (image.rank() != 3) {
    throw DimensionError("patch_embed expects a single [H x W x C] image, got " +
                         shape_str(image.shape()));
  }
  return embed_tokens(image, tape);
}

Tensor Model::embed_tokens(const Tensor& images, Tape* tape) const {
  const bool batched = images.rank() == 4;
  const int batch = batched ? images.dim(0) : 1;
  const int h = images.dim(batched ? 1 : 0);
  const int w = images.dim(batched ? 2 : 1);
  const int c = images.dim(batched ? 3 : 2);
  if (h != config_.image_size || w != config_.image_size || c != config_.channels) {
    throw DimensionError("expected " + std::to_string(config_.image_size) + "x" +
                         std::to_string(config_.image_size) + "x" +
                         std::to_string(config_.channels) + " images, got " +
                         shape_str(images.shape()));
  }
  const int n = config_.patch_count();
  Tensor patches = patchify(images, config_.patch_size);
  Tensor projected = add(matmul(patches, p("patch_embed.weight"), tape),
                         p("patch_embed.bias"), tape);
  Tensor cls = p("cls_token");
  std::vector<Tensor> pieces;
  pieces.reserve(static_cast<std::size_t>(batch) * 2);
  for (int i = 0; i < batch; ++i) {
    pieces.push_back(cls);
    pieces.push_back(slice_rows(projected, i * n, n, tape));
  }
  Tensor tokens = concat(pieces, 0, tape);
  Tensor pos = p("pos_embed");
  std::vector<Tensor> pos_tiles(static_cast<std::size_t>(batch), pos);
  return add(tokens, concat(pos_tiles, 0, tape), tape);
}

Tensor Model::forward(const Tensor& images, Tape* tape) const {
  if (images.rank() != 3 && images.rank() != 4) {
    throw DimensionError("forward expects [B x H x W x C] or [H x W x C], got " +
                         shape_str(images.shape()));
  }
  const int batch = images.rank() == 4 ? images.dim(0) : 1;
  const int t = config_.token_count();
  Tensor x = embed_tokens(images, tape);
  for (int b = 0; b < config_.depth; ++b) x = block_forward(x, b, tape);
  x = layer_norm(x, p("ln_final.gamma"), p("ln_final.beta"), kLayerNormEps, tape);
  std::vector<Tensor> cls_rows;
  cls_rows.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) cls_rows.push_back(slice_rows(x, i * t, 1, tape));
  Tensor cls = batch == 1 ? cls_rows[0] : concat(cls_rows, 0, tape);
  return add(matmul(cls, p("head.weight"), tape), p("head.bias"), tape);
}

void Model::inject_adapters(const AdapterSpec& spec, Rng& rng) {
  if (adapter_.has_value()) {
    throw UsageError("adapters already injected into this model");
  }
  if (spec.hidden_dim < 1 || spec.hidden_dim >= config_.width) {
    throw ConfigError("adapter hidden_dim must satisfy 1 <= d' < width, got " +
                      std::to_string(spec.hidden_dim) + " for width " +
                      std::to_string(config_.width));
  }
  const int d = config_.width;
  const float bound = 1.0f / std::sqrt(static_cast<float>(d));
  for (int b = 0; b < config_.depth; ++b) {
    const std::string pre = "block." + std::to_string(b) + ".adapter.";
    Tensor w_down({d, spec.hidden_dim});
    for (float& v : w_down.values()) v = rng.uniform(-bound, bound);
    add_param(pre + "w_down", std::move(w_down), true);
    add_param(pre + "b_down", Tensor({spec.hidden_dim}), true);
    add_param(pre + "w_up", Tensor({spec.hidden_dim, d}), true);
    add_param(pre + "b_up", Tensor({d}), true);
  }
  adapter_ = spec;
  freeze_backbone();
}

void Model::freeze_backbone() {
  for (Parameter& prm : params_) {
    const bool keep = is_head_param(prm.name) || is_adapter_param(prm.name);
    prm.trainable = keep;
    prm.tensor.set_requires_grad(keep);
  }
}

void Model::reinit_head(Rng& rng) {
  Tensor& w = param("head.weight").tensor;
  for (float& v : w.values()) v = rng.normal(0.0f, 0.02f);
  Tensor& b = param("head.bias").tensor;
  for (float& v : b.values()) v = 0.0f;
}

TrainableCount Model::trainable_param_count() const {
  TrainableCount c;
  for (const Parameter& prm : params_) {
    if (!prm.trainable) continue;
    const auto n = static_cast<long long>(prm.tensor.size());
    c.total += n;
    if (is_adapter_param(prm.name)) {
      c.adapters += n;
    } else if (is_head_param(prm.name)) {
      c.head += n;
    } else {
      c.other += n;
    }
  }
  return c;
}

void Model::zero_grads() {
  for (Parameter& prm : params_) {
    if (prm.trainable) {
      prm.tensor.ensure_grad();
      prm.tensor.zero_grad();
    }
  }
}

Model Model::clone() const {
  Model m;
  m.config_ = config_;
  m.adapter_ = adapter_;
  m.params_.reserve(params_.size());
  for (const Parameter& prm : params_) {
    m.index_[prm.name] = m.params_.size();
    m.params_.push_back(Parameter{prm.name, prm.tensor.clone(), prm.trainable});
  }
  return m;
}

}  // namespace idat
