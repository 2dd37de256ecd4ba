#include "idat/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>

namespace idat {
namespace {

using Impl = detail::TensorImpl;
using ImplPtr = std::shared_ptr<Impl>;

void ensure_grad_buf(Impl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0f);
}

void check_finite(const char* op, const Tensor& t) {
  for (float v : t.values()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
  }
}

bool recording(Tape* tape, const Tensor& a) {
  return tape != nullptr && a.requires_grad();
}
bool recording(Tape* tape, const Tensor& a, const Tensor& b) {
  return tape != nullptr && (a.requires_grad() || b.requires_grad());
}

void require_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + " requires rank-" +
                         std::to_string(rank) + " input, got " +
                         shape_str(t.shape()));
  }
}

enum class Pairing { kSame, kScalarRhs, kScalarLhs, kBiasRow };

// Classifies the allowed broadcast forms for binary elementwise ops.
Pairing classify(const char* op, const Tensor& a, const Tensor& b,
                 bool allow_bias) {
  if (a.shape() == b.shape()) return Pairing::kSame;
  if (b.size() == 1) return Pairing::kScalarRhs;
  if (a.size() == 1) return Pairing::kScalarLhs;
  if (allow_bias && a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1)) {
    return Pairing::kBiasRow;
  }
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out({m, n});
  {
    const float* pa = a.values().data();
    const float* pb = b.values().data();
    float* po = out.values().data();
    std::vector<double> acc(static_cast<std::size_t>(n));
    for (int i = 0; i < m; ++i) {
      acc.assign(static_cast<std::size_t>(n), 0.0);
      const float* arow = pa + static_cast<std::size_t>(i) * k;
      for (int kk = 0; kk < k; ++kk) {
        const double aik = arow[kk];
        const float* brow = pb + static_cast<std::size_t>(kk) * n;
        for (int j = 0; j < n; ++j) acc[static_cast<std::size_t>(j)] += aik * brow[j];
      }
      float* orow = po + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] = static_cast<float>(acc[static_cast<std::size_t>(j)]);
    }
  }
  check_finite("matmul", out);

  if (recording(tape, a, b)) {
    out.set_requires_grad(true);
    ImplPtr ia = a.impl(), ib = b.impl(), io = out.impl();
    tape->record([ia, ib, io, m, k, n] {
      if (io->grad.empty()) return;
      const float* g = io->grad.data();
      if (ia->requires_grad) {
        ensure_grad_buf(*ia);
        // dA = g * B^T
        for (int i = 0; i < m; ++i) {
          const float* grow = g + static_cast<std::size_t>(i) * n;
          float* garow = ia->grad.data() + static_cast<std::size_t>(i) * k;
          for (int kk = 0; kk < k; ++kk) {
            const float* brow = ib->data.data() + static_cast<std::size_t>(kk) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += static_cast<double>(grow[j]) * brow[j];
            garow[kk] += static_cast<float>(acc);
          }
        }
      }
      if (ib->requires_grad) {
        ensure_grad_buf(*ib);
        // dB = A^T * g
        for (int kk = 0; kk < k; ++kk) {
          float* gbrow = ib->grad.data() + static_cast<std::size_t>(kk) * n;
          std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
          for (int i = 0; i < m; ++i) {
            const double aik = ia->data[static_cast<std::size_t>(i) * k + kk];
            const float* grow = g + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) acc[static_cast<std::size_t>(j)] += aik * grow[j];
          }
          for (int j = 0; j < n; ++j) gbrow[j] += static_cast<float>(acc[static_cast<std::size_t>(j)]);
        }
      }
    });
  }
  return out;
}

namespace {

// Shared skeleton for add/subtract. sign is +1 or -1 on b.
Tensor add_like(const char* op, const Tensor& a, const Tensor& b, double sign,
                Tape* tape) {
  const Pairing p = classify(op, a, b, /*allow_bias=*/true);
  Tensor out;
  switch (p) {
    case Pairing::kSame: {
      out = Tensor(a.shape());
      auto va = a.values(), vb = b.values();
      auto vo = out.values();
      for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = static_cast<float>(va[i] + sign * vb[i]);
      }
      break;
    }
    case Pairing::kScalarRhs: {
      out = Tensor(a.shape());
      const double b0 = sign * b.values()[0];
      auto va = a.values();
      auto vo = out.values();
      for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = static_cast<float>(va[i] + b0);
      }
      break;
    }
    case Pairing::kScalarLhs: {
      out = Tensor(b.shape());
      const double a0 = a.values()[0];
      auto vb = b.values();
      auto vo = out.values();
      for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = static_cast<float>(a0 + sign * vb[i]);
      }
      break;
    }
    case Pairing::kBiasRow: {
      out = Tensor(a.shape());
      const int rows = a.dim(0), cols = a.dim(1);
      auto va = a.values(), vb = b.values();
      auto vo = out.values();
      for (int i = 0; i < rows; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) {
          vo[off + j] = static_cast<float>(va[off + j] + sign * vb[static_cast<std::size_t>(j)]);
        }
      }
      break;
    }
  }
  check_finite(op, out);

  if (recording(tape, a, b)) {
    out.set_requires_grad(true);
    ImplPtr ia = a.impl(), ib = b.impl(), io = out.impl();
    tape->record([ia, ib, io, p, sign] {
      if (io->grad.empty()) return;
      const auto& g = io->grad;
      if (ia->requires_grad) {
        ensure_grad_buf(*ia);
        if (p == Pairing::kScalarLhs) {
          double acc = 0.0;
          for (float gv : g) acc += gv;
          ia->grad[0] += static_cast<float>(acc);
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) ia->grad[i] += g[i];
        }
      }
      if (ib->requires_grad) {
        ensure_grad_buf(*ib);
        switch (p) {
          case Pairing::kSame:
          case Pairing::kScalarLhs:
            for (std::size_t i = 0; i < g.size(); ++i) {
              ib->grad[i] += static_cast<float>(sign * g[i]);
            }
            break;
          case Pairing::kScalarRhs: {
            double acc = 0.0;
            for (float gv : g) acc += gv;
            ib->grad[0] += static_cast<float>(sign * acc);
            break;
          }
          case Pairing::kBiasRow: {
            const std::size_t cols = ib->data.size();
            const std::size_t rows = g.size() / cols;
            for (std::size_t j = 0; j < cols; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < rows; ++i) acc += g[i * cols + j];
              ib->grad[j] += static_cast<float>(sign * acc);
            }
            break;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  return add_like("add", a, b, +1.0, tape);
}

Tensor subtract(const Tensor& a, const Tensor& b, Tape* tape) {
  return add_like("subtract", a, b, -1.0, tape);
}

Tensor multiply(const Tensor& a, const Tensor& b, Tape* tape) {
  const Pairing p = classify("multiply", a, b, /*allow_bias=*/false);
  Tensor out(p == Pairing::kScalarLhs ? b.shape() : a.shape());
  {
    auto vo = out.values();
    if (p == Pairing::kSame) {
      auto va = a.values(), vb = b.values();
      for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = static_cast<float>(static_cast<double>(va[i]) * vb[i]);
      }
    } else if (p == Pairing::kScalarRhs) {
      const double b0 = b.values()[0];
      auto va = a.values();
      for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = static_cast<float>(va[i] * b0);
      }
    } else {
      const double a0 = a.values()[0];
      auto vb = b.values();
      for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = static_cast<float>(a0 * vb[i]);
      }
    }
  }
  check_finite("multiply", out);

  if (recording(tape, a, b)) {
    out.set_requires_grad(true);
    ImplPtr ia = a.impl(), ib = b.impl(), io = out.impl();
    tape->record([ia, ib, io, p] {
      if (io->grad.empty()) return;
      const auto& g = io->grad;
      if (ia->requires_grad) {
        ensure_grad_buf(*ia);
        if (p == Pairing::kSame) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            ia->grad[i] += static_cast<float>(static_cast<double>(g[i]) * ib->data[i]);
          }
        } else if (p == Pairing::kScalarRhs) {
          const double b0 = ib->data[0];
          for (std::size_t i = 0; i < g.size(); ++i) {
            ia->grad[i] += static_cast<float>(g[i] * b0);
          }
        } else {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) {
            acc += static_cast<double>(g[i]) * ib->data[i];
          }
          ia->grad[0] += static_cast<float>(acc);
        }
      }
      if (ib->requires_grad) {
        ensure_grad_buf(*ib);
        if (p == Pairing::kSame) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            ib->grad[i] += static_cast<float>(static_cast<double>(g[i]) * ia->data[i]);
          }
        } else if (p == Pairing::kScalarLhs) {
          const double a0 = ia->data[0];
          for (std::size_t i = 0; i < g.size(); ++i) {
            ib->grad[i] += static_cast<float>(g[i] * a0);
          }
        } else {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) {
            acc += static_cast<double>(g[i]) * ia->data[i];
          }
          ib->grad[0] += static_cast<float>(acc);
        }
      }
    });
  }
  return out;
}

Tensor divide(const Tensor& a, const Tensor& b, Tape* tape) {
  Pairing p = classify("divide", a, b, /*allow_bias=*/false);
  if (p == Pairing::kScalarLhs && a.size() == 1 && b.size() == 1) p = Pairing::kSame;
  if (p == Pairing::kScalarLhs) {
    throw DimensionError("divide: scalar numerator over a tensor is not supported");
  }
  Tensor out(a.shape());
  {
    auto va = a.values(), vb = b.values();
    auto vo = out.values();
    if (p == Pairing::kSame) {
      for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = static_cast<float>(static_cast<double>(va[i]) / vb[i]);
      }
    } else {
      const double b0 = vb[0];
      for (std::size_t i = 0; i < vo.size(); ++i) {
        vo[i] = static_cast<float>(va[i] / b0);
      }
    }
  }
  check_finite("divide", out);

  if (recording(tape, a, b)) {
    out.set_requires_grad(true);
    ImplPtr ia = a.impl(), ib = b.impl(), io = out.impl();
    tape->record([ia, ib, io, p] {
      if (io->grad.empty()) return;
      const auto& g = io->grad;
      if (ia->requires_grad) {
        ensure_grad_buf(*ia);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double bi = ib->data[p == Pairing::kSame ? i : 0];
          ia->grad[i] += static_cast<float>(g[i] / bi);
        }
      }
      if (ib->requires_grad) {
        ensure_grad_buf(*ib);
        if (p == Pairing::kSame) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double bi = ib->data[i];
            ib->grad[i] += static_cast<float>(-static_cast<double>(g[i]) * ia->data[i] / (bi * bi));
          }
        } else {
          const double b0 = ib->data[0];
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) {
            acc += -static_cast<double>(g[i]) * ia->data[i];
          }
          ib->grad[0] += static_cast<float>(acc / (b0 * b0));
        }
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double c, Tape* tape) {
  Tensor out(x.shape());
  {
    auto vx = x.values();
    auto vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) {
      vo[i] = static_cast<float>(vx[i] * c);
    }
  }
  check_finite("scale", out);
  if (recording(tape, x)) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), io = out.impl();
    tape->record([ix, io, c] {
      if (io->grad.empty()) return;
      ensure_grad_buf(*ix);
      for (std::size_t i = 0; i < io->grad.size(); ++i) {
        ix->grad[i] += static_cast<float>(io->grad[i] * c);
      }
    });
  }
  return out;
}

namespace {

// Shared shell for unary elementwise ops with a value-and-slope kernel.
template <typename Fwd, typename Bwd>
Tensor unary_op(const char* op, const Tensor& x, Tape* tape, Fwd fwd, Bwd bwd) {
  Tensor out(x.shape());
  {
    auto vx = x.values();
    auto vo = out.values();
    for (std::size_t i = 0; i < vo.size(); ++i) {
      vo[i] = static_cast<float>(fwd(static_cast<double>(vx[i])));
    }
  }
  check_finite(op, out);
  if (recording(tape, x)) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), io = out.impl();
    tape->record([ix, io, bwd] {
      if (io->grad.empty()) return;
      ensure_grad_buf(*ix);
      for (std::size_t i = 0; i < io->grad.size(); ++i) {
        ix->grad[i] += static_cast<float>(
            io->grad[i] * bwd(static_cast<double>(ix->data[i]),
                              static_cast<double>(io->data[i])));
      }
    });
  }
  return out;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor log(const Tensor& x, Tape* tape) {
  return unary_op(
      "log", x, tape, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x, Tape* tape) {
  return unary_op(
      "sqrt", x, tape, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& x, Tape* tape) {
  return unary_op(
      "abs", x, tape, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor gelu(const Tensor& x, Tape* tape) {
  return unary_op(
      "gelu", x, tape,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        const double phi_cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return phi_cdf + v * phi_pdf;
      });
}

namespace {

// Slice view over a rank-1 or rank-2 tensor for axis reductions:
// count slices, each of length len with the given stride.
struct SliceIter {
  std::size_t count, len, base_stride, elem_stride;
};

SliceIter slices_for(const char* op, const Tensor& x, int axis) {
  if (x.rank() == 1) {
    if (axis != 0) {
      throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                           " invalid for shape " + shape_str(x.shape()));
    }
    return {1, static_cast<std::size_t>(x.dim(0)), 0, 1};
  }
  if (x.rank() != 2 || (axis != 0 && axis != 1)) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " invalid for shape " + shape_str(x.shape()));
  }
  const auto rows = static_cast<std::size_t>(x.dim(0));
  const auto cols = static_cast<std::size_t>(x.dim(1));
  if (axis == 1) return {rows, cols, cols, 1};
  return {cols, rows, 1, cols};
}

template <bool LogForm>
Tensor softmax_impl(const char* op, const Tensor& x, int axis, Tape* tape) {
  const SliceIter it = slices_for(op, x, axis);
  Tensor out(x.shape());
  {
    auto vx = x.values();
    auto vo = out.values();
    for (std::size_t s = 0; s < it.count; ++s) {
      const std::size_t base = s * it.base_stride;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < it.len; ++j) {
        mx = std::max(mx, static_cast<double>(vx[base + j * it.elem_stride]));
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < it.len; ++j) {
        denom += std::exp(static_cast<double>(vx[base + j * it.elem_stride]) - mx);
      }
      if constexpr (LogForm) {
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < it.len; ++j) {
          const std::size_t idx = base + j * it.elem_stride;
          vo[idx] = static_cast<float>(static_cast<double>(vx[idx]) - lse);
        }
      } else {
        for (std::size_t j = 0; j < it.len; ++j) {
          const std::size_t idx = base + j * it.elem_stride;
          vo[idx] = static_cast<float>(
              std::exp(static_cast<double>(vx[idx]) - mx) / denom);
        }
      }
    }
  }
  check_finite(op, out);

  if (recording(tape, x)) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), io = out.impl();
    tape->record([ix, io, it] {
      if (io->grad.empty()) return;
      ensure_grad_buf(*ix);
      const auto& g = io->grad;
      const auto& y = io->data;
      for (std::size_t s = 0; s < it.count; ++s) {
        const std::size_t base = s * it.base_stride;
        if constexpr (LogForm) {
          // dx = g - softmax(x) * sum(g); softmax = exp(saved output)
          double gsum = 0.0;
          for (std::size_t j = 0; j < it.len; ++j) {
            gsum += g[base + j * it.elem_stride];
          }
          for (std::size_t j = 0; j < it.len; ++j) {
            const std::size_t idx = base + j * it.elem_stride;
            ix->grad[idx] += static_cast<float>(
                g[idx] - std::exp(static_cast<double>(y[idx])) * gsum);
          }
        } else {
          // dx = y * (g - sum(g * y))
          double dot = 0.0;
          for (std::size_t j = 0; j < it.len; ++j) {
            const std::size_t idx = base + j * it.elem_stride;
            dot += static_cast<double>(g[idx]) * y[idx];
          }
          for (std::size_t j = 0; j < it.len; ++j) {
            const std::size_t idx = base + j * it.elem_stride;
            ix->grad[idx] += static_cast<float>(
                static_cast<double>(y[idx]) * (g[idx] - dot));
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis, Tape* tape) {
  return softmax_impl<false>("softmax", x, axis, tape);
}

Tensor log_softmax(const Tensor& x, int axis, Tape* tape) {
  return softmax_impl<true>("log_softmax", x, axis, tape);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps, Tape* tape) {
  require_rank("layer_norm", x, 2);
  require_rank("layer_norm", gamma, 1);
  require_rank("layer_norm", beta, 1);
  const int rows = x.dim(0), cols = x.dim(1);
  if (gamma.dim(0) != cols || beta.dim(0) != cols) {
    throw DimensionError("layer_norm: gamma/beta length must equal last axis " +
                         std::to_string(cols));
  }
  Tensor out({rows, cols});
  auto xhat = std::make_shared<std::vector<float>>(x.size());
  auto inv_std = std::make_shared<std::vector<float>>(static_cast<std::size_t>(rows));
  {
    auto vx = x.values();
    auto vg = gamma.values();
    auto vb = beta.values();
    auto vo = out.values();
    for (int i = 0; i < rows; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * cols;
      double mean = 0.0;
      for (int j = 0; j < cols; ++j) mean += vx[off + j];
      mean /= cols;
      double var = 0.0;
      for (int j = 0; j < cols; ++j) {
        const double d = vx[off + j] - mean;
        var += d * d;
      }
      var /= cols;
      const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
      (*inv_std)[static_cast<std::size_t>(i)] = static_cast<float>(inv);
      for (int j = 0; j < cols; ++j) {
        const double xh = (vx[off + j] - mean) * inv;
        (*xhat)[off + j] = static_cast<float>(xh);
        vo[off + j] = static_cast<float>(xh * vg[static_cast<std::size_t>(j)] +
                                         vb[static_cast<std::size_t>(j)]);
      }
    }
  }
  check_finite("layer_norm", out);

  if (tape != nullptr &&
      (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), ig = gamma.impl(), ib = beta.impl(), io = out.impl();
    tape->record([ix, ig, ib, io, xhat, inv_std, rows, cols] {
      if (io->grad.empty()) return;
      const auto& g = io->grad;
      if (ix->requires_grad) {
        ensure_grad_buf(*ix);
        for (int i = 0; i < rows; ++i) {
          const std::size_t off = static_cast<std::size_t>(i) * cols;
          double m1 = 0.0, m2 = 0.0;
          for (int j = 0; j < cols; ++j) {
            const double dyg = static_cast<double>(g[off + j]) * ig->data[static_cast<std::size_t>(j)];
            m1 += dyg;
            m2 += dyg * (*xhat)[off + j];
          }
          m1 /= cols;
          m2 /= cols;
          const double inv = (*inv_std)[static_cast<std::size_t>(i)];
          for (int j = 0; j < cols; ++j) {
            const double dyg = static_cast<double>(g[off + j]) * ig->data[static_cast<std::size_t>(j)];
            ix->grad[off + j] += static_cast<float>(
                inv * (dyg - m1 - (*xhat)[off + j] * m2));
          }
        }
      }
      if (ig->requires_grad) {
        ensure_grad_buf(*ig);
        for (int j = 0; j < cols; ++j) {
          double acc = 0.0;
          for (int i = 0; i < rows; ++i) {
            const std::size_t idx = static_cast<std::size_t>(i) * cols + j;
            acc += static_cast<double>(g[idx]) * (*xhat)[idx];
          }
          ig->grad[static_cast<std::size_t>(j)] += static_cast<float>(acc);
        }
      }
      if (ib->requires_grad) {
        ensure_grad_buf(*ib);
        for (int j = 0; j < cols; ++j) {
          double acc = 0.0;
          for (int i = 0; i < rows; ++i) {
            acc += g[static_cast<std::size_t>(i) * cols + j];
          }
          ib->grad[static_cast<std::size_t>(j)] += static_cast<float>(acc);
        }
      }
    });
  }
  return out;
}

namespace {

Tensor reduce_all(const char* op, const Tensor& x, bool mean, Tape* tape) {
  double acc = 0.0;
  for (float v : x.values()) acc += v;
  const double denom = mean ? static_cast<double>(x.size()) : 1.0;
  Tensor out = Tensor::scalar(static_cast<float>(acc / denom));
  check_finite(op, out);
  if (recording(tape, x)) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), io = out.impl();
    tape->record([ix, io, denom] {
      if (io->grad.empty()) return;
      ensure_grad_buf(*ix);
      const double g = io->grad[0] / denom;
      for (std::size_t i = 0; i < ix->grad.size(); ++i) {
        ix->grad[i] += static_cast<float>(g);
      }
    });
  }
  return out;
}

}  // namespace

Tensor mean_all(const Tensor& x, Tape* tape) {
  return reduce_all("mean_all", x, /*mean=*/true, tape);
}

Tensor sum_all(const Tensor& x, Tape* tape) {
  return reduce_all("sum_all", x, /*mean=*/false, tape);
}

Tensor sum_axis(const Tensor& x, int axis, Tape* tape) {
  require_rank("sum_axis", x, 2);
  if (axis != 0 && axis != 1) {
    throw DimensionError("sum_axis: axis must be 0 or 1");
  }
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor out(axis == 1 ? std::vector<int>{rows, 1} : std::vector<int>{1, cols});
  {
    auto vx = x.values();
    auto vo = out.values();
    if (axis == 1) {
      for (int i = 0; i < rows; ++i) {
        double acc = 0.0;
        const std::size_t off = static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) acc += vx[off + j];
        vo[static_cast<std::size_t>(i)] = static_cast<float>(acc);
      }
    } else {
      for (int j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (int i = 0; i < rows; ++i) acc += vx[static_cast<std::size_t>(i) * cols + j];
        vo[static_cast<std::size_t>(j)] = static_cast<float>(acc);
      }
    }
  }
  check_finite("sum_axis", out);
  if (recording(tape, x)) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), io = out.impl();
    tape->record([ix, io, rows, cols, axis] {
      if (io->grad.empty()) return;
      ensure_grad_buf(*ix);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          const float g = io->grad[static_cast<std::size_t>(axis == 1 ? i : j)];
          ix->grad[static_cast<std::size_t>(i) * cols + j] += g;
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& x, Tape* tape) {
  require_rank("transpose", x, 2);
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor out({cols, rows});
  {
    auto vx = x.values();
    auto vo = out.values();
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        vo[static_cast<std::size_t>(j) * rows + i] = vx[static_cast<std::size_t>(i) * cols + j];
      }
    }
  }
  if (recording(tape, x)) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), io = out.impl();
    tape->record([ix, io, rows, cols] {
      if (io->grad.empty()) return;
      ensure_grad_buf(*ix);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          ix->grad[static_cast<std::size_t>(i) * cols + j] +=
              io->grad[static_cast<std::size_t>(j) * rows + i];
        }
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape, Tape* tape) {
  const std::size_t n = shape_numel(shape);
  if (n != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(shape));
  }
  Tensor out(std::move(shape), std::vector<float>(x.values().begin(), x.values().end()));
  if (recording(tape, x)) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), io = out.impl();
    tape->record([ix, io] {
      if (io->grad.empty()) return;
      ensure_grad_buf(*ix);
      for (std::size_t i = 0; i < io->grad.size(); ++i) ix->grad[i] += io->grad[i];
    });
  }
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis, Tape* tape) {
  if (parts.empty()) throw UsageError("concat requires at least one input");
  if (axis != 0 && axis != 1) throw DimensionError("concat: axis must be 0 or 1");
  const int other = axis == 0 ? 1 : 0;
  for (const Tensor& p : parts) {
    require_rank("concat", p, 2);
    if (p.dim(other) != parts[0].dim(other)) {
      throw DimensionError("concat: mismatched shapes " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
  }
  int joined = 0;
  for (const Tensor& p : parts) joined += p.dim(axis);
  const int rows = axis == 0 ? joined : parts[0].dim(0);
  const int cols = axis == 1 ? joined : parts[0].dim(1);
  Tensor out({rows, cols});
  {
    auto vo = out.values();
    if (axis == 0) {
      std::size_t off = 0;
      for (const Tensor& p : parts) {
        auto vp = p.values();
        std::copy(vp.begin(), vp.end(), vo.begin() + static_cast<std::ptrdiff_t>(off));
        off += vp.size();
      }
    } else {
      int col0 = 0;
      for (const Tensor& p : parts) {
        auto vp = p.values();
        const int pcols = p.dim(1);
        for (int i = 0; i < rows; ++i) {
          for (int j = 0; j < pcols; ++j) {
            vo[static_cast<std::size_t>(i) * cols + col0 + j] =
                vp[static_cast<std::size_t>(i) * pcols + j];
          }
        }
        col0 += pcols;
      }
    }
  }

  bool any_grad = false;
  for (const Tensor& p : parts) any_grad |= p.requires_grad();
  if (tape != nullptr && any_grad) {
    out.set_requires_grad(true);
    std::vector<ImplPtr> ins;
    std::vector<int> extents;
    ins.reserve(parts.size());
    for (const Tensor& p : parts) {
      ins.push_back(p.impl());
      extents.push_back(p.dim(axis));
    }
    ImplPtr io = out.impl();
    tape->record([ins, extents, io, axis, rows, cols] {
      if (io->grad.empty()) return;
      if (axis == 0) {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < ins.size(); ++pi) {
          const std::size_t len = ins[pi]->data.size();
          if (ins[pi]->requires_grad) {
            ensure_grad_buf(*ins[pi]);
            for (std::size_t i = 0; i < len; ++i) {
              ins[pi]->grad[i] += io->grad[off + i];
            }
          }
          off += len;
        }
      } else {
        int col0 = 0;
        for (std::size_t pi = 0; pi < ins.size(); ++pi) {
          const int pcols = extents[pi];
          if (ins[pi]->requires_grad) {
            ensure_grad_buf(*ins[pi]);
            for (int i = 0; i < rows; ++i) {
              for (int j = 0; j < pcols; ++j) {
                ins[pi]->grad[static_cast<std::size_t>(i) * pcols + j] +=
                    io->grad[static_cast<std::size_t>(i) * cols + col0 + j];
              }
            }
          }
          col0 += pcols;
        }
      }
    });
  }
  return out;
}

namespace {

Tensor slice_impl(const char* op, const Tensor& x, int start, int count,
                  int axis, Tape* tape) {
  require_rank(op, x, 2);
  const int extent = x.dim(axis);
  if (start < 0 || count < 1 || start + count > extent) {
    throw DimensionError(std::string(op) + ": range [" + std::to_string(start) +
                         ", " + std::to_string(start + count) +
                         ") out of bounds for " + shape_str(x.shape()));
  }
  const int rows = x.dim(0), cols = x.dim(1);
  const int orows = axis == 0 ? count : rows;
  const int ocols = axis == 1 ? count : cols;
  Tensor out({orows, ocols});
  {
    auto vx = x.values();
    auto vo = out.values();
    for (int i = 0; i < orows; ++i) {
      const int si = axis == 0 ? start + i : i;
      for (int j = 0; j < ocols; ++j) {
        const int sj = axis == 1 ? start + j : j;
        vo[static_cast<std::size_t>(i) * ocols + j] =
            vx[static_cast<std::size_t>(si) * cols + sj];
      }
    }
  }
  if (recording(tape, x)) {
    out.set_requires_grad(true);
    ImplPtr ix = x.impl(), io = out.impl();
    tape->record([ix, io, start, axis, orows, ocols, cols] {
      if (io->grad.empty()) return;
      ensure_grad_buf(*ix);
      for (int i = 0; i < orows; ++i) {
        const int si = axis == 0 ? start + i : i;
        for (int j = 0; j < ocols; ++j) {
          const int sj = axis == 1 ? start + j : j;
          ix->grad[static_cast<std::size_t>(si) * cols + sj] +=
              io->grad[static_cast<std::size_t>(i) * ocols + j];
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor slice_rows(const Tensor& x, int start, int count, Tape* tape) {
  return slice_impl("slice_rows", x, start, count, 0, tape);
}

Tensor slice_cols(const Tensor& x, int start, int count, Tape* tape) {
  return slice_impl("slice_cols", x, start, count, 1, tape);
}

}  // namespace idat
