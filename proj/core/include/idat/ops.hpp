#pragma once

#include <vector>

#include "idat/tensor.hpp"

namespace idat {

// Differentiable tensor operations. Every op validates shapes, computes the
// forward value (64-bit accumulation inside reductions and matmul inner
// loops), verifies the output is finite, and — when a tape is given and any
// input requires grad — records its backward rule on the tape.
//
// Broadcasting is deliberately narrow: same shape, a [1] scalar on either
// side, or a rank-1 row vector added over the last axis of a matrix.

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor subtract(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor multiply(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
// Elementwise a / b; same shape or scalar divisor.
Tensor divide(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

// x * c for a compile-time-known scalar c.
Tensor scale(const Tensor& x, double c, Tape* tape = nullptr);

Tensor log(const Tensor& x, Tape* tape = nullptr);
Tensor sqrt(const Tensor& x, Tape* tape = nullptr);
Tensor abs(const Tensor& x, Tape* tape = nullptr);

// Exact-erf GELU: x * Phi(x).
Tensor gelu(const Tensor& x, Tape* tape = nullptr);

// Rows (axis 1 of a matrix) or the whole vector (axis 0, rank 1) are
// shifted by their max before exponentiation.
Tensor softmax(const Tensor& x, int axis, Tape* tape = nullptr);
Tensor log_softmax(const Tensor& x, int axis, Tape* tape = nullptr);

// Per-row normalization of a [t x d] matrix followed by the gamma/beta
// affine; gamma and beta are rank-1 of length d.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps, Tape* tape = nullptr);

Tensor mean_all(const Tensor& x, Tape* tape = nullptr);
Tensor sum_all(const Tensor& x, Tape* tape = nullptr);
// Matrix reduction keeping the reduced axis: axis 0 -> [1 x n], axis 1 -> [m x 1].
Tensor sum_axis(const Tensor& x, int axis, Tape* tape = nullptr);

Tensor transpose(const Tensor& x, Tape* tape = nullptr);
Tensor reshape(const Tensor& x, std::vector<int> shape, Tape* tape = nullptr);
Tensor concat(const std::vector<Tensor>& parts, int axis, Tape* tape = nullptr);
Tensor slice_rows(const Tensor& x, int start, int count, Tape* tape = nullptr);
Tensor slice_cols(const Tensor& x, int start, int count, Tape* tape = nullptr);

}  // namespace idat
