#pragma once

#include <vector>

#include "metashift/tensor.hpp"

namespace metashift::ad {

// Elementwise (operands must have identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
/// Subgradient at 0 is 0.
Tensor relu(const Tensor& a);

// Rank-2 linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// X with A X = B for square A (LU, partial pivoting). Differentiable in A and B.
Tensor solve(const Tensor& a, const Tensor& b);

// Reductions and broadcasts. Vectors are rank-1, matrices rank-2.
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_rows(const Tensor& m);                       // (r,c) -> (c,)
Tensor sum_cols(const Tensor& m);                       // (r,c) -> (r,)
Tensor broadcast_rows(const Tensor& v, std::size_t r);  // (c,) -> (r,c)
Tensor broadcast_cols(const Tensor& v, std::size_t c);  // (r,) -> (r,c)
Tensor broadcast_scalar(const Tensor& s, Shape shape);
Tensor add_rowvec(const Tensor& m, const Tensor& v);    // m[i,:] + v
Tensor mul_rowvec(const Tensor& m, const Tensor& v);    // m[i,:] * v
Tensor add_colvec(const Tensor& m, const Tensor& v);    // m[:,j] + v
Tensor reshape(const Tensor& a, Shape shape);

/// Rows gathered by `groups` (disjoint row-index sets). The per-group mean is
/// accumulated over value-sorted members so it is exactly invariant to member
/// order.
using RowGroups = std::vector<std::vector<std::size_t>>;
Tensor group_mean_rows(const Tensor& z, const RowGroups& groups);
Tensor group_expand_rows(const Tensor& p, const RowGroups& groups, std::size_t rows,
                         bool divide_by_size);
Tensor group_sum_rows(const Tensor& z, const RowGroups& groups, bool divide_by_size);

// Composites.
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);
Tensor softmax(const Tensor& logits);
/// Squared euclidean distances between rows of q (m,C) and rows of p (k,C) -> (m,k).
Tensor pairwise_sqdist(const Tensor& q, const Tensor& p);

}  // namespace metashift::ad
