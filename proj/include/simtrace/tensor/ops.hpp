// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "simtrace/tensor/tensor.hpp"

namespace simtrace::nn {

// All ops record onto the active tape when any input requires grad.
// Matrices are [rows, cols]; "row-wise" ops act on the last dimension.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

// a[M,K] x b[K,N]
Tensor matmul(const Tensor& a, const Tensor& b);
// x[B,K] W[N,K]^T + bias[N]; bias may be an empty Tensor.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
// x[B,N] + b[N]
Tensor add_bias(const Tensor& x, const Tensor& b);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);

Tensor softmax(const Tensor& a);      // row-wise
Tensor log_softmax(const Tensor& a);  // row-wise
Tensor logsumexp(const Tensor& a);    // row-wise, [B,K] -> [B]

Tensor sum(const Tensor& a);   // -> [1]
Tensor mean(const Tensor& a);  // -> [1]

// Concatenate [B,*] matrices along columns.
Tensor concat(const std::vector<Tensor>& parts);
// Columns [start, start+len) of x[B,N].
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);
// Rows of table[V,E] selected by ids -> [ids.size(), E].
Tensor embedding(const Tensor& table, const std::vector<std::size_t>& ids);
// x[B,K], idx[B] -> [B] with x[b, idx[b]].
Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& idx);
Tensor reshape(const Tensor& x, Shape shape);

// input[N,C,D,H,W], kernel[Co,C,kD,kH,kW], bias[Co] (may be empty).
Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride = 1,
              std::size_t padding = 0);
// Non-overlapping window k with stride k; trailing remainder is dropped.
Tensor maxpool3d(const Tensor& input, std::size_t k);

struct LstmState {
    Tensor h;
    Tensor c;
};

// x[B,X], h,c[B,H], W[4H,X], U[4H,H], b[4H]; gate order i, f, g, o.
LstmState lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c, const Tensor& w, const Tensor& u,
                    const Tensor& b);

// Log density of a mixture of truncated normals, one mixture per row.
// logits/means/stds: [B,K]; values, low, high: B entries (low/high may be infinite).
Tensor truncated_normal_mixture_log_prob(const Tensor& logits, const Tensor& means, const Tensor& stds,
                                         const std::vector<double>& values, const std::vector<double>& low,
                                         const std::vector<double>& high);

}  // namespace simtrace::nn
