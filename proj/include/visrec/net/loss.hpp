// Copyright 2026-present the visrec project
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

#include <algorithm>
#include <span>
#include <string>

#include "visrec/embedding.hpp"
#include "visrec/net/network.hpp"

namespace visrec::net {

/// Hinge ranking loss max(0, g + D(q,p) - D(q,n)) with Euclidean D.
template <typename DQ, typename DP, typename DN>
typename DQ::Scalar
triplet_loss(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DN>& n,
             typename DQ::Scalar margin) {
    using Scalar = typename DQ::Scalar;
    if (margin < Scalar(0)) {
        throw Error(ErrorCode::kInvalidArgument, "margin must be >= 0");
    }
    // case form: zero exactly when the negative is at least `margin`
    // farther than the positive
    Scalar gap = euclidean_distance(q, n) - euclidean_distance(q, p);
    return gap >= margin ? Scalar(0) : margin - gap;
}

template <typename Scalar>
struct TripletLossGradient {
    Scalar loss = 0;
    bool active = false;
    VectorX<Scalar> d_query;
    VectorX<Scalar> d_positive;
    VectorX<Scalar> d_negative;
};

/// Loss and its gradient w.r.t. the three embeddings. In the flat region
/// (loss == 0) all gradients are zero; a zero distance contributes a zero
/// subgradient for its term.
template <typename Scalar>
TripletLossGradient<Scalar>
triplet_loss_gradient(const VectorX<Scalar>& q, const VectorX<Scalar>& p, const VectorX<Scalar>& n, Scalar margin) {
    check_same_dim(q.size(), p.size());
    check_same_dim(q.size(), n.size());
    TripletLossGradient<Scalar> out;
    VectorX<Scalar> qp = q - p;
    VectorX<Scalar> qn = q - n;
    Scalar d_pos = euclidean_distance(q, p);
    Scalar d_neg = euclidean_distance(q, n);
    Scalar gap = d_neg - d_pos;
    out.active = gap < margin;
    out.loss = out.active ? margin - gap : Scalar(0);
    out.d_query = VectorX<Scalar>::Zero(q.size());
    out.d_positive = VectorX<Scalar>::Zero(q.size());
    out.d_negative = VectorX<Scalar>::Zero(q.size());
    if (!out.active) {
        return out;
    }
    if (d_pos > Scalar(0)) {
        VectorX<Scalar> u = qp / d_pos;
        out.d_query += u;
        out.d_positive -= u;
    }
    if (d_neg > Scalar(0)) {
        VectorX<Scalar> u = qn / d_neg;
        out.d_query -= u;
        out.d_negative += u;
    }
    return out;
}

/// A triplet of preprocessed network inputs.
template <typename Scalar>
struct TripletInputs {
    const MatrixX<Scalar>* query;
    const MatrixX<Scalar>* positive;
    const MatrixX<Scalar>* negative;
};

/// Mean hinge loss over the batch; when `grad` is non-null it receives the
/// exact gradient of that mean w.r.t. every parameter. With `stage ==
/// kOutput` and `through_paths == false` only the projection receives
/// gradient (frozen base).
template <typename Scalar>
Scalar
triplet_batch_gradient(const Network<Scalar>& net, const Params<Scalar>& params,
                       std::span<const TripletInputs<Scalar>> batch, Scalar margin, VectorX<Scalar>* grad,
                       Stage stage = Stage::kFull, bool through_paths = true) {
    if (batch.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "triplet batch is empty");
    }
    if (grad) {
        grad->setZero(params.values.size());
    }
    Scalar total = 0;
    std::array<Trace<Scalar>, 3> traces;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& t = batch[i];
        std::array<const MatrixX<Scalar>*, 3> inputs{t.query, t.positive, t.negative};
        std::array<VectorX<Scalar>, 3> emb;
        for (int b = 0; b < 3; ++b) {
            try {
                emb[b] = net.forward(params, *inputs[b], grad ? &traces[b] : nullptr, stage);
            } catch (const Error& e) {
                throw Error(ErrorCode::kNumeric, "batch index " + std::to_string(i) + ": " + e.what());
            }
            if (!emb[b].allFinite()) {
                throw Error(ErrorCode::kNumeric,
                            "non-finite activations at batch index " + std::to_string(i));
            }
        }
        auto lg = triplet_loss_gradient(emb[0], emb[1], emb[2], margin);
        total += lg.loss;
        if (!grad || !lg.active) {
            continue;
        }
        net.backward(params, traces[0], lg.d_query, *grad, through_paths);
        net.backward(params, traces[1], lg.d_positive, *grad, through_paths);
        net.backward(params, traces[2], lg.d_negative, *grad, through_paths);
    }
    Scalar count = static_cast<Scalar>(batch.size());
    if (grad) {
        *grad /= count;
    }
    return total / count;
}

}  // namespace visrec::net
