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

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "visrec/error.hpp"

namespace visrec {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// The similarity currency of the system: a fixed-length float vector,
/// unit-normalized when the producing network has normalization enabled.
using Embedding = VectorX<float>;

inline void
check_same_dim(Eigen::Index a, Eigen::Index b) {
    if (a != b) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

/// Fixed summation order, so the result does not depend on how the
/// operands happen to be aligned (vectorized norms do).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar
euclidean_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    check_same_dim(a.size(), b.size());
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        Scalar d = a(i) - b(i);
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Index-grade distance: float inputs, exact double differences accumulated
/// in fixed index order, rounded once to float. Symmetric bit-for-bit and
/// independent of storage alignment, so repeated builds are identical.
inline float
stable_distance(const float* a, const float* b, Eigen::Index dim) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return static_cast<float>(std::sqrt(acc));
}

template <typename Derived>
bool
all_finite(const Eigen::MatrixBase<Derived>& v) {
    return v.allFinite();
}

}  // namespace visrec
