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

#include <array>
#include <string>
#include <vector>

#include "visrec/embedding.hpp"
#include "visrec/error.hpp"
#include "visrec/image.hpp"
#include "visrec/net/config.hpp"
#include "visrec/net/params.hpp"

namespace visrec::net {

/// Which head to evaluate: kFull stops at the concatenated path outputs,
/// kOutput applies the projection when the parameters carry one.
enum class Stage { kFull, kOutput };

/// Activations for one image, kept for the reverse pass. Activation
/// matrices are (channels x height*width), column index y*width + x.
template <typename Scalar>
struct Trace {
    struct Layer {
        MatrixX<Scalar> output;   // post-activation
        MatrixX<Scalar> columns;  // im2col buffer (conv only)
        std::vector<Eigen::Index> argmax;  // flat input index per pooled output
    };

    MatrixX<Scalar> input;
    std::array<std::vector<Layer>, kPathCount> paths;
    VectorX<Scalar> features;   // concatenated path outputs
    VectorX<Scalar> projected;  // pre-normalization head output
    VectorX<Scalar> embedding;
    Scalar norm = 0;
    bool projected_head = false;
};

/// The embedding network, templated on scalar so the same code runs in
/// float for training/serving and in double for finite-difference checks.
/// Stateless apart from the topology: all learnable state lives in Params.
template <typename Scalar>
class Network {
public:
    using Matrix = MatrixX<Scalar>;
    using Vector = VectorX<Scalar>;

    explicit Network(NetConfig config) : config_(std::move(config)), layout_(ParamLayout::from_config(config_)) {
        for (int p = 0; p < kPathCount; ++p) {
            TensorShape shape = config_.input_shape();
            for (const auto& layer : config_.path(p)) {
                in_shapes_[p].push_back(shape);
                shape = layer_output_shape(layer, shape);
            }
            path_dims_[p] = shape.size();
        }
    }

    const NetConfig&
    config() const {
        return config_;
    }
    const ParamLayout&
    layout() const {
        return layout_;
    }

    /// Scale to [0,1] and subtract the configured per-channel mean.
    Matrix
    preprocess(const Image& image) const {
        if (image.width != config_.input_width || image.height != config_.input_height) {
            throw Error(ErrorCode::kImageDimension,
                        "image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                            ", network expects " + std::to_string(config_.input_width) + "x" +
                            std::to_string(config_.input_height));
        }
        if (image.data.size() != image.pixel_count() * Image::kChannels) {
            throw Error(ErrorCode::kImageMalformed, "image buffer size does not match dimensions");
        }
        Eigen::Map<const Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic>> raw(
            image.data.data(), 3, static_cast<Eigen::Index>(image.pixel_count()));
        Matrix input = raw.template cast<Scalar>() / Scalar(255);
        for (int c = 0; c < 3; ++c) {
            input.row(c).array() -= Scalar(config_.input_mean[static_cast<std::size_t>(c)]);
        }
        return input;
    }

    Vector
    embed(const Params<Scalar>& params, const Image& image, Stage stage = Stage::kOutput) const {
        return forward(params, preprocess(image), nullptr, stage);
    }

    /// Concatenation of the three path outputs (before any projection).
    Vector
    features(const Params<Scalar>& params, const Matrix& input, Trace<Scalar>* trace = nullptr) const {
        check_params(params);
        check_input(input);
        Vector out(config_.full_dim());
        Eigen::Index offset = 0;
        for (int p = 0; p < kPathCount; ++p) {
            std::vector<typename Trace<Scalar>::Layer>* layers = trace ? &trace->paths[p] : nullptr;
            Matrix act = run_path(params, p, input, layers);
            out.segment(offset, path_dims_[p]) =
                Eigen::Map<const Vector>(act.data(), path_dims_[p]);
            offset += path_dims_[p];
        }
        if (trace) {
            trace->input = input;
            trace->features = out;
        }
        return out;
    }

    /// Projection (when selected) followed by optional L2 normalization.
    Vector
    head(const Params<Scalar>& params, const Vector& features, Trace<Scalar>* trace = nullptr,
         Stage stage = Stage::kOutput) const {
        bool project = stage == Stage::kOutput && params.has_projection();
        Vector projected;
        if (project) {
            int slot = params.layout.projection_slot;
            projected.noalias() = params.tensor(slot) * features;
            projected += params.tensor(slot + 1);
        } else {
            projected = features;
        }
        Vector embedding = projected;
        Scalar norm = projected.norm();
        if (config_.normalize) {
            if (!(norm > Scalar(0)) || !std::isfinite(static_cast<double>(norm))) {
                throw Error(ErrorCode::kNumeric, "cannot normalize embedding with norm " +
                                                     std::to_string(static_cast<double>(norm)));
            }
            embedding /= norm;
        }
        if (trace) {
            trace->features = features;
            trace->projected = projected;
            trace->embedding = embedding;
            trace->norm = norm;
            trace->projected_head = project;
        }
        return embedding;
    }

    Vector
    forward(const Params<Scalar>& params, const Matrix& input, Trace<Scalar>* trace = nullptr,
            Stage stage = Stage::kOutput) const {
        Vector f = features(params, input, trace);
        return head(params, f, trace, stage);
    }

    /// Gradient w.r.t. the head input given dLoss/dEmbedding. Accumulates
    /// projection gradients into `grad` when the head was projected.
    Vector
    head_backward(const Params<Scalar>& params, const Trace<Scalar>& trace, const Vector& grad_embedding,
                  Vector& grad) const {
        Vector d_projected = grad_embedding;
        if (config_.normalize) {
            const Vector& e = trace.embedding;
            d_projected = (grad_embedding - e * e.dot(grad_embedding)) / trace.norm;
        }
        if (!trace.projected_head) {
            return d_projected;
        }
        int slot = params.layout.projection_slot;
        const auto& w = params.layout.slots[static_cast<std::size_t>(slot)];
        const auto& b = params.layout.slots[static_cast<std::size_t>(slot + 1)];
        Eigen::Map<Matrix>(grad.data() + w.offset, w.rows, w.cols).noalias() +=
            d_projected * trace.features.transpose();
        grad.segment(b.offset, b.rows) += d_projected;
        return params.tensor(slot).transpose() * d_projected;
    }

    /// Reverse pass for one image. Adds dLoss/dParams into `grad`, which has
    /// the layout of `params`; every branch of a triplet accumulates into
    /// the same vector because the weights are shared.
    void
    backward(const Params<Scalar>& params, const Trace<Scalar>& trace, const Vector& grad_embedding,
             Vector& grad, bool through_paths = true) const {
        Vector d_features = head_backward(params, trace, grad_embedding, grad);
        if (!through_paths) {
            return;
        }
        Eigen::Index offset = 0;
        for (int p = 0; p < kPathCount; ++p) {
            backward_path(params, p, trace, d_features.segment(offset, path_dims_[p]), grad);
            offset += path_dims_[p];
        }
    }

private:
    void
    check_params(const Params<Scalar>& params) const {
        if (params.values.size() != layout_.total) {
            throw Error(ErrorCode::kConfig, "parameter vector has " + std::to_string(params.values.size()) +
                                                " entries, topology needs " + std::to_string(layout_.total));
        }
    }

    void
    check_input(const Matrix& input) const {
        if (input.rows() != 3 || input.cols() != static_cast<Eigen::Index>(config_.input_height) * config_.input_width) {
            throw Error(ErrorCode::kImageDimension, "input tensor does not match network input size");
        }
    }

    static void
    im2col(const Matrix& in, const TensorShape& shape, const LayerSpec& l, const TensorShape& out_shape,
           Matrix& cols) {
        const Eigen::Index c = shape.channels;
        cols.resize(c * l.kernel * l.kernel, static_cast<Eigen::Index>(out_shape.height) * out_shape.width);
        for (int oy = 0; oy < out_shape.height; ++oy) {
            for (int ox = 0; ox < out_shape.width; ++ox) {
                Scalar* dst = cols.col(static_cast<Eigen::Index>(oy) * out_shape.width + ox).data();
                for (int ky = 0; ky < l.kernel; ++ky) {
                    int iy = oy * l.stride + ky - l.pad;
                    for (int kx = 0; kx < l.kernel; ++kx, dst += c) {
                        int ix = ox * l.stride + kx - l.pad;
                        if (iy < 0 || iy >= shape.height || ix < 0 || ix >= shape.width) {
                            std::fill(dst, dst + c, Scalar(0));
                        } else {
                            const Scalar* src = in.col(static_cast<Eigen::Index>(iy) * shape.width + ix).data();
                            std::copy(src, src + c, dst);
                        }
                    }
                }
            }
        }
    }

    static void
    col2im(const Matrix& d_cols, const TensorShape& shape, const LayerSpec& l, const TensorShape& out_shape,
           Matrix& d_in) {
        const Eigen::Index c = shape.channels;
        d_in = Matrix::Zero(c, static_cast<Eigen::Index>(shape.height) * shape.width);
        for (int oy = 0; oy < out_shape.height; ++oy) {
            for (int ox = 0; ox < out_shape.width; ++ox) {
                const Scalar* src = d_cols.col(static_cast<Eigen::Index>(oy) * out_shape.width + ox).data();
                for (int ky = 0; ky < l.kernel; ++ky) {
                    int iy = oy * l.stride + ky - l.pad;
                    for (int kx = 0; kx < l.kernel; ++kx, src += c) {
                        int ix = ox * l.stride + kx - l.pad;
                        if (iy < 0 || iy >= shape.height || ix < 0 || ix >= shape.width) {
                            continue;
                        }
                        Scalar* dst = d_in.col(static_cast<Eigen::Index>(iy) * shape.width + ix).data();
                        for (Eigen::Index ch = 0; ch < c; ++ch) {
                            dst[ch] += src[ch];
                        }
                    }
                }
            }
        }
    }

    Matrix
    run_path(const Params<Scalar>& params, int p, const Matrix& input,
             std::vector<typename Trace<Scalar>::Layer>* trace) const {
        const auto& layers = config_.path(p);
        const auto& slots = layout_.layer_slot[static_cast<std::size_t>(p)];
        if (trace) {
            trace->assign(layers.size(), {});
        }
        Matrix act = input;
        Matrix cols;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const TensorShape& in_shape = in_shapes_[p][i];
            TensorShape out_shape = layer_output_shape(l, in_shape);
            Matrix out;
            std::vector<Eigen::Index> argmax;
            switch (l.kind) {
                case LayerKind::kConv: {
                    im2col(act, in_shape, l, out_shape, cols);
                    out.noalias() = params.tensor(slots[i]) * cols;
                    out.colwise() += params.tensor(slots[i] + 1).col(0);
                    break;
                }
                case LayerKind::kMaxPool: {
                    out.resize(in_shape.channels, static_cast<Eigen::Index>(out_shape.height) * out_shape.width);
                    argmax.resize(static_cast<std::size_t>(out.size()));
                    for (int oy = 0; oy < out_shape.height; ++oy) {
                        for (int ox = 0; ox < out_shape.width; ++ox) {
                            Eigen::Index oj = static_cast<Eigen::Index>(oy) * out_shape.width + ox;
                            for (Eigen::Index ch = 0; ch < in_shape.channels; ++ch) {
                                Eigen::Index best = -1;
                                Scalar best_value = 0;
                                for (int ky = 0; ky < l.kernel; ++ky) {
                                    for (int kx = 0; kx < l.kernel; ++kx) {
                                        Eigen::Index ij = static_cast<Eigen::Index>(oy * l.stride + ky) * in_shape.width +
                                                          ox * l.stride + kx;
                                        Scalar v = act(ch, ij);
                                        if (best < 0 || v > best_value) {
                                            best = ch + ij * in_shape.channels;
                                            best_value = v;
                                        }
                                    }
                                }
                                out(ch, oj) = best_value;
                                argmax[static_cast<std::size_t>(ch + oj * in_shape.channels)] = best;
                            }
                        }
                    }
                    break;
                }
                case LayerKind::kDense: {
                    Eigen::Map<const Vector> x(act.data(), act.size());
                    out.noalias() = params.tensor(slots[i]) * x;
                    out += params.tensor(slots[i] + 1);
                    break;
                }
            }
            if (l.relu && l.kind != LayerKind::kMaxPool) {
                out = out.cwiseMax(Scalar(0));
            }
            if (trace) {
                auto& t = (*trace)[i];
                t.output = out;
                if (l.kind == LayerKind::kConv) {
                    t.columns = cols;
                }
                t.argmax = std::move(argmax);
            }
            act = std::move(out);
        }
        return act;
    }

    template <typename GradSegment>
    void
    backward_path(const Params<Scalar>& params, int p, const Trace<Scalar>& trace, const GradSegment& d_out_flat,
                  Vector& grad) const {
        const auto& layers = config_.path(p);
        const auto& slots = layout_.layer_slot[static_cast<std::size_t>(p)];
        const auto& tl = trace.paths[p];
        if (tl.size() != layers.size()) {
            throw Error(ErrorCode::kInvalidArgument, "trace does not belong to this network");
        }
        // gradient w.r.t. the current layer's output, shaped like the output
        Matrix d_out = Eigen::Map<const Matrix>(d_out_flat.eval().data(), tl.back().output.rows(),
                                                tl.back().output.cols());
        for (std::size_t idx = layers.size(); idx-- > 0;) {
            const auto& l = layers[idx];
            const auto& t = tl[idx];
            const TensorShape& in_shape = in_shapes_[p][idx];
            TensorShape out_shape = layer_output_shape(l, in_shape);
            const Matrix& layer_in = idx == 0 ? trace.input : tl[idx - 1].output;
            if (l.relu && l.kind != LayerKind::kMaxPool) {
                d_out = (t.output.array() > Scalar(0)).select(d_out, Scalar(0));
            }
            Matrix d_in;
            switch (l.kind) {
                case LayerKind::kConv: {
                    const auto& ws = layout_.slots[static_cast<std::size_t>(slots[idx])];
                    const auto& bs = layout_.slots[static_cast<std::size_t>(slots[idx] + 1)];
                    Eigen::Map<Matrix>(grad.data() + ws.offset, ws.rows, ws.cols).noalias() +=
                        d_out * t.columns.transpose();
                    grad.segment(bs.offset, bs.rows) += d_out.rowwise().sum();
                    if (idx > 0) {
                        Matrix d_cols = params.tensor(slots[idx]).transpose() * d_out;
                        col2im(d_cols, in_shape, l, out_shape, d_in);
                    }
                    break;
                }
                case LayerKind::kMaxPool: {
                    if (idx > 0) {
                        d_in = Matrix::Zero(layer_in.rows(), layer_in.cols());
                        for (Eigen::Index k = 0; k < d_out.size(); ++k) {
                            d_in.data()[t.argmax[static_cast<std::size_t>(k)]] += d_out.data()[k];
                        }
                    }
                    break;
                }
                case LayerKind::kDense: {
                    const auto& ws = layout_.slots[static_cast<std::size_t>(slots[idx])];
                    const auto& bs = layout_.slots[static_cast<std::size_t>(slots[idx] + 1)];
                    Eigen::Map<const Vector> x(layer_in.data(), layer_in.size());
                    Eigen::Map<Matrix>(grad.data() + ws.offset, ws.rows, ws.cols).noalias() +=
                        d_out * x.transpose();
                    grad.segment(bs.offset, bs.rows) += d_out;
                    if (idx > 0) {
                        Vector dx = params.tensor(slots[idx]).transpose() * d_out;
                        d_in = Eigen::Map<const Matrix>(dx.data(), layer_in.rows(), layer_in.cols());
                    }
                    break;
                }
            }
            if (idx > 0) {
                d_out = std::move(d_in);
            }
        }
    }

    NetConfig config_;
    ParamLayout layout_;
    std::array<std::vector<TensorShape>, kPathCount> in_shapes_;
    std::array<int, kPathCount> path_dims_{};
};

}  // namespace visrec::net
