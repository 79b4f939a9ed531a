// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over dense Tensors.
//
// A Tape records every primitive application in execution order. Each node
// keeps its output value plus whatever the vector-Jacobian product needs
// (e.g. the argmax of a max-pool). Parameters enter the tape by reference, so
// recording a forward pass never copies weight matrices. There is no
// broadcasting: shapes must match exactly or be adapted explicitly with
// reshape / concat / tile_rows / pair_sum.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <deque>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mscan/error.hpp"
#include "mscan/tensor.hpp"

namespace mscan::ad {

/// A learnable array with its gradient buffer.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape, 0.0) {}

    void zero_grad() { grad.fill(0.0); }
};

using GradientMap = std::map<std::string, Tensor>;

inline GradientMap collect_gradients(std::span<Parameter* const> params) {
    GradientMap out;
    for (const Parameter* p : params) out.emplace(p->name, p->grad);
    return out;
}

enum class Prim : std::uint8_t {
    Leaf,
    Param,
    Lookup,
    MatMul,
    Add,
    Sub,
    Mul,
    Affine,
    Sigmoid,
    Tanh,
    Relu,
    Softmax,
    MaxPool,
    Concat,
    Reshape,
    SliceRows,
    TileRows,
    PairSum,
    Sum,
    Mean,
    BceLogits,
};

inline const char* prim_name(Prim kind) {
    switch (kind) {
        case Prim::Leaf: return "leaf";
        case Prim::Param: return "param";
        case Prim::Lookup: return "lookup";
        case Prim::MatMul: return "matmul";
        case Prim::Add: return "add";
        case Prim::Sub: return "sub";
        case Prim::Mul: return "mul";
        case Prim::Affine: return "affine";
        case Prim::Sigmoid: return "sigmoid";
        case Prim::Tanh: return "tanh";
        case Prim::Relu: return "relu";
        case Prim::Softmax: return "softmax";
        case Prim::MaxPool: return "maxpool";
        case Prim::Concat: return "concat";
        case Prim::Reshape: return "reshape";
        case Prim::SliceRows: return "slice_rows";
        case Prim::TileRows: return "tile_rows";
        case Prim::PairSum: return "pair_sum";
        case Prim::Sum: return "sum";
        case Prim::Mean: return "mean";
        case Prim::BceLogits: return "bce_logits";
    }
    return "unknown";
}

/// Non-tensor arguments of a primitive. Only the fields a kind reads matter.
struct PrimAttrs {
    std::vector<std::size_t> indices;  // lookup rows
    std::vector<double> labels;        // bce targets, one per logit
    Shape shape;                       // reshape target
    std::size_t axis = 0;              // concat axis
    std::size_t begin = 0;             // slice_rows
    std::size_t count = 0;             // slice_rows / tile_rows
    double scale = 1.0;                // affine: scale * x + shift
    double shift = 0.0;
};

inline double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(-|z|)) + max(z, 0) - z * y
inline double bce_with_logit(double z, double y) {
    return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * y;
}

namespace detail {

[[noreturn]] inline void shape_fail(Prim kind, std::span<const Tensor* const> in, const std::string& why) {
    std::string msg = std::string(prim_name(kind)) + ": " + why + " (shapes";
    for (const Tensor* t : in) msg += " " + shape_str(t->shape);
    msg += ")";
    throw ShapeError(msg);
}

inline void require_arity(Prim kind, std::span<const Tensor* const> in, std::size_t n) {
    if (in.size() != n) {
        shape_fail(kind, in, "expected " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
    }
}

struct MatMulDims {
    std::size_t m, k, n;
    Shape out;
};

inline MatMulDims matmul_dims(std::span<const Tensor* const> in) {
    const Tensor& a = *in[0];
    const Tensor& b = *in[1];
    if (a.rank() < 1 || a.rank() > 2 || b.rank() < 1 || b.rank() > 2) {
        shape_fail(Prim::MatMul, in, "operands must be vectors or matrices");
    }
    MatMulDims d{};
    d.m = a.rank() == 2 ? a.shape[0] : 1;
    const std::size_t ka = a.rank() == 2 ? a.shape[1] : a.shape[0];
    const std::size_t kb = b.shape[0];
    d.n = b.rank() == 2 ? b.shape[1] : 1;
    if (ka != kb) shape_fail(Prim::MatMul, in, "inner dimensions differ");
    d.k = ka;
    if (a.rank() == 2 && b.rank() == 2) {
        d.out = {d.m, d.n};
    } else if (a.rank() == 2) {
        d.out = {d.m};
    } else if (b.rank() == 2) {
        d.out = {d.n};
    } else {
        d.out = {1};
    }
    return d;
}

inline std::size_t concat_axis(const PrimAttrs& attrs, std::span<const Tensor* const> in) {
    const std::size_t rank = in[0]->rank();
    if (attrs.axis >= rank) shape_fail(Prim::Concat, in, "axis out of range");
    return attrs.axis;
}

/// Forward kernel shared by recording and replay.
inline Tensor evaluate(Prim kind, std::span<const Tensor* const> in, const PrimAttrs& attrs,
                       std::vector<std::size_t>* argmax) {
    switch (kind) {
        case Prim::Leaf:
        case Prim::Param:
            throw Error("evaluate: leaf nodes have no kernel");

        case Prim::Lookup: {
            require_arity(kind, in, 1);
            const Tensor& table = *in[0];
            if (table.rank() != 2) shape_fail(kind, in, "table must be a matrix");
            const std::size_t width = table.shape[1];
            Tensor out(Shape{attrs.indices.size(), width});
            for (std::size_t r = 0; r < attrs.indices.size(); ++r) {
                const std::size_t row = attrs.indices[r];
                if (row >= table.shape[0]) {
                    throw IndexError("lookup: index " + std::to_string(row) + " out of range for table with " +
                                     std::to_string(table.shape[0]) + " rows");
                }
                std::copy_n(table.data.begin() + static_cast<std::ptrdiff_t>(row * width), width,
                            out.data.begin() + static_cast<std::ptrdiff_t>(r * width));
            }
            return out;
        }

        case Prim::MatMul: {
            require_arity(kind, in, 2);
            const MatMulDims d = matmul_dims(in);
            Tensor out(d.out);
            const double* a = in[0]->data.data();
            const double* b = in[1]->data.data();
            double* c = out.data.data();
            for (std::size_t i = 0; i < d.m; ++i) {
                double* crow = c + i * d.n;
                for (std::size_t p = 0; p < d.k; ++p) {
                    const double av = a[i * d.k + p];
                    if (av == 0.0) continue;
                    const double* brow = b + p * d.n;
                    for (std::size_t j = 0; j < d.n; ++j) crow[j] += av * brow[j];
                }
            }
            return out;
        }

        case Prim::Add:
        case Prim::Sub:
        case Prim::Mul: {
            require_arity(kind, in, 2);
            if (in[0]->shape != in[1]->shape) shape_fail(kind, in, "elementwise operands differ in shape");
            Tensor out(in[0]->shape);
            const auto& a = in[0]->data;
            const auto& b = in[1]->data;
            for (std::size_t k = 0; k < a.size(); ++k) {
                out.data[k] = kind == Prim::Add ? a[k] + b[k] : kind == Prim::Sub ? a[k] - b[k] : a[k] * b[k];
            }
            return out;
        }

        case Prim::Affine: {
            require_arity(kind, in, 1);
            Tensor out(in[0]->shape);
            for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = attrs.scale * in[0]->data[k] + attrs.shift;
            return out;
        }

        case Prim::Sigmoid:
        case Prim::Tanh:
        case Prim::Relu: {
            require_arity(kind, in, 1);
            Tensor out(in[0]->shape);
            for (std::size_t k = 0; k < out.size(); ++k) {
                const double x = in[0]->data[k];
                out.data[k] = kind == Prim::Sigmoid ? stable_sigmoid(x) : kind == Prim::Tanh ? std::tanh(x)
                                                                                              : (x < 0.0 ? 0.0 : x);  // NaN passes through
            }
            return out;
        }

        case Prim::Softmax: {
            require_arity(kind, in, 1);
            const Tensor& x = *in[0];
            if (x.rank() < 1 || x.rank() > 2) shape_fail(kind, in, "softmax expects a vector or matrix");
            const std::size_t cols = x.cols();
            if (cols == 0) shape_fail(kind, in, "softmax over an empty axis");
            Tensor out(x.shape);
            for (std::size_t r = 0; r < x.size() / cols; ++r) {
                const double* row = x.data.data() + r * cols;
                double* o = out.data.data() + r * cols;
                const double top = *std::max_element(row, row + cols);
                double total = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    o[c] = std::exp(row[c] - top);
                    total += o[c];
                }
                for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
            }
            return out;
        }

        case Prim::MaxPool: {
            require_arity(kind, in, 1);
            const Tensor& x = *in[0];
            if (x.rank() < 1 || x.rank() > 2) shape_fail(kind, in, "max-pool expects a vector or matrix");
            const std::size_t cols = x.cols();
            if (cols == 0) shape_fail(kind, in, "max-pool over an empty axis");
            const std::size_t rows = x.size() / cols;
            Tensor out(Shape{rows});
            if (argmax) argmax->assign(rows, 0);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* row = x.data.data() + r * cols;
                std::size_t best = 0;
                // strict > keeps the lowest-index maximiser on ties
                for (std::size_t c = 1; c < cols; ++c) {
                    if (row[c] > row[best]) best = c;
                }
                out.data[r] = row[best];
                if (argmax) (*argmax)[r] = best;
            }
            return out;
        }

        case Prim::Concat: {
            if (in.empty()) throw ShapeError("concat: no inputs");
            const std::size_t axis = concat_axis(attrs, in);
            const std::size_t rank = in[0]->rank();
            for (const Tensor* t : in) {
                if (t->rank() != rank) shape_fail(kind, in, "ranks differ");
            }
            if (rank == 1) {
                std::vector<double> values;
                for (const Tensor* t : in) values.insert(values.end(), t->data.begin(), t->data.end());
                return Tensor::vector(std::move(values));
            }
            if (rank != 2) shape_fail(kind, in, "concat supports vectors and matrices");
            if (axis == 0) {
                const std::size_t cols = in[0]->shape[1];
                std::size_t rows = 0;
                for (const Tensor* t : in) {
                    if (t->shape[1] != cols) shape_fail(kind, in, "column counts differ");
                    rows += t->shape[0];
                }
                Tensor out(Shape{rows, cols});
                std::size_t at = 0;
                for (const Tensor* t : in) {
                    std::copy(t->data.begin(), t->data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(at));
                    at += t->size();
                }
                return out;
            }
            const std::size_t rows = in[0]->shape[0];
            std::size_t cols = 0;
            for (const Tensor* t : in) {
                if (t->shape[0] != rows) shape_fail(kind, in, "row counts differ");
                cols += t->shape[1];
            }
            Tensor out(Shape{rows, cols});
            for (std::size_t r = 0; r < rows; ++r) {
                std::size_t offset = 0;
                for (const Tensor* t : in) {
                    const std::size_t w = t->shape[1];
                    std::copy_n(t->data.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                                out.data.begin() + static_cast<std::ptrdiff_t>(r * cols + offset));
                    offset += w;
                }
            }
            return out;
        }

        case Prim::Reshape: {
            require_arity(kind, in, 1);
            if (shape_size(attrs.shape) != in[0]->size()) {
                shape_fail(kind, in, "cannot reshape to " + shape_str(attrs.shape));
            }
            return Tensor(attrs.shape, in[0]->data);
        }

        case Prim::SliceRows: {
            require_arity(kind, in, 1);
            const Tensor& x = *in[0];
            if (x.rank() != 2) shape_fail(kind, in, "slice_rows expects a matrix");
            if (attrs.begin + attrs.count > x.shape[0]) shape_fail(kind, in, "row range out of bounds");
            const std::size_t cols = x.shape[1];
            const auto first = x.data.begin() + static_cast<std::ptrdiff_t>(attrs.begin * cols);
            return Tensor(Shape{attrs.count, cols},
                          std::vector<double>(first, first + static_cast<std::ptrdiff_t>(attrs.count * cols)));
        }

        case Prim::TileRows: {
            require_arity(kind, in, 1);
            const Tensor& x = *in[0];
            if (!(x.rank() == 1 || (x.rank() == 2 && x.shape[0] == 1))) {
                shape_fail(kind, in, "tile_rows expects a vector or a single row");
            }
            const std::size_t cols = x.cols();
            Tensor out(Shape{attrs.count, cols});
            for (std::size_t r = 0; r < attrs.count; ++r) {
                std::copy(x.data.begin(), x.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * cols));
            }
            return out;
        }

        case Prim::PairSum: {
            require_arity(kind, in, 2);
            const Tensor& a = *in[0];
            const Tensor& b = *in[1];
            if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[1]) {
                shape_fail(kind, in, "pair_sum expects matrices with equal widths");
            }
            const std::size_t n = a.shape[0], m = b.shape[0], w = a.shape[1];
            Tensor out(Shape{n * m, w});
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t k = 0; k < m; ++k) {
                    double* o = out.data.data() + (j * m + k) * w;
                    const double* ar = a.data.data() + j * w;
                    const double* br = b.data.data() + k * w;
                    for (std::size_t c = 0; c < w; ++c) o[c] = ar[c] + br[c];
                }
            }
            return out;
        }

        case Prim::Sum:
        case Prim::Mean: {
            require_arity(kind, in, 1);
            if (kind == Prim::Mean && in[0]->size() == 0) shape_fail(kind, in, "mean of an empty tensor");
            double total = 0.0;
            for (double v : in[0]->data) total += v;
            if (kind == Prim::Mean) total /= static_cast<double>(in[0]->size());
            return Tensor::scalar(total);
        }

        case Prim::BceLogits: {
            require_arity(kind, in, 1);
            if (attrs.labels.size() != in[0]->size()) shape_fail(kind, in, "label count differs from logit count");
            Tensor out(in[0]->shape);
            for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = bce_with_logit(in[0]->data[k], attrs.labels[k]);
            return out;
        }
    }
    throw Error("evaluate: unknown primitive");
}

}  // namespace detail

class Tape;

/// Handle to a node on a Tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape; }
};

class Tape {
public:
    struct Node {
        Prim kind = Prim::Leaf;
        std::vector<int> inputs;
        PrimAttrs attrs;
        Tensor value;
        const Tensor* external = nullptr;  // parameter value, not owned
        Parameter* param = nullptr;
        std::vector<std::size_t> argmax;
        bool requires_grad = false;
        Tensor grad;

        const Tensor& out() const { return external ? *external : value; }
    };

    Var constant(Tensor t) {
        Node& n = nodes_.emplace_back();
        n.kind = Prim::Leaf;
        n.value = std::move(t);
        return {this, static_cast<int>(nodes_.size() - 1)};
    }

    /// A constant that aliases `t` instead of copying it. `t` must outlive the
    /// tape and stay unchanged while the tape is in use.
    Var reference(const Tensor& t) {
        Node& n = nodes_.emplace_back();
        n.kind = Prim::Leaf;
        n.external = &t;
        return {this, static_cast<int>(nodes_.size() - 1)};
    }

    /// Registers a parameter once per tape; later calls return the same node.
    Var param(Parameter& p) {
        if (auto it = param_ids_.find(&p); it != param_ids_.end()) return {this, it->second};
        Node& n = nodes_.emplace_back();
        n.kind = Prim::Param;
        n.external = &p.value;
        n.param = &p;
        n.requires_grad = true;
        const int id = static_cast<int>(nodes_.size() - 1);
        param_ids_.emplace(&p, id);
        return {this, id};
    }

    Var apply(Prim kind, std::span<const Var> inputs, PrimAttrs attrs = {}) {
        std::vector<const Tensor*> in;
        in.reserve(inputs.size());
        bool needs = false;
        for (const Var& v : inputs) {
            if (v.tape != this) throw Error(std::string(prim_name(kind)) + ": input belongs to another tape");
            const Node& src = nodes_[static_cast<std::size_t>(v.id)];
            in.push_back(&src.out());
            needs = needs || src.requires_grad;
        }
        std::vector<std::size_t> argmax;
        Tensor value = detail::evaluate(kind, in, attrs, &argmax);
        Node& n = nodes_.emplace_back();
        n.kind = kind;
        n.inputs.reserve(inputs.size());
        for (const Var& v : inputs) n.inputs.push_back(v.id);
        n.attrs = std::move(attrs);
        n.value = std::move(value);
        n.argmax = std::move(argmax);
        n.requires_grad = needs;
        return {this, static_cast<int>(nodes_.size() - 1)};
    }

    Var apply(Prim kind, std::initializer_list<Var> inputs, PrimAttrs attrs = {}) {
        return apply(kind, std::span<const Var>(inputs.begin(), inputs.size()), std::move(attrs));
    }

    /// Propagates d(output)/d(node) backwards and adds the result into every
    /// reachable Parameter::grad. Repeated calls accumulate.
    void backward(Var output) {
        if (nodes_.empty()) throw Error("backward: tape is empty");
        if (output.tape != this) throw Error("backward: output belongs to another tape");
        Node& root = nodes_[static_cast<std::size_t>(output.id)];
        if (root.out().size() != 1) {
            throw ShapeError("backward: output must be a scalar, got shape " + shape_str(root.out().shape));
        }
        for (Node& n : nodes_) n.grad = Tensor();
        root.grad = Tensor(root.out().shape, 1.0);
        for (int id = output.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.grad.data.empty() || !n.requires_grad) continue;
            if (n.kind == Prim::Param) {
                auto& g = n.param->grad.data;
                for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad.data[k];
                continue;
            }
            if (n.kind == Prim::Leaf) continue;
            propagate(n);
        }
        for (Node& n : nodes_) n.grad = Tensor();
    }

    /// Recomputes every recorded application from its recorded inputs.
    std::vector<Tensor> replay() const {
        std::vector<Tensor> values;
        values.reserve(nodes_.size());
        for (const Node& n : nodes_) {
            if (n.kind == Prim::Leaf || n.kind == Prim::Param) {
                values.push_back(n.out());
                continue;
            }
            std::vector<const Tensor*> in;
            for (int i : n.inputs) in.push_back(&nodes_[static_cast<std::size_t>(i)].out());
            values.push_back(detail::evaluate(n.kind, in, n.attrs, nullptr));
        }
        return values;
    }

    /// True iff replay() reproduces every recorded value bit for bit.
    bool replay_matches() const {
        const std::vector<Tensor> values = replay();
        for (std::size_t k = 0; k < nodes_.size(); ++k) {
            const Tensor& recorded = nodes_[k].out();
            if (values[k].shape != recorded.shape) return false;
            if (std::memcmp(values[k].data.data(), recorded.data.data(), recorded.size() * sizeof(double)) != 0) {
                return false;
            }
        }
        return true;
    }

    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    void clear() {
        nodes_.clear();
        param_ids_.clear();
    }

private:
    Tensor& grad_of(int id) {
        Node& src = nodes_[static_cast<std::size_t>(id)];
        if (src.grad.data.empty() && src.out().size() != 0) src.grad = Tensor(src.out().shape);
        return src.grad;
    }

    bool wants(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    void propagate(const Node& n) {
        const Tensor& g = n.grad;
        const Tensor& y = n.value;
        auto input = [&](std::size_t k) -> const Tensor& {
            return nodes_[static_cast<std::size_t>(n.inputs[k])].out();
        };

        switch (n.kind) {
            case Prim::Leaf:
            case Prim::Param:
                return;

            case Prim::Lookup: {
                if (!wants(n.inputs[0])) return;
                Tensor& gt = grad_of(n.inputs[0]);
                const std::size_t width = gt.shape[1];
                for (std::size_t r = 0; r < n.attrs.indices.size(); ++r) {
                    double* dst = gt.data.data() + n.attrs.indices[r] * width;
                    const double* src = g.data.data() + r * width;
                    for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
                }
                return;
            }

            case Prim::MatMul: {
                const Tensor& a = input(0);
                const Tensor& b = input(1);
                const std::size_t m = a.rank() == 2 ? a.shape[0] : 1;
                const std::size_t k = b.shape[0];
                const std::size_t nn = b.rank() == 2 ? b.shape[1] : 1;
                if (wants(n.inputs[0])) {
                    Tensor& ga = grad_of(n.inputs[0]);
                    // dA = G * B^T, accumulated row-wise over a transposed copy of B
                    std::vector<double> bt(k * nn);
                    for (std::size_t p = 0; p < k; ++p) {
                        for (std::size_t j = 0; j < nn; ++j) bt[j * k + p] = b.data[p * nn + j];
                    }
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* grow = g.data.data() + i * nn;
                        double* dst = ga.data.data() + i * k;
                        for (std::size_t j = 0; j < nn; ++j) {
                            const double gv = grow[j];
                            if (gv == 0.0) continue;
                            const double* btrow = bt.data() + j * k;
                            for (std::size_t p = 0; p < k; ++p) dst[p] += gv * btrow[p];
                        }
                    }
                }
                if (wants(n.inputs[1])) {
                    Tensor& gb = grad_of(n.inputs[1]);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* grow = g.data.data() + i * nn;
                        for (std::size_t p = 0; p < k; ++p) {
                            const double av = a.data[i * k + p];
                            if (av == 0.0) continue;
                            double* dst = gb.data.data() + p * nn;
                            for (std::size_t j = 0; j < nn; ++j) dst[j] += av * grow[j];
                        }
                    }
                }
                return;
            }

            case Prim::Add:
            case Prim::Sub: {
                const double sign = n.kind == Prim::Add ? 1.0 : -1.0;
                if (wants(n.inputs[0])) {
                    Tensor& ga = grad_of(n.inputs[0]);
                    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
                }
                if (wants(n.inputs[1])) {
                    Tensor& gb = grad_of(n.inputs[1]);
                    for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] += sign * g.data[k];
                }
                return;
            }

            case Prim::Mul: {
                const Tensor& a = input(0);
                const Tensor& b = input(1);
                if (wants(n.inputs[0])) {
                    Tensor& ga = grad_of(n.inputs[0]);
                    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * b.data[k];
                }
                if (wants(n.inputs[1])) {
                    Tensor& gb = grad_of(n.inputs[1]);
                    for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] += g.data[k] * a.data[k];
                }
                return;
            }

            case Prim::Affine: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += n.attrs.scale * g.data[k];
                return;
            }

            case Prim::Sigmoid:
            case Prim::Tanh:
            case Prim::Relu: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                const Tensor& x = input(0);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    double d;
                    if (n.kind == Prim::Sigmoid) d = y.data[k] * (1.0 - y.data[k]);
                    else if (n.kind == Prim::Tanh) d = 1.0 - y.data[k] * y.data[k];
                    else d = x.data[k] > 0.0 ? 1.0 : 0.0;
                    ga.data[k] += g.data[k] * d;
                }
                return;
            }

            case Prim::Softmax: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                const std::size_t cols = y.cols();
                for (std::size_t r = 0; r < y.size() / cols; ++r) {
                    const double* yr = y.data.data() + r * cols;
                    const double* gr = g.data.data() + r * cols;
                    double dot = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
                    for (std::size_t c = 0; c < cols; ++c) ga.data[r * cols + c] += yr[c] * (gr[c] - dot);
                }
                return;
            }

            case Prim::MaxPool: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                const std::size_t cols = input(0).cols();
                for (std::size_t r = 0; r < n.argmax.size(); ++r) ga.data[r * cols + n.argmax[r]] += g.data[r];
                return;
            }

            case Prim::Concat: {
                const std::size_t rank = input(0).rank();
                if (rank == 1 || n.attrs.axis == 0) {
                    std::size_t at = 0;
                    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                        const std::size_t len = input(k).size();
                        if (wants(n.inputs[k])) {
                            Tensor& gk = grad_of(n.inputs[k]);
                            for (std::size_t c = 0; c < len; ++c) gk.data[c] += g.data[at + c];
                        }
                        at += len;
                    }
                    return;
                }
                const std::size_t rows = y.shape[0];
                const std::size_t cols = y.shape[1];
                std::size_t offset = 0;
                for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                    const std::size_t w = input(k).shape[1];
                    if (wants(n.inputs[k])) {
                        Tensor& gk = grad_of(n.inputs[k]);
                        for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t c = 0; c < w; ++c) gk.data[r * w + c] += g.data[r * cols + offset + c];
                        }
                    }
                    offset += w;
                }
                return;
            }

            case Prim::Reshape: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k];
                return;
            }

            case Prim::SliceRows: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                const std::size_t offset = n.attrs.begin * y.cols();
                for (std::size_t k = 0; k < g.size(); ++k) ga.data[offset + k] += g.data[k];
                return;
            }

            case Prim::TileRows: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                const std::size_t cols = ga.size();
                for (std::size_t r = 0; r < n.attrs.count; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) ga.data[c] += g.data[r * cols + c];
                }
                return;
            }

            case Prim::PairSum: {
                const std::size_t nrows = input(0).shape[0];
                const std::size_t mrows = input(1).shape[0];
                const std::size_t w = input(0).shape[1];
                const bool wa = wants(n.inputs[0]);
                const bool wb = wants(n.inputs[1]);
                Tensor* ga = wa ? &grad_of(n.inputs[0]) : nullptr;
                Tensor* gb = wb ? &grad_of(n.inputs[1]) : nullptr;
                for (std::size_t j = 0; j < nrows; ++j) {
                    for (std::size_t k = 0; k < mrows; ++k) {
                        const double* gr = g.data.data() + (j * mrows + k) * w;
                        for (std::size_t c = 0; c < w; ++c) {
                            if (ga) ga->data[j * w + c] += gr[c];
                            if (gb) gb->data[k * w + c] += gr[c];
                        }
                    }
                }
                return;
            }

            case Prim::Sum:
            case Prim::Mean: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                const double d = n.kind == Prim::Mean ? g.data[0] / static_cast<double>(ga.size()) : g.data[0];
                for (double& v : ga.data) v += d;
                return;
            }

            case Prim::BceLogits: {
                if (!wants(n.inputs[0])) return;
                Tensor& ga = grad_of(n.inputs[0]);
                const Tensor& z = input(0);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    ga.data[k] += g.data[k] * (stable_sigmoid(z.data[k]) - n.attrs.labels[k]);
                }
                return;
            }
        }
    }

    // deque keeps node references stable while the tape grows
    std::deque<Node> nodes_;
    std::unordered_map<const Parameter*, int> param_ids_;
};

inline const Tensor& Var::value() const { return tape->node(id).out(); }

// ---------------------------------------------------------------------------
// Convenience wrappers. Each records exactly one primitive.

inline Var lookup(Var table, std::vector<std::size_t> rows) {
    PrimAttrs a;
    a.indices = std::move(rows);
    return table.tape->apply(Prim::Lookup, {table}, std::move(a));
}
inline Var matmul(Var a, Var b) { return a.tape->apply(Prim::MatMul, {a, b}); }
inline Var add(Var a, Var b) { return a.tape->apply(Prim::Add, {a, b}); }
inline Var sub(Var a, Var b) { return a.tape->apply(Prim::Sub, {a, b}); }
inline Var mul(Var a, Var b) { return a.tape->apply(Prim::Mul, {a, b}); }
inline Var affine(Var x, double scale, double shift) {
    PrimAttrs a;
    a.scale = scale;
    a.shift = shift;
    return x.tape->apply(Prim::Affine, {x}, std::move(a));
}
inline Var one_minus(Var x) { return affine(x, -1.0, 1.0); }
inline Var sigmoid(Var x) { return x.tape->apply(Prim::Sigmoid, {x}); }
inline Var tanh(Var x) { return x.tape->apply(Prim::Tanh, {x}); }
inline Var relu(Var x) { return x.tape->apply(Prim::Relu, {x}); }
inline Var softmax(Var x) { return x.tape->apply(Prim::Softmax, {x}); }
inline Var max_pool(Var x) { return x.tape->apply(Prim::MaxPool, {x}); }
inline Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    PrimAttrs a;
    a.axis = axis;
    return parts.front().tape->apply(Prim::Concat, parts, std::move(a));
}
inline Var concat(std::initializer_list<Var> parts, std::size_t axis) {
    return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}
inline Var reshape(Var x, Shape shape) {
    PrimAttrs a;
    a.shape = std::move(shape);
    return x.tape->apply(Prim::Reshape, {x}, std::move(a));
}
inline Var slice_rows(Var x, std::size_t begin, std::size_t count) {
    PrimAttrs a;
    a.begin = begin;
    a.count = count;
    return x.tape->apply(Prim::SliceRows, {x}, std::move(a));
}
inline Var tile_rows(Var x, std::size_t count) {
    PrimAttrs a;
    a.count = count;
    return x.tape->apply(Prim::TileRows, {x}, std::move(a));
}
inline Var pair_sum(Var a, Var b) { return a.tape->apply(Prim::PairSum, {a, b}); }
inline Var sum(Var x) { return x.tape->apply(Prim::Sum, {x}); }
inline Var mean(Var x) { return x.tape->apply(Prim::Mean, {x}); }
inline Var bce_logits(Var logits, std::vector<double> labels) {
    PrimAttrs a;
    a.labels = std::move(labels);
    return logits.tape->apply(Prim::BceLogits, {logits}, std::move(a));
}

/// Records `kind` on a fresh tape over constant inputs and returns the output.
inline Tensor apply_primitive(Prim kind, std::vector<Tensor> inputs, PrimAttrs attrs = {}) {
    Tape tape;
    std::vector<Var> vars;
    for (Tensor& t : inputs) vars.push_back(tape.constant(std::move(t)));
    return tape.apply(kind, vars, std::move(attrs)).value();
}

}  // namespace mscan::ad
