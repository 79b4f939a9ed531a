// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mscan/error.hpp"

namespace mscan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "," : "") << shape[k];
    os << ']';
    return os.str();
}

/// Dense row-major array of 64-bit reals.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_size(shape), fill) {}

    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
        if (shape_size(shape) != data.size()) {
            throw ShapeError("tensor: shape " + shape_str(shape) + " does not hold " +
                             std::to_string(data.size()) + " values");
        }
    }

    static Tensor vector(std::vector<double> values) {
        Shape s{values.size()};
        return Tensor(std::move(s), std::move(values));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        return Tensor(Shape{rows, cols}, std::move(values));
    }

    static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

    static Tensor identity(std::size_t n) {
        Tensor t(Shape{n, n});
        for (std::size_t k = 0; k < n; ++k) t.data[k * n + k] = 1.0;
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool empty() const { return data.empty(); }

    /// Extent of the leading axis for matrices; 1 for vectors.
    std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
    /// Extent of the trailing axis.
    std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

    double& operator[](std::size_t k) { return data[k]; }
    double operator[](std::size_t k) const { return data[k]; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    double item() const {
        if (data.size() != 1) throw ShapeError("tensor: item() on shape " + shape_str(shape));
        return data[0];
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape == b.shape && a.data == b.data;
    }
};

}  // namespace mscan
