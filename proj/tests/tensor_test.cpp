// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mscan/error.hpp"
#include "mscan/tensor.hpp"

namespace mscan {
namespace {

TEST(Tensor, SizeIsProductOfShape) {
    Tensor t(Shape{3, 4}, 1.5);
    EXPECT_EQ(t.size(), 12u);
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_EQ(t.rows(), 3u);
    EXPECT_EQ(t.cols(), 4u);
    EXPECT_EQ(Tensor(Shape{0, 5}).size(), 0u);
}

TEST(Tensor, ValueCountMustMatchShape) {
    EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_NO_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3, 4}));
}

TEST(Tensor, RowMajorAccess) {
    const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(m.at(0, 2), 3.0);
    EXPECT_EQ(m.at(1, 0), 4.0);
}

TEST(Tensor, IdentityAndScalar) {
    const Tensor i = Tensor::identity(3);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(i.at(r, c), r == c ? 1.0 : 0.0);
    }
    EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
    EXPECT_THROW(Tensor::vector({1, 2}).item(), ShapeError);
}

TEST(Tensor, ShapeString) { EXPECT_EQ(shape_str({2, 3}), "[2,3]"); }

}  // namespace
}  // namespace mscan
