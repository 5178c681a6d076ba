// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/tensor.hpp"

#include <cmath>
#include <sstream>

namespace a1o {

std::size_t shape_size(const Shape& shape)
{
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

namespace {

void check_shape(const Shape& shape)
{
    if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
    for (auto e : shape)
        if (e == 0) throw DimensionError("tensor extent must be positive in " + shape_to_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data))
{
    check_shape(shape_);
    if (shape_size(shape_) != data_.size())
        throw DimensionError("shape " + shape_to_string(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
    check_finite("tensor construction");
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape))
{
    check_shape(shape_);
    data_.assign(shape_size(shape_), 0.0);
}

Tensor Tensor::filled(Shape shape, double value)
{
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    t.check_finite("tensor construction");
    return t;
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

double Tensor::at(std::initializer_list<std::size_t> index) const
{
    if (index.size() != shape_.size()) throw DimensionError("index rank mismatch for " + shape_to_string(shape_));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= shape_[axis]) throw DimensionError("index out of range for " + shape_to_string(shape_));
        flat = flat * shape_[axis] + i;
        ++axis;
    }
    return data_[flat];
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_size(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    check_shape(t.shape_);
    t.data_ = data_;
    return t;
}

void Tensor::check_finite(const std::string& what) const
{
    for (auto v : data_)
        if (!std::isfinite(v)) throw ContractError(what + ": non-finite value");
}

}  // namespace a1o
