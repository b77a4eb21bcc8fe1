#include "atpinn/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace atpinn {

std::size_t shape_numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data))
{
    if (shape_numel(shape_) != data_.size()) {
        throw std::invalid_argument("tensor: shape " + shape_str(shape_) + " does not match " +
                                    std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::vector(std::vector<double> v)
{
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
{
    return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("tensor: ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const
{
    if (shape_.empty()) return 1;
    return shape_[0];
}

std::size_t Tensor::cols() const
{
    if (shape_.size() < 2) return 1;
    return shape_[1];
}

double Tensor::item() const
{
    if (data_.size() != 1) throw std::logic_error("tensor: item() on non-scalar " + shape_str(shape_));
    return data_[0];
}

void Tensor::reset(const Shape& shape, double fill)
{
    shape_ = shape;
    data_.assign(shape_numel(shape_), fill);
}

void Tensor::resize(const Shape& shape)
{
    shape_ = shape;
    data_.resize(shape_numel(shape_));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const
{
    // Exponent bits all set <=> Inf or NaN. Integer form so the loop vectorizes.
    constexpr std::uint64_t kExp = 0x7FF0000000000000ULL;
    std::uint64_t bad = 0;
    for (double v : data_) bad |= std::uint64_t((std::bit_cast<std::uint64_t>(v) & kExp) == kExp);
    return bad == 0;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

}  // namespace atpinn
