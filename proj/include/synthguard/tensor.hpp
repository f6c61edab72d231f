#ifndef SYNTHGUARD_TENSOR_HPP
#define SYNTHGUARD_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "synthguard/errors.hpp"

namespace synthguard {

// Dense row-major matrix of doubles. Everything in the toolkit is rank <= 2;
// scalars are 1x1 and vectors are 1xn.
class Tensor {
  public:
    Tensor() = default;

    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("tensor data length does not match shape");
    }

    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

    static Tensor row(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor(1, n, std::move(v));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::vector<std::size_t> shape() const { return {rows_, cols_}; }

    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> span() const { return data_; }
    std::span<double> span() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace synthguard

#endif
