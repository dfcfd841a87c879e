#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dcd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

/// Dense row-major array of 64-bit floats. Tensors are plain values:
/// copyable, movable, and never shared mutably.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(shape_numel(shape_), 0.0);
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double v) {
        if (!std::isfinite(v)) throw std::invalid_argument("Tensor::full: non-finite fill value");
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    /// Construction from external data: shape/size must agree and every
    /// element must be finite.
    static Tensor from_data(Shape shape, std::vector<double> data) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.validate_shape();
        if (shape_numel(t.shape_) != data.size()) {
            throw std::invalid_argument("Tensor::from_data: shape " + shape_str(t.shape_) +
                                        " does not match data length " + std::to_string(data.size()));
        }
        for (double x : data) {
            if (!std::isfinite(x)) throw std::invalid_argument("Tensor::from_data: non-finite element");
        }
        t.data_ = std::move(data);
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rank() const { return shape_.size(); }

    std::size_t rows() const {
        require_rank2("rows");
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank2("cols");
        return shape_[1];
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) {
        require_rank2("at");
        return data_[r * shape_[1] + c];
    }
    double at(std::size_t r, std::size_t c) const {
        require_rank2("at");
        return data_[r * shape_[1] + c];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void validate_shape() const {
        for (std::size_t d : shape_) {
            if (d == 0) throw std::invalid_argument("Tensor: zero dimension in shape " + shape_str(shape_));
        }
    }
    void require_rank2(const char* who) const {
        if (shape_.size() != 2) {
            throw std::logic_error(std::string("Tensor::") + who + ": rank-2 required, have " + shape_str(shape_));
        }
    }

    Shape shape_;
    std::vector<double> data_;
};

}  // namespace dcd
