#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace jsr {

struct InvalidParameter : std::runtime_error {
    explicit InvalidParameter(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense row-major tensor of doubles. Images are (C,H,W), batches (N,C,H,W).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> dims, double fill = 0.0)
        : dims_(std::move(dims)), data_(checked_size(dims_), fill) {}

    Tensor(std::vector<int64_t> dims, std::vector<double> data)
        : dims_(std::move(dims)), data_(std::move(data)) {
        if (static_cast<int64_t>(data_.size()) != checked_size(dims_))
            throw InvalidParameter("tensor data size does not match dims");
    }

    const std::vector<int64_t>& dims() const { return dims_; }
    int64_t dim(size_t i) const { return dims_.at(i); }
    size_t ndim() const { return dims_.size(); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    // (c,h,w) access
    double& at3(int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>((c * dims_[1] + h) * dims_[2] + w)];
    }
    double at3(int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>((c * dims_[1] + h) * dims_[2] + w)];
    }

    // (n,c,h,w) access
    double& at4(int64_t n, int64_t c, int64_t h, int64_t w) {
        return data_[static_cast<size_t>(((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w)];
    }
    double at4(int64_t n, int64_t c, int64_t h, int64_t w) const {
        return data_[static_cast<size_t>(((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w)];
    }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    static std::string shape_str(const std::vector<int64_t>& dims) {
        std::string s = "(";
        for (size_t i = 0; i < dims.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims[i]);
        }
        return s + ")";
    }
    std::string shape_str() const { return shape_str(dims_); }

private:
    static int64_t checked_size(const std::vector<int64_t>& dims) {
        int64_t n = 1;
        for (int64_t d : dims) {
            if (d < 1) throw InvalidParameter("tensor dims must be >= 1, got " + shape_str(dims));
            n *= d;
        }
        return n;
    }

    std::vector<int64_t> dims_;
    std::vector<double> data_;
};

using ImageTensor = Tensor;  // (C,H,W), values in [0,1]
using FeatureMap = Tensor;   // (N,C,H,W)

}  // namespace jsr
