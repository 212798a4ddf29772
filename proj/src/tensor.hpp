#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace faramtn {

// Dense row-major tensor of doubles, rank 1..4. Value semantics throughout;
// all model math runs in double precision.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> values);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value) { return Tensor({1}, {value}); }
    static Tensor from_values(std::vector<double> values);  // rank-1

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // rank-3 (c, i, j) access
    double& at(int c, int i, int j) {
        return data_[static_cast<std::size_t>((c * shape_[1] + i) * shape_[2] + j)];
    }
    double at(int c, int i, int j) const {
        return data_[static_cast<std::size_t>((c * shape_[1] + i) * shape_[2] + j)];
    }
    // rank-2 (i, j) access
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double squared_norm() const;

    std::string shape_string() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// ---- forward operators ----------------------------------------------------

// Spatial mean pool: CxHxW -> C.
Tensor mean_pool_spatial(const Tensor& x);

// W (out x in) * z (in) + b (out).
Tensor fully_connected(const Tensor& w, const Tensor& b, const Tensor& z);

// Cross-correlation with zero padding that preserves HxW. kernel is
// outC x inC x k x k with k odd; bias is outC; x is inC x H x W.
Tensor conv2d_same(const Tensor& kernel, const Tensor& bias, const Tensor& x);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Stable softmax over a rank-1 tensor.
Tensor softmax(const Tensor& v);

// Hadamard product. Shapes must match, or b may be a per-channel vector (C)
// broadcast over a's spatial dims (a is C x H x W). No other broadcasting.
Tensor elementwise_mul(const Tensor& a, const Tensor& b);

// Non-overlapping 2x2 mean pooling: C x H x W -> C x H/2 x W/2. H, W even.
Tensor avg_pool2x2(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
// alpha*x + beta*y elementwise.
Tensor axpby(double alpha, const Tensor& x, double beta, const Tensor& y);
Tensor scale(const Tensor& x, double c);

double sigmoid_scalar(double x);

// ---- backward kernels -----------------------------------------------------
// Each accumulates (+=) into the destination gradients; pass nullptr to skip
// a destination that does not require a gradient.

void conv2d_same_backward(const Tensor& kernel, const Tensor& x, const Tensor& dout,
                          Tensor* dkernel, Tensor* dbias, Tensor* dx);
void fully_connected_backward(const Tensor& w, const Tensor& z, const Tensor& dout,
                              Tensor* dw, Tensor* db, Tensor* dz);
void mean_pool_spatial_backward(const std::vector<int>& input_shape, const Tensor& dout,
                                Tensor* dx);
void avg_pool2x2_backward(const Tensor& dout, Tensor* dx);
void elementwise_mul_backward(const Tensor& a, const Tensor& b, const Tensor& dout,
                              Tensor* da, Tensor* db);
void softmax_backward(const Tensor& y, const Tensor& dout, Tensor* dx);

}  // namespace faramtn
