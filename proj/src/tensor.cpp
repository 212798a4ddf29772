#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace faramtn {

namespace {

std::int64_t shape_product(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 4) throw ShapeError("tensor rank must be 1..4");
    data_.assign(static_cast<std::size_t>(shape_product(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_.empty() || shape_.size() > 4) throw ShapeError("tensor rank must be 1..4");
    if (shape_product(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("tensor data length does not match shape");
    }
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::from_values(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor({n}, std::move(values));
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::squared_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

// ---- forward operators ----------------------------------------------------

Tensor mean_pool_spatial(const Tensor& x) {
    if (x.rank() != 3) throw ShapeError("mean_pool_spatial: expected CxHxW, got " + x.shape_string());
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c});
    const double inv = 1.0 / (static_cast<double>(h) * w);
    const double* src = x.data();
    for (int ci = 0; ci < c; ++ci) {
        double s = 0.0;
        const double* plane = src + static_cast<std::int64_t>(ci) * h * w;
        for (int k = 0; k < h * w; ++k) s += plane[k];
        out[ci] = s * inv;
    }
    return out;
}

Tensor fully_connected(const Tensor& w, const Tensor& b, const Tensor& z) {
    if (w.rank() != 2 || b.rank() != 1 || z.rank() != 1) {
        throw ShapeError("fully_connected: expected W[out x in], b[out], z[in]");
    }
    const int out = w.dim(0), in = w.dim(1);
    if (b.dim(0) != out || z.dim(0) != in) shape_mismatch("fully_connected", w, z);
    Tensor y({out});
    const double* wp = w.data();
    const double* zp = z.data();
    for (int r = 0; r < out; ++r) {
        double s = b[r];
        const double* row = wp + static_cast<std::int64_t>(r) * in;
        for (int c = 0; c < in; ++c) s += row[c] * zp[c];
        y[r] = s;
    }
    return y;
}

Tensor conv2d_same(const Tensor& kernel, const Tensor& bias, const Tensor& x) {
    if (kernel.rank() != 4) throw ShapeError("conv2d: kernel must be outC x inC x k x k");
    if (x.rank() != 3) throw ShapeError("conv2d: input must be inC x H x W");
    const int oc = kernel.dim(0), ic = kernel.dim(1), k = kernel.dim(2);
    if (kernel.dim(3) != k) throw ShapeError("conv2d: kernel must be square");
    if (k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd");
    if (bias.rank() != 1 || bias.dim(0) != oc) throw ShapeError("conv2d: bias must be outC");
    if (x.dim(0) != ic) {
        throw ShapeError("conv2d: input channels " + std::to_string(x.dim(0)) +
                         " do not match kernel inC " + std::to_string(ic));
    }
    const int h = x.dim(1), w = x.dim(2), pad = k / 2;
    Tensor y({oc, h, w});
    for (int o = 0; o < oc; ++o) {
        double* oplane = y.data() + static_cast<std::int64_t>(o) * h * w;
        const double bv = bias[o];
        for (int p = 0; p < h * w; ++p) oplane[p] = bv;
        for (int c = 0; c < ic; ++c) {
            const double* iplane = x.data() + static_cast<std::int64_t>(c) * h * w;
            const double* kp = kernel.data() + ((static_cast<std::int64_t>(o) * ic + c) * k) * k;
            for (int ki = 0; ki < k; ++ki) {
                for (int kj = 0; kj < k; ++kj) {
                    const double wv = kp[ki * k + kj];
                    if (wv == 0.0) continue;
                    const int di = ki - pad, dj = kj - pad;
                    const int i0 = std::max(0, -di), i1 = std::min(h, h - di);
                    const int j0 = std::max(0, -dj), j1 = std::min(w, w - dj);
                    for (int i = i0; i < i1; ++i) {
                        double* orow = oplane + static_cast<std::int64_t>(i) * w;
                        const double* irow = iplane + static_cast<std::int64_t>(i + di) * w + dj;
                        for (int j = j0; j < j1; ++j) orow[j] += wv * irow[j];
                    }
                }
            }
        }
    }
    return y;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    double* p = y.data();
    for (std::int64_t i = 0; i < y.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
    return y;
}

namespace {
// Saturated activations are nudged off 0 and 1 so gates and probabilities
// stay strictly inside the open interval even when exp() underflows.
double clamp_open_unit(double y) {
    if (y <= 0.0) return std::numeric_limits<double>::min();
    if (y >= 1.0) return 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return y;
}
}  // namespace

double sigmoid_scalar(double x) {
    if (x >= 0.0) return clamp_open_unit(1.0 / (1.0 + std::exp(-x)));
    const double e = std::exp(x);
    return clamp_open_unit(e / (1.0 + e));
}

Tensor sigmoid(const Tensor& x) {
    Tensor y = x;
    double* p = y.data();
    for (std::int64_t i = 0; i < y.size(); ++i) p[i] = sigmoid_scalar(p[i]);
    return y;
}

Tensor softmax(const Tensor& v) {
    if (v.rank() != 1) throw ShapeError("softmax: expected a vector, got " + v.shape_string());
    Tensor y = v;
    double* p = y.data();
    const std::int64_t n = y.size();
    double mx = p[0];
    for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, p[i]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        p[i] = std::exp(p[i] - mx);
        sum += p[i];
    }
    for (std::int64_t i = 0; i < n; ++i) p[i] = clamp_open_unit(p[i] / sum);
    return y;
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    if (a.same_shape(b)) {
        Tensor y = a;
        const double* bp = b.data();
        double* p = y.data();
        for (std::int64_t i = 0; i < y.size(); ++i) p[i] *= bp[i];
        return y;
    }
    // channel vector broadcast over spatial dims
    if (a.rank() == 3 && b.rank() == 1 && b.dim(0) == a.dim(0)) {
        const int c = a.dim(0), hw = a.dim(1) * a.dim(2);
        Tensor y = a;
        for (int ci = 0; ci < c; ++ci) {
            double* plane = y.data() + static_cast<std::int64_t>(ci) * hw;
            const double bv = b[ci];
            for (int k = 0; k < hw; ++k) plane[k] *= bv;
        }
        return y;
    }
    shape_mismatch("elementwise_mul", a, b);
}

Tensor avg_pool2x2(const Tensor& x) {
    if (x.rank() != 3) throw ShapeError("avg_pool2x2: expected CxHxW");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("avg_pool2x2: spatial dims must be even, got " + x.shape_string());
    }
    Tensor y({c, h / 2, w / 2});
    for (int ci = 0; ci < c; ++ci) {
        for (int i = 0; i < h / 2; ++i) {
            for (int j = 0; j < w / 2; ++j) {
                y.at(ci, i, j) = 0.25 * (x.at(ci, 2 * i, 2 * j) + x.at(ci, 2 * i, 2 * j + 1) +
                                         x.at(ci, 2 * i + 1, 2 * j) + x.at(ci, 2 * i + 1, 2 * j + 1));
            }
        }
    }
    return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_mismatch("add", a, b);
    Tensor y = a;
    const double* bp = b.data();
    double* p = y.data();
    for (std::int64_t i = 0; i < y.size(); ++i) p[i] += bp[i];
    return y;
}

Tensor axpby(double alpha, const Tensor& x, double beta, const Tensor& y) {
    if (!x.same_shape(y)) shape_mismatch("axpby", x, y);
    Tensor out = x;
    const double* yp = y.data();
    double* p = out.data();
    for (std::int64_t i = 0; i < out.size(); ++i) p[i] = alpha * p[i] + beta * yp[i];
    return out;
}

Tensor scale(const Tensor& x, double c) {
    Tensor y = x;
    double* p = y.data();
    for (std::int64_t i = 0; i < y.size(); ++i) p[i] *= c;
    return y;
}

// ---- backward kernels -----------------------------------------------------

void conv2d_same_backward(const Tensor& kernel, const Tensor& x, const Tensor& dout,
                          Tensor* dkernel, Tensor* dbias, Tensor* dx) {
    const int oc = kernel.dim(0), ic = kernel.dim(1), k = kernel.dim(2);
    const int h = x.dim(1), w = x.dim(2), pad = k / 2;
    for (int o = 0; o < oc; ++o) {
        const double* gplane = dout.data() + static_cast<std::int64_t>(o) * h * w;
        if (dbias) {
            double s = 0.0;
            for (int p = 0; p < h * w; ++p) s += gplane[p];
            (*dbias)[o] += s;
        }
        for (int c = 0; c < ic; ++c) {
            const double* iplane = x.data() + static_cast<std::int64_t>(c) * h * w;
            const std::int64_t kbase = ((static_cast<std::int64_t>(o) * ic + c) * k) * k;
            for (int ki = 0; ki < k; ++ki) {
                for (int kj = 0; kj < k; ++kj) {
                    const int di = ki - pad, dj = kj - pad;
                    const int i0 = std::max(0, -di), i1 = std::min(h, h - di);
                    const int j0 = std::max(0, -dj), j1 = std::min(w, w - dj);
                    if (dkernel) {
                        double s = 0.0;
                        for (int i = i0; i < i1; ++i) {
                            const double* grow = gplane + static_cast<std::int64_t>(i) * w;
                            const double* irow = iplane + static_cast<std::int64_t>(i + di) * w + dj;
                            for (int j = j0; j < j1; ++j) s += grow[j] * irow[j];
                        }
                        (*dkernel)[kbase + ki * k + kj] += s;
                    }
                    if (dx) {
                        const double wv = kernel[kbase + ki * k + kj];
                        if (wv == 0.0) continue;
                        double* xplane = dx->data() + static_cast<std::int64_t>(c) * h * w;
                        for (int i = i0; i < i1; ++i) {
                            const double* grow = gplane + static_cast<std::int64_t>(i) * w;
                            double* xrow = xplane + static_cast<std::int64_t>(i + di) * w + dj;
                            for (int j = j0; j < j1; ++j) xrow[j] += wv * grow[j];
                        }
                    }
                }
            }
        }
    }
}

void fully_connected_backward(const Tensor& w, const Tensor& z, const Tensor& dout,
                              Tensor* dw, Tensor* db, Tensor* dz) {
    const int out = w.dim(0), in = w.dim(1);
    for (int r = 0; r < out; ++r) {
        const double g = dout[r];
        if (db) (*db)[r] += g;
        const double* wrow = w.data() + static_cast<std::int64_t>(r) * in;
        double* dwrow = dw ? dw->data() + static_cast<std::int64_t>(r) * in : nullptr;
        for (int c = 0; c < in; ++c) {
            if (dwrow) dwrow[c] += g * z[c];
            if (dz) (*dz)[c] += g * wrow[c];
        }
    }
}

void mean_pool_spatial_backward(const std::vector<int>& input_shape, const Tensor& dout,
                                Tensor* dx) {
    if (!dx) return;
    const int c = input_shape[0], h = input_shape[1], w = input_shape[2];
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int ci = 0; ci < c; ++ci) {
        const double g = dout[ci] * inv;
        double* plane = dx->data() + static_cast<std::int64_t>(ci) * h * w;
        for (int k = 0; k < h * w; ++k) plane[k] += g;
    }
}

void avg_pool2x2_backward(const Tensor& dout, Tensor* dx) {
    if (!dx) return;
    const int c = dout.dim(0), oh = dout.dim(1), ow = dout.dim(2);
    for (int ci = 0; ci < c; ++ci) {
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                const double g = 0.25 * dout.at(ci, i, j);
                dx->at(ci, 2 * i, 2 * j) += g;
                dx->at(ci, 2 * i, 2 * j + 1) += g;
                dx->at(ci, 2 * i + 1, 2 * j) += g;
                dx->at(ci, 2 * i + 1, 2 * j + 1) += g;
            }
        }
    }
}

void elementwise_mul_backward(const Tensor& a, const Tensor& b, const Tensor& dout,
                              Tensor* da, Tensor* db) {
    if (a.same_shape(b)) {
        for (std::int64_t i = 0; i < a.size(); ++i) {
            if (da) (*da)[i] += dout[i] * b[i];
            if (db) (*db)[i] += dout[i] * a[i];
        }
        return;
    }
    // a is CxHxW, b is the broadcast channel vector
    const int c = a.dim(0), hw = a.dim(1) * a.dim(2);
    for (int ci = 0; ci < c; ++ci) {
        const std::int64_t base = static_cast<std::int64_t>(ci) * hw;
        const double bv = b[ci];
        double acc = 0.0;
        for (int k = 0; k < hw; ++k) {
            if (da) (*da)[base + k] += dout[base + k] * bv;
            acc += dout[base + k] * a[base + k];
        }
        if (db) (*db)[ci] += acc;
    }
}

void softmax_backward(const Tensor& y, const Tensor& dout, Tensor* dx) {
    if (!dx) return;
    const std::int64_t n = y.size();
    double dot = 0.0;
    for (std::int64_t i = 0; i < n; ++i) dot += dout[i] * y[i];
    for (std::int64_t i = 0; i < n; ++i) (*dx)[i] += y[i] * (dout[i] - dot);
}

}  // namespace faramtn
