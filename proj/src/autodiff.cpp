#include "autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "rng.hpp"

namespace faramtn {

Tape::NodeId Tape::push(Tensor value, bool requires_grad,
                        std::function<void(Tape&, const Tensor&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

Tape::NodeId Tape::leaf(Tensor value, std::string name) {
    NodeId id = push(std::move(value), true);
    if (!name.empty()) named_.emplace(std::move(name), id);
    return id;
}

Tape::NodeId Tape::constant(Tensor value) { return push(std::move(value), false); }

namespace {
bool any_grad(std::initializer_list<bool> flags) {
    for (bool f : flags) {
        if (f) return true;
    }
    return false;
}
}  // namespace

Tape::NodeId Tape::conv2d(NodeId kernel, NodeId bias, NodeId x) {
    Tensor y = conv2d_same(value(kernel), value(bias), value(x));
    if (!any_grad({requires_grad(kernel), requires_grad(bias), requires_grad(x)})) {
        return push(std::move(y), false);
    }
    return push(std::move(y), true, [kernel, bias, x](Tape& t, const Tensor& gout) {
        conv2d_same_backward(t.value(kernel), t.value(x), gout,
                             t.requires_grad(kernel) ? &t.grad_buf(kernel) : nullptr,
                             t.requires_grad(bias) ? &t.grad_buf(bias) : nullptr,
                             t.requires_grad(x) ? &t.grad_buf(x) : nullptr);
    });
}

Tape::NodeId Tape::fully_connected(NodeId w, NodeId b, NodeId z) {
    Tensor y = faramtn::fully_connected(value(w), value(b), value(z));
    if (!any_grad({requires_grad(w), requires_grad(b), requires_grad(z)})) {
        return push(std::move(y), false);
    }
    return push(std::move(y), true, [w, b, z](Tape& t, const Tensor& gout) {
        fully_connected_backward(t.value(w), t.value(z), gout,
                                 t.requires_grad(w) ? &t.grad_buf(w) : nullptr,
                                 t.requires_grad(b) ? &t.grad_buf(b) : nullptr,
                                 t.requires_grad(z) ? &t.grad_buf(z) : nullptr);
    });
}

Tape::NodeId Tape::relu(NodeId x) {
    Tensor y = faramtn::relu(value(x));
    if (!requires_grad(x)) return push(std::move(y), false);
    return push(std::move(y), true, [x](Tape& t, const Tensor& gout) {
        const Tensor& in = t.value(x);
        Tensor& gx = t.grad_buf(x);
        for (std::int64_t i = 0; i < in.size(); ++i) {
            if (in[i] > 0.0) gx[i] += gout[i];
        }
    });
}

Tape::NodeId Tape::sigmoid(NodeId x) {
    Tensor y = faramtn::sigmoid(value(x));
    if (!requires_grad(x)) return push(std::move(y), false);
    NodeId id = push(std::move(y), true);
    node(id).back = [x, id](Tape& t, const Tensor& gout) {
        const Tensor& out = t.value(id);
        Tensor& gx = t.grad_buf(x);
        for (std::int64_t i = 0; i < out.size(); ++i) gx[i] += gout[i] * out[i] * (1.0 - out[i]);
    };
    return id;
}

Tape::NodeId Tape::softmax(NodeId v) {
    Tensor y = faramtn::softmax(value(v));
    if (!requires_grad(v)) return push(std::move(y), false);
    NodeId id = push(std::move(y), true);
    node(id).back = [v, id](Tape& t, const Tensor& gout) {
        softmax_backward(t.value(id), gout, &t.grad_buf(v));
    };
    return id;
}

Tape::NodeId Tape::mean_pool_spatial(NodeId x) {
    Tensor y = faramtn::mean_pool_spatial(value(x));
    if (!requires_grad(x)) return push(std::move(y), false);
    return push(std::move(y), true, [x](Tape& t, const Tensor& gout) {
        mean_pool_spatial_backward(t.value(x).shape(), gout, &t.grad_buf(x));
    });
}

Tape::NodeId Tape::avg_pool2x2(NodeId x) {
    Tensor y = faramtn::avg_pool2x2(value(x));
    if (!requires_grad(x)) return push(std::move(y), false);
    return push(std::move(y), true, [x](Tape& t, const Tensor& gout) {
        avg_pool2x2_backward(gout, &t.grad_buf(x));
    });
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    Tensor y = elementwise_mul(value(a), value(b));
    if (!any_grad({requires_grad(a), requires_grad(b)})) return push(std::move(y), false);
    return push(std::move(y), true, [a, b](Tape& t, const Tensor& gout) {
        elementwise_mul_backward(t.value(a), t.value(b), gout,
                                 t.requires_grad(a) ? &t.grad_buf(a) : nullptr,
                                 t.requires_grad(b) ? &t.grad_buf(b) : nullptr);
    });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) { return axpby(1.0, a, 1.0, b); }

Tape::NodeId Tape::sub(NodeId a, NodeId b) { return axpby(1.0, a, -1.0, b); }

Tape::NodeId Tape::axpby(double alpha, NodeId x, double beta, NodeId y) {
    Tensor out = faramtn::axpby(alpha, value(x), beta, value(y));
    if (!any_grad({requires_grad(x), requires_grad(y)})) return push(std::move(out), false);
    return push(std::move(out), true, [alpha, x, beta, y](Tape& t, const Tensor& gout) {
        if (t.requires_grad(x)) {
            Tensor& gx = t.grad_buf(x);
            for (std::int64_t i = 0; i < gout.size(); ++i) gx[i] += alpha * gout[i];
        }
        if (t.requires_grad(y)) {
            Tensor& gy = t.grad_buf(y);
            for (std::int64_t i = 0; i < gout.size(); ++i) gy[i] += beta * gout[i];
        }
    });
}

Tape::NodeId Tape::scale(NodeId x, double c) {
    Tensor y = faramtn::scale(value(x), c);
    if (!requires_grad(x)) return push(std::move(y), false);
    return push(std::move(y), true, [x, c](Tape& t, const Tensor& gout) {
        Tensor& gx = t.grad_buf(x);
        for (std::int64_t i = 0; i < gout.size(); ++i) gx[i] += c * gout[i];
    });
}

Tape::NodeId Tape::pick(NodeId x, std::int64_t flat_index) {
    const Tensor& in = value(x);
    if (flat_index < 0 || flat_index >= in.size()) {
        throw LookupError("pick: index " + std::to_string(flat_index) + " out of range for " +
                          in.shape_string());
    }
    Tensor y = Tensor::scalar(in[flat_index]);
    if (!requires_grad(x)) return push(std::move(y), false);
    return push(std::move(y), true, [x, flat_index](Tape& t, const Tensor& gout) {
        t.grad_buf(x)[flat_index] += gout[0];
    });
}

Tape::NodeId Tape::log_clamped(NodeId x, double floor) {
    const Tensor& in = value(x);
    Tensor y = in;
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = std::log(std::max(y[i], floor));
    if (!requires_grad(x)) return push(std::move(y), false);
    return push(std::move(y), true, [x, floor](Tape& t, const Tensor& gout) {
        const Tensor& in2 = t.value(x);
        Tensor& gx = t.grad_buf(x);
        for (std::int64_t i = 0; i < in2.size(); ++i) {
            if (in2[i] > floor) gx[i] += gout[i] / in2[i];
        }
    });
}

Tape::NodeId Tape::pow_const(NodeId x, double exponent) {
    const Tensor& in = value(x);
    Tensor y = in;
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = std::pow(y[i], exponent);
    if (!requires_grad(x) || exponent == 0.0) return push(std::move(y), requires_grad(x));
    return push(std::move(y), true, [x, exponent](Tape& t, const Tensor& gout) {
        const Tensor& in2 = t.value(x);
        Tensor& gx = t.grad_buf(x);
        for (std::int64_t i = 0; i < in2.size(); ++i) {
            gx[i] += gout[i] * exponent * std::pow(in2[i], exponent - 1.0);
        }
    });
}

Tape::NodeId Tape::one_minus(NodeId x) {
    const Tensor& in = value(x);
    Tensor y = in;
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = 1.0 - y[i];
    if (!requires_grad(x)) return push(std::move(y), false);
    return push(std::move(y), true, [x](Tape& t, const Tensor& gout) {
        Tensor& gx = t.grad_buf(x);
        for (std::int64_t i = 0; i < gout.size(); ++i) gx[i] -= gout[i];
    });
}

Tape::NodeId Tape::sum(NodeId x) {
    const Tensor& in = value(x);
    double s = 0.0;
    for (std::int64_t i = 0; i < in.size(); ++i) s += in[i];
    Tensor y = Tensor::scalar(s);
    if (!requires_grad(x)) return push(std::move(y), false);
    return push(std::move(y), true, [x](Tape& t, const Tensor& gout) {
        Tensor& gx = t.grad_buf(x);
        for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += gout[0];
    });
}

Tape::NodeId Tape::weighted_sum(const std::vector<NodeId>& xs, const std::vector<double>& coeffs) {
    if (xs.size() != coeffs.size()) throw ShapeError("weighted_sum: xs/coeffs length mismatch");
    double s = 0.0;
    bool rg = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        s += coeffs[i] * scalar_value(xs[i]);
        rg = rg || requires_grad(xs[i]);
    }
    Tensor y = Tensor::scalar(s);
    if (!rg) return push(std::move(y), false);
    return push(std::move(y), true, [xs, coeffs](Tape& t, const Tensor& gout) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (t.requires_grad(xs[i])) t.grad_buf(xs[i])[0] += coeffs[i] * gout[0];
        }
    });
}

double Tape::scalar_value(NodeId id) const {
    const Tensor& v = value(id);
    if (v.size() != 1) throw ShapeError("expected scalar node, got " + v.shape_string());
    return v[0];
}

void Tape::backward(NodeId loss) {
    const Tensor& lv = value(loss);
    if (lv.size() != 1) throw ShapeError("backward: loss must be a scalar");
    for (Node& n : nodes_) n.grad = Tensor();
    grad_buf(loss)[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = node(id);
        if (n.back && !n.grad.empty()) n.back(*this, n.grad);
    }
}

bool Tape::has_grad(NodeId id) const {
    return !nodes_[static_cast<std::size_t>(id)].grad.empty();
}

const Tensor& Tape::grad(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) {
        throw LookupError("gradient requested for a node the loss never reached");
    }
    return n.grad;
}

const Tensor& Tape::grad_of(const std::string& leaf_name) const {
    auto it = named_.find(leaf_name);
    if (it == named_.end()) {
        throw LookupError("parameter '" + leaf_name + "' was not recorded on this tape");
    }
    return grad(it->second);
}

ParamMap Tape::named_gradients() const {
    ParamMap out;
    for (const auto& [name, id] : named_) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        out.emplace(name, n.grad.empty() ? Tensor::zeros(n.value.shape()) : n.grad);
    }
    return out;
}

GradCheckResult finite_diff_gradcheck(const std::function<double(const ParamMap&)>& fn,
                                      const ParamMap& params, const ParamMap& analytic,
                                      double h, int min_coords, std::uint64_t seed) {
    if (h <= 0.0) throw ConfigError("gradcheck: step must be positive");

    struct Coord {
        std::string name;
        std::int64_t index;
    };
    std::vector<Coord> coords;
    std::int64_t total = 0;
    for (const auto& [name, t] : params) total += t.size();
    Rng rng(seed);
    if (total <= min_coords) {
        for (const auto& [name, t] : params) {
            for (std::int64_t i = 0; i < t.size(); ++i) coords.push_back({name, i});
        }
    } else {
        // sample flat offsets without replacement
        std::vector<std::int64_t> offsets(static_cast<std::size_t>(total));
        for (std::int64_t i = 0; i < total; ++i) offsets[static_cast<std::size_t>(i)] = i;
        rng.shuffle(offsets);
        offsets.resize(static_cast<std::size_t>(min_coords));
        std::sort(offsets.begin(), offsets.end());
        auto it = params.begin();
        std::int64_t base = 0;
        for (std::int64_t off : offsets) {
            while (off >= base + it->second.size()) {
                base += it->second.size();
                ++it;
            }
            coords.push_back({it->first, off - base});
        }
    }

    GradCheckResult res;
    ParamMap work = params;
    for (const Coord& c : coords) {
        Tensor& t = work.at(c.name);
        const double orig = t[c.index];
        t[c.index] = orig + h;
        const double fp = fn(work);
        t[c.index] = orig - h;
        const double fm = fn(work);
        t[c.index] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("gradcheck: non-finite loss at parameter '" + c.name + "'");
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic.at(c.name)[c.index];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / denom;
        if (rel > res.max_rel_error) {
            res.max_rel_error = rel;
            res.worst_param = c.name;
            res.worst_index = c.index;
            res.worst_analytic = a;
            res.worst_numeric = numeric;
        }
    }
    res.coords_checked = static_cast<int>(coords.size());
    return res;
}

}  // namespace faramtn
