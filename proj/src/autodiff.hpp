#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace faramtn {

using ParamMap = std::map<std::string, Tensor>;

// Reverse-mode tape. Operations append nodes that record their inputs and a
// backward closure; backward() runs the closures in reverse creation order,
// which is a valid topological order because inputs always precede outputs.
// Gradients accumulate, so a tensor used several times (the shared fusion
// conv, a feature consumed by every group) collects every path's contribution.
class Tape {
public:
    using NodeId = std::int32_t;

    // Tracked input; named leaves are addressable in grad_of()/named_gradients().
    NodeId leaf(Tensor value, std::string name = {});
    // Untracked input: never receives a gradient.
    NodeId constant(Tensor value);

    NodeId conv2d(NodeId kernel, NodeId bias, NodeId x);
    NodeId fully_connected(NodeId w, NodeId b, NodeId z);
    NodeId relu(NodeId x);
    NodeId sigmoid(NodeId x);
    NodeId softmax(NodeId v);
    NodeId mean_pool_spatial(NodeId x);
    NodeId avg_pool2x2(NodeId x);
    NodeId mul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId axpby(double alpha, NodeId x, double beta, NodeId y);
    NodeId scale(NodeId x, double c);
    // Single element as a 1-element tensor.
    NodeId pick(NodeId x, std::int64_t flat_index);
    // log(max(x, floor)) elementwise; zero gradient inside the clamp.
    NodeId log_clamped(NodeId x, double floor);
    NodeId pow_const(NodeId x, double exponent);
    NodeId one_minus(NodeId x);
    NodeId sum(NodeId x);
    // sum_i coeffs[i] * xs[i] over scalar nodes.
    NodeId weighted_sum(const std::vector<NodeId>& xs, const std::vector<double>& coeffs);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    double scalar_value(NodeId id) const;
    bool requires_grad(NodeId id) const {
        return nodes_[static_cast<std::size_t>(id)].requires_grad;
    }
    std::size_t node_count() const { return nodes_.size(); }

    // Reverse accumulation from a scalar node. Clears previous gradients.
    void backward(NodeId loss);

    bool has_grad(NodeId id) const;
    const Tensor& grad(NodeId id) const;
    // Gradient of a named leaf; LookupError if the name was never recorded.
    const Tensor& grad_of(const std::string& leaf_name) const;
    // Every named leaf's gradient (zero tensor when untouched by the loss).
    ParamMap named_gradients() const;

private:
    // back(tape, gout) accumulates gout's contribution into the input grads.
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&, const Tensor&)> back;
    };

    NodeId push(Tensor value, bool requires_grad,
                std::function<void(Tape&, const Tensor&)> back = {});
    Tensor& grad_buf(NodeId id);
    Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> named_;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    int coords_checked = 0;
    std::string worst_param;
    std::int64_t worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central-difference certification of an analytic gradient. Samples
// min_coords coordinates (all of them when the parameter set is smaller) and
// reports the max relative error with denominator max(|analytic|, |numeric|,
// 1e-8). Throws NumericError if fn returns a non-finite value.
GradCheckResult finite_diff_gradcheck(const std::function<double(const ParamMap&)>& fn,
                                      const ParamMap& params, const ParamMap& analytic,
                                      double h = 1e-5, int min_coords = 200,
                                      std::uint64_t seed = 0);

}  // namespace faramtn
