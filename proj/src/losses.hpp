#pragma once

#include <cstdint>
#include <vector>

#include "autodiff.hpp"
#include "tensor.hpp"

namespace faramtn {

struct LossConfig {
    double alpha = 0.25;    // positive-class weight; negatives get 1 - alpha
    double gamma = 2.0;     // focusing exponent
    double eta = 0.0025;    // divergence penalty coefficient
    double eps = 1e-8;      // clamp floor for log/ratio arguments

    void validate() const;
};

struct FocalResult {
    std::vector<double> per_task;
    double sum = 0.0;
    bool clamped = false;   // some p_t hit the eps floor
};

// Per-attribute focal loss. probs is K x 2 (rows sum to 1), labels in {0,1}.
// p_t is the probability assigned to the true class; the true class is
// weighted alpha when positive and 1-alpha when negative.
FocalResult focal_loss(const Tensor& probs, const std::vector<std::uint8_t>& labels, double alpha,
                       double gamma, double eps = 1e-8);

// KL(X||Y) in nats over two distributions of equal length. X entries of zero
// contribute nothing; Y is clamped at eps.
double kl_divergence(const Tensor& x, const Tensor& y, double eps = 1e-8);

// Spatially pool each group feature, softmax-normalize, then sum the directed
// KL over all ordered pairs. One group (or identical features) gives zero.
double group_divergence_penalty(const std::vector<Tensor>& group_features, double eps = 1e-8);

// sum_i lambda_i * L_i - eta * penalty.
double total_loss(const std::vector<double>& per_task, const std::vector<double>& lambda,
                  double penalty, double eta);

// ---- tape builders ---------------------------------------------------------

// Focal term for one attribute: prob2 is that attribute's 2-class probability
// node. Returns a scalar node.
Tape::NodeId focal_term_node(Tape& tape, Tape::NodeId prob2, int label, double alpha, double gamma,
                             double eps);

// Pairwise-KL penalty over the fused group feature nodes. Returns a scalar
// node (zero constant when there is a single group).
Tape::NodeId group_divergence_node(Tape& tape, const std::vector<Tape::NodeId>& group_features,
                                   double eps);

}  // namespace faramtn
