#include "losses.hpp"

#include <cmath>
#include <string>

namespace faramtn {

void LossConfig::validate() const {
    if (gamma < 0.0) throw ValidationError("loss config: gamma must be >= 0");
    if (eta < 0.0) throw ValidationError("loss config: eta must be >= 0");
    if (eps <= 0.0) throw ValidationError("loss config: eps must be > 0");
    if (alpha < 0.0 || alpha > 1.0) throw ValidationError("loss config: alpha must be in [0,1]");
}

FocalResult focal_loss(const Tensor& probs, const std::vector<std::uint8_t>& labels, double alpha,
                       double gamma, double eps) {
    if (probs.rank() != 2 || probs.dim(1) != 2) {
        throw ShapeError("focal_loss: probs must be K x 2, got " + probs.shape_string());
    }
    const int k = probs.dim(0);
    if (static_cast<int>(labels.size()) != k) {
        throw ShapeError("focal_loss: label count does not match K");
    }
    FocalResult res;
    res.per_task.resize(static_cast<std::size_t>(labels.size()));
    for (int i = 0; i < k; ++i) {
        const int y = labels[static_cast<std::size_t>(i)] ? 1 : 0;
        double pt = probs.at(i, y);
        if (pt <= eps) {
            pt = eps;
            res.clamped = true;
        }
        const double at = y == 1 ? alpha : 1.0 - alpha;
        const double li = -at * std::pow(1.0 - pt, gamma) * std::log(pt);
        res.per_task[static_cast<std::size_t>(i)] = li;
        res.sum += li;
    }
    return res;
}

double kl_divergence(const Tensor& x, const Tensor& y, double eps) {
    if (!x.same_shape(y)) {
        throw ShapeError("kl_divergence: length mismatch " + x.shape_string() + " vs " +
                         y.shape_string());
    }
    double s = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0) continue;
        s += x[i] * std::log(x[i] / std::max(y[i], eps));
    }
    return s;
}

double group_divergence_penalty(const std::vector<Tensor>& group_features, double eps) {
    const std::size_t g = group_features.size();
    if (g < 1) throw ShapeError("group_divergence_penalty: needs at least one group");
    if (g == 1) return 0.0;
    std::vector<Tensor> dists;
    dists.reserve(g);
    for (const Tensor& f : group_features) {
        dists.push_back(softmax(f.rank() == 3 ? mean_pool_spatial(f) : f));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        for (std::size_t j = 0; j < g; ++j) {
            if (i == j) continue;
            s += kl_divergence(dists[i], dists[j], eps);
        }
    }
    return s;
}

double total_loss(const std::vector<double>& per_task, const std::vector<double>& lambda,
                  double penalty, double eta) {
    if (per_task.size() != lambda.size()) {
        throw ShapeError("total_loss: per-task losses and lambda lengths differ");
    }
    if (eta < 0.0) throw ValidationError("total_loss: eta must be >= 0");
    double s = 0.0;
    for (std::size_t i = 0; i < per_task.size(); ++i) {
        if (lambda[i] < 0.0) {
            throw ValidationError("total_loss: negative task weight at index " + std::to_string(i));
        }
        s += lambda[i] * per_task[i];
    }
    return s - eta * penalty;
}

Tape::NodeId focal_term_node(Tape& tape, Tape::NodeId prob2, int label, double alpha, double gamma,
                             double eps) {
    const double at = label == 1 ? alpha : 1.0 - alpha;
    Tape::NodeId pt = tape.pick(prob2, label);
    Tape::NodeId mod = tape.pow_const(tape.one_minus(pt), gamma);
    Tape::NodeId lg = tape.log_clamped(pt, eps);
    return tape.scale(tape.mul(mod, lg), -at);
}

Tape::NodeId group_divergence_node(Tape& tape, const std::vector<Tape::NodeId>& group_features,
                                   double eps) {
    if (group_features.size() < 2) return tape.constant(Tensor::scalar(0.0));
    std::vector<Tape::NodeId> dist, logd;
    dist.reserve(group_features.size());
    logd.reserve(group_features.size());
    for (Tape::NodeId f : group_features) {
        Tape::NodeId pooled = tape.value(f).rank() == 3 ? tape.mean_pool_spatial(f) : f;
        Tape::NodeId d = tape.softmax(pooled);
        dist.push_back(d);
        logd.push_back(tape.log_clamped(d, eps));
    }
    std::vector<Tape::NodeId> terms;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        for (std::size_t j = 0; j < dist.size(); ++j) {
            if (i == j) continue;
            terms.push_back(tape.sum(tape.mul(dist[i], tape.sub(logd[i], logd[j]))));
        }
    }
    return tape.weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

}  // namespace faramtn
