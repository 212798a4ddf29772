#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "grouping.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace faramtn {

// Network hyperparameters. The backbone is a small conv stack standing in for
// a large pretrained trunk: per stage a same-padded 3x3 conv + ReLU, followed
// by 2x2 mean-pool downsampling where the pool plan says 2.
struct ModelConfig {
    int input_channels = 3;
    int input_height = 32;
    int input_width = 32;
    std::vector<int> backbone_channels = {16, 32, 64};
    std::vector<int> backbone_pool = {2, 2, 1};  // spatial reduction per stage (1 or 2)
    int fusion_mid_channels = 0;                 // 0 -> C/4
    int reduction_ratio = 16;                    // attention bottleneck C -> C/r -> C
    double theta = 0.3;                          // cross-group residual mix
    double dropout = 0.15;                       // head dropout rate, train mode only
    bool attention_bias = true;

    int shared_channels() const { return backbone_channels.back(); }
    int fusion_mid() const {
        return fusion_mid_channels > 0 ? fusion_mid_channels : shared_channels() / 4;
    }
    // H', W' of the shared feature.
    std::pair<int, int> feature_size() const;
    void validate() const;
};

struct ParamCountBreakdown {
    std::int64_t backbone = 0;
    std::int64_t fusion_conv = 0;  // the shared conv stack f (times G when not shared)
    std::int64_t attention = 0;
    std::int64_t heads = 0;
    std::int64_t total = 0;
    std::int64_t attention_per_group_weights = 0;   // bias-free FC pair
    std::int64_t attention_per_group_with_bias = 0;
};

// shared = conv once + one attention pair per group; non-shared duplicates the
// conv stack per group.
std::int64_t shared_param_total(std::int64_t conv_params, std::int64_t attention_per_group,
                                int groups);
std::int64_t nonshared_param_total(std::int64_t conv_params, std::int64_t attention_per_group,
                                   int groups);

class Model {
public:
    Model(ModelConfig config, AttributeGrouping grouping);

    const ModelConfig& config() const { return config_; }
    const AttributeGrouping& grouping() const { return grouping_; }
    int groups() const { return grouping_.group_count(); }
    int attributes() const { return grouping_.attribute_count(); }

    // Deterministic fan-in-scaled uniform init; biases zero.
    ParamMap init_params(std::uint64_t seed) const;
    // name -> expected shape, used by init and persistence validation.
    std::map<std::string, std::vector<int>> param_shapes() const;

    // ---- tape graph ----
    struct TapeParams {
        std::map<std::string, Tape::NodeId> ids;
        Tape::NodeId at(const std::string& name) const;
    };
    struct ForwardNodes {
        Tape::NodeId feature = -1;                 // shared feature X
        std::vector<Tape::NodeId> group_features;  // X'_g
        std::vector<Tape::NodeId> fused;           // fused group features
        std::vector<Tape::NodeId> head_probs;      // K nodes, each a 2-vector
    };

    // Stage every parameter on the tape; requires_grad=false gives a pure
    // forward evaluation graph.
    TapeParams stage_params(Tape& tape, const ParamMap& params, bool requires_grad) const;

    // Full forward pass. dropout_rng must be non-null in train mode when the
    // configured dropout rate is positive.
    ForwardNodes forward_graph(Tape& tape, const TapeParams& tp, Tape::NodeId image, bool train,
                               Rng* dropout_rng) const;

    // ---- pure evaluation wrappers (run a local tape) ----
    Tensor backbone_forward(const ParamMap& params, const Tensor& image) const;
    // Group-specific channel attention from the pooled feature Z.
    Tensor wsgsa_attention(const ParamMap& params, const Tensor& z, int group) const;
    // Shared-conv + per-group gating; returns X'_g for every group.
    std::vector<Tensor> wsgsa_forward(const ParamMap& params, const Tensor& feature) const;
    // Probabilities (K x 2) from fused group features, eval mode.
    Tensor predict_heads(const ParamMap& params, const std::vector<Tensor>& fused) const;
    struct ForwardResult {
        Tensor probs;               // K x 2
        std::vector<Tensor> fused;  // per-group fused features
    };
    ForwardResult forward(const ParamMap& params, const Tensor& image) const;

    ParamCountBreakdown count_parameters(bool shared) const;

private:
    void check_params(const ParamMap& params) const;

    ModelConfig config_;
    AttributeGrouping grouping_;
};

// Cross-group feature fusion: F_g = X'_g (x) sum_j X'_j, fused = relu(theta*F
// + (1-theta)*X'). Pure; the tape path mirrors it.
std::vector<Tensor> cgff_fuse(const std::vector<Tensor>& group_features, double theta);

}  // namespace faramtn
