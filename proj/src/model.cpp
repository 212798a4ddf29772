#include "model.hpp"

#include <cmath>

namespace faramtn {

std::pair<int, int> ModelConfig::feature_size() const {
    int h = input_height, w = input_width;
    for (int p : backbone_pool) {
        if (p == 2) {
            h /= 2;
            w /= 2;
        }
    }
    return {h, w};
}

void ModelConfig::validate() const {
    if (input_channels < 1 || input_height < 1 || input_width < 1) {
        throw ConfigError("model config: input shape must be positive");
    }
    if (backbone_channels.empty()) throw ConfigError("model config: backbone has no stages");
    if (backbone_pool.size() != backbone_channels.size()) {
        throw ConfigError("model config: pool plan length must match stage count");
    }
    int h = input_height, w = input_width;
    for (int p : backbone_pool) {
        if (p != 1 && p != 2) throw ConfigError("model config: pool factors must be 1 or 2");
        if (p == 2) {
            if (h % 2 != 0 || w % 2 != 0) {
                throw ConfigError("model config: pool plan does not divide the input size");
            }
            h /= 2;
            w /= 2;
        }
    }
    for (int c : backbone_channels) {
        if (c < 1) throw ConfigError("model config: stage widths must be positive");
    }
    if (reduction_ratio < 1) throw ConfigError("model config: reduction ratio must be >= 1");
    if (shared_channels() % reduction_ratio != 0) {
        throw ConfigError("model config: channels " + std::to_string(shared_channels()) +
                          " not divisible by reduction ratio " + std::to_string(reduction_ratio));
    }
    if (fusion_mid() < 1) throw ConfigError("model config: fusion mid width must be >= 1");
    if (theta < 0.0 || theta > 1.0) throw ConfigError("model config: theta must be in [0,1]");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model config: dropout must be in [0,1)");
}

std::int64_t shared_param_total(std::int64_t conv_params, std::int64_t attention_per_group,
                                int groups) {
    return conv_params + static_cast<std::int64_t>(groups) * attention_per_group;
}

std::int64_t nonshared_param_total(std::int64_t conv_params, std::int64_t attention_per_group,
                                   int groups) {
    return static_cast<std::int64_t>(groups) * (conv_params + attention_per_group);
}

Model::Model(ModelConfig config, AttributeGrouping grouping)
    : config_(std::move(config)), grouping_(std::move(grouping)) {
    config_.validate();
}

std::map<std::string, std::vector<int>> Model::param_shapes() const {
    std::map<std::string, std::vector<int>> shapes;
    const int c = config_.shared_channels();
    const int mid = config_.fusion_mid();
    const int red = c / config_.reduction_ratio;

    int in = config_.input_channels;
    for (std::size_t s = 0; s < config_.backbone_channels.size(); ++s) {
        const int out = config_.backbone_channels[s];
        const std::string base = "backbone.conv" + std::to_string(s);
        shapes[base + ".kernel"] = {out, in, 3, 3};
        shapes[base + ".bias"] = {out};
        in = out;
    }
    shapes["fusion.conv0.kernel"] = {mid, c, 1, 1};
    shapes["fusion.conv0.bias"] = {mid};
    shapes["fusion.conv1.kernel"] = {mid, mid, 3, 3};
    shapes["fusion.conv1.bias"] = {mid};
    shapes["fusion.conv2.kernel"] = {c, mid, 1, 1};
    shapes["fusion.conv2.bias"] = {c};
    for (int g = 0; g < groups(); ++g) {
        const std::string base = "attention.g" + std::to_string(g);
        shapes[base + ".reduce.weight"] = {red, c};
        shapes[base + ".expand.weight"] = {c, red};
        if (config_.attention_bias) {
            shapes[base + ".reduce.bias"] = {red};
            shapes[base + ".expand.bias"] = {c};
        }
    }
    for (int i = 0; i < attributes(); ++i) {
        const std::string base = "head." + std::to_string(i);
        shapes[base + ".weight"] = {2, c};
        shapes[base + ".bias"] = {2};
    }
    return shapes;
}

ParamMap Model::init_params(std::uint64_t seed) const {
    Rng rng(seed);
    ParamMap params;
    // Creation order is fixed (sorted shape map), so the draw sequence is
    // reproducible for a given seed.
    for (const auto& [name, shape] : param_shapes()) {
        Tensor t = Tensor::zeros(shape);
        const bool is_weight = name.ends_with(".kernel") || name.ends_with(".weight");
        if (is_weight) {
            std::int64_t fan_in = 1;
            for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
        }
        params.emplace(name, std::move(t));
    }
    return params;
}

void Model::check_params(const ParamMap& params) const {
    for (const auto& [name, shape] : param_shapes()) {
        auto it = params.find(name);
        if (it == params.end()) throw LookupError("missing parameter '" + name + "'");
        if (it->second.shape() != shape) {
            throw ShapeError("parameter '" + name + "' has shape " + it->second.shape_string() +
                             ", expected " + Tensor::zeros(shape).shape_string());
        }
    }
}

Tape::NodeId Model::TapeParams::at(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw LookupError("parameter '" + name + "' not staged on tape");
    return it->second;
}

Model::TapeParams Model::stage_params(Tape& tape, const ParamMap& params,
                                      bool requires_grad) const {
    check_params(params);
    TapeParams tp;
    for (const auto& [name, tensor] : params) {
        tp.ids[name] = requires_grad ? tape.leaf(tensor, name) : tape.constant(tensor);
    }
    return tp;
}

Model::ForwardNodes Model::forward_graph(Tape& tape, const TapeParams& tp, Tape::NodeId image,
                                         bool train, Rng* dropout_rng) const {
    ForwardNodes out;
    const int g_count = groups();
    const int c = config_.shared_channels();

    // shared bottom
    Tape::NodeId x = image;
    for (std::size_t s = 0; s < config_.backbone_channels.size(); ++s) {
        const std::string base = "backbone.conv" + std::to_string(s);
        x = tape.relu(tape.conv2d(tp.at(base + ".kernel"), tp.at(base + ".bias"), x));
        if (config_.backbone_pool[s] == 2) x = tape.avg_pool2x2(x);
    }
    out.feature = x;

    // group-specific attention over the pooled feature, one shared conv stack
    Tape::NodeId z = tape.mean_pool_spatial(x);
    Tape::NodeId fx = tape.conv2d(tp.at("fusion.conv0.kernel"), tp.at("fusion.conv0.bias"), x);
    fx = tape.relu(fx);
    fx = tape.relu(tape.conv2d(tp.at("fusion.conv1.kernel"), tp.at("fusion.conv1.bias"), fx));
    fx = tape.conv2d(tp.at("fusion.conv2.kernel"), tp.at("fusion.conv2.bias"), fx);

    const int red = c / config_.reduction_ratio;
    out.group_features.reserve(static_cast<std::size_t>(g_count));
    for (int g = 0; g < g_count; ++g) {
        const std::string base = "attention.g" + std::to_string(g);
        Tape::NodeId b1 = config_.attention_bias ? tp.at(base + ".reduce.bias")
                                                 : tape.constant(Tensor::zeros({red}));
        Tape::NodeId b2 = config_.attention_bias ? tp.at(base + ".expand.bias")
                                                 : tape.constant(Tensor::zeros({c}));
        Tape::NodeId hidden = tape.relu(tape.fully_connected(tp.at(base + ".reduce.weight"), b1, z));
        Tape::NodeId psi = tape.sigmoid(tape.fully_connected(tp.at(base + ".expand.weight"), b2, hidden));
        out.group_features.push_back(tape.mul(fx, psi));
    }

    // cross-group fusion: every group interacts with the pooled sum of groups
    Tape::NodeId total = out.group_features[0];
    for (int g = 1; g < g_count; ++g) total = tape.add(total, out.group_features[g]);
    const double theta = config_.theta;
    out.fused.reserve(static_cast<std::size_t>(g_count));
    for (int g = 0; g < g_count; ++g) {
        Tape::NodeId f = tape.mul(out.group_features[static_cast<std::size_t>(g)], total);
        out.fused.push_back(tape.relu(
            tape.axpby(theta, f, 1.0 - theta, out.group_features[static_cast<std::size_t>(g)])));
    }

    // per-attribute binary heads over the pooled fused feature of their group
    std::vector<Tape::NodeId> pooled;
    pooled.reserve(static_cast<std::size_t>(g_count));
    for (int g = 0; g < g_count; ++g) pooled.push_back(tape.mean_pool_spatial(out.fused[static_cast<std::size_t>(g)]));

    const bool use_dropout = train && config_.dropout > 0.0;
    if (use_dropout && dropout_rng == nullptr) {
        throw ConfigError("forward: train mode with dropout requires an rng");
    }
    out.head_probs.reserve(static_cast<std::size_t>(attributes()));
    for (int i = 0; i < attributes(); ++i) {
        const std::string base = "head." + std::to_string(i);
        Tape::NodeId v = pooled[static_cast<std::size_t>(grouping_.group_of(i))];
        if (use_dropout) {
            const double keep = 1.0 - config_.dropout;
            Tensor mask({c});
            for (int ch = 0; ch < c; ++ch) {
                mask[ch] = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
            }
            v = tape.mul(v, tape.constant(std::move(mask)));
        }
        out.head_probs.push_back(
            tape.softmax(tape.fully_connected(tp.at(base + ".weight"), tp.at(base + ".bias"), v)));
    }
    return out;
}

Tensor Model::backbone_forward(const ParamMap& params, const Tensor& image) const {
    if (image.rank() != 3 || image.dim(0) != config_.input_channels ||
        image.dim(1) != config_.input_height || image.dim(2) != config_.input_width) {
        throw ShapeError("backbone: image shape " + image.shape_string() +
                         " does not match the configured input");
    }
    check_params(params);
    Tensor x = image;
    for (std::size_t s = 0; s < config_.backbone_channels.size(); ++s) {
        const std::string base = "backbone.conv" + std::to_string(s);
        x = relu(conv2d_same(params.at(base + ".kernel"), params.at(base + ".bias"), x));
        if (config_.backbone_pool[s] == 2) x = avg_pool2x2(x);
    }
    return x;
}

Tensor Model::wsgsa_attention(const ParamMap& params, const Tensor& z, int group) const {
    if (group < 0 || group >= groups()) throw LookupError("attention: group index out of range");
    const int c = config_.shared_channels();
    const int red = c / config_.reduction_ratio;
    const std::string base = "attention.g" + std::to_string(group);
    const Tensor& w1 = params.at(base + ".reduce.weight");
    const Tensor& w2 = params.at(base + ".expand.weight");
    const Tensor b1 = config_.attention_bias ? params.at(base + ".reduce.bias") : Tensor::zeros({red});
    const Tensor b2 = config_.attention_bias ? params.at(base + ".expand.bias") : Tensor::zeros({c});
    return sigmoid(fully_connected(w2, b2, relu(fully_connected(w1, b1, z))));
}

std::vector<Tensor> Model::wsgsa_forward(const ParamMap& params, const Tensor& feature) const {
    const Tensor z = mean_pool_spatial(feature);
    Tensor fx = relu(conv2d_same(params.at("fusion.conv0.kernel"), params.at("fusion.conv0.bias"),
                                 feature));
    fx = relu(conv2d_same(params.at("fusion.conv1.kernel"), params.at("fusion.conv1.bias"), fx));
    fx = conv2d_same(params.at("fusion.conv2.kernel"), params.at("fusion.conv2.bias"), fx);
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(groups()));
    for (int g = 0; g < groups(); ++g) {
        out.push_back(elementwise_mul(fx, wsgsa_attention(params, z, g)));
    }
    return out;
}

std::vector<Tensor> cgff_fuse(const std::vector<Tensor>& group_features, double theta) {
    if (group_features.empty()) throw ShapeError("cgff_fuse: no group features");
    if (theta < 0.0 || theta > 1.0) throw ConfigError("cgff_fuse: theta must be in [0,1]");
    for (const Tensor& t : group_features) {
        if (!t.same_shape(group_features.front())) {
            throw ShapeError("cgff_fuse: group features must share a shape");
        }
    }
    Tensor total = group_features.front();
    for (std::size_t g = 1; g < group_features.size(); ++g) total = add(total, group_features[g]);
    std::vector<Tensor> fused;
    fused.reserve(group_features.size());
    for (const Tensor& xg : group_features) {
        fused.push_back(relu(axpby(theta, elementwise_mul(xg, total), 1.0 - theta, xg)));
    }
    return fused;
}

Tensor Model::predict_heads(const ParamMap& params, const std::vector<Tensor>& fused) const {
    if (static_cast<int>(fused.size()) != groups()) {
        throw ConfigError("predict_heads: expected " + std::to_string(groups()) +
                          " group features, got " + std::to_string(fused.size()));
    }
    const int k = attributes();
    std::vector<Tensor> pooled;
    pooled.reserve(fused.size());
    for (const Tensor& f : fused) pooled.push_back(f.rank() == 3 ? mean_pool_spatial(f) : f);
    Tensor probs({k, 2});
    for (int i = 0; i < k; ++i) {
        const std::string base = "head." + std::to_string(i);
        const Tensor p = softmax(fully_connected(params.at(base + ".weight"),
                                                 params.at(base + ".bias"),
                                                 pooled[static_cast<std::size_t>(grouping_.group_of(i))]));
        probs.at(i, 0) = p[0];
        probs.at(i, 1) = p[1];
    }
    return probs;
}

Model::ForwardResult Model::forward(const ParamMap& params, const Tensor& image) const {
    Tape tape;
    TapeParams tp = stage_params(tape, params, false);
    ForwardNodes nodes = forward_graph(tape, tp, tape.constant(image), false, nullptr);
    ForwardResult res;
    res.probs = Tensor({attributes(), 2});
    for (int i = 0; i < attributes(); ++i) {
        const Tensor& p = tape.value(nodes.head_probs[static_cast<std::size_t>(i)]);
        res.probs.at(i, 0) = p[0];
        res.probs.at(i, 1) = p[1];
    }
    for (Tape::NodeId f : nodes.fused) res.fused.push_back(tape.value(f));
    return res;
}

ParamCountBreakdown Model::count_parameters(bool shared) const {
    const int c = config_.shared_channels();
    const int mid = config_.fusion_mid();
    const int red = c / config_.reduction_ratio;
    const int g = groups();

    ParamCountBreakdown out;
    int in = config_.input_channels;
    for (int width : config_.backbone_channels) {
        out.backbone += static_cast<std::int64_t>(width) * in * 9 + width;
        in = width;
    }
    const std::int64_t conv_f = (static_cast<std::int64_t>(mid) * c + mid) +
                                (static_cast<std::int64_t>(mid) * mid * 9 + mid) +
                                (static_cast<std::int64_t>(c) * mid + c);
    out.attention_per_group_weights = static_cast<std::int64_t>(red) * c * 2;
    out.attention_per_group_with_bias = out.attention_per_group_weights + red + c;
    const std::int64_t att_per_group =
        config_.attention_bias ? out.attention_per_group_with_bias : out.attention_per_group_weights;

    out.fusion_conv = shared ? conv_f : conv_f * g;
    out.attention = att_per_group * g;
    out.heads = static_cast<std::int64_t>(attributes()) * (2 * c + 2);
    out.total = out.backbone + out.fusion_conv + out.attention + out.heads;
    return out;
}

}  // namespace faramtn
