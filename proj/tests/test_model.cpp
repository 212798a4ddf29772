#include <doctest.h>

#include <cmath>

#include "model.hpp"

using namespace faramtn;

namespace {

AttributeGrouping tiny_grouping(int attrs_per_group, int groups) {
    std::vector<std::string> names, group_names;
    std::vector<int> assignment;
    for (int g = 0; g < groups; ++g) group_names.push_back("g" + std::to_string(g));
    for (int g = 0; g < groups; ++g) {
        for (int a = 0; a < attrs_per_group; ++a) {
            names.push_back("attr" + std::to_string(g) + "_" + std::to_string(a));
            assignment.push_back(g);
        }
    }
    return AttributeGrouping(std::move(names), std::move(group_names), std::move(assignment));
}

ModelConfig desk_config() { return ModelConfig{}; }

Tensor random_image(const ModelConfig& cfg, Rng& rng) {
    Tensor t({cfg.input_channels, cfg.input_height, cfg.input_width});
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("model config validation") {
    ModelConfig cfg = desk_config();
    CHECK_NOTHROW(cfg.validate());
    SUBCASE("channels must divide by the reduction ratio") {
        cfg.backbone_channels = {16, 32, 50};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("theta range") {
        cfg.theta = 1.2;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("pool plan must divide the input") {
        cfg.input_height = 30;
        cfg.input_width = 30;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
}

TEST_CASE("backbone shapes and zero propagation") {
    const Model model(desk_config(), tiny_grouping(4, 2));
    SUBCASE("desk config maps 3x32x32 to 64x8x8") {
        const auto [h, w] = model.config().feature_size();
        CHECK(h == 8);
        CHECK(w == 8);
        ParamMap params = model.init_params(1);
        Rng rng(2);
        const Tensor feat = model.backbone_forward(params, random_image(model.config(), rng));
        CHECK(feat.shape() == std::vector<int>{64, 8, 8});
    }
    SUBCASE("zero image with zero biases gives a zero feature map") {
        ParamMap params = model.init_params(1);  // biases init to zero already
        const Tensor feat = model.backbone_forward(
            params, Tensor::zeros({3, 32, 32}));
        for (std::int64_t i = 0; i < feat.size(); ++i) CHECK(feat[i] == 0.0);
    }
    SUBCASE("deterministic") {
        ParamMap params = model.init_params(3);
        Rng rng(4);
        const Tensor image = random_image(model.config(), rng);
        const Tensor a = model.backbone_forward(params, image);
        const Tensor b = model.backbone_forward(params, image);
        for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    SUBCASE("wrong input shape") {
        ParamMap params = model.init_params(1);
        CHECK_THROWS_AS(model.backbone_forward(params, Tensor::zeros({3, 16, 16})), ShapeError);
    }
}

TEST_CASE("wsgsa attention") {
    SUBCASE("all-zero parameters gate at one half") {
        const Model model(desk_config(), tiny_grouping(4, 2));
        ParamMap params = model.init_params(1);
        for (auto& [name, t] : params) {
            if (name.starts_with("attention.")) t = Tensor::zeros(t.shape());
        }
        const Tensor psi = model.wsgsa_attention(params, Tensor::zeros({64}), 0);
        for (std::int64_t i = 0; i < psi.size(); ++i) CHECK(psi[i] == 0.5);
    }
    SUBCASE("hand evaluation with C=2, r=2") {
        ModelConfig cfg = desk_config();
        cfg.backbone_channels = {2};
        cfg.backbone_pool = {1};
        cfg.reduction_ratio = 2;
        cfg.fusion_mid_channels = 1;
        const Model model(cfg, tiny_grouping(1, 1));
        ParamMap params = model.init_params(1);
        params.at("attention.g0.reduce.weight") = Tensor({1, 2}, {1, 1});
        params.at("attention.g0.reduce.bias") = Tensor::zeros({1});
        params.at("attention.g0.expand.weight") = Tensor({2, 1}, {1, 0});
        params.at("attention.g0.expand.bias") = Tensor::zeros({2});
        const Tensor psi = model.wsgsa_attention(params, Tensor({2}, {1, 1}), 0);
        // hidden = relu(1+1) = 2; out = sigmoid([2, 0])
        CHECK(psi[0] == doctest::Approx(0.8807970779778823).epsilon(1e-12));
        CHECK(psi[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("gates lie strictly inside (0,1)") {
        const Model model(desk_config(), tiny_grouping(4, 2));
        ParamMap params = model.init_params(5);
        Rng rng(6);
        Tensor z({64});
        for (int i = 0; i < 64; ++i) z[i] = rng.uniform(-10, 10);
        for (int g = 0; g < 2; ++g) {
            const Tensor psi = model.wsgsa_attention(params, z, g);
            for (std::int64_t i = 0; i < psi.size(); ++i) {
                CHECK(psi[i] > 0.0);
                CHECK(psi[i] < 1.0);
            }
        }
    }
    SUBCASE("different groups gate the same input differently") {
        const Model model(desk_config(), tiny_grouping(4, 2));
        ParamMap params = model.init_params(7);
        Rng rng(8);
        Tensor z({64});
        for (int i = 0; i < 64; ++i) z[i] = rng.uniform(-1, 1);
        const Tensor a = model.wsgsa_attention(params, z, 0);
        const Tensor b = model.wsgsa_attention(params, z, 1);
        bool differ = false;
        for (std::int64_t i = 0; i < a.size() && !differ; ++i) differ = a[i] != b[i];
        CHECK(differ);
    }
}

TEST_CASE("wsgsa forward") {
    const Model model(desk_config(), tiny_grouping(4, 2));
    Rng rng(9);

    SUBCASE("saturating expand bias forces the gate to one") {
        ParamMap params = model.init_params(10);
        for (int g = 0; g < 2; ++g) {
            params.at("attention.g" + std::to_string(g) + ".expand.bias") =
                Tensor::full({64}, 20.0);
        }
        const Tensor image = Tensor::full({3, 32, 32}, 0.5);
        const Tensor feat = model.backbone_forward(params, image);
        const std::vector<Tensor> gated = model.wsgsa_forward(params, feat);
        // recompute f(X) from the fusion stack alone
        Tensor fx = relu(conv2d_same(params.at("fusion.conv0.kernel"),
                                     params.at("fusion.conv0.bias"), feat));
        fx = relu(conv2d_same(params.at("fusion.conv1.kernel"), params.at("fusion.conv1.bias"), fx));
        fx = conv2d_same(params.at("fusion.conv2.kernel"), params.at("fusion.conv2.bias"), fx);
        for (std::int64_t i = 0; i < fx.size(); ++i) {
            CHECK(gated[0][i] == doctest::Approx(fx[i]).epsilon(1e-6));
        }
    }
    SUBCASE("zero attention parameters halve the shared conv output") {
        ParamMap params = model.init_params(11);
        for (auto& [name, t] : params) {
            if (name.starts_with("attention.")) t = Tensor::zeros(t.shape());
        }
        const Tensor image = random_image(model.config(), rng);
        const Tensor feat = model.backbone_forward(params, image);
        const std::vector<Tensor> gated = model.wsgsa_forward(params, feat);
        Tensor fx = relu(conv2d_same(params.at("fusion.conv0.kernel"),
                                     params.at("fusion.conv0.bias"), feat));
        fx = relu(conv2d_same(params.at("fusion.conv1.kernel"), params.at("fusion.conv1.bias"), fx));
        fx = conv2d_same(params.at("fusion.conv2.kernel"), params.at("fusion.conv2.bias"), fx);
        for (int g = 0; g < 2; ++g) {
            for (std::int64_t i = 0; i < fx.size(); ++i) {
                CHECK(gated[g][i] == doctest::Approx(0.5 * fx[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("shared conv gradients accumulate across groups") {
    // d(sum of all gated features)/d(fusion kernels) with G groups equals the
    // sum of the per-group path gradients.
    ModelConfig cfg = desk_config();
    cfg.input_height = 16;
    cfg.input_width = 16;
    cfg.backbone_channels = {8, 32};
    cfg.backbone_pool = {2, 1};
    const int groups = 3;
    const Model model(cfg, tiny_grouping(2, groups));
    ParamMap params = model.init_params(12);
    // keep the tiny attention bottleneck alive so gradients reach both layers
    for (int g = 0; g < groups; ++g) {
        params.at("attention.g" + std::to_string(g) + ".reduce.bias") =
            Tensor::full({32 / cfg.reduction_ratio}, 0.5);
    }
    Rng rng(13);
    Tensor image({3, 16, 16});
    for (std::int64_t i = 0; i < image.size(); ++i) image[i] = rng.uniform(0, 1);

    const auto fusion_grads_for = [&](const std::vector<int>& active_groups) {
        Tape tape;
        Model::TapeParams tp = model.stage_params(tape, params, true);
        Model::ForwardNodes f = model.forward_graph(tape, tp, tape.constant(image), false, nullptr);
        std::vector<Tape::NodeId> terms;
        for (int g : active_groups) {
            terms.push_back(tape.sum(f.group_features[static_cast<std::size_t>(g)]));
        }
        tape.backward(tape.weighted_sum(terms, std::vector<double>(terms.size(), 1.0)));
        return tape.named_gradients();
    };

    const ParamMap all = fusion_grads_for({0, 1, 2});
    std::vector<ParamMap> single;
    for (int g = 0; g < groups; ++g) single.push_back(fusion_grads_for({g}));
    for (const char* name : {"fusion.conv0.kernel", "fusion.conv1.kernel", "fusion.conv2.kernel"}) {
        const Tensor& full = all.at(name);
        for (std::int64_t i = 0; i < full.size(); ++i) {
            double summed = 0.0;
            for (int g = 0; g < groups; ++g) summed += single[static_cast<std::size_t>(g)].at(name)[i];
            CHECK(full[i] == doctest::Approx(summed).epsilon(1e-12));
        }
    }

    SUBCASE("attention parameters only touch their own group") {
        const ParamMap only_g0 = fusion_grads_for({0});
        // group 1's attention received nothing from group 0's path
        const Tensor& untouched = only_g0.at("attention.g1.reduce.weight");
        for (std::int64_t i = 0; i < untouched.size(); ++i) CHECK(untouched[i] == 0.0);
        bool any = false;
        const Tensor& touched = only_g0.at("attention.g0.reduce.weight");
        for (std::int64_t i = 0; i < touched.size() && !any; ++i) any = touched[i] != 0.0;
        CHECK(any);
    }
}

TEST_CASE("cgff fusion") {
    SUBCASE("theta=0 is elementwise relu, exactly") {
        const std::vector<Tensor> in = {Tensor({2}, {1, -2}), Tensor({2}, {-3, 4})};
        const std::vector<Tensor> out = cgff_fuse(in, 0.0);
        CHECK(out[0][0] == 1.0);
        CHECK(out[0][1] == 0.0);
        CHECK(out[1][0] == 0.0);
        CHECK(out[1][1] == 4.0);
    }
    SUBCASE("single group, theta=1") {
        const std::vector<Tensor> out = cgff_fuse({Tensor({2}, {1, -2})}, 1.0);
        CHECK(out[0][0] == 1.0);
        CHECK(out[0][1] == 4.0);
    }
    SUBCASE("two groups, theta=0.3 hand values") {
        const std::vector<Tensor> out =
            cgff_fuse({Tensor({2}, {1, 2}), Tensor({2}, {3, 4})}, 0.3);
        CHECK(out[0][0] == doctest::Approx(1.9).epsilon(1e-12));
        CHECK(out[0][1] == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("factorized form equals the naive pairwise double loop") {
        Rng rng(14);
        for (int trial = 0; trial < 50; ++trial) {
            const int g = 1 + static_cast<int>(rng.uniform_int(7));
            std::vector<Tensor> in;
            for (int i = 0; i < g; ++i) {
                Tensor t({3, 2, 2});
                for (std::int64_t k = 0; k < t.size(); ++k) t[k] = rng.uniform(-2, 2);
                in.push_back(std::move(t));
            }
            const double theta = rng.uniform(0, 1);
            const std::vector<Tensor> fast = cgff_fuse(in, theta);
            // naive oracle: explicit pairwise sum including the self term
            for (int gi = 0; gi < g; ++gi) {
                Tensor f = Tensor::zeros(in[0].shape());
                for (int gj = 0; gj < g; ++gj) {
                    const Tensor prod = elementwise_mul(in[static_cast<std::size_t>(gi)],
                                                        in[static_cast<std::size_t>(gj)]);
                    for (std::int64_t k = 0; k < f.size(); ++k) f[k] += prod[k];
                }
                for (std::int64_t k = 0; k < f.size(); ++k) {
                    const double expect =
                        std::max(0.0, theta * f[k] + (1 - theta) * in[static_cast<std::size_t>(gi)][k]);
                    CHECK(fast[static_cast<std::size_t>(gi)][k] ==
                          doctest::Approx(expect).epsilon(1e-10));
                }
            }
        }
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(cgff_fuse({Tensor({2}), Tensor({3})}, 0.3), ShapeError);
    }
}

TEST_CASE("prediction heads") {
    const Model model(desk_config(), tiny_grouping(4, 2));
    SUBCASE("zero heads emit even odds") {
        ParamMap params = model.init_params(15);
        for (auto& [name, t] : params) {
            if (name.starts_with("head.")) t = Tensor::zeros(t.shape());
        }
        const std::vector<Tensor> fused = {Tensor::full({64, 1, 1}, 0.3),
                                           Tensor::full({64, 1, 1}, -0.7)};
        const Tensor probs = model.predict_heads(params, fused);
        for (int i = 0; i < model.attributes(); ++i) {
            CHECK(probs.at(i, 0) == 0.5);
            CHECK(probs.at(i, 1) == 0.5);
        }
    }
    SUBCASE("logit gap of 2 gives the softmax value") {
        ModelConfig cfg = desk_config();
        const Model m(cfg, tiny_grouping(1, 1));
        ParamMap params = m.init_params(16);
        params.at("head.0.weight") = Tensor::zeros({2, 64});
        params.at("head.0.bias") = Tensor({2}, {2.0, 0.0});
        const Tensor probs = m.predict_heads(params, {Tensor::zeros({64, 1, 1})});
        CHECK(probs.at(0, 0) == doctest::Approx(0.8807970779778823).epsilon(1e-10));
        CHECK(probs.at(0, 1) == doctest::Approx(0.11920292202211755).epsilon(1e-10));
    }
    SUBCASE("rows sum to one") {
        ParamMap params = model.init_params(17);
        Rng rng(18);
        std::vector<Tensor> fused;
        for (int g = 0; g < 2; ++g) {
            Tensor t({64, 8, 8});
            for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-3, 3);
            fused.push_back(std::move(t));
        }
        const Tensor probs = model.predict_heads(params, fused);
        for (int i = 0; i < model.attributes(); ++i) {
            CHECK(probs.at(i, 0) + probs.at(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("group count mismatch") {
        ParamMap params = model.init_params(19);
        CHECK_THROWS_AS(model.predict_heads(params, {Tensor::zeros({64, 1, 1})}), ConfigError);
    }
}

TEST_CASE("full forward pass") {
    const Model model(desk_config(), tiny_grouping(4, 2));
    ParamMap params = model.init_params(20);
    Rng rng(21);
    const Tensor image = random_image(model.config(), rng);

    SUBCASE("shape contract") {
        const Model::ForwardResult res = model.forward(params, image);
        CHECK(res.probs.shape() == std::vector<int>{8, 2});
        CHECK(res.fused.size() == 2);
        CHECK(res.fused[0].shape() == std::vector<int>{64, 8, 8});
    }
    SUBCASE("eval mode is deterministic") {
        const Model::ForwardResult a = model.forward(params, image);
        const Model::ForwardResult b = model.forward(params, image);
        for (std::int64_t i = 0; i < a.probs.size(); ++i) CHECK(a.probs[i] == b.probs[i]);
    }
    SUBCASE("train and eval differ only through the dropout mask") {
        Tape t_eval;
        Model::TapeParams tp1 = model.stage_params(t_eval, params, false);
        const Model::ForwardNodes f1 =
            model.forward_graph(t_eval, tp1, t_eval.constant(image), false, nullptr);

        // dropout disabled: train mode must equal eval mode
        ModelConfig no_drop = model.config();
        no_drop.dropout = 0.0;
        const Model m2(no_drop, model.grouping());
        Tape t_train;
        Model::TapeParams tp2 = m2.stage_params(t_train, params, false);
        Rng drop(1);
        const Model::ForwardNodes f2 =
            m2.forward_graph(t_train, tp2, t_train.constant(image), true, &drop);
        for (int i = 0; i < model.attributes(); ++i) {
            const Tensor& a = t_eval.value(f1.head_probs[static_cast<std::size_t>(i)]);
            const Tensor& b = t_train.value(f2.head_probs[static_cast<std::size_t>(i)]);
            CHECK(a[0] == b[0]);
            CHECK(a[1] == b[1]);
        }
    }
}

TEST_CASE("weight sharing: perturbations route as the wiring demands") {
    const Model model(desk_config(), tiny_grouping(4, 2));
    ParamMap params = model.init_params(22);
    Rng rng(23);
    const Tensor image = random_image(model.config(), rng);
    const Tensor feat = model.backbone_forward(params, image);
    const std::vector<Tensor> base = model.wsgsa_forward(params, feat);

    SUBCASE("perturbing the shared conv moves every group") {
        ParamMap p2 = params;
        Tensor& kernel = p2.at("fusion.conv1.kernel");
        for (std::int64_t i = 0; i < kernel.size(); ++i) kernel[i] += 0.25;
        const std::vector<Tensor> bumped = model.wsgsa_forward(p2, feat);
        for (int g = 0; g < 2; ++g) {
            bool moved = false;
            for (std::int64_t i = 0; i < base[g].size() && !moved; ++i) {
                moved = bumped[g][i] != base[g][i];
            }
            CHECK(moved);
        }
    }
    SUBCASE("perturbing one group's attention moves only that group") {
        ParamMap p2 = params;
        p2.at("attention.g0.expand.weight")[0] += 0.5;
        const std::vector<Tensor> bumped = model.wsgsa_forward(p2, feat);
        bool g0_moved = false;
        for (std::int64_t i = 0; i < base[0].size() && !g0_moved; ++i) {
            g0_moved = bumped[0][i] != base[0][i];
        }
        CHECK(g0_moved);
        for (std::int64_t i = 0; i < base[1].size(); ++i) CHECK(bumped[1][i] == base[1][i]);
    }
}

TEST_CASE("parameter counting") {
    SUBCASE("published reference: C=2048, r=16, G=7 attention overhead") {
        ModelConfig cfg;
        cfg.backbone_channels = {2048};
        cfg.backbone_pool = {1};
        cfg.input_height = 4;
        cfg.input_width = 4;
        cfg.attention_bias = false;
        const Model model(cfg, tiny_grouping(1, 7));
        const ParamCountBreakdown c = model.count_parameters(true);
        CHECK(c.attention == 3670016);
        CHECK(c.attention_per_group_weights == 2 * 2048 * 128);
    }
    SUBCASE("desk default attention overhead") {
        const Model model(desk_config(), tiny_grouping(1, 7));
        const ParamCountBreakdown c = model.count_parameters(true);
        CHECK(c.attention_per_group_weights == 2 * 64 * 4);
        CHECK(7 * c.attention_per_group_weights == 3584);
    }
    SUBCASE("counting formulas") {
        CHECK(shared_param_total(1000, 100, 7) == 1700);
        CHECK(nonshared_param_total(1000, 100, 7) == 7700);
    }
    SUBCASE("G=1 makes shared and non-shared equal") {
        const Model model(desk_config(), tiny_grouping(4, 1));
        CHECK(model.count_parameters(true).total == model.count_parameters(false).total);
    }
    SUBCASE("shared never exceeds non-shared, strictly fewer when G>1") {
        for (int g = 1; g <= 7; ++g) {
            const Model model(desk_config(), tiny_grouping(2, g));
            const auto s = model.count_parameters(true);
            const auto n = model.count_parameters(false);
            CHECK(s.total <= n.total);
            if (g > 1) CHECK(s.total < n.total);
        }
    }
    SUBCASE("breakdown matches the actual parameter store") {
        const Model model(desk_config(), tiny_grouping(4, 2));
        const ParamMap params = model.init_params(1);
        std::int64_t actual = 0;
        for (const auto& [_, t] : params) actual += t.size();
        CHECK(model.count_parameters(true).total == actual);
    }
}
