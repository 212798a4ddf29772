#include "config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace faramtn {

using ordered_json = nlohmann::ordered_json;

namespace {

void reject_unknown_keys(const ordered_json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ParseError("config: unknown key '" + key + "' in " + where);
    }
}

ordered_json parse_object(const std::string& text, const std::string& what) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(what + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(what + ": expected a JSON object");
    return j;
}

ModelConfig model_config_from_json(const ordered_json& j) {
    reject_unknown_keys(j,
                        {"input_channels", "input_height", "input_width", "backbone_channels",
                         "backbone_pool", "fusion_mid_channels", "reduction_ratio", "theta",
                         "dropout", "attention_bias"},
                        "model");
    ModelConfig cfg;
    cfg.input_channels = j.value("input_channels", cfg.input_channels);
    cfg.input_height = j.value("input_height", cfg.input_height);
    cfg.input_width = j.value("input_width", cfg.input_width);
    if (j.contains("backbone_channels")) {
        cfg.backbone_channels = j["backbone_channels"].get<std::vector<int>>();
    }
    if (j.contains("backbone_pool")) {
        cfg.backbone_pool = j["backbone_pool"].get<std::vector<int>>();
    } else if (j.contains("backbone_channels")) {
        // default plan: downsample at every stage except the last
        cfg.backbone_pool.assign(cfg.backbone_channels.size(), 2);
        if (!cfg.backbone_pool.empty()) cfg.backbone_pool.back() = 1;
    }
    cfg.fusion_mid_channels = j.value("fusion_mid_channels", cfg.fusion_mid_channels);
    cfg.reduction_ratio = j.value("reduction_ratio", cfg.reduction_ratio);
    cfg.theta = j.value("theta", cfg.theta);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.attention_bias = j.value("attention_bias", cfg.attention_bias);
    return cfg;
}

ordered_json model_config_to_json(const ModelConfig& cfg) {
    ordered_json j;
    j["input_channels"] = cfg.input_channels;
    j["input_height"] = cfg.input_height;
    j["input_width"] = cfg.input_width;
    j["backbone_channels"] = cfg.backbone_channels;
    j["backbone_pool"] = cfg.backbone_pool;
    j["fusion_mid_channels"] = cfg.fusion_mid_channels;
    j["reduction_ratio"] = cfg.reduction_ratio;
    j["theta"] = cfg.theta;
    j["dropout"] = cfg.dropout;
    j["attention_bias"] = cfg.attention_bias;
    return j;
}

}  // namespace

std::string model_config_to_json_text(const ModelConfig& cfg) {
    return model_config_to_json(cfg).dump(2);
}

ModelConfig model_config_from_json_text(const std::string& text) {
    return model_config_from_json(parse_object(text, "model config"));
}

void TrainConfig::validate() const {
    model.validate();
    loss.validate();
    weighting.validate();
    if (!(learning_rate > 0.0)) throw ValidationError("train config: learning rate must be > 0");
    if (batch_size < 1) throw ValidationError("train config: batch size must be >= 1");
    if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
    if (data.use_synthetic) {
        if (data.train_samples < 1) {
            throw ValidationError("train config: train_samples must be >= 1");
        }
        if (data.test_samples < 0) {
            throw ValidationError("train config: test_samples must be >= 0");
        }
    } else if (data.dataset_dir.empty()) {
        throw ValidationError("train config: either a synthetic spec or a dataset_dir is required");
    }
}

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    const ordered_json j = parse_object(text, "train config");
    reject_unknown_keys(j,
                        {"model", "loss", "weighting", "learning_rate", "batch_size", "epochs",
                         "seed", "augment", "data", "output_dir"},
                        "train config");
    TrainConfig cfg;
    if (j.contains("model")) cfg.model = model_config_from_json(j["model"]);
    if (j.contains("loss")) {
        const ordered_json& l = j["loss"];
        reject_unknown_keys(l, {"alpha", "gamma", "eta", "eps"}, "loss");
        cfg.loss.alpha = l.value("alpha", cfg.loss.alpha);
        cfg.loss.gamma = l.value("gamma", cfg.loss.gamma);
        cfg.loss.eta = l.value("eta", cfg.loss.eta);
        cfg.loss.eps = l.value("eps", cfg.loss.eps);
    }
    if (j.contains("weighting")) {
        const ordered_json& w = j["weighting"];
        reject_unknown_keys(w, {"strategy", "beta", "temperature"}, "weighting");
        if (w.contains("strategy")) cfg.weighting.strategy = parse_strategy(w["strategy"]);
        cfg.weighting.beta = w.value("beta", cfg.weighting.beta);
        cfg.weighting.temperature = w.value("temperature", cfg.weighting.temperature);
    }
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.augment_train = j.value("augment", cfg.augment_train);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);

    if (j.contains("data")) {
        const ordered_json& d = j["data"];
        reject_unknown_keys(
            d, {"synthetic", "train_samples", "test_samples", "dataset_dir", "test_dataset_dir"},
            "data");
        if (d.contains("synthetic") && d.contains("dataset_dir")) {
            throw ParseError("config: 'data' must name either 'synthetic' or 'dataset_dir'");
        }
        if (d.contains("dataset_dir")) {
            cfg.data.use_synthetic = false;
            cfg.data.dataset_dir = d["dataset_dir"].get<std::string>();
            cfg.data.test_dataset_dir = d.value("test_dataset_dir", std::string());
        } else if (d.contains("synthetic")) {
            cfg.data.use_synthetic = true;
            cfg.data.synthetic = SyntheticSpec::from_json_text(d["synthetic"].dump());
        }
        cfg.data.train_samples = d.value("train_samples", cfg.data.train_samples);
        cfg.data.test_samples = d.value("test_samples", cfg.data.test_samples);
    } else {
        cfg.data.synthetic = SyntheticSpec::desk_default();
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::load(const std::string& path) {
    return from_json_text(read_text_file(path));
}

std::string TrainConfig::to_json_text() const {
    ordered_json j;
    j["model"] = model_config_to_json(model);
    j["loss"] = {{"alpha", loss.alpha}, {"gamma", loss.gamma}, {"eta", loss.eta}, {"eps", loss.eps}};
    j["weighting"] = {{"strategy", strategy_name(weighting.strategy)},
                      {"beta", weighting.beta},
                      {"temperature", weighting.temperature}};
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["seed"] = seed;
    j["augment"] = augment_train;
    ordered_json d;
    if (data.use_synthetic) {
        d["synthetic"] = ordered_json::parse(data.synthetic.to_json_text());
        d["train_samples"] = data.train_samples;
        d["test_samples"] = data.test_samples;
    } else {
        d["dataset_dir"] = data.dataset_dir;
        if (!data.test_dataset_dir.empty()) d["test_dataset_dir"] = data.test_dataset_dir;
    }
    j["data"] = std::move(d);
    if (!output_dir.empty()) j["output_dir"] = output_dir;
    return j.dump(2);
}

TrainConfig TrainConfig::desk_default() {
    TrainConfig cfg;
    cfg.data.synthetic = SyntheticSpec::desk_default();
    cfg.epochs = 15;
    cfg.validate();
    return cfg;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace faramtn
