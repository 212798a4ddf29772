#pragma once

#include <string>

#include "data.hpp"
#include "dws.hpp"
#include "losses.hpp"
#include "model.hpp"

namespace faramtn {

struct DataSourceConfig {
    bool use_synthetic = true;
    SyntheticSpec synthetic;
    int train_samples = 2000;
    int test_samples = 500;
    std::string dataset_dir;       // persisted dataset instead of generation
    std::string test_dataset_dir;  // optional held-out set
};

struct TrainConfig {
    ModelConfig model;
    LossConfig loss;
    WeightingConfig weighting;
    double learning_rate = 0.001;
    int batch_size = 32;
    int epochs = 1;
    std::uint64_t seed = 1;
    bool augment_train = false;
    DataSourceConfig data;
    std::string output_dir;

    void validate() const;

    // Strict JSON: unknown keys anywhere are rejected.
    static TrainConfig from_json_text(const std::string& text);
    static TrainConfig load(const std::string& path);
    std::string to_json_text() const;

    // The default desk-scale run: synthetic 8-attribute / 2-group task.
    static TrainConfig desk_default();
};

// Shared by the train config and the model container header.
std::string model_config_to_json_text(const ModelConfig& cfg);
ModelConfig model_config_from_json_text(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace faramtn
