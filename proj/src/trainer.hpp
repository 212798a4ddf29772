#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "dws.hpp"
#include "losses.hpp"
#include "model.hpp"

namespace faramtn {

struct MetricsRecord {
    int epoch = 0;
    std::vector<double> task_losses;  // per-task epoch means, before weighting
    std::vector<double> lambda;
    double penalty = 0.0;
    double total_loss = 0.0;
    std::vector<double> attribute_accuracy;
    double mean_accuracy = 0.0;
    double wall_clock_sec = 0.0;
};

std::string metrics_to_jsonl(const std::vector<MetricsRecord>& log);
std::vector<MetricsRecord> metrics_from_jsonl(const std::string& text);

// p <- p - lr * g for every named parameter.
void sgd_step(ParamMap& params, const ParamMap& grads, double learning_rate);

struct TrainResult {
    Model model;
    ParamMap params;
    std::vector<MetricsRecord> log;
};

// Full training loop: per epoch, weights from the loss history, seeded batch
// shuffle, forward/backward over every batch, SGD update, then a metrics
// record (accuracy is measured on the held-out set when one is configured).
// Aborts with NumericError on a non-finite loss or parameter update.
TrainResult train(const TrainConfig& config);

// Writes metrics.jsonl and model.bin into dir.
void write_run_outputs(const TrainResult& result, const std::string& dir);

// Mean per-attribute binary accuracy, argmax decision (ties to class 0).
struct EvalResult {
    std::vector<double> attribute_accuracy;
    double mean_accuracy = 0.0;
};
EvalResult evaluate(const Model& model, const ParamMap& params, const Dataset& dataset);

// The batch objective on a tape: mean per-task focal losses, mean divergence
// penalty, and the weighted total. Shared by training and gradient checks.
struct BatchLossNodes {
    std::vector<Tape::NodeId> task_mean;  // K scalar nodes
    Tape::NodeId penalty_mean = -1;
    Tape::NodeId total = -1;
};
BatchLossNodes batch_loss_graph(Tape& tape, const Model& model, const Model::TapeParams& tp,
                                const std::vector<const Sample*>& batch,
                                const std::vector<double>& lambda, const LossConfig& loss,
                                bool train, Rng* dropout_rng);

struct GradCheckRun {
    double max_rel_error = 0.0;
    int coords_checked = 0;
    std::string worst_param;
};
// Certifies the analytic gradient of the full training objective on a small
// synthetic batch against central differences.
GradCheckRun model_gradcheck(const TrainConfig& config, std::uint64_t seed, double step,
                             int min_coords = 200, int batch_samples = 2);

// Text breakdown of parameter counts; always includes the published
// 2048-channel / ratio-16 / 7-group reference when asked.
std::string params_report(const Model* model, bool include_reference);

}  // namespace faramtn
