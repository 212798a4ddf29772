#pragma once

#include <string>
#include <vector>

#include "errors.hpp"

namespace faramtn {

// Per-task training losses by epoch, the sole input to the weighting
// strategies. Epochs are 1-based and contiguous; every loss must be positive
// because the descent ratio divides by the previous epoch.
class TaskLossHistory {
public:
    explicit TaskLossHistory(int task_count);

    void append(std::vector<double> epoch_losses);

    int task_count() const { return task_count_; }
    int epochs() const { return static_cast<int>(rows_.size()); }
    const std::vector<double>& at_epoch(int e) const;  // 1-based

private:
    int task_count_;
    std::vector<std::vector<double>> rows_;
};

enum class WeightStrategy { dws, dwa, uniform };

WeightStrategy parse_strategy(const std::string& name);
const char* strategy_name(WeightStrategy s);

struct WeightingConfig {
    WeightStrategy strategy = WeightStrategy::dws;
    double beta = 0.5;         // loss-scale mix for DWS
    double temperature = 2.0;  // DWA softmax temperature

    void validate() const;
};

// Relative descent speed eps_i = L_i(e-1)/L_i(e-2); defined as 1 for every
// task at e=2 (no older epoch to divide by).
std::vector<double> relative_descent(const TaskLossHistory& history, int epoch);

// lambda_i(e) = K/(1+beta) * (eps_i/sum eps + beta * L_i(e-1)/sum L). The two
// ratio terms make the weights sum to K and scale-invariant in the losses.
// Epoch 1 initializes every weight to 1.
std::vector<double> dws_weights(const TaskLossHistory& history, int epoch, double beta);

// Baseline: K * softmax(eps / T); uniform through epoch 2.
std::vector<double> dwa_weights(const TaskLossHistory& history, int epoch, double temperature);

std::vector<double> uniform_weights(int task_count);

std::vector<double> weights_for(const TaskLossHistory& history, int epoch,
                                const WeightingConfig& config);

// Replay file: one line per epoch, K whitespace-separated positive decimals;
// '#' starts a comment. Parse errors carry the offending line number.
TaskLossHistory parse_replay(const std::string& text);

// CSV table "epoch,strategy,task,lambda,loss,weighted_loss", one row per
// (epoch, task). Values are printed round-trip exact so a replay reproduces
// logged weights bit for bit.
std::string simulate_weighting(const TaskLossHistory& history, const WeightingConfig& config);

}  // namespace faramtn
