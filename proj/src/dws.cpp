#include "dws.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace faramtn {

TaskLossHistory::TaskLossHistory(int task_count) : task_count_(task_count) {
    if (task_count < 1) throw ValidationError("loss history: task count must be >= 1");
}

void TaskLossHistory::append(std::vector<double> epoch_losses) {
    if (static_cast<int>(epoch_losses.size()) != task_count_) {
        throw ValidationError("loss history: expected " + std::to_string(task_count_) +
                              " losses, got " + std::to_string(epoch_losses.size()));
    }
    for (double v : epoch_losses) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ValidationError("loss history: losses must be positive and finite");
        }
    }
    rows_.push_back(std::move(epoch_losses));
}

const std::vector<double>& TaskLossHistory::at_epoch(int e) const {
    if (e < 1 || e > epochs()) {
        throw LookupError("loss history: epoch " + std::to_string(e) + " not recorded");
    }
    return rows_[static_cast<std::size_t>(e - 1)];
}

WeightStrategy parse_strategy(const std::string& name) {
    if (name == "dws") return WeightStrategy::dws;
    if (name == "dwa") return WeightStrategy::dwa;
    if (name == "uniform") return WeightStrategy::uniform;
    throw ValidationError("unknown weighting strategy '" + name + "'");
}

const char* strategy_name(WeightStrategy s) {
    switch (s) {
        case WeightStrategy::dws: return "dws";
        case WeightStrategy::dwa: return "dwa";
        case WeightStrategy::uniform: return "uniform";
    }
    return "?";
}

void WeightingConfig::validate() const {
    if (beta < 0.0) throw ValidationError("weighting config: beta must be >= 0");
    if (!(temperature > 0.0)) throw ValidationError("weighting config: temperature must be > 0");
}

std::vector<double> relative_descent(const TaskLossHistory& history, int epoch) {
    if (epoch < 2) throw ValidationError("relative descent needs epoch >= 2");
    const int k = history.task_count();
    if (epoch == 2) return std::vector<double>(static_cast<std::size_t>(k), 1.0);
    const std::vector<double>& prev = history.at_epoch(epoch - 1);
    const std::vector<double>& prev2 = history.at_epoch(epoch - 2);
    std::vector<double> eps(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        eps[static_cast<std::size_t>(i)] =
            prev[static_cast<std::size_t>(i)] / prev2[static_cast<std::size_t>(i)];
    }
    return eps;
}

std::vector<double> uniform_weights(int task_count) {
    return std::vector<double>(static_cast<std::size_t>(task_count), 1.0);
}

std::vector<double> dws_weights(const TaskLossHistory& history, int epoch, double beta) {
    if (epoch < 1) throw ValidationError("dws: epoch must be >= 1");
    if (beta < 0.0) throw ValidationError("dws: beta must be >= 0");
    const int k = history.task_count();
    if (epoch == 1) return uniform_weights(k);
    if (history.epochs() < epoch - 1) {
        throw ValidationError("dws: history is missing epochs before " + std::to_string(epoch));
    }
    const std::vector<double> eps = relative_descent(history, epoch);
    const std::vector<double>& prev = history.at_epoch(epoch - 1);
    double eps_sum = 0.0, loss_sum = 0.0;
    for (int i = 0; i < k; ++i) {
        eps_sum += eps[static_cast<std::size_t>(i)];
        loss_sum += prev[static_cast<std::size_t>(i)];
    }
    std::vector<double> lambda(static_cast<std::size_t>(k));
    const double scale = static_cast<double>(k) / (1.0 + beta);
    for (int i = 0; i < k; ++i) {
        lambda[static_cast<std::size_t>(i)] =
            scale * (eps[static_cast<std::size_t>(i)] / eps_sum +
                     beta * prev[static_cast<std::size_t>(i)] / loss_sum);
    }
    return lambda;
}

std::vector<double> dwa_weights(const TaskLossHistory& history, int epoch, double temperature) {
    if (epoch < 1) throw ValidationError("dwa: epoch must be >= 1");
    if (!(temperature > 0.0)) throw ValidationError("dwa: temperature must be > 0");
    const int k = history.task_count();
    if (epoch <= 2) return uniform_weights(k);
    if (history.epochs() < epoch - 1) {
        throw ValidationError("dwa: history is missing epochs before " + std::to_string(epoch));
    }
    const std::vector<double> eps = relative_descent(history, epoch);
    double mx = eps[0] / temperature;
    for (int i = 1; i < k; ++i) mx = std::max(mx, eps[static_cast<std::size_t>(i)] / temperature);
    std::vector<double> lambda(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        lambda[static_cast<std::size_t>(i)] = std::exp(eps[static_cast<std::size_t>(i)] / temperature - mx);
        sum += lambda[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < k; ++i) {
        lambda[static_cast<std::size_t>(i)] *= static_cast<double>(k) / sum;
    }
    return lambda;
}

std::vector<double> weights_for(const TaskLossHistory& history, int epoch,
                                const WeightingConfig& config) {
    config.validate();
    switch (config.strategy) {
        case WeightStrategy::dws: return dws_weights(history, epoch, config.beta);
        case WeightStrategy::dwa: return dwa_weights(history, epoch, config.temperature);
        case WeightStrategy::uniform: return uniform_weights(history.task_count());
    }
    throw ValidationError("unknown weighting strategy");
}

TaskLossHistory parse_replay(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        std::vector<double> values;
        std::string tok;
        while (row >> tok) {
            double v = 0.0;
            const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || p != tok.data() + tok.size()) {
                throw ParseError("replay line " + std::to_string(line_no) + ": bad number '" +
                                 tok + "'");
            }
            if (!(v > 0.0)) {
                throw ParseError("replay line " + std::to_string(line_no) +
                                 ": losses must be positive");
            }
            values.push_back(v);
        }
        if (values.empty()) continue;  // blank or comment-only line
        if (!rows.empty() && values.size() != rows.front().size()) {
            throw ParseError("replay line " + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " values, got " +
                             std::to_string(values.size()));
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ParseError("replay file has no loss rows");
    TaskLossHistory history(static_cast<int>(rows.front().size()));
    for (auto& r : rows) history.append(std::move(r));
    return history;
}

namespace {
std::string fmt_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

std::string simulate_weighting(const TaskLossHistory& history, const WeightingConfig& config) {
    config.validate();
    if (history.epochs() < 3) {
        throw ValidationError("simulation needs at least 3 epochs of losses");
    }
    std::ostringstream out;
    out << "epoch,strategy,task,lambda,loss,weighted_loss\n";
    const char* name = strategy_name(config.strategy);
    for (int e = 1; e <= history.epochs(); ++e) {
        const std::vector<double> lambda = weights_for(history, e, config);
        const std::vector<double>& losses = history.at_epoch(e);
        for (int i = 0; i < history.task_count(); ++i) {
            const double l = lambda[static_cast<std::size_t>(i)];
            const double loss = losses[static_cast<std::size_t>(i)];
            out << e << ',' << name << ',' << i << ',' << fmt_exact(l) << ',' << fmt_exact(loss)
                << ',' << fmt_exact(l * loss) << '\n';
        }
    }
    return out.str();
}

}  // namespace faramtn
