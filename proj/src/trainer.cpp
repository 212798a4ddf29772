#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "model_io.hpp"

namespace faramtn {

namespace {

// Records below this are floored so the history stays strictly positive for
// the descent ratio even when a task becomes perfectly confident.
constexpr double kLossFloor = 1e-12;

constexpr std::uint64_t kTestSeedSalt = 0xd1b54a32d192ed03ULL;

double param_norm(const ParamMap& params) {
    double s = 0.0;
    for (const auto& [_, t] : params) s += t.squared_norm();
    return std::sqrt(s);
}

bool params_finite(const ParamMap& params) {
    for (const auto& [_, t] : params) {
        if (!t.all_finite()) return false;
    }
    return true;
}

}  // namespace

void sgd_step(ParamMap& params, const ParamMap& grads, double learning_rate) {
    for (auto& [name, p] : params) {
        auto it = grads.find(name);
        if (it == grads.end()) throw LookupError("sgd_step: no gradient for '" + name + "'");
        const Tensor& g = it->second;
        if (!p.same_shape(g)) {
            throw ShapeError("sgd_step: gradient shape mismatch for '" + name + "'");
        }
        for (std::int64_t i = 0; i < p.size(); ++i) p[i] -= learning_rate * g[i];
    }
}

BatchLossNodes batch_loss_graph(Tape& tape, const Model& model, const Model::TapeParams& tp,
                                const std::vector<const Sample*>& batch,
                                const std::vector<double>& lambda, const LossConfig& loss,
                                bool train, Rng* dropout_rng) {
    const int k = model.attributes();
    if (static_cast<int>(lambda.size()) != k) {
        throw ShapeError("batch_loss_graph: lambda length does not match task count");
    }
    if (batch.empty()) throw ValidationError("batch_loss_graph: empty batch");

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<std::vector<Tape::NodeId>> focal_nodes(static_cast<std::size_t>(k));
    std::vector<Tape::NodeId> penalty_nodes;
    penalty_nodes.reserve(batch.size());

    for (const Sample* sample : batch) {
        Tape::NodeId image = tape.constant(sample->image);
        Model::ForwardNodes f = model.forward_graph(tape, tp, image, train, dropout_rng);
        for (int i = 0; i < k; ++i) {
            focal_nodes[static_cast<std::size_t>(i)].push_back(
                focal_term_node(tape, f.head_probs[static_cast<std::size_t>(i)],
                                sample->labels[static_cast<std::size_t>(i)] ? 1 : 0, loss.alpha,
                                loss.gamma, loss.eps));
        }
        penalty_nodes.push_back(group_divergence_node(tape, f.fused, loss.eps));
    }

    BatchLossNodes out;
    const std::vector<double> mean_w(batch.size(), inv_b);
    out.task_mean.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        out.task_mean.push_back(tape.weighted_sum(focal_nodes[static_cast<std::size_t>(i)], mean_w));
    }
    out.penalty_mean = tape.weighted_sum(penalty_nodes, mean_w);

    std::vector<Tape::NodeId> terms = out.task_mean;
    std::vector<double> coeffs = lambda;
    terms.push_back(out.penalty_mean);
    coeffs.push_back(-loss.eta);
    out.total = tape.weighted_sum(terms, coeffs);
    return out;
}

EvalResult evaluate(const Model& model, const ParamMap& params, const Dataset& dataset) {
    if (dataset.samples.empty()) throw ValidationError("evaluate: empty dataset");
    const int k = model.attributes();
    if (dataset.attribute_count() != k) {
        throw ValidationError("evaluate: dataset has " + std::to_string(dataset.attribute_count()) +
                              " attributes, model expects " + std::to_string(k));
    }
    std::vector<std::int64_t> correct(static_cast<std::size_t>(k), 0);
    for (const Sample& sample : dataset.samples) {
        const Model::ForwardResult f = model.forward(params, sample.image);
        for (int i = 0; i < k; ++i) {
            const int pred = f.probs.at(i, 1) > f.probs.at(i, 0) ? 1 : 0;
            if (pred == (sample.labels[static_cast<std::size_t>(i)] ? 1 : 0)) {
                ++correct[static_cast<std::size_t>(i)];
            }
        }
    }
    EvalResult res;
    res.attribute_accuracy.resize(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        res.attribute_accuracy[static_cast<std::size_t>(i)] =
            static_cast<double>(correct[static_cast<std::size_t>(i)]) /
            static_cast<double>(dataset.samples.size());
        sum += res.attribute_accuracy[static_cast<std::size_t>(i)];
    }
    res.mean_accuracy = sum / static_cast<double>(k);
    return res;
}

TrainResult train(const TrainConfig& config) {
    config.validate();

    Dataset train_set, test_set;
    if (config.data.use_synthetic) {
        const SyntheticSpec& spec = config.data.synthetic;
        train_set = generate_synthetic(spec, config.data.train_samples, spec.seed);
        if (config.data.test_samples > 0) {
            test_set = generate_synthetic(spec, config.data.test_samples, spec.seed ^ kTestSeedSalt);
        }
    } else {
        train_set = load_dataset(config.data.dataset_dir);
        if (!config.data.test_dataset_dir.empty()) test_set = load_dataset(config.data.test_dataset_dir);
    }

    Model model(config.model, train_set.spec.grouping);
    const int k = model.attributes();
    ParamMap params = model.init_params(config.seed);

    TaskLossHistory history(k);
    Rng shuffle_rng = Rng::derive(config.seed, 1);
    Rng dropout_rng = Rng::derive(config.seed, 2);
    Rng augment_rng = Rng::derive(config.seed, 3);

    std::vector<MetricsRecord> log;
    const int n = train_set.size();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<double> lambda = weights_for(history, epoch, config.weighting);
        shuffle_rng.shuffle(order);

        std::vector<double> task_sum(static_cast<std::size_t>(k), 0.0);
        double penalty_sum = 0.0;

        int batch_index = 0;
        for (int start = 0; start < n; start += config.batch_size, ++batch_index) {
            const int end = std::min(n, start + config.batch_size);
            std::vector<Sample> augmented;  // keeps augmented copies alive for the tape build
            std::vector<const Sample*> batch;
            batch.reserve(static_cast<std::size_t>(end - start));
            if (config.augment_train) augmented.reserve(static_cast<std::size_t>(end - start));
            for (int s = start; s < end; ++s) {
                const Sample& base = train_set.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(s)])];
                if (config.augment_train) {
                    augmented.push_back(Sample{augment(base.image, augment_rng), base.labels});
                    batch.push_back(&augmented.back());
                } else {
                    batch.push_back(&base);
                }
            }

            Tape tape;
            Model::TapeParams tp = model.stage_params(tape, params, true);
            BatchLossNodes nodes =
                batch_loss_graph(tape, model, tp, batch, lambda, config.loss, true, &dropout_rng);

            const double batch_total = tape.scalar_value(nodes.total);
            if (!std::isfinite(batch_total)) {
                throw NumericError("training aborted: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                                   " (parameter norm " + std::to_string(param_norm(params)) + ")");
            }

            tape.backward(nodes.total);
            sgd_step(params, tape.named_gradients(), config.learning_rate);
            if (!params_finite(params)) {
                throw NumericError("training aborted: non-finite parameters after epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                                   " (parameter norm " + std::to_string(param_norm(params)) + ")");
            }

            const double b = static_cast<double>(end - start);
            for (int i = 0; i < k; ++i) {
                task_sum[static_cast<std::size_t>(i)] +=
                    b * tape.scalar_value(nodes.task_mean[static_cast<std::size_t>(i)]);
            }
            penalty_sum += b * tape.scalar_value(nodes.penalty_mean);
        }

        MetricsRecord rec;
        rec.epoch = epoch;
        rec.lambda = lambda;
        rec.task_losses.resize(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            rec.task_losses[static_cast<std::size_t>(i)] =
                std::max(task_sum[static_cast<std::size_t>(i)] / n, kLossFloor);
        }
        rec.penalty = penalty_sum / n;
        rec.total_loss = total_loss(rec.task_losses, lambda, rec.penalty, config.loss.eta);
        history.append(rec.task_losses);

        const Dataset& eval_set = test_set.samples.empty() ? train_set : test_set;
        const EvalResult ev = evaluate(model, params, eval_set);
        rec.attribute_accuracy = ev.attribute_accuracy;
        rec.mean_accuracy = ev.mean_accuracy;
        rec.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.push_back(std::move(rec));
    }

    return TrainResult{std::move(model), std::move(params), std::move(log)};
}

void write_run_outputs(const TrainResult& result, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_text_file((std::filesystem::path(dir) / "metrics.jsonl").string(),
                    metrics_to_jsonl(result.log));
    save_model((std::filesystem::path(dir) / "model.bin").string(), result.model, result.params);
}

std::string metrics_to_jsonl(const std::vector<MetricsRecord>& log) {
    std::ostringstream out;
    for (const MetricsRecord& r : log) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["task_losses"] = r.task_losses;
        j["lambda"] = r.lambda;
        j["penalty"] = r.penalty;
        j["total_loss"] = r.total_loss;
        j["attribute_accuracy"] = r.attribute_accuracy;
        j["mean_accuracy"] = r.mean_accuracy;
        j["wall_clock_sec"] = r.wall_clock_sec;
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<MetricsRecord> metrics_from_jsonl(const std::string& text) {
    std::vector<MetricsRecord> log;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("metrics line " + std::to_string(line_no) + ": " + e.what());
        }
        MetricsRecord r;
        r.epoch = j.at("epoch").get<int>();
        r.task_losses = j.at("task_losses").get<std::vector<double>>();
        r.lambda = j.at("lambda").get<std::vector<double>>();
        r.penalty = j.at("penalty").get<double>();
        r.total_loss = j.at("total_loss").get<double>();
        r.attribute_accuracy = j.at("attribute_accuracy").get<std::vector<double>>();
        r.mean_accuracy = j.at("mean_accuracy").get<double>();
        r.wall_clock_sec = j.at("wall_clock_sec").get<double>();
        log.push_back(std::move(r));
    }
    return log;
}

GradCheckRun model_gradcheck(const TrainConfig& config, std::uint64_t seed, double step,
                             int min_coords, int batch_samples) {
    config.validate();
    if (!config.data.use_synthetic) {
        throw ConfigError("gradcheck runs on a synthetic data source");
    }
    const Dataset ds = generate_synthetic(config.data.synthetic, batch_samples, seed);
    Model model(config.model, ds.spec.grouping);
    const ParamMap params = model.init_params(seed);
    const std::vector<double> lambda(static_cast<std::size_t>(model.attributes()), 1.0);

    std::vector<const Sample*> batch;
    for (const Sample& s : ds.samples) batch.push_back(&s);

    // Dropout masks are reseeded identically on every evaluation so the
    // objective is a fixed deterministic function of the parameters.
    const auto loss_value = [&](const ParamMap& p) {
        Tape tape;
        Model::TapeParams tp = model.stage_params(tape, p, false);
        Rng drop = Rng::derive(seed, 7);
        BatchLossNodes nodes =
            batch_loss_graph(tape, model, tp, batch, lambda, config.loss, true, &drop);
        return tape.scalar_value(nodes.total);
    };

    Tape tape;
    Model::TapeParams tp = model.stage_params(tape, params, true);
    Rng drop = Rng::derive(seed, 7);
    BatchLossNodes nodes = batch_loss_graph(tape, model, tp, batch, lambda, config.loss, true, &drop);
    tape.backward(nodes.total);
    const ParamMap analytic = tape.named_gradients();

    const GradCheckResult res =
        finite_diff_gradcheck(loss_value, params, analytic, step, min_coords, seed);
    return GradCheckRun{res.max_rel_error, res.coords_checked, res.worst_param};
}

std::string params_report(const Model* model, bool include_reference) {
    std::ostringstream out;
    if (model != nullptr) {
        const ModelConfig& cfg = model->config();
        const ParamCountBreakdown shared = model->count_parameters(true);
        const ParamCountBreakdown dup = model->count_parameters(false);
        out << "parameter audit: C=" << cfg.shared_channels() << " r=" << cfg.reduction_ratio
            << " G=" << model->groups() << " K=" << model->attributes()
            << (cfg.attention_bias ? " (attention biases on)" : " (attention biases off)") << '\n';
        out << "  backbone:                        " << shared.backbone << '\n';
        out << "  fusion conv stack (shared):      " << shared.fusion_conv << '\n';
        out << "  fusion conv stack (per group):   " << dup.fusion_conv << '\n';
        out << "  attention per group (weights):   " << shared.attention_per_group_weights << '\n';
        out << "  attention per group (with bias): " << shared.attention_per_group_with_bias << '\n';
        out << "  attention total:                 " << shared.attention << '\n';
        out << "  heads:                           " << shared.heads << '\n';
        out << "  total, shared fusion conv:       " << shared.total << '\n';
        out << "  total, non-shared fusion conv:   " << dup.total << '\n';
        out << "  channel-attention overhead (weights only): "
            << static_cast<std::int64_t>(model->groups()) * shared.attention_per_group_weights
            << '\n';
    }
    if (include_reference) {
        // the published large-scale configuration, independent of the config
        const std::int64_t c = 2048, r = 16, g = 7;
        const std::int64_t per_group = 2 * (c / r) * c;
        out << "reference: C=" << c << " r=" << r << " G=" << g << " (bias-free)\n";
        out << "  attention per group (weights):   " << per_group << '\n';
        out << "  channel-attention overhead (weights only): " << per_group * g << '\n';
    }
    return out.str();
}

}  // namespace faramtn
