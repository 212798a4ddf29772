// Command-line front end. Everything goes through the shared library's C API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "faramtn/faramtn.h"

namespace {

bool verbose() {
    const char* v = std::getenv("FARAMTN_VERBOSE");
    return v != nullptr && v[0] != '\0' && std::string(v) != "0";
}

void note(const std::string& msg) {
    if (verbose()) std::fprintf(stderr, "faramtn: %s\n", msg.c_str());
}

int report_failure(far_status status) {
    std::fprintf(stderr, "error (%s): %s\n", far_status_name(status), far_last_error());
    return 1;
}

int run_eval(const std::string& model_path, const std::string& data_dir) {
    far_model* model = nullptr;
    far_status st = far_model_open(model_path.c_str(), &model);
    if (st != FAR_OK) return report_failure(st);

    far_dataset* dataset = nullptr;
    st = far_dataset_open(data_dir.c_str(), &dataset);
    if (st != FAR_OK) {
        far_model_close(model);
        return report_failure(st);
    }

    int32_t k = 0;
    far_model_attribute_count(model, &k);
    std::string table;
    double mean = 0.0;
    double* per_attr = new double[static_cast<size_t>(k)];
    st = far_evaluate(model, dataset, per_attr, &mean);
    if (st == FAR_OK) {
        int32_t n = 0;
        far_dataset_size(dataset, &n);
        std::printf("evaluated %d samples, %d attributes\n", n, k);
        std::printf("%-24s accuracy\n", "attribute");
        for (int32_t i = 0; i < k; ++i) {
            const char* name = nullptr;
            far_model_attribute_name(model, i, &name);
            std::printf("%-24s %.4f\n", name, per_attr[i]);
        }
        std::printf("%-24s %.4f\n", "mean", mean);
    }
    delete[] per_attr;
    far_dataset_close(dataset);
    far_model_close(model);
    return st == FAR_OK ? 0 : report_failure(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-task attribute network: data generation, training, "
                 "evaluation, and verification"};
    app.require_subcommand(1);

    // gen-data
    std::string gd_spec, gd_out;
    int gd_n = 0;
    std::uint64_t gd_seed = 1;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--spec", gd_spec, "synthetic spec JSON file")->required();
    gen->add_option("--n", gd_n, "number of samples")->required();
    gen->add_option("--seed", gd_seed, "generation seed")->required();
    gen->add_option("--out", gd_out, "output directory")->required();

    // train
    std::string tr_config, tr_out;
    std::int64_t tr_seed = -1;
    CLI::App* tr = app.add_subcommand("train", "train a model from a config file");
    tr->add_option("--config", tr_config, "train config JSON file")->required();
    tr->add_option("--seed", tr_seed, "seed override (omit to keep the config seed)");
    tr->add_option("--out", tr_out, "output directory for metrics.jsonl and model.bin")->required();

    // eval
    std::string ev_model, ev_data;
    CLI::App* ev = app.add_subcommand("eval", "evaluate a saved model on a dataset");
    ev->add_option("--model", ev_model, "model.bin path")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();

    // gradcheck
    std::string gc_config;
    std::uint64_t gc_seed = 1;
    double gc_eps = 1e-5;
    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient certification");
    gc->add_option("--config", gc_config, "train config JSON file")->required();
    gc->add_option("--seed", gc_seed, "seed");
    gc->add_option("--eps", gc_eps, "finite-difference step");

    // dws-sim
    std::string ds_replay, ds_strategy = "dws", ds_out;
    double ds_beta = 0.5, ds_temp = 2.0;
    CLI::App* ds = app.add_subcommand("dws-sim", "replay loss histories through a weighting strategy");
    ds->add_option("--replay", ds_replay, "replay file (one loss row per epoch)")->required();
    ds->add_option("--strategy", ds_strategy, "dws|dwa|uniform");
    ds->add_option("--beta", ds_beta, "dws loss-scale mix");
    ds->add_option("--temp", ds_temp, "dwa temperature");
    ds->add_option("--out", ds_out, "output CSV path")->required();

    // params
    std::string pa_config;
    bool pa_reference = false;
    CLI::App* pa = app.add_subcommand("params", "parameter-count audit");
    pa->add_option("--config", pa_config, "train config JSON file");
    pa->add_flag("--reference", pa_reference, "include the large-scale reference breakdown");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        note("generating " + std::to_string(gd_n) + " samples into " + gd_out);
        const far_status st =
            far_generate_dataset(gd_spec.c_str(), gd_n, gd_seed, gd_out.c_str());
        if (st != FAR_OK) return report_failure(st);
        std::printf("wrote %d samples to %s\n", gd_n, gd_out.c_str());
        return 0;
    }
    if (tr->parsed()) {
        note("training from " + tr_config);
        const far_status st = far_train(tr_config.c_str(), tr_seed, tr_out.c_str());
        if (st != FAR_OK) return report_failure(st);
        std::printf("run complete; outputs in %s\n", tr_out.c_str());
        return 0;
    }
    if (ev->parsed()) return run_eval(ev_model, ev_data);
    if (gc->parsed()) {
        double max_err = 0.0;
        const far_status st = far_gradcheck(gc_config.c_str(), gc_seed, gc_eps, 0, &max_err);
        if (st != FAR_OK) return report_failure(st);
        std::printf("gradcheck max relative error: %.3e\n", max_err);
        if (max_err > 1e-4) {
            std::fprintf(stderr, "gradcheck FAILED (threshold 1e-4)\n");
            return 2;
        }
        std::printf("gradcheck passed (threshold 1e-4)\n");
        return 0;
    }
    if (ds->parsed()) {
        const far_status st = far_dws_simulate(ds_replay.c_str(), ds_strategy.c_str(), ds_beta,
                                               ds_temp, ds_out.c_str());
        if (st != FAR_OK) return report_failure(st);
        std::printf("wrote weighting table to %s\n", ds_out.c_str());
        return 0;
    }
    if (pa->parsed()) {
        if (pa_config.empty() && !pa_reference) {
            std::fprintf(stderr, "params: pass --config and/or --reference\n");
            return 1;
        }
        char* text = nullptr;
        const far_status st = far_params_report(pa_config.empty() ? nullptr : pa_config.c_str(),
                                                pa_reference ? 1 : 0, &text);
        if (st != FAR_OK) return report_failure(st);
        std::fputs(text, stdout);
        far_string_free(text);
        return 0;
    }
    return 0;
}
