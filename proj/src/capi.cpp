#include "faramtn/faramtn.h"

#include <cstring>
#include <string>

#include "config.hpp"
#include "data.hpp"
#include "dws.hpp"
#include "errors.hpp"
#include "model_io.hpp"
#include "trainer.hpp"

using namespace faramtn;

namespace {

thread_local std::string g_last_error;

far_status fail(far_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

// Run fn, translating the library's exception taxonomy into status codes.
template <typename Fn>
far_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return FAR_OK;
    } catch (const ShapeError& e) {
        return fail(FAR_ESHAPE, e.what());
    } catch (const ConfigError& e) {
        return fail(FAR_ECONFIG, e.what());
    } catch (const ParseError& e) {
        return fail(FAR_EPARSE, e.what());
    } catch (const IoError& e) {
        return fail(FAR_EIO, e.what());
    } catch (const LookupError& e) {
        return fail(FAR_ELOOKUP, e.what());
    } catch (const ValidationError& e) {
        return fail(FAR_EVALIDATION, e.what());
    } catch (const NumericError& e) {
        return fail(FAR_ENUMERIC, e.what());
    } catch (const std::exception& e) {
        return fail(FAR_EINTERNAL, e.what());
    } catch (...) {
        return fail(FAR_EINTERNAL, "unknown error");
    }
}

}  // namespace

struct far_dataset {
    Dataset data;
};

struct far_model {
    LoadedModel loaded;
};

extern "C" {

const char* far_status_name(far_status status) {
    switch (status) {
        case FAR_OK: return "ok";
        case FAR_EINVAL: return "invalid argument";
        case FAR_ESHAPE: return "shape error";
        case FAR_ECONFIG: return "config error";
        case FAR_EPARSE: return "parse error";
        case FAR_EIO: return "io error";
        case FAR_ELOOKUP: return "lookup error";
        case FAR_EVALIDATION: return "validation error";
        case FAR_ENUMERIC: return "numeric error";
        case FAR_EINTERNAL: return "internal error";
    }
    return "unknown";
}

const char* far_last_error(void) { return g_last_error.c_str(); }

const char* far_version(void) { return "1.0.0"; }

far_status far_generate_dataset(const char* spec_path, int32_t n, uint64_t seed,
                                const char* out_dir) {
    if (!spec_path || !out_dir) return fail(FAR_EINVAL, "null path");
    return guarded([&] {
        const SyntheticSpec spec = SyntheticSpec::from_json_text(read_text_file(spec_path));
        save_dataset(generate_synthetic(spec, n, seed), out_dir);
    });
}

far_status far_dataset_open(const char* dir, far_dataset** out) {
    if (!dir || !out) return fail(FAR_EINVAL, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new far_dataset{load_dataset(dir)}; });
}

void far_dataset_close(far_dataset* dataset) { delete dataset; }

far_status far_dataset_size(const far_dataset* dataset, int32_t* out_samples) {
    if (!dataset || !out_samples) return fail(FAR_EINVAL, "null argument");
    *out_samples = dataset->data.size();
    return FAR_OK;
}

far_status far_dataset_attribute_count(const far_dataset* dataset, int32_t* out_count) {
    if (!dataset || !out_count) return fail(FAR_EINVAL, "null argument");
    *out_count = dataset->data.attribute_count();
    return FAR_OK;
}

far_status far_dataset_attribute_name(const far_dataset* dataset, int32_t index,
                                      const char** out_name) {
    if (!dataset || !out_name) return fail(FAR_EINVAL, "null argument");
    return guarded([&] {
        *out_name = dataset->data.spec.grouping.attribute_name(index).c_str();
    });
}

far_status far_train(const char* config_path, int64_t seed_override, const char* out_dir) {
    if (!config_path || !out_dir) return fail(FAR_EINVAL, "null path");
    return guarded([&] {
        TrainConfig cfg = TrainConfig::load(config_path);
        if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
        const TrainResult result = train(cfg);
        write_run_outputs(result, out_dir);
    });
}

far_status far_model_open(const char* path, far_model** out) {
    if (!path || !out) return fail(FAR_EINVAL, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new far_model{load_model(path)}; });
}

void far_model_close(far_model* model) { delete model; }

far_status far_model_attribute_count(const far_model* model, int32_t* out_count) {
    if (!model || !out_count) return fail(FAR_EINVAL, "null argument");
    *out_count = model->loaded.model.attributes();
    return FAR_OK;
}

far_status far_model_attribute_name(const far_model* model, int32_t index, const char** out_name) {
    if (!model || !out_name) return fail(FAR_EINVAL, "null argument");
    return guarded([&] {
        *out_name = model->loaded.model.grouping().attribute_name(index).c_str();
    });
}

far_status far_evaluate(const far_model* model, const far_dataset* dataset, double* per_attribute,
                        double* out_mean_accuracy) {
    if (!model || !dataset || !out_mean_accuracy) return fail(FAR_EINVAL, "null argument");
    return guarded([&] {
        const EvalResult res = evaluate(model->loaded.model, model->loaded.params, dataset->data);
        if (per_attribute) {
            std::memcpy(per_attribute, res.attribute_accuracy.data(),
                        res.attribute_accuracy.size() * sizeof(double));
        }
        *out_mean_accuracy = res.mean_accuracy;
    });
}

far_status far_gradcheck(const char* config_path, uint64_t seed, double step, int32_t min_coords,
                         double* out_max_rel_error) {
    if (!config_path || !out_max_rel_error) return fail(FAR_EINVAL, "null argument");
    return guarded([&] {
        const TrainConfig cfg = TrainConfig::load(config_path);
        const GradCheckRun run =
            model_gradcheck(cfg, seed, step, min_coords > 0 ? min_coords : 200);
        *out_max_rel_error = run.max_rel_error;
    });
}

far_status far_dws_simulate(const char* replay_path, const char* strategy, double beta,
                            double temperature, const char* out_path) {
    if (!replay_path || !strategy || !out_path) return fail(FAR_EINVAL, "null argument");
    return guarded([&] {
        WeightingConfig cfg;
        cfg.strategy = parse_strategy(strategy);
        cfg.beta = beta;
        cfg.temperature = temperature;
        const TaskLossHistory history = parse_replay(read_text_file(replay_path));
        write_text_file(out_path, simulate_weighting(history, cfg));
    });
}

far_status far_params_report(const char* config_path, int include_reference, char** out_text) {
    if (!out_text) return fail(FAR_EINVAL, "null argument");
    if (!config_path && !include_reference) {
        return fail(FAR_EINVAL, "need a config path or the reference flag");
    }
    *out_text = nullptr;
    return guarded([&] {
        std::string text;
        if (config_path) {
            const TrainConfig cfg = TrainConfig::load(config_path);
            const AttributeGrouping grouping = cfg.data.use_synthetic
                                                   ? cfg.data.synthetic.grouping
                                                   : load_dataset(cfg.data.dataset_dir).spec.grouping;
            const Model model(cfg.model, grouping);
            text = params_report(&model, include_reference != 0);
        } else {
            text = params_report(nullptr, true);
        }
        char* buf = new char[text.size() + 1];
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out_text = buf;
    });
}

void far_string_free(char* text) { delete[] text; }

}  // extern "C"
