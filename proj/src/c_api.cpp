#include "kdpose/kdpose.h"

#include <cstring>
#include <sstream>

#include "kdpose/config.hpp"
#include "kdpose/gradcheck.hpp"
#include "kdpose/trainer.hpp"

extern "C" {

struct kdp_config {
    kdpose::TrainConfig cfg;
};

struct kdp_model {
    kdpose::PoseNet<float> net;
};

} // extern "C"

namespace {

thread_local std::string g_last_error;

kdp_status status_of(kdpose::ErrorCode code) {
    using kdpose::ErrorCode;
    switch (code) {
    case ErrorCode::invalid_argument: return KDP_ERR_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch: return KDP_ERR_DIMENSION;
    case ErrorCode::insufficient_data: return KDP_ERR_INSUFFICIENT_DATA;
    case ErrorCode::no_convergence: return KDP_ERR_NO_CONVERGENCE;
    case ErrorCode::behind_camera: return KDP_ERR_BEHIND_CAMERA;
    case ErrorCode::degenerate_geometry: return KDP_ERR_DEGENERATE;
    case ErrorCode::numeric: return KDP_ERR_NUMERIC;
    case ErrorCode::io: return KDP_ERR_IO;
    case ErrorCode::parse: return KDP_ERR_PARSE;
    case ErrorCode::incompatible: return KDP_ERR_INCOMPATIBLE;
    case ErrorCode::internal: return KDP_ERR_INTERNAL;
    }
    return KDP_ERR_INTERNAL;
}

template <typename Fn>
kdp_status guarded(Fn&& fn) {
    try {
        fn();
        return KDP_OK;
    } catch (const kdpose::Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return KDP_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return KDP_ERR_INTERNAL;
    }
}

kdp_status check_arg(bool ok, const char* message) {
    if (ok) return KDP_OK;
    g_last_error = message;
    return KDP_ERR_INVALID_ARGUMENT;
}

void copy_out(const std::string& text, char* buffer, size_t capacity) {
    if (!buffer || capacity == 0) return;
    const size_t n = std::min(capacity - 1, text.size());
    std::memcpy(buffer, text.data(), n);
    buffer[n] = '\0';
}

} // namespace

extern "C" {

const char* kdp_status_name(kdp_status status) {
    switch (status) {
    case KDP_OK: return "ok";
    case KDP_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case KDP_ERR_DIMENSION: return "dimension_mismatch";
    case KDP_ERR_INSUFFICIENT_DATA: return "insufficient_data";
    case KDP_ERR_NO_CONVERGENCE: return "no_convergence";
    case KDP_ERR_BEHIND_CAMERA: return "behind_camera";
    case KDP_ERR_DEGENERATE: return "degenerate_geometry";
    case KDP_ERR_NUMERIC: return "numeric";
    case KDP_ERR_IO: return "io";
    case KDP_ERR_PARSE: return "parse";
    case KDP_ERR_INCOMPATIBLE: return "incompatible";
    case KDP_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* kdp_last_error(void) { return g_last_error.c_str(); }

const char* kdp_version(void) { return "0.1.0"; }

kdp_status kdp_config_create(kdp_config** out) {
    if (const kdp_status s = check_arg(out != nullptr, "null output pointer")) return s;
    return guarded([&] { *out = new kdp_config(); });
}

kdp_status kdp_config_load(const char* path, kdp_config** out) {
    if (const kdp_status s = check_arg(path && out, "null argument")) return s;
    return guarded([&] { *out = new kdp_config{kdpose::load_config(path)}; });
}

kdp_status kdp_config_save(const kdp_config* config, const char* path) {
    if (const kdp_status s = check_arg(config && path, "null argument")) return s;
    return guarded([&] { kdpose::save_config(config->cfg, path); });
}

kdp_status kdp_config_set(kdp_config* config, const char* key, const char* value) {
    if (const kdp_status s = check_arg(config && key && value, "null argument")) return s;
    return guarded([&] { kdpose::config_set_field(config->cfg, key, value); });
}

kdp_status kdp_config_get(const kdp_config* config, const char* key, char* buffer,
                          size_t capacity) {
    if (const kdp_status s = check_arg(config && key && buffer, "null argument")) return s;
    return guarded([&] { copy_out(kdpose::config_get_field(config->cfg, key), buffer, capacity); });
}

void kdp_config_free(kdp_config* config) { delete config; }

kdp_status kdp_generate_dataset(const kdp_config* config, const char* out_dir) {
    if (const kdp_status s = check_arg(config && out_dir, "null argument")) return s;
    return guarded([&] {
        const kdpose::TrainConfig& cfg = config->cfg;
        cfg.validate();
        const auto models = kdpose::default_models(cfg.classes);
        const kdpose::Dataset dataset =
            kdpose::generate_dataset(models, cfg.seed, cfg.dataset_options());
        kdpose::write_dataset(dataset, out_dir);
    });
}

kdp_status kdp_train_teacher(const kdp_config* config, const char* dataset_dir,
                             const char* out_dir) {
    if (const kdp_status s = check_arg(config && dataset_dir && out_dir, "null argument"))
        return s;
    return guarded([&] {
        const kdpose::Dataset dataset = kdpose::read_dataset(dataset_dir);
        kdpose::train_teacher(dataset, config->cfg, out_dir);
    });
}

kdp_status kdp_train_student(const kdp_config* config, const char* dataset_dir,
                             const char* teacher_checkpoint, const char* out_dir) {
    if (const kdp_status s = check_arg(config && dataset_dir && out_dir, "null argument"))
        return s;
    return guarded([&] {
        const kdpose::Dataset dataset = kdpose::read_dataset(dataset_dir);
        if (teacher_checkpoint) {
            const kdpose::PoseNet<float> teacher =
                kdpose::load_checkpoint<float>(teacher_checkpoint);
            kdpose::train_student(dataset, config->cfg, &teacher, out_dir);
        } else {
            kdpose::train_student(dataset, config->cfg, nullptr, out_dir);
        }
    });
}

kdp_status kdp_evaluate(const kdp_config* config, const char* checkpoint_dir,
                        const char* dataset_dir, int oracle_mode, const char* out_dir) {
    if (const kdp_status s = check_arg(config && dataset_dir && out_dir, "null argument"))
        return s;
    if (const kdp_status s =
            check_arg(checkpoint_dir || oracle_mode, "checkpoint required unless oracle mode"))
        return s;
    return guarded([&] {
        const kdpose::Dataset dataset = kdpose::read_dataset(dataset_dir);
        kdpose::EvalReport report;
        if (checkpoint_dir) {
            const kdpose::PoseNet<float> net = kdpose::load_checkpoint<float>(checkpoint_dir);
            report = kdpose::evaluate(&net, dataset, config->cfg, oracle_mode != 0);
        } else {
            report = kdpose::evaluate(nullptr, dataset, config->cfg, true);
        }
        kdpose::write_eval_report(report, out_dir);
    });
}

kdp_status kdp_ablate(const kdp_config* config, const char* dataset_dir,
                      const char* teacher_checkpoint, int seeds, int threads,
                      const char* out_dir) {
    if (const kdp_status s =
            check_arg(config && dataset_dir && teacher_checkpoint && out_dir, "null argument"))
        return s;
    return guarded([&] {
        const kdpose::Dataset dataset = kdpose::read_dataset(dataset_dir);
        const kdpose::PoseNet<float> teacher = kdpose::load_checkpoint<float>(teacher_checkpoint);
        kdpose::ablate(dataset, config->cfg, teacher, seeds, threads, out_dir);
    });
}

kdp_status kdp_gradcheck(uint64_t seed, int verbose, char* summary, size_t capacity) {
    return guarded([&] {
        std::ostringstream log;
        const kdpose::GradcheckResult result =
            kdpose::run_gradcheck(seed, verbose ? &log : nullptr);
        std::string text = kdpose::gradcheck_summary(result);
        if (verbose) text = log.str();
        copy_out(text, summary, capacity);
        if (!result.passed())
            kdpose::raise(kdpose::ErrorCode::numeric,
                          "gradient check failed: " + kdpose::gradcheck_summary(result));
    });
}

kdp_status kdp_model_build(const kdp_config* config, int student, uint64_t seed,
                           kdp_model** out) {
    if (const kdp_status s = check_arg(config && out, "null argument")) return s;
    return guarded([&] {
        const kdpose::NetworkSpec spec =
            student ? config->cfg.student_spec() : config->cfg.teacher_spec();
        *out = new kdp_model{kdpose::PoseNet<float>(spec, seed)};
    });
}

kdp_status kdp_model_load(const char* checkpoint_dir, kdp_model** out) {
    if (const kdp_status s = check_arg(checkpoint_dir && out, "null argument")) return s;
    return guarded([&] { *out = new kdp_model{kdpose::load_checkpoint<float>(checkpoint_dir)}; });
}

kdp_status kdp_model_stats(const kdp_model* model, int height, int width,
                           uint64_t* param_count, uint64_t* flops) {
    if (const kdp_status s = check_arg(model && param_count && flops, "null argument")) return s;
    return guarded([&] {
        kdpose::require(height > 0 && width > 0, kdpose::ErrorCode::invalid_argument,
                        "resolution must be positive");
        *param_count = model->net.param_count();
        *flops = model->net.flop_count(static_cast<std::size_t>(height),
                                       static_cast<std::size_t>(width));
    });
}

void kdp_model_free(kdp_model* model) { delete model; }

} // extern "C"
