// Command-line front end; talks to the library exclusively through the C API.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>

#include <kdpose/kdpose.h>

namespace {

struct ConfigDeleter {
    void operator()(kdp_config* c) const { kdp_config_free(c); }
};
using ConfigPtr = std::unique_ptr<kdp_config, ConfigDeleter>;

struct ModelDeleter {
    void operator()(kdp_model* m) const { kdp_model_free(m); }
};
using ModelPtr = std::unique_ptr<kdp_model, ModelDeleter>;

int fail(kdp_status status) {
    std::fprintf(stderr, "error (%s): %s\n", kdp_status_name(status), kdp_last_error());
    return 1;
}

#define CHECK_STATUS(expr)                                                                     \
    do {                                                                                       \
        const kdp_status status_ = (expr);                                                     \
        if (status_ != KDP_OK) return fail(status_);                                           \
    } while (0)

struct CommonOpts {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int load_config(const CommonOpts& opts, ConfigPtr& config) {
    kdp_config* raw = nullptr;
    const kdp_status status = opts.config_path.empty()
                                  ? kdp_config_create(&raw)
                                  : kdp_config_load(opts.config_path.c_str(), &raw);
    if (status != KDP_OK) return fail(status);
    config.reset(raw);
    if (opts.seed_given)
        CHECK_STATUS(kdp_config_set(config.get(), "seed", std::to_string(opts.seed).c_str()));
    return 0;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
    auto* config_opt = cmd->add_option("--config", opts.config_path, "Config file (JSON)");
    if (config_required) config_opt->required();
    cmd->add_option("--seed", opts.seed, "Override the config seed")
        ->each([&opts](const std::string&) { opts.seed_given = true; });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kdpose: 6D object pose estimation with knowledge distillation"};
    app.require_subcommand(1);
    std::function<int()> action;

    // gen-data
    {
        auto* cmd = app.add_subcommand("gen-data", "Generate a synthetic cuboid dataset");
        auto opts = std::make_shared<CommonOpts>();
        auto n_total = std::make_shared<int>(0);
        auto n_train = std::make_shared<int>(0);
        auto n_test = std::make_shared<int>(0);
        add_common(cmd, *opts, false);
        cmd->add_option("--n", *n_total,
                        "Total sample count (split 5:2 into train/test, both at least 1)");
        cmd->add_option("--train", *n_train, "Train sample count (overrides --n)");
        cmd->add_option("--test", *n_test, "Test sample count (overrides --n)");
        cmd->add_option("--out", opts->out, "Output dataset directory")->required();
        cmd->callback([&action, opts, n_total, n_train, n_test] {
            action = [opts, n_total, n_train, n_test]() -> int {
                ConfigPtr config;
                if (const int rc = load_config(*opts, config)) return rc;
                if (*n_total > 0) {
                    const int test = std::max(1, *n_total * 2 / 7);
                    const int train = std::max(1, *n_total - test);
                    CHECK_STATUS(kdp_config_set(config.get(), "train_samples",
                                                std::to_string(train).c_str()));
                    CHECK_STATUS(kdp_config_set(config.get(), "test_samples",
                                                std::to_string(test).c_str()));
                }
                if (*n_train > 0)
                    CHECK_STATUS(kdp_config_set(config.get(), "train_samples",
                                                std::to_string(*n_train).c_str()));
                if (*n_test > 0)
                    CHECK_STATUS(kdp_config_set(config.get(), "test_samples",
                                                std::to_string(*n_test).c_str()));
                CHECK_STATUS(kdp_generate_dataset(config.get(), opts->out.c_str()));
                std::printf("dataset written to %s\n", opts->out.c_str());
                return 0;
            };
        });
    }

    // train (teacher)
    {
        auto* cmd = app.add_subcommand("train", "Train the teacher network");
        auto opts = std::make_shared<CommonOpts>();
        auto data = std::make_shared<std::string>();
        add_common(cmd, *opts, true);
        cmd->add_option("--data", *data, "Dataset directory")->required();
        cmd->add_option("--out", opts->out, "Checkpoint output directory")->required();
        cmd->callback([&action, opts, data] {
            action = [opts, data]() -> int {
                ConfigPtr config;
                if (const int rc = load_config(*opts, config)) return rc;
                CHECK_STATUS(kdp_train_teacher(config.get(), data->c_str(), opts->out.c_str()));
                std::printf("teacher checkpoint written to %s\n", opts->out.c_str());
                return 0;
            };
        });
    }

    // distill (student)
    {
        auto* cmd = app.add_subcommand(
            "distill", "Train the student network (baseline when no teacher is given)");
        auto opts = std::make_shared<CommonOpts>();
        auto data = std::make_shared<std::string>();
        auto teacher = std::make_shared<std::string>();
        add_common(cmd, *opts, true);
        cmd->add_option("--data", *data, "Dataset directory")->required();
        cmd->add_option("--teacher", *teacher, "Teacher checkpoint directory");
        cmd->add_option("--out", opts->out, "Checkpoint output directory")->required();
        cmd->callback([&action, opts, data, teacher] {
            action = [opts, data, teacher]() -> int {
                ConfigPtr config;
                if (const int rc = load_config(*opts, config)) return rc;
                CHECK_STATUS(kdp_train_student(config.get(), data->c_str(),
                                               teacher->empty() ? nullptr : teacher->c_str(),
                                               opts->out.c_str()));
                std::printf("student checkpoint written to %s\n", opts->out.c_str());
                return 0;
            };
        });
    }

    // eval
    {
        auto* cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
        auto opts = std::make_shared<CommonOpts>();
        auto data = std::make_shared<std::string>();
        auto checkpoint = std::make_shared<std::string>();
        auto oracle = std::make_shared<bool>(false);
        add_common(cmd, *opts, true);
        cmd->add_option("--data", *data, "Dataset directory")->required();
        cmd->add_option("--checkpoint", *checkpoint, "Checkpoint directory");
        cmd->add_flag("--oracle", *oracle,
                      "Bypass the network: feed ground-truth encodings to decode+PnP+metrics");
        cmd->add_option("--out", opts->out, "Report output directory")->required();
        cmd->callback([&action, opts, data, checkpoint, oracle] {
            action = [opts, data, checkpoint, oracle]() -> int {
                ConfigPtr config;
                if (const int rc = load_config(*opts, config)) return rc;
                CHECK_STATUS(kdp_evaluate(config.get(),
                                          checkpoint->empty() ? nullptr : checkpoint->c_str(),
                                          data->c_str(), *oracle ? 1 : 0, opts->out.c_str()));
                std::printf("evaluation report written to %s\n", opts->out.c_str());
                return 0;
            };
        });
    }

    // ablate
    {
        auto* cmd = app.add_subcommand("ablate", "Loss-component grid and lambda sweep");
        auto opts = std::make_shared<CommonOpts>();
        auto data = std::make_shared<std::string>();
        auto teacher = std::make_shared<std::string>();
        auto seeds = std::make_shared<int>(5);
        auto threads = std::make_shared<int>(2);
        add_common(cmd, *opts, true);
        cmd->add_option("--data", *data, "Dataset directory")->required();
        cmd->add_option("--teacher", *teacher, "Teacher checkpoint directory")->required();
        cmd->add_option("--seeds", *seeds, "Seeds per grid cell (default 5)");
        cmd->add_option("--threads", *threads, "Parallel training runs (default 2)");
        cmd->add_option("--out", opts->out, "Report output directory")->required();
        cmd->callback([&action, opts, data, teacher, seeds, threads] {
            action = [opts, data, teacher, seeds, threads]() -> int {
                ConfigPtr config;
                if (const int rc = load_config(*opts, config)) return rc;
                CHECK_STATUS(kdp_ablate(config.get(), data->c_str(), teacher->c_str(), *seeds,
                                        *threads, opts->out.c_str()));
                std::printf("ablation report written to %s\n", opts->out.c_str());
                return 0;
            };
        });
    }

    // gradcheck
    {
        auto* cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
        auto opts = std::make_shared<CommonOpts>();
        auto verbose = std::make_shared<bool>(false);
        add_common(cmd, *opts, false);
        cmd->add_flag("--verbose", *verbose, "Print every failing coordinate");
        cmd->callback([&action, opts, verbose] {
            action = [opts, verbose]() -> int {
                const std::uint64_t seed = opts->seed_given ? opts->seed : 1;
                std::string summary(65536, '\0');
                const kdp_status status =
                    kdp_gradcheck(seed, *verbose ? 1 : 0, summary.data(), summary.size());
                std::printf("%s\n", summary.c_str());
                if (status == KDP_OK) return 0;
                std::fprintf(stderr, "gradcheck failed: %s\n", kdp_last_error());
                return 1;
            };
        });
    }

    // stats
    {
        auto* cmd = app.add_subcommand("stats", "Parameter and FLOP counts");
        auto opts = std::make_shared<CommonOpts>();
        auto checkpoint = std::make_shared<std::string>();
        add_common(cmd, *opts, false);
        cmd->add_option("--checkpoint", *checkpoint,
                        "Report a checkpoint instead of the config's default models");
        cmd->add_option("--out", opts->out, "Also write the table as CSV");
        cmd->callback([&action, opts, checkpoint] {
            action = [opts, checkpoint]() -> int {
                ConfigPtr config;
                if (const int rc = load_config(*opts, config)) return rc;
                char buf[32];
                CHECK_STATUS(kdp_config_get(config.get(), "height", buf, sizeof(buf)));
                const int height = std::atoi(buf);
                CHECK_STATUS(kdp_config_get(config.get(), "width", buf, sizeof(buf)));
                const int width = std::atoi(buf);

                std::string csv = "model,params,flops,input\n";
                const auto add_row = [&](const char* name, kdp_model* model) -> kdp_status {
                    std::uint64_t params = 0, flops = 0;
                    const kdp_status s = kdp_model_stats(model, height, width, &params, &flops);
                    if (s != KDP_OK) return s;
                    char line[160];
                    std::snprintf(line, sizeof(line), "%s,%llu,%llu,%dx%d\n", name,
                                  static_cast<unsigned long long>(params),
                                  static_cast<unsigned long long>(flops), width, height);
                    csv += line;
                    return KDP_OK;
                };

                if (!checkpoint->empty()) {
                    kdp_model* model = nullptr;
                    CHECK_STATUS(kdp_model_load(checkpoint->c_str(), &model));
                    ModelPtr guard(model);
                    CHECK_STATUS(add_row("checkpoint", model));
                } else {
                    for (const int student : {0, 1}) {
                        kdp_model* model = nullptr;
                        CHECK_STATUS(kdp_model_build(config.get(), student, 0, &model));
                        ModelPtr guard(model);
                        CHECK_STATUS(add_row(student ? "student" : "teacher", model));
                    }
                }
                std::printf("%s", csv.c_str());
                std::printf("# FLOPs convention: 2 per multiply-accumulate, bias adds counted "
                            "once per output element\n");
                if (!opts->out.empty()) {
                    std::FILE* f = std::fopen(opts->out.c_str(), "w");
                    if (!f) {
                        std::fprintf(stderr, "error: cannot write %s\n", opts->out.c_str());
                        return 1;
                    }
                    std::fputs(csv.c_str(), f);
                    std::fclose(f);
                }
                return 0;
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // usage problems exit 2
    }
    return action ? action() : 2;
}
