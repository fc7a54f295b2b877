#pragma once

#include "kdpose/config.hpp"
#include "kdpose/dataset.hpp"
#include "kdpose/network.hpp"

namespace kdpose {

struct EpochLog {
    int epoch = 0;
    double lr = 0;
    double loss_total = 0; // epoch mean per sample
    double loss_mse = 0;
    double loss_od = 0;
    double loss_fs = 0;
    double test_kp_error_px = -1; // -1 when nothing was detected
    double detection_rate = 0;
};

struct TrainResult {
    std::vector<EpochLog> epoch_logs;
    std::vector<double> step_losses; // per-sample total loss, in order
    std::string checkpoint_dir;
};

/// Minimizes the pose-estimation loss with Adam and the halving schedule;
/// writes the checkpoint plus train_log.jsonl into out_dir.
TrainResult train_teacher(const Dataset& dataset, const TrainConfig& config,
                          const std::string& out_dir);

/// Student training. Without a teacher this is the plain baseline; with one,
/// the combined objective (output + feature-similarity distillation) is used
/// and the teacher stays frozen. Zero lambdas skip their terms entirely, so
/// a zero-lambda distillation run is step-identical to the baseline.
TrainResult train_student(const Dataset& dataset, const TrainConfig& config,
                          const PoseNet<float>* teacher, const std::string& out_dir);

struct EvalRow {
    std::string object;
    int class_id = -1; // -1 for the aggregate row
    int instances = 0;
    int add_correct = 0;
    int proj_correct = 0;
    int no_detection = 0;
    int pnp_failed = 0;
    int solved = 0;
    double add_accuracy_pct = 0;
    double proj_accuracy_pct = 0;
    double mean_add_mm = 0;   // over solved instances (ADD-S for symmetric)
    double mean_proj_px = 0;  // over solved instances
};

struct EvalReport {
    std::vector<EvalRow> per_object;
    EvalRow total;
    int test_samples = 0;
    bool oracle_mode = false;
    std::uint64_t param_count = 0;
    std::uint64_t flops = 0;
    std::string flop_convention =
        "2 FLOPs per multiply-accumulate; bias adds counted once per output element";
    std::string config_fingerprint;
    std::string config_json; // exact config, embedded for reproducibility
};

/// Full pipeline per test sample: forward, decode, PnP, both correctness
/// metrics. Missing detections and PnP failures count as incorrect. With
/// oracle_mode the network is bypassed and ground-truth encodings are fed to
/// the decode + PnP + metric stages (net may be null).
EvalReport evaluate(const PoseNet<float>* net, const Dataset& dataset, const TrainConfig& config,
                    bool oracle_mode);

/// Writes eval.csv, eval.json, accuracy_add.svg, accuracy_projection.svg.
void write_eval_report(const EvalReport& report, const std::string& out_dir);

struct AblationRun {
    std::string cell; // "baseline", "od", "fs", "both", "sweep_l1", "sweep_l2"
    double lambda1 = 0;
    double lambda2 = 0;
    int seed_index = 0;
    double add_accuracy_pct = 0;
    double proj_accuracy_pct = 0;
};

struct AblationSummary {
    std::string cell;
    double lambda1 = 0, lambda2 = 0;
    double median_add_pct = 0, min_add_pct = 0, max_add_pct = 0;
    double median_proj_pct = 0;
};

struct AblationReport {
    std::vector<AblationRun> runs;
    std::vector<AblationSummary> summary;
    int seeds = 0;
    std::string config_json;
};

/// Loss-component grid {baseline, od, fs, both} plus lambda sweeps, each over
/// `seeds` paired seeds. Runs execute on `threads` workers; outputs are
/// deterministic regardless of thread count.
AblationReport ablate(const Dataset& dataset, const TrainConfig& config,
                      const PoseNet<float>& teacher, int seeds, int threads,
                      const std::string& out_dir);

/// Per-epoch diagnostic: mean keypoint localization error (input-res px) and
/// detection rate over the first `subset` test samples.
std::pair<double, double> keypoint_error(const PoseNet<float>& net, const Dataset& dataset,
                                         const TrainConfig& config, int subset);

} // namespace kdpose
