#pragma once

// End-to-end orchestration behind the `bgsnetd` command line tool. Every command reads and writes
// fixed file names below an output directory so the stages can be run one by one or in sequence.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bgsnetd/infer.hpp"
#include "bgsnetd/metrics.hpp"
#include "bgsnetd/nn/model.hpp"
#include "bgsnetd/patches.hpp"
#include "bgsnetd/preprocess.hpp"
#include "bgsnetd/synth.hpp"
#include "bgsnetd/trainer.hpp"

namespace bgsnetd {

struct PipelineConfig {
    NormConfig norm;
    bool preprocess = true;                  // false: plain x / 65535 scaling
    bool stats_from_training_frames = false;
    SamplingConfig sampling;
    TrainConfig train;
    InferConfig infer;
    nn::MlpOrder mlp_order = nn::MlpOrder::DenseSigmoidBn;
    double train_fraction = 0.5;             // leading fraction of each video used for training
    std::string precision = "float";         // "float" or "double"
    bool pooled = false;                     // one model for all videos instead of one per video
    bool dump_probabilities = false;
    std::optional<double> baseline_tau;      // also score the frame-differencing baseline
    int threads = 0;                         // 0: BGSNETD_THREADS or all cores
    std::string synth_preset = "default";
    SynthConfig synth = default_synth_config();

    std::filesystem::path dataset;
    std::filesystem::path out;
    std::filesystem::path checkpoint;        // defaults to <out>/model.bgsn

    void validate() const;
    std::filesystem::path checkpoint_path() const;
};

std::string config_to_json(const PipelineConfig& cfg);
/// Fields missing from `text` keep their value in `base`. Unknown keys are an error.
PipelineConfig config_from_json(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base = {});

SynthConfig synth_preset(const std::string& name);

namespace files {
inline constexpr const char* background = "bg.pgm";
inline constexpr const char* stats = "stats.json";
inline constexpr const char* dataset = "dataset.bgsd";
inline constexpr const char* model = "model.bgsn";
inline constexpr const char* history = "history.csv";
inline constexpr const char* metrics = "metrics.csv";
inline constexpr const char* metrics_table = "metrics.txt";
inline constexpr const char* config = "config.json";
inline constexpr const char* masks = "masks";
inline constexpr const char* probabilities = "probs";
}  // namespace files

/// A video under the dataset root. `rel` is empty when the root itself is a video directory,
/// otherwise "video" or "category/video".
struct VideoEntry {
    std::string rel;
    std::filesystem::path path;

    std::string display_name() const { return rel.empty() ? path.filename().string() : rel; }
    std::string category() const;
};

std::vector<VideoEntry> discover_videos(const std::filesystem::path& root);

/// Index of the first evaluation frame: frames [0, split) train, [split, n) are held out.
std::size_t split_index(std::size_t frames, double train_fraction);

using LogFn = std::function<void(const std::string&)>;

struct EvaluationResult {
    std::vector<ReportRow> rows;  // per video, per category average, overall average
    std::vector<ReportRow> baseline_rows;
};

void cmd_synth(const PipelineConfig& cfg, const LogFn& log = {});
void cmd_extract_bg(const PipelineConfig& cfg, const LogFn& log = {});
void cmd_gen_dataset(const PipelineConfig& cfg, const LogFn& log = {});
void cmd_train(const PipelineConfig& cfg, const LogFn& log = {});
void cmd_predict(const PipelineConfig& cfg, const LogFn& log = {});
EvaluationResult cmd_evaluate(const PipelineConfig& cfg, const LogFn& log = {});
EvaluationResult cmd_run_all(const PipelineConfig& cfg, const LogFn& log = {});

}  // namespace bgsnetd
