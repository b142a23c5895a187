#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bgsnetd/error.hpp"
#include "bgsnetd/pipeline.hpp"

namespace {

// Command line values that override the config file. Unset options leave the file's value alone.
struct Overrides {
    std::string config;
    std::string dataset;
    std::string out;
    std::string checkpoint;
    std::optional<int> threads;
    std::optional<double> alpha;
    bool no_preprocess = false;
    bool stats_from_training = false;
    std::optional<int> patch_size;
    std::optional<int> samples_per_frame;
    std::optional<double> fg_fraction;
    std::optional<int> stride;
    std::optional<double> learning_rate;
    std::optional<int> batch_size;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<int> patience;
    std::optional<double> train_fraction;
    std::string precision;
    std::string mlp_order;
    bool pooled = false;
    std::optional<double> threshold;
    std::optional<int> pixel_batch;
    bool fast_stride2 = false;
    bool dump_probs = false;
    std::optional<double> baseline_tau;
    std::string preset;
    std::optional<std::uint64_t> synth_seed;
    bool quiet = false;
};

void add_options(CLI::App& cmd, Overrides& o)
{
    cmd.add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    cmd.add_option("--dataset", o.dataset, "Dataset root (video dir, dir of videos, or dir of categories)");
    cmd.add_option("--out", o.out, "Output directory");
    cmd.add_option("--checkpoint", o.checkpoint, "Checkpoint path (default <out>/model.bgsn)");
    cmd.add_option("--threads", o.threads, "Worker threads (1 is bit-deterministic)")->check(CLI::PositiveNumber);
    cmd.add_option("--alpha", o.alpha, "Normalization offset in mm");
    cmd.add_flag("--no-preprocess", o.no_preprocess, "Scale raw depth by 1/65535 instead of normalizing");
    cmd.add_flag("--stats-from-training", o.stats_from_training, "Compute depth range on training frames only");
    cmd.add_option("--patch-size", o.patch_size, "Patch side length");
    cmd.add_option("--samples-per-frame", o.samples_per_frame, "Maximum patches per training frame");
    cmd.add_option("--fg-fraction", o.fg_fraction, "Target foreground share of sampled patches");
    cmd.add_option("--stride", o.stride, "Sampling grid stride");
    cmd.add_option("--lr", o.learning_rate, "RMSprop learning rate");
    cmd.add_option("--batch-size", o.batch_size, "Mini-batch size");
    cmd.add_option("--epochs", o.epochs, "Training epochs");
    cmd.add_option("--seed", o.seed, "Seed for sampling and training");
    cmd.add_option("--early-stop", o.patience, "Stop after this many epochs without improvement (0 disables)");
    cmd.add_option("--train-fraction", o.train_fraction, "Leading fraction of each video used for training");
    cmd.add_option("--precision", o.precision, "float or double")->check(CLI::IsMember({"float", "double"}));
    cmd.add_option("--mlp-order", o.mlp_order, "dense-sigmoid-bn or dense-bn-sigmoid")
        ->check(CLI::IsMember({"dense-sigmoid-bn", "dense-bn-sigmoid"}));
    cmd.add_flag("--pooled", o.pooled, "Train one model on all videos");
    cmd.add_option("--threshold", o.threshold, "Foreground probability threshold");
    cmd.add_option("--pixel-batch", o.pixel_batch, "Pixels per inference batch");
    cmd.add_flag("--fast-stride2", o.fast_stride2, "Evaluate every second pixel and upsample");
    cmd.add_flag("--dump-probs", o.dump_probs, "Also write probability maps");
    cmd.add_option("--baseline-tau", o.baseline_tau, "Also score the background-difference baseline");
    cmd.add_option("--preset", o.preset, "Synthetic scene preset: default, camouflage, wide-range");
    cmd.add_option("--synth-seed", o.synth_seed, "Synthetic scene seed");
    cmd.add_flag("-q,--quiet", o.quiet, "Only print errors");
}

bgsnetd::PipelineConfig resolve(const Overrides& o)
{
    bgsnetd::PipelineConfig c;
    if (!o.config.empty()) c = bgsnetd::load_config_file(o.config);
    if (!o.dataset.empty()) c.dataset = o.dataset;
    if (!o.out.empty()) c.out = o.out;
    if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
    if (o.threads) c.threads = *o.threads;
    if (o.alpha) c.norm.alpha = *o.alpha;
    if (o.no_preprocess) c.preprocess = false;
    if (o.stats_from_training) c.stats_from_training_frames = true;
    if (o.patch_size) c.sampling.patch_size = *o.patch_size;
    if (o.samples_per_frame) c.sampling.max_samples_per_frame = *o.samples_per_frame;
    if (o.fg_fraction) c.sampling.fg_fraction = *o.fg_fraction;
    if (o.stride) c.sampling.stride = *o.stride;
    if (o.learning_rate) c.train.learning_rate = *o.learning_rate;
    if (o.batch_size) c.train.batch_size = *o.batch_size;
    if (o.epochs) c.train.epochs = *o.epochs;
    if (o.seed) {
        c.train.seed = *o.seed;
        c.sampling.seed = *o.seed;
    }
    if (o.patience) c.train.early_stop_patience = *o.patience;
    if (o.train_fraction) c.train_fraction = *o.train_fraction;
    if (!o.precision.empty()) c.precision = o.precision;
    if (!o.mlp_order.empty()) {
        c.mlp_order = o.mlp_order == "dense-bn-sigmoid" ? bgsnetd::nn::MlpOrder::DenseBnSigmoid
                                                        : bgsnetd::nn::MlpOrder::DenseSigmoidBn;
    }
    if (o.pooled) c.pooled = true;
    if (o.threshold) c.infer.threshold = *o.threshold;
    if (o.pixel_batch) c.infer.pixel_batch = *o.pixel_batch;
    if (o.fast_stride2) c.infer.fast_stride2 = true;
    if (o.dump_probs) c.dump_probabilities = true;
    if (o.baseline_tau) c.baseline_tau = *o.baseline_tau;
    if (!o.preset.empty()) {
        c.synth_preset = o.preset;
        c.synth = bgsnetd::synth_preset(o.preset);
    }
    if (o.synth_seed) c.synth.seed = *o.synth_seed;
    return c;
}

// One line, no embedded newlines, so callers can parse it.
std::string single_line(std::string s)
{
    for (char& ch : s) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"BGSNet-D depth background subtraction"};
    app.require_subcommand(1);
    Overrides o;

    struct Command {
        const char* name;
        const char* help;
        std::function<void(const bgsnetd::PipelineConfig&, const bgsnetd::LogFn&)> run;
    };
    const Command commands[] = {
        {"synth", "Write a synthetic depth video to --dataset", bgsnetd::cmd_synth},
        {"extract-bg", "Average background and depth statistics per video", bgsnetd::cmd_extract_bg},
        {"gen-dataset", "Sample labelled training patches", bgsnetd::cmd_gen_dataset},
        {"train", "Train the network", bgsnetd::cmd_train},
        {"predict", "Write foreground masks for held-out frames", bgsnetd::cmd_predict},
        {"evaluate", "Score masks against ground truth",
         [](const auto& c, const auto& l) { bgsnetd::cmd_evaluate(c, l); }},
        {"run-all", "All stages in sequence", [](const auto& c, const auto& l) { bgsnetd::cmd_run_all(c, l); }},
    };
    for (const Command& cmd : commands) {
        add_options(*app.add_subcommand(cmd.name, cmd.help), o);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << single_line(e.what()) << "\n";
        return 2;
    }

    try {
        const bgsnetd::PipelineConfig cfg = resolve(o);
        const bgsnetd::LogFn log = [&](const std::string& msg) {
            if (!o.quiet) std::cout << msg << std::endl;
        };
        for (const Command& cmd : commands) {
            if (app.got_subcommand(cmd.name)) {
                cmd.run(cfg, log);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << single_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
