#include "bgsnetd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "bgsnetd/kernels/parallel.hpp"
#include "bgsnetd/nn/checkpoint.hpp"
#include "json.hpp"

namespace bgsnetd {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Configuration

void PipelineConfig::validate() const
{
    norm.validate();
    sampling.validate();
    train.validate();
    infer.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    if (precision != "float" && precision != "double") {
        throw ConfigError("precision must be 'float' or 'double'");
    }
    if (sampling.patch_size % 8 != 0) {
        throw ConfigError("patch_size must be a multiple of 8 for the three pooling stages");
    }
}

fs::path PipelineConfig::checkpoint_path() const
{
    return checkpoint.empty() ? out / files::model : checkpoint;
}

namespace {

json rect_json(const std::optional<Rect>& r)
{
    if (!r) return nullptr;
    return json{{"row", r->row}, {"col", r->col}, {"height", r->height}, {"width", r->width}};
}

std::optional<Rect> rect_from(const json& j)
{
    if (j.is_null()) return std::nullopt;
    return Rect{j.at("row").get<int>(), j.at("col").get<int>(), j.at("height").get<int>(), j.at("width").get<int>()};
}

json to_json_obj(const PipelineConfig& c)
{
    json j;
    j["norm"] = {{"alpha", c.norm.alpha},
                 {"preprocess", c.preprocess},
                 {"stats_from_training_frames", c.stats_from_training_frames}};
    j["sampling"] = {{"patch_size", c.sampling.patch_size},
                     {"max_samples_per_frame", c.sampling.max_samples_per_frame},
                     {"fg_fraction", c.sampling.fg_fraction},
                     {"stride", c.sampling.stride},
                     {"seed", c.sampling.seed}};
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"batch_size", c.train.batch_size},
                  {"epochs", c.train.epochs},
                  {"rmsprop_rho", c.train.rmsprop_rho},
                  {"rmsprop_epsilon", c.train.rmsprop_epsilon},
                  {"seed", c.train.seed},
                  {"shuffle", c.train.shuffle},
                  {"early_stop_patience", c.train.early_stop_patience},
                  {"pooled", c.pooled},
                  {"train_fraction", c.train_fraction},
                  {"precision", c.precision},
                  {"mlp_order", c.mlp_order == nn::MlpOrder::DenseSigmoidBn ? "dense-sigmoid-bn" : "dense-bn-sigmoid"}};
    j["infer"] = {{"threshold", c.infer.threshold},
                  {"pixel_batch", c.infer.pixel_batch},
                  {"fast_stride2", c.infer.fast_stride2},
                  {"dump_probabilities", c.dump_probabilities}};
    j["evaluate"] = {{"baseline_tau", c.baseline_tau ? json(*c.baseline_tau) : json(nullptr)}};
    const SynthConfig& s = c.synth;
    j["synth"] = {{"preset", c.synth_preset},
                  {"width", s.width},
                  {"height", s.height},
                  {"frame_count", s.frame_count},
                  {"bg_depth_mm", s.bg_depth_mm},
                  {"object_depth_mm", s.object_depth_mm},
                  {"object_size_px", s.object_size_px},
                  {"velocity_px_per_frame", s.velocity_px_per_frame},
                  {"object_row", s.object_row ? json(*s.object_row) : json(nullptr)},
                  {"absent_rate", s.absent_rate},
                  {"edge_noise_px", s.edge_noise_px},
                  {"depth_noise_mm", s.depth_noise_mm},
                  {"out_of_range_rect", rect_json(s.out_of_range_rect)},
                  {"far_rect", rect_json(s.far_rect)},
                  {"far_depth_mm", s.far_depth_mm},
                  {"seed", s.seed}};
    j["threads"] = c.threads;
    j["paths"] = {{"dataset", c.dataset.string()}, {"out", c.out.string()}, {"checkpoint", c.checkpoint.string()}};
    return j;
}

// Copies `key` from `src` into `dst` when present.
template <typename V>
void take(const json& src, const char* key, V& dst)
{
    if (src.contains(key)) dst = src.at(key).get<V>();
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    for (const auto& item : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
            throw ConfigError("unknown config key '" + where + item.key() + "'");
        }
    }
}

}  // namespace

std::string config_to_json(const PipelineConfig& cfg)
{
    return to_json_obj(cfg).dump(2) + "\n";
}

PipelineConfig config_from_json(const std::string& text, PipelineConfig c)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        check_keys(j, {"norm", "sampling", "train", "infer", "evaluate", "synth", "threads", "paths"}, "");
        if (j.contains("norm")) {
            const json& n = j["norm"];
            check_keys(n, {"alpha", "preprocess", "stats_from_training_frames"}, "norm.");
            take(n, "alpha", c.norm.alpha);
            take(n, "preprocess", c.preprocess);
            take(n, "stats_from_training_frames", c.stats_from_training_frames);
        }
        if (j.contains("sampling")) {
            const json& s = j["sampling"];
            check_keys(s, {"patch_size", "max_samples_per_frame", "fg_fraction", "stride", "seed"}, "sampling.");
            take(s, "patch_size", c.sampling.patch_size);
            take(s, "max_samples_per_frame", c.sampling.max_samples_per_frame);
            take(s, "fg_fraction", c.sampling.fg_fraction);
            take(s, "stride", c.sampling.stride);
            take(s, "seed", c.sampling.seed);
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            check_keys(t, {"learning_rate", "batch_size", "epochs", "rmsprop_rho", "rmsprop_epsilon", "seed", "shuffle",
                           "early_stop_patience", "pooled", "train_fraction", "precision", "mlp_order"},
                       "train.");
            take(t, "learning_rate", c.train.learning_rate);
            take(t, "batch_size", c.train.batch_size);
            take(t, "epochs", c.train.epochs);
            take(t, "rmsprop_rho", c.train.rmsprop_rho);
            take(t, "rmsprop_epsilon", c.train.rmsprop_epsilon);
            take(t, "seed", c.train.seed);
            take(t, "shuffle", c.train.shuffle);
            take(t, "early_stop_patience", c.train.early_stop_patience);
            take(t, "pooled", c.pooled);
            take(t, "train_fraction", c.train_fraction);
            take(t, "precision", c.precision);
            if (t.contains("mlp_order")) {
                const std::string order = t["mlp_order"].get<std::string>();
                if (order == "dense-sigmoid-bn") {
                    c.mlp_order = nn::MlpOrder::DenseSigmoidBn;
                } else if (order == "dense-bn-sigmoid") {
                    c.mlp_order = nn::MlpOrder::DenseBnSigmoid;
                } else {
                    throw ConfigError("mlp_order must be 'dense-sigmoid-bn' or 'dense-bn-sigmoid'");
                }
            }
        }
        if (j.contains("infer")) {
            const json& i = j["infer"];
            check_keys(i, {"threshold", "pixel_batch", "fast_stride2", "dump_probabilities"}, "infer.");
            take(i, "threshold", c.infer.threshold);
            take(i, "pixel_batch", c.infer.pixel_batch);
            take(i, "fast_stride2", c.infer.fast_stride2);
            take(i, "dump_probabilities", c.dump_probabilities);
        }
        if (j.contains("evaluate")) {
            const json& e = j["evaluate"];
            check_keys(e, {"baseline_tau"}, "evaluate.");
            if (e.contains("baseline_tau")) {
                c.baseline_tau = e["baseline_tau"].is_null() ? std::nullopt
                                                             : std::optional<double>(e["baseline_tau"].get<double>());
            }
        }
        if (j.contains("synth")) {
            const json& s = j["synth"];
            check_keys(s, {"preset", "width", "height", "frame_count", "bg_depth_mm", "object_depth_mm",
                           "object_size_px", "velocity_px_per_frame", "object_row", "absent_rate", "edge_noise_px",
                           "depth_noise_mm", "out_of_range_rect", "far_rect", "far_depth_mm", "seed"},
                       "synth.");
            if (s.contains("preset")) {
                c.synth_preset = s["preset"].get<std::string>();
                c.synth = synth_preset(c.synth_preset);
            }
            SynthConfig& y = c.synth;
            take(s, "width", y.width);
            take(s, "height", y.height);
            take(s, "frame_count", y.frame_count);
            take(s, "bg_depth_mm", y.bg_depth_mm);
            take(s, "object_depth_mm", y.object_depth_mm);
            take(s, "object_size_px", y.object_size_px);
            take(s, "velocity_px_per_frame", y.velocity_px_per_frame);
            if (s.contains("object_row")) {
                y.object_row = s["object_row"].is_null() ? std::nullopt
                                                         : std::optional<int>(s["object_row"].get<int>());
            }
            take(s, "absent_rate", y.absent_rate);
            take(s, "edge_noise_px", y.edge_noise_px);
            take(s, "depth_noise_mm", y.depth_noise_mm);
            if (s.contains("out_of_range_rect")) y.out_of_range_rect = rect_from(s["out_of_range_rect"]);
            if (s.contains("far_rect")) y.far_rect = rect_from(s["far_rect"]);
            take(s, "far_depth_mm", y.far_depth_mm);
            take(s, "seed", y.seed);
        }
        take(j, "threads", c.threads);
        if (j.contains("paths")) {
            const json& p = j["paths"];
            check_keys(p, {"dataset", "out", "checkpoint"}, "paths.");
            if (p.contains("dataset")) c.dataset = p["dataset"].get<std::string>();
            if (p.contains("out")) c.out = p["out"].get<std::string>();
            if (p.contains("checkpoint")) c.checkpoint = p["checkpoint"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

PipelineConfig load_config_file(const fs::path& path, PipelineConfig base)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str(), std::move(base));
}

SynthConfig synth_preset(const std::string& name)
{
    if (name == "default") return default_synth_config();
    if (name == "camouflage") return camouflage_config();
    if (name == "wide-range") return wide_range_config();
    throw ConfigError("unknown synth preset '" + name + "' (expected default, camouflage or wide-range)");
}

// ---------------------------------------------------------------------------------------------
// Dataset layout helpers

std::string VideoEntry::category() const
{
    const auto slash = rel.find('/');
    return slash == std::string::npos ? std::string() : rel.substr(0, slash);
}

std::vector<VideoEntry> discover_videos(const fs::path& root)
{
    if (root.empty() || !fs::is_directory(root)) {
        throw IoError("dataset directory not found: " + root.string());
    }
    if (fs::is_directory(root / "depth")) {
        return {VideoEntry{"", root}};
    }
    std::vector<VideoEntry> out;
    auto sorted_dirs = [](const fs::path& p) {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(p)) {
            if (e.is_directory()) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        return dirs;
    };
    for (const fs::path& a : sorted_dirs(root)) {
        if (fs::is_directory(a / "depth")) {
            out.push_back({a.filename().string(), a});
            continue;
        }
        for (const fs::path& b : sorted_dirs(a)) {
            if (fs::is_directory(b / "depth")) {
                out.push_back({a.filename().string() + "/" + b.filename().string(), b});
            }
        }
    }
    if (out.empty()) {
        throw DataError("no video directories (containing depth/) under " + root.string());
    }
    return out;
}

std::size_t split_index(std::size_t frames, double train_fraction)
{
    if (frames < 2) {
        throw DataError("a video needs at least 2 frames for a train/evaluation split");
    }
    const auto s = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(frames)));
    return std::clamp<std::size_t>(s, 1, frames - 1);
}

namespace {

void emit(const LogFn& log, const std::string& msg)
{
    if (log) log(msg);
}

void apply_threads(const PipelineConfig& cfg)
{
    set_num_threads(cfg.threads > 0 ? cfg.threads : default_num_threads());
}

fs::path video_out(const PipelineConfig& cfg, const VideoEntry& v)
{
    return v.rel.empty() ? cfg.out : cfg.out / v.rel;
}

std::string read_text(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throw IoError("cannot open " + p.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::trunc);
    if (!out || !(out << text)) {
        throw IoError("cannot write " + p.string());
    }
}

void require_out(const PipelineConfig& cfg)
{
    if (cfg.out.empty()) {
        throw ConfigError("--out is required");
    }
}

nn::ModelSpec model_spec(const PipelineConfig& cfg)
{
    nn::ModelSpec spec = nn::ModelSpec::standard();
    spec.patch_size = cfg.sampling.patch_size;
    spec.mlp_order = cfg.mlp_order;
    return spec;
}

struct LoadedVideo {
    VideoSequence seq;
    DepthStats stats;
    NormalizedFrame background;
    std::vector<NormalizedFrame> frames;
};

// Reloads the sequence and normalizes it with the background and stats written by extract-bg.
LoadedVideo load_preprocessed(const PipelineConfig& cfg, const VideoEntry& v)
{
    const fs::path dir = video_out(cfg, v);
    if (!fs::exists(dir / files::background) || !fs::exists(dir / files::stats)) {
        throw IoError("missing " + (dir / files::background).string() + " or " + (dir / files::stats).string() +
                      " (run extract-bg first)");
    }
    LoadedVideo out;
    out.seq = load_sequence(v.path);
    const DepthFrame bg_raw = load_depth_frame(dir / files::background);
    require_same_shape(bg_raw, out.seq.frames.front(), "stored background and video frames");
    const auto [stats, norm] = stats_from_json(read_text(dir / files::stats));
    out.stats = stats;
    auto convert = [&](const DepthFrame& f) {
        return cfg.preprocess ? normalize_frame(f, stats, norm) : scale_raw_frame(f);
    };
    out.background = convert(bg_raw);
    out.frames.resize(out.seq.frames.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(out.frames.size()); ++k) {
        out.frames[k] = convert(out.seq.frames[k]);
    }
    return out;
}

template <typename T>
void train_and_save(const PipelineConfig& cfg, const std::vector<PatchSample>& samples, const fs::path& model_path,
                    const fs::path& history_path, const LogFn& log)
{
    auto on_epoch = [&](const EpochStats& e) {
        std::ostringstream msg;
        msg << "epoch " << e.epoch << ": loss " << e.mean_loss << ", accuracy " << e.accuracy << ", " << e.seconds
            << " s";
        emit(log, msg.str());
    };
    TrainResult<T> r = train<T>(samples, cfg.train, model_spec(cfg), on_epoch);
    for (const std::string& w : r.history.warnings) {
        emit(log, "warning: " + w);
    }
    nn::save_checkpoint(r.model, r.optimizer, model_path);
    write_text(history_path, r.history.to_csv());
}

template <typename T>
void predict_videos(const PipelineConfig& cfg, const std::vector<VideoEntry>& videos, const LogFn& log)
{
    std::optional<nn::Model<T>> shared;
    if (cfg.pooled || videos.size() == 1 || !cfg.checkpoint.empty()) {
        shared = nn::load_checkpoint<T>(cfg.checkpoint_path(), model_spec(cfg)).model;
    }
    for (const VideoEntry& v : videos) {
        const fs::path dir = video_out(cfg, v);
        const nn::Model<T> model =
            shared ? *shared : nn::load_checkpoint<T>(dir / files::model, model_spec(cfg)).model;
        const LoadedVideo lv = load_preprocessed(cfg, v);
        const std::size_t split = split_index(lv.frames.size(), cfg.train_fraction);
        fs::create_directories(dir / files::masks);
        if (cfg.dump_probabilities) {
            fs::create_directories(dir / files::probabilities);
        }
        for (std::size_t f = split; f < lv.frames.size(); ++f) {
            const Prediction p = predict_frame(model, lv.frames[f], lv.background, cfg.infer);
            save_mask(p.mask, dir / files::masks / frame_file_name(f));
            if (cfg.dump_probabilities) {
                save_depth_frame(probability_to_u16(p.probability), dir / files::probabilities / frame_file_name(f));
            }
        }
        emit(log, "predicted " + std::to_string(lv.frames.size() - split) + " frames of " + v.display_name());
    }
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Commands

void cmd_synth(const PipelineConfig& cfg, const LogFn& log)
{
    if (cfg.dataset.empty()) {
        throw ConfigError("--dataset is required (output directory for the synthetic video)");
    }
    apply_threads(cfg);
    const VideoSequence seq = generate(cfg.synth);
    save_sequence(seq, cfg.dataset);
    emit(log, "wrote " + std::to_string(seq.frames.size()) + " synthetic frames to " + cfg.dataset.string());
}

void cmd_extract_bg(const PipelineConfig& cfg, const LogFn& log)
{
    cfg.validate();
    require_out(cfg);
    apply_threads(cfg);
    for (const VideoEntry& v : discover_videos(cfg.dataset)) {
        const VideoSequence seq = load_sequence(v.path);
        const fs::path dir = video_out(cfg, v);
        fs::create_directories(dir);
        const DepthFrame bg = extract_background(seq);
        std::span<const DepthFrame> stat_frames(seq.frames);
        if (cfg.stats_from_training_frames) {
            stat_frames = stat_frames.first(split_index(seq.frames.size(), cfg.train_fraction));
        }
        const DepthStats stats = compute_depth_stats(stat_frames);
        save_depth_frame(bg, dir / files::background);
        write_text(dir / files::stats, stats_to_json(stats, cfg.norm));
        emit(log, "background of " + v.display_name() + ": depth range [" + std::to_string(stats.min_valid) + ", " +
                      std::to_string(stats.max) + "] mm");
    }
}

void cmd_gen_dataset(const PipelineConfig& cfg, const LogFn& log)
{
    cfg.validate();
    require_out(cfg);
    apply_threads(cfg);
    for (const VideoEntry& v : discover_videos(cfg.dataset)) {
        const LoadedVideo lv = load_preprocessed(cfg, v);
        const std::size_t split = split_index(lv.frames.size(), cfg.train_fraction);
        std::vector<std::size_t> ids;
        for (std::size_t f = 0; f < split; ++f) {
            ids.push_back(f);
        }
        PatchDataset ds;
        ds.patch_size = cfg.sampling.patch_size;
        ds.samples = generate_training_set(lv.seq, lv.background, lv.frames, cfg.sampling, ids);
        save_dataset(ds, video_out(cfg, v) / files::dataset);
        const auto fg = std::count_if(ds.samples.begin(), ds.samples.end(),
                                      [](const PatchSample& s) { return s.label == 1; });
        emit(log, "dataset for " + v.display_name() + ": " + std::to_string(ds.samples.size()) + " patches, " +
                      std::to_string(fg) + " foreground");
    }
}

void cmd_train(const PipelineConfig& cfg, const LogFn& log)
{
    cfg.validate();
    require_out(cfg);
    apply_threads(cfg);
    const std::vector<VideoEntry> videos = discover_videos(cfg.dataset);
    auto load_samples = [&](const VideoEntry& v) {
        PatchDataset ds = load_dataset(video_out(cfg, v) / files::dataset);
        if (ds.patch_size != cfg.sampling.patch_size) {
            throw DataError("dataset patch size " + std::to_string(ds.patch_size) + " does not match config");
        }
        return std::move(ds.samples);
    };
    auto run = [&](const std::vector<PatchSample>& samples, const fs::path& model_path, const fs::path& history) {
        if (cfg.precision == "double") {
            train_and_save<double>(cfg, samples, model_path, history, log);
        } else {
            train_and_save<float>(cfg, samples, model_path, history, log);
        }
    };
    if (cfg.pooled || videos.size() == 1) {
        std::vector<PatchSample> all;
        for (const VideoEntry& v : videos) {
            auto s = load_samples(v);
            all.insert(all.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
        }
        fs::create_directories(cfg.checkpoint_path().parent_path().empty() ? fs::path(".")
                                                                           : cfg.checkpoint_path().parent_path());
        run(all, cfg.checkpoint_path(), cfg.out / files::history);
    } else {
        for (const VideoEntry& v : videos) {
            emit(log, "training " + v.display_name());
            run(load_samples(v), video_out(cfg, v) / files::model, video_out(cfg, v) / files::history);
        }
    }
}

void cmd_predict(const PipelineConfig& cfg, const LogFn& log)
{
    cfg.validate();
    require_out(cfg);
    apply_threads(cfg);
    const std::vector<VideoEntry> videos = discover_videos(cfg.dataset);
    const fs::path probe = (cfg.pooled || videos.size() == 1 || !cfg.checkpoint.empty())
                               ? cfg.checkpoint_path()
                               : video_out(cfg, videos.front()) / files::model;
    if (!fs::exists(probe)) {
        throw IoError("checkpoint not found: " + probe.string());
    }
    if (nn::checkpoint_precision(probe) == nn::Precision::Float64) {
        predict_videos<double>(cfg, videos, log);
    } else {
        predict_videos<float>(cfg, videos, log);
    }
}

EvaluationResult cmd_evaluate(const PipelineConfig& cfg, const LogFn& log)
{
    cfg.validate();
    require_out(cfg);
    apply_threads(cfg);
    EvaluationResult result;
    std::map<std::string, std::vector<MetricReport>> by_category;
    std::map<std::string, std::vector<MetricReport>> baseline_by_category;
    std::vector<std::string> category_order;

    for (const VideoEntry& v : discover_videos(cfg.dataset)) {
        const VideoSequence seq = load_sequence(v.path);
        if (!seq.has_gt()) {
            emit(log, "skipping " + v.display_name() + ": no ground truth");
            continue;
        }
        const fs::path mask_dir = video_out(cfg, v) / files::masks;
        if (!fs::is_directory(mask_dir)) {
            throw IoError("no masks for " + v.display_name() + " in " + mask_dir.string() + " (run predict first)");
        }
        const std::size_t split = split_index(seq.frames.size(), cfg.train_fraction);
        ConfusionCounts counts;
        for (std::size_t f = split; f < seq.frames.size(); ++f) {
            const MaskFrame mask = load_mask(mask_dir / frame_file_name(f));
            counts += accumulate(mask, seq.gt[f], seq.roi ? &*seq.roi : nullptr);
        }
        const MetricReport report = compute_metrics(counts);
        result.rows.push_back({v.display_name(), report});
        const std::string cat = v.category();
        if (!by_category.count(cat)) category_order.push_back(cat);
        by_category[cat].push_back(report);

        if (cfg.baseline_tau) {
            const LoadedVideo lv = load_preprocessed(cfg, v);
            ConfusionCounts bc;
            for (std::size_t f = split; f < seq.frames.size(); ++f) {
                bc += accumulate(predict_baseline_avg(lv.frames[f], lv.background, *cfg.baseline_tau), seq.gt[f],
                                 seq.roi ? &*seq.roi : nullptr);
            }
            const MetricReport br = compute_metrics(bc);
            result.baseline_rows.push_back({v.display_name() + " [avg-baseline]", br});
            baseline_by_category[cat].push_back(br);
        }
    }
    if (result.rows.empty()) {
        throw DataError("nothing to evaluate: no video with ground truth");
    }

    // Per-category means, then the mean over categories.
    auto summarize = [&](std::map<std::string, std::vector<MetricReport>>& groups, std::vector<ReportRow>& rows,
                         const std::string& suffix) {
        std::vector<MetricReport> category_means;
        for (const std::string& cat : category_order) {
            if (!groups.count(cat)) continue;
            const MetricReport mean = average_reports(groups[cat]);
            category_means.push_back(mean);
            if (!cat.empty() && category_order.size() > 1) {
                rows.push_back({"category:" + cat + suffix, mean});
            }
        }
        if (!category_means.empty()) {
            rows.push_back({"average" + suffix, average_reports(category_means)});
        }
    };
    summarize(by_category, result.rows, "");
    if (cfg.baseline_tau) {
        summarize(baseline_by_category, result.baseline_rows, " [avg-baseline]");
    }

    std::vector<ReportRow> all = result.rows;
    all.insert(all.end(), result.baseline_rows.begin(), result.baseline_rows.end());
    fs::create_directories(cfg.out);
    write_text(cfg.out / files::metrics, report_csv(all));
    write_text(cfg.out / files::metrics_table, report_table(all));
    emit(log, report_table(all));
    return result;
}

EvaluationResult cmd_run_all(const PipelineConfig& cfg, const LogFn& log)
{
    cfg.validate();
    require_out(cfg);
    fs::create_directories(cfg.out);
    write_text(cfg.out / files::config, config_to_json(cfg));
    cmd_extract_bg(cfg, log);
    cmd_gen_dataset(cfg, log);
    cmd_train(cfg, log);
    cmd_predict(cfg, log);
    return cmd_evaluate(cfg, log);
}

}  // namespace bgsnetd
