#include "mana/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>

#include "mana/attention.hpp"
#include "mana/checkpoint.hpp"
#include "mana/nn.hpp"
#include "mana/ops.hpp"
#include "mana/probe.hpp"

namespace mana {

namespace {

SynthSpec synth_spec(const RunConfig& cfg, std::uint64_t seed)
{
    SynthSpec spec;
    spec.pattern = cfg.data.pattern;
    spec.frames = cfg.model.frames;
    spec.hr_height = cfg.data.hr_size;
    spec.hr_width = cfg.data.hr_size;
    spec.motion_x = cfg.data.motion_x;
    spec.motion_y = cfg.data.motion_y;
    spec.seed = seed;
    return spec;
}

bool has_png(const std::filesystem::path& dir)
{
    return !list_png_files(dir).empty();
}

/// (name, directory) of every sequence under root: root itself when it holds
/// frames, otherwise each subdirectory that does.
std::vector<std::pair<std::string, std::filesystem::path>> sequences(const std::filesystem::path& root)
{
    if (has_png(root)) return {{root.filename().string(), root}};
    std::vector<std::pair<std::string, std::filesystem::path>> out;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && has_png(entry.path())) out.emplace_back(entry.path().filename().string(), entry.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw DataError(DataError::Kind::insufficient_frames, "no PNG sequences under " + root.string());
    return out;
}

std::filesystem::path paired_dir(const std::filesystem::path& lr_root, const std::filesystem::path& hr_root,
                                 const std::filesystem::path& seq)
{
    return seq == lr_root ? hr_root : hr_root / seq.filename();
}

MetricRow score(const std::string& clip, const std::string& method, const Tensor<float>& pred, const Tensor<float>& truth)
{
    if (pred.shape() != truth.shape()) {
        throw DataError(DataError::Kind::inconsistent_dims, clip + ": " + method + " output " + shape_string(pred.shape()) +
                                                                " vs ground truth " + shape_string(truth.shape()));
    }
    return {clip, method, psnr(pred, truth), ssim(pred, truth)};
}

std::vector<MetricRow> with_means(std::vector<MetricRow> rows)
{
    const auto means = aggregate_rows(rows);
    rows.insert(rows.end(), means.begin(), means.end());
    return rows;
}

void report_stage(std::ostream& out, const TrainingLog& log)
{
    char buf[128];
    for (std::size_t s = 0; s < 3; ++s) {
        const auto& l = log.stages[s];
        if (l.empty()) {
            std::snprintf(buf, sizeof buf, "stage %zu: skipped\n", s + 1);
        } else {
            std::snprintf(buf, sizeof buf, "stage %zu: %zu iterations, loss %.6f -> %.6f\n", s + 1, l.size(),
                          l.front().loss, l.back().loss);
        }
        out << buf;
    }
}

} // namespace

std::vector<Clip> training_clips(const RunConfig& cfg)
{
    std::vector<Clip> clips;
    if (cfg.data.source == DataSource::synth) {
        for (std::size_t i = 0; i < cfg.data.clips; ++i) clips.push_back(synth_clip(synth_spec(cfg, cfg.seed + i)));
        return clips;
    }
    for (const auto& [name, dir] : sequences(cfg.data.lr_dir)) {
        clips.push_back(load_png_sequence(dir, cfg.model.frames, paired_dir(cfg.data.lr_dir, cfg.data.hr_dir, dir)));
    }
    return clips;
}

std::vector<Clip> heldout_clips(const RunConfig& cfg)
{
    std::vector<Clip> clips;
    for (std::size_t i = 0; i < cfg.data.heldout; ++i) {
        clips.push_back(synth_clip(synth_spec(cfg, cfg.seed + 1000 + i)));
    }
    return clips;
}

TrainOutcome train_run(const RunConfig& cfg, std::ostream& out)
{
    const std::vector<Clip> data = training_clips(cfg);
    ManaModel<float> model = init_model<float>(cfg.model, cfg.seed);
    out << "training " << parameter_count(model) << " parameters on " << data.size() << " clip(s)\n";

    TrainOutcome result;
    result.log = run_three_stage(model, cfg.schedule, data, cfg.seed);
    report_stage(out, result.log);

    std::vector<MetricRow> rows;
    for (const Clip& clip : heldout_clips(cfg)) {
        const Tensor<float> pred = clamp_unit(mana_forward(model, clip.lr_frames).output);
        rows.push_back(score(clip.id, "mana", pred, *clip.hr_center));
        rows.push_back(score(clip.id, "bilinear", bilinear_upsample(clip.center_frame(), 4), *clip.hr_center));
    }
    result.heldout = with_means(rows);

    std::filesystem::create_directories(cfg.output_dir);
    result.checkpoint = cfg.output_dir / "model.ckpt";
    result.loss_log = cfg.output_dir / "loss.csv";
    result.metrics = cfg.output_dir / "metrics.csv";
    save_checkpoint(model, result.checkpoint);
    write_text_file(result.loss_log, loss_csv(result.log.all()));
    write_text_file(result.metrics, metrics_csv(result.heldout));
    for (const auto& r : result.heldout) {
        if (r.clip != "mean") continue;
        char buf[128];
        std::snprintf(buf, sizeof buf, "held-out %s: %.3f dB, ssim %.4f\n", r.method.c_str(), r.psnr_db, r.ssim);
        out << buf;
    }
    out << "wrote " << result.checkpoint.string() << "\n";
    return result;
}

std::optional<TrainOutcome> train_command(const std::filesystem::path& config_path, bool dry_run, std::ostream& out)
{
    RunConfig cfg = load_run_config(config_path);
    apply_environment(cfg);
    if (dry_run) {
        out << to_text(cfg);
        out << "# parameters = " << parameter_count(cfg.model) << "\n";
        return std::nullopt;
    }
    return train_run(cfg, out);
}

std::vector<std::size_t> inference_centers(std::size_t n, std::size_t frames, bool pad_ends)
{
    std::vector<std::size_t> out;
    if (pad_ends) {
        for (std::size_t i = 0; i < n; ++i) out.push_back(i);
        return out;
    }
    const std::size_t half = (frames - 1) / 2;
    for (std::size_t i = half; i + half < n; ++i) out.push_back(i);
    return out;
}

Tensor<float> center_window(const Tensor<float>& all, std::size_t center, std::size_t frames)
{
    const std::size_t n = all.dim(0), plane = all.numel() / n;
    const auto half = static_cast<std::ptrdiff_t>((frames - 1) / 2);
    std::vector<float> values;
    values.reserve(frames * plane);
    for (std::ptrdiff_t off = -half; off <= half; ++off) {
        const auto idx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(center) + off, 0,
                                                    static_cast<std::ptrdiff_t>(n) - 1);
        auto frame = all.data().subspan(static_cast<std::size_t>(idx) * plane, plane);
        values.insert(values.end(), frame.begin(), frame.end());
    }
    return Tensor<float>({frames, all.dim(1), all.dim(2), all.dim(3)}, std::move(values));
}

std::vector<std::filesystem::path> infer_command(const std::filesystem::path& checkpoint,
                                                 const std::filesystem::path& in_dir,
                                                 const std::filesystem::path& out_dir, bool pad_ends)
{
    const ManaModel<float> model = load_checkpoint(checkpoint);
    const std::size_t frames = model.config.frames;
    const auto files = list_png_files(in_dir);
    if (files.size() < frames) {
        throw DataError(DataError::Kind::insufficient_frames, "insufficient frames in " + in_dir.string() + ": need " +
                                                                  std::to_string(frames) + ", found " +
                                                                  std::to_string(files.size()));
    }
    const Tensor<float> all = load_png_frames(in_dir);
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (std::size_t c : inference_centers(files.size(), frames, pad_ends)) {
        const Tensor<float> hr = mana_forward(model, center_window(all, c, frames)).output;
        written.push_back(out_dir / files[c].filename());
        write_png(written.back(), clamp_unit(hr));
    }
    return written;
}

std::vector<MetricRow> eval_command(const EvalSource& source, const std::filesystem::path& lr_dir,
                                    const std::filesystem::path& hr_dir, const std::filesystem::path& out_csv)
{
    if (source.checkpoint.has_value() == source.predictions.has_value()) {
        throw ConfigError("eval needs exactly one of a checkpoint or a predictions directory");
    }
    using Kind = DataError::Kind;
    std::vector<MetricRow> rows;
    std::optional<ManaModel<float>> model;
    if (source.checkpoint) model = load_checkpoint(*source.checkpoint);

    for (const auto& [name, seq] : sequences(lr_dir)) {
        const auto lr_files = list_png_files(seq);
        const auto hr_seq = paired_dir(lr_dir, hr_dir, seq);
        const auto hr_files = list_png_files(hr_seq);
        auto hr_for = [&](const std::filesystem::path& lr_file) {
            const auto hr = hr_seq / lr_file.filename();
            if (!std::filesystem::exists(hr)) throw DataError(Kind::unpaired, "no ground truth " + hr.string());
            return read_png(hr);
        };
        if (model) {
            if (hr_files.size() != lr_files.size()) {
                throw DataError(Kind::unpaired, "sequence " + name + ": " + std::to_string(lr_files.size()) +
                                                    " LR frames but " + std::to_string(hr_files.size()) + " HR frames");
            }
            const std::size_t frames = model->config.frames;
            if (lr_files.size() < frames) {
                throw DataError(Kind::insufficient_frames, "sequence " + name + " has fewer than " +
                                                               std::to_string(frames) + " frames");
            }
            const Tensor<float> all = load_png_frames(seq);
            for (std::size_t c : inference_centers(lr_files.size(), frames, false)) {
                const std::string id = name + "/" + lr_files[c].stem().string();
                const Tensor<float> truth = hr_for(lr_files[c]);
                const Tensor<float> window = center_window(all, c, frames);
                rows.push_back(score(id, "mana", clamp_unit(mana_forward(*model, window).output), truth));
                rows.push_back(score(id, "bilinear", bilinear_upsample(select(window, (frames - 1) / 2), 4), truth));
            }
        } else {
            const auto pred_seq = paired_dir(lr_dir, *source.predictions, seq);
            for (const auto& pred_file : list_png_files(pred_seq)) {
                const std::string id = name + "/" + pred_file.stem().string();
                const auto lr_file = seq / pred_file.filename();
                if (!std::filesystem::exists(lr_file)) throw DataError(Kind::unpaired, "no LR frame " + lr_file.string());
                const Tensor<float> truth = hr_for(lr_file);
                rows.push_back(score(id, "prediction", read_png(pred_file), truth));
                rows.push_back(score(id, "bilinear", bilinear_upsample(read_png(lr_file), 4), truth));
            }
        }
    }
    if (rows.empty()) throw DataError(Kind::unpaired, "nothing to evaluate under " + lr_dir.string());
    rows = with_means(rows);
    if (!out_csv.empty()) write_text_file(out_csv, metrics_csv(rows));
    return rows;
}

std::vector<BenchRow> bench_command(const std::vector<std::size_t>& sizes, std::size_t frames, std::size_t full_limit,
                                    std::uint64_t seed)
{
    constexpr std::size_t kChannels = 8;
    constexpr std::size_t kWindow = 9;
    if (frames == 0) throw ConfigError("bench: frames must be positive");
    std::vector<BenchRow> rows;
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    using clock = std::chrono::steady_clock;
    for (std::size_t s : sizes) {
        if (s == 0) throw ConfigError("bench: sizes must be positive");
        const std::size_t hw = s * s;
        auto random = [&](Shape shape) {
            Tensor<float> t(std::move(shape));
            for (float& v : t.mutable_data()) v = normal(rng);
            return t;
        };
        const Tensor<float> q = random({kChannels, s, s});
        const Tensor<float> k = random({kChannels, frames, s, s});
        const Tensor<float> v = random({kChannels, frames, s, s});

        BenchRow row;
        row.size = s;
        row.frames = frames;
        CorrelationMeter::reset();
        auto t0 = clock::now();
        (void)cross_frame_one_hot_attention(q, k, v, kWindow);
        row.windowed_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        row.windowed_elements = CorrelationMeter::peak();
        const std::size_t windowed_expected = hw * kWindow * kWindow * frames;
        if (row.windowed_elements != windowed_expected) {
            throw Error("bench: windowed attention held " + std::to_string(row.windowed_elements) +
                        " correlation elements at " + std::to_string(s) + "x" + std::to_string(s) + ", expected " +
                        std::to_string(windowed_expected));
        }

        const std::size_t full_expected = hw * hw * frames;
        if (full_expected <= full_limit) {
            CorrelationMeter::reset();
            t0 = clock::now();
            (void)full_non_local_attention(q, k, v);
            row.full_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            row.full_elements = CorrelationMeter::peak();
            row.full_measured = true;
            if (row.full_elements != full_expected) {
                throw Error("bench: full attention held " + std::to_string(row.full_elements) + " elements, expected " +
                            std::to_string(full_expected));
            }
        } else {
            row.full_elements = full_expected;
        }
        row.ratio = static_cast<double>(row.full_elements) / static_cast<double>(row.windowed_elements);
        rows.push_back(row);
    }
    return rows;
}

namespace {

std::string full_ms(const BenchRow& r)
{
    if (!r.full_measured) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.full_ms);
    return buf;
}

} // namespace

std::string bench_csv(const std::vector<BenchRow>& rows)
{
    std::string out = "size,frames,windowed_elements,windowed_ms,full_status,full_elements,full_ms,ratio\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.3f,%s,%zu,%s,%.6f\n", r.size, r.frames, r.windowed_elements,
                      r.windowed_ms, r.full_measured ? "measured" : "skipped (projected)", r.full_elements,
                      full_ms(r).c_str(), r.ratio);
        out += buf;
    }
    return out;
}

std::string bench_markdown(const std::vector<BenchRow>& rows)
{
    std::string out = "| H=W | T | windowed elements | windowed ms | full elements | full ms | full / windowed |\n"
                      "|---:|---:|---:|---:|---:|---:|---:|\n";
    char buf[256];
    for (const auto& r : rows) {
        const std::string ms = r.full_measured ? full_ms(r) : "skipped (projected)";
        std::snprintf(buf, sizeof buf, "| %zu | %zu | %zu | %.3f | %zu | %s | %.4f |\n", r.size, r.frames,
                      r.windowed_elements, r.windowed_ms, r.full_elements, ms.c_str(), r.ratio);
        out += buf;
    }
    return out;
}

} // namespace mana
