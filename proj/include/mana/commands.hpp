#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mana/data.hpp"
#include "mana/metrics.hpp"
#include "mana/model.hpp"
#include "mana/run_config.hpp"
#include "mana/train.hpp"

namespace mana {

/// Training clips described by the data section of a run configuration.
std::vector<Clip> training_clips(const RunConfig& cfg);

/// Synthetic clips never used for training, for the closing metrics row.
std::vector<Clip> heldout_clips(const RunConfig& cfg);

struct TrainOutcome {
    std::filesystem::path checkpoint;
    std::filesystem::path loss_log;
    std::filesystem::path metrics;
    TrainingLog log;
    std::vector<MetricRow> heldout;
};

/// Resolves the config (MANA_SEED wins over the file), trains all three
/// stages and writes model.ckpt, loss.csv and metrics.csv to the output
/// directory. With dry_run the resolved config and parameter count go to
/// `out` and nothing is written.
std::optional<TrainOutcome> train_command(const std::filesystem::path& config_path, bool dry_run, std::ostream& out);

/// Same as train_command for an already resolved configuration.
TrainOutcome train_run(const RunConfig& cfg, std::ostream& out);

/// Center indices that get an output frame for a sequence of n frames:
/// every frame with a full window, or every frame when the ends are padded
/// by replication.
std::vector<std::size_t> inference_centers(std::size_t n, std::size_t frames, bool pad_ends);

/// T frames centered on `center` out of all frames (N x 3 x H x W), with
/// indices clamped to the sequence.
Tensor<float> center_window(const Tensor<float>& all, std::size_t center, std::size_t frames);

/// Writes one 4x PNG per center, named after the input frame it restores.
std::vector<std::filesystem::path> infer_command(const std::filesystem::path& checkpoint,
                                                 const std::filesystem::path& in_dir,
                                                 const std::filesystem::path& out_dir, bool pad_ends = false);

struct EvalSource {
    std::optional<std::filesystem::path> checkpoint;  // run the model ...
    std::optional<std::filesystem::path> predictions;  // ... or score existing PNGs
};

/// Per-frame rows for the model (or predictions) and the bilinear baseline,
/// followed by one mean row per method. The CSV is written when out_csv is
/// not empty.
std::vector<MetricRow> eval_command(const EvalSource& source, const std::filesystem::path& lr_dir,
                                    const std::filesystem::path& hr_dir, const std::filesystem::path& out_csv);

struct BenchRow {
    std::size_t size = 0;  // H = W
    std::size_t frames = 0;
    std::size_t windowed_elements = 0;  // measured
    double windowed_ms = 0;
    bool full_measured = false;
    std::size_t full_elements = 0;      // measured, or closed form when skipped
    double full_ms = 0;
    double ratio = 0;                   // full / windowed
};

/// Peak correlation-buffer sizes of windowed one-hot and full non-local
/// attention. Sizes whose full buffer would exceed full_limit elements are
/// projected instead of run. Throws when a measurement disagrees with its
/// closed form.
std::vector<BenchRow> bench_command(const std::vector<std::size_t>& sizes, std::size_t frames,
                                    std::size_t full_limit = 2'000'000, std::uint64_t seed = 1);

std::string bench_csv(const std::vector<BenchRow>& rows);
std::string bench_markdown(const std::vector<BenchRow>& rows);

} // namespace mana
