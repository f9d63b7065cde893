#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "mana/data.hpp"
#include "mana/model.hpp"
#include "mana/train.hpp"

namespace mana {

enum class DataSource { synth, directory };

struct DataConfig {
    DataSource source = DataSource::synth;
    // synth
    Pattern pattern = Pattern::stripes;
    std::size_t hr_size = 64;  // square HR frames
    double motion_x = 4.0;
    double motion_y = 0.0;
    std::size_t clips = 1;     // training clips, seeds seed, seed+1, ...
    std::size_t heldout = 2;   // evaluation clips after training
    // directory
    std::filesystem::path lr_dir;
    std::filesystem::path hr_dir;

    bool operator==(const DataConfig&) const = default;
};

/// Everything `mana train` needs, read from a flat key = value file:
///
///   # comment
///   seed = 1
///   output.dir = runs/desk
///   model.C = 16          model.T, model.N, model.enc_blocks, model.dec_blocks,
///                         model.scale, model.window, model.temporal_reduce,
///                         model.memory_enabled, model.memory_query
///   train.preset = desk   (or paper) applied before any train.stageK.* key
///   train.stage1.iterations = 500, train.stage1.lr = 1e-4, ... stage3
///   train.stage1_freeze_fy = true
///   data.source = synth   (or dir) data.pattern, data.hr_size, data.motion_x,
///                         data.motion_y, data.clips, data.heldout,
///                         data.lr_dir, data.hr_dir
///
/// Unknown or repeated keys are errors that name the key and its line.
struct RunConfig {
    ModelConfig model = ModelConfig::desk();
    TrainingSchedule schedule = TrainingSchedule::desk();
    DataConfig data;
    std::filesystem::path output_dir = "run";
    std::uint64_t seed = 1;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// The resolved configuration in the same key = value syntax.
std::string to_text(const RunConfig& cfg);

/// Applies MANA_SEED from the environment when it is set.
void apply_environment(RunConfig& cfg);

} // namespace mana
