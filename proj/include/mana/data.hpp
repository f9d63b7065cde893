#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mana/error.hpp"
#include "mana/tensor.hpp"

namespace mana {

class DataError : public Error {
public:
    enum class Kind { unreadable, not_rgb, inconsistent_dims, insufficient_frames, invalid_spec, unpaired };

    DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// One sample: T low-resolution frames and, when known, the 4x ground truth
/// of the center frame.
struct Clip {
    std::string id;
    Tensor<float> lr_frames;                 // T x 3 x H x W in [0, 1]
    std::optional<Tensor<float>> hr_center;  // 3 x 4H x 4W in [0, 1]

    std::size_t frames() const { return lr_frames.dim(0); }
    Tensor<float> center_frame() const;
};

/// Throws DataError unless the clip holds exactly `frames` RGB frames in
/// [0, 1] and any ground truth is exactly 4x the frame size.
void validate_clip(const Clip& clip, std::size_t frames);

enum class Pattern { checker, stripes, text_noise, gradient_dots };

std::string to_string(Pattern p);
Pattern parse_pattern(const std::string& s);

struct SynthSpec {
    Pattern pattern = Pattern::stripes;
    std::size_t frames = 7;
    std::size_t hr_height = 64;
    std::size_t hr_width = 64;
    double motion_x = 4.0;  // HR pixels per frame
    double motion_y = 0.0;
    std::uint64_t seed = 1;
};

/// Renders a periodic pattern translated by motion * (i - center) for every
/// frame i, keeps the center HR frame as ground truth and degrades all frames
/// by bicubic 4x decimation.
Clip synth_clip(const SynthSpec& spec);

/// Full-resolution frames behind synth_clip: T x 3 x H x W.
Tensor<float> synth_hr_frames(const SynthSpec& spec);

/// Per-frame bicubic 4x decimation clamped to [0, 1]; T x 3 x 4H x 4W -> T x 3 x H x W.
Tensor<float> degrade(const Tensor<float>& hr_frames);

/// 8-bit RGB PNG I/O. Images are 3 x H x W in [0, 1]; writing clamps and
/// rounds to the nearest 8-bit level.
Tensor<float> read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor<float>& image);

/// PNG files of a directory in lexicographic order.
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

/// All frames of a directory, stacked N x 3 x H x W.
Tensor<float> load_png_frames(const std::filesystem::path& dir);

/// The centered window of T frames from lr_dir; the ground truth comes from
/// the matching center file of hr_dir when one is given.
Clip load_png_sequence(const std::filesystem::path& lr_dir, std::size_t frames,
                       const std::optional<std::filesystem::path>& hr_dir = std::nullopt);

} // namespace mana
