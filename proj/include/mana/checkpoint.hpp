#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mana/error.hpp"
#include "mana/model.hpp"

namespace mana {

/// Checkpoint layout, all integers little-endian:
///
///   "MANA" | u32 version (1) | u32 tensor count
///   per tensor: u16 name length | name (UTF-8) | u8 dtype (0 = f32) | u8 rank
///               | rank x u64 dims | raw f32 values
///   u32 config length | config JSON (UTF-8)
class CheckpointError : public Error {
public:
    enum class Kind { io, bad_magic, bad_version, corrupt, mismatch };

    CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ManaModel<float>& model);
ManaModel<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ManaModel<float>& model, const std::filesystem::path& path);
ManaModel<float> load_checkpoint(const std::filesystem::path& path);

} // namespace mana
