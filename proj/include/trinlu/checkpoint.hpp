#pragma once

// Checkpoint file (little-endian):
//   "TRINLU-CKPT\0"   12 bytes
//   version           u32 (= 1)
//   header length     u64
//   header            UTF-8 JSON: {"version", "config", "vocabs", "parameters": [{name, shape}]}
//   body              every parameter in declaration order as f32

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "trinlu/config.hpp"
#include "trinlu/corpus.hpp"
#include "trinlu/model.hpp"

namespace trinlu {

inline constexpr std::array<char, 12> kCheckpointMagic{'T', 'R', 'I', 'N', 'L', 'U',
                                                       '-', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  LabelVocabs vocabs;
  TriNluModel model;
};

void save_checkpoint(std::ostream& out, const TrainConfig& config, const LabelVocabs& vocabs,
                     const TriNluModel& model);
void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config,
                     const LabelVocabs& vocabs, const TriNluModel& model);

/// Throws DataError on a damaged file and ConfigError when the stored
/// parameters do not match the architecture the stored config describes.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError naming every architecture field on which the two
/// configs disagree.
void require_same_architecture(const TrainConfig& stored, const TrainConfig& requested);

}  // namespace trinlu
