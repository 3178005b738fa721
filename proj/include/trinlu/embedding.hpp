#pragma once

// Input embedding layer: three independent token + position tables, one per
// task stream, over a shared token vocabulary. Output is [B, n, d].
//
// ExternalEmbeddingFile (little-endian):
//   "TRINLU-EMB\0"  11 bytes
//   version         u8 (= 1)
//   rows            u32   one row per (utterance, position), utterance-major
//   d               u32
//   body            rows * d f32, row-major

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "trinlu/autodiff.hpp"

namespace trinlu {

enum class Stream { intent = 0, slot = 1, domain = 2 };

struct EmbeddingTable {
  Parameter* tokens = nullptr;     // V x d
  Parameter* positions = nullptr;  // n_max x d
};

struct EmbeddingParams {
  std::array<EmbeddingTable, 3> tables;
  std::size_t vocab = 0;
  std::size_t length = 0;
  std::size_t d = 0;

  static EmbeddingParams create(ParameterStore& store, std::size_t vocab, std::size_t length,
                                std::size_t d);
  const EmbeddingTable& operator[](Stream s) const { return tables[static_cast<std::size_t>(s)]; }
};

/// token_ids holds batch * length ids, row-major.
Var embed(Graph& g, std::span<const std::size_t> token_ids, std::size_t batch, Stream stream,
          const EmbeddingParams& params);

struct ExternalEmbeddings {
  std::size_t rows = 0;
  std::size_t d = 0;
  std::vector<float> values;

  std::size_t utterances(std::size_t length) const { return rows / length; }
  /// Rows of one utterance as a [length, d] tensor.
  Tensor utterance(std::size_t index, std::size_t length) const;
};

inline constexpr std::array<char, 11> kEmbeddingMagic{'T', 'R', 'I', 'N', 'L', 'U',
                                                      '-', 'E', 'M', 'B', '\0'};
inline constexpr std::uint8_t kEmbeddingVersion = 1;

void write_external_embeddings(std::ostream& out, const ExternalEmbeddings& embeddings);
void write_external_embeddings(const std::filesystem::path& path,
                               const ExternalEmbeddings& embeddings);
/// Rejects bad magic/version, truncated bodies, and a width other than
/// expected_d when given.
ExternalEmbeddings read_external_embeddings(std::istream& in,
                                            std::optional<std::size_t> expected_d = std::nullopt);
ExternalEmbeddings read_external_embeddings(const std::filesystem::path& path,
                                            std::optional<std::size_t> expected_d = std::nullopt);

}  // namespace trinlu
