#include "trinlu/embedding.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

#include "trinlu/error.hpp"

namespace trinlu {

EmbeddingParams EmbeddingParams::create(ParameterStore& store, std::size_t vocab,
                                        std::size_t length, std::size_t d) {
  EmbeddingParams p;
  p.vocab = vocab;
  p.length = length;
  p.d = d;
  const std::array<const char*, 3> names{"intent", "slot", "domain"};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string prefix = std::string("embedding.") + names[i];
    p.tables[i].tokens = &store.add(prefix + ".tokens", {vocab, d});
    p.tables[i].positions = &store.add(prefix + ".positions", {length, d});
  }
  return p;
}

Var embed(Graph& g, std::span<const std::size_t> token_ids, std::size_t batch, Stream stream,
          const EmbeddingParams& params) {
  const std::size_t n = params.length;
  if (batch == 0 || token_ids.size() != batch * n)
    throw ShapeError("expected " + std::to_string(batch) + "x" + std::to_string(n) +
                     " token ids, got " + std::to_string(token_ids.size()));
  const EmbeddingTable& table = params[stream];
  std::vector<std::size_t> positions(batch * n);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i % n;
  Var tokens = gather_rows(g.param(*table.tokens), token_ids);
  Var pos = gather_rows(g.param(*table.positions), positions);
  return reshape(add(tokens, pos), {batch, n, params.d});
}

Tensor ExternalEmbeddings::utterance(std::size_t index, std::size_t length) const {
  if ((index + 1) * length > rows)
    throw DataError("external embeddings hold " + std::to_string(rows) +
                    " rows, utterance " + std::to_string(index) + " needs rows up to " +
                    std::to_string((index + 1) * length));
  Tensor out({length, d});
  const std::size_t offset = index * length * d;
  for (std::size_t i = 0; i < length * d; ++i) out[i] = values[offset + i];
  return out;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.put(static_cast<char>((v >> shift) & 0xFF));
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4))
    throw DataError(std::string("embedding file truncated in header field ") + what);
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

void write_external_embeddings(std::ostream& out, const ExternalEmbeddings& e) {
  if (e.values.size() != e.rows * e.d)
    throw DataError("embedding body has " + std::to_string(e.values.size()) + " values for " +
                    std::to_string(e.rows) + "x" + std::to_string(e.d));
  out.write(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  out.put(static_cast<char>(kEmbeddingVersion));
  put_u32(out, static_cast<std::uint32_t>(e.rows));
  put_u32(out, static_cast<std::uint32_t>(e.d));
  for (float v : e.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw DataError("failed writing embedding file");
}

void write_external_embeddings(const std::filesystem::path& path, const ExternalEmbeddings& e) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_external_embeddings(out, e);
}

ExternalEmbeddings read_external_embeddings(std::istream& in, std::optional<std::size_t> expected_d) {
  std::array<char, kEmbeddingMagic.size()> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kEmbeddingMagic)
    throw DataError("not an external embedding file (bad magic)");
  const int version = in.get();
  if (version != kEmbeddingVersion)
    throw DataError("unsupported embedding file version " + std::to_string(version));
  ExternalEmbeddings e;
  e.rows = get_u32(in, "rows");
  e.d = get_u32(in, "d");
  if (expected_d && e.d != *expected_d)
    throw DataError("embedding width mismatch: file has d=" + std::to_string(e.d) +
                    ", model expects d=" + std::to_string(*expected_d));
  e.values.resize(e.rows * e.d);
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4))
      throw DataError("embedding body truncated: expected " + std::to_string(e.rows * e.d) +
                      " floats, got " + std::to_string(i));
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
    e.values[i] = std::bit_cast<float>(bits);
  }
  return e;
}

ExternalEmbeddings read_external_embeddings(const std::filesystem::path& path,
                                            std::optional<std::size_t> expected_d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  return read_external_embeddings(in, expected_d);
}

}  // namespace trinlu
