#pragma once

// Canonical per-utterance records, BOI slot tags, label vocabularies,
// fixed-length encoding, and dialogue-level k-fold splitting.
//
// Canonical corpus file: UTF-8 JSON lines, one utterance per line, fields in
// the order tokens, slots, intent, domain, dialogue_id, turn; records sorted
// by (dialogue_id, turn).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace trinlu {

struct Utterance {
  std::vector<std::string> tokens;
  std::vector<std::string> slots;
  std::string intent;
  std::string domain;
  std::string dialogue_id;
  int turn = 0;

  bool operator==(const Utterance&) const = default;
};

struct SlotSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string name;
};

inline constexpr std::string_view kOutside = "O";

/// First token of each span gets B-name, the rest I-name, everything else O.
std::vector<std::string> to_boi(std::size_t token_count, std::span<const SlotSpan> spans);

/// Every I-x must follow B-x or I-x.
bool is_valid_boi(std::span<const std::string> labels);

/// Throws DataError naming the record when an Utterance invariant fails.
void validate(const Utterance& u);

/// Sorted, de-duplicated labels joined with "+".
std::string combine_labels(std::vector<std::string> labels);

/// Whitespace split plus lowercasing.
std::vector<std::string> tokenize(std::string_view text);
std::string to_lower(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> labels);

  std::optional<int> find(std::string_view label) const;
  int id(std::string_view label) const;  // throws DataError when absent
  const std::string& label(int id) const;
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  bool operator==(const Vocabulary& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnknownToken = "<unk>";
inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnknownId = 1;
/// Gold label id for an evaluation label never seen in training. No
/// prediction can match it.
inline constexpr int kUnknownLabel = -2;

struct LabelVocabs {
  Vocabulary tokens;   // <pad>, <unk>, then sorted training tokens
  Vocabulary slots;    // O, then sorted
  Vocabulary intents;  // sorted
  Vocabulary domains;  // sorted

  /// Built from the training split only.
  static LabelVocabs build(std::span<const Utterance> training);
  int outside_id() const { return slots.id(kOutside); }
  bool operator==(const LabelVocabs&) const = default;
};

struct EncodedUtterance {
  std::vector<std::size_t> tokens;  // length n
  std::vector<int> slots;           // length n, 0 (O) at PAD
  std::vector<std::uint8_t> pad;    // length n
  int intent = 0;
  int domain = 0;
  std::size_t unseen_labels = 0;    // labels mapped to kUnknownLabel
};

/// Right-truncates to n and pads with PAD; unknown tokens map to <unk>.
EncodedUtterance pad_truncate(const Utterance& u, std::size_t n, const LabelVocabs& vocabs);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle of dialogue ids dealt round-robin into k folds; turns of
/// one dialogue always share a fold.
std::vector<Fold> kfold_split(std::span<const Utterance> utterances, std::size_t k,
                              std::uint64_t seed);

void sort_canonical(std::vector<Utterance>& utterances);
std::string to_json_line(const Utterance& u);
Utterance from_json_line(std::string_view line);
void write_corpus(std::ostream& out, std::span<const Utterance> utterances);
void write_corpus(const std::filesystem::path& path, std::span<const Utterance> utterances);
std::vector<Utterance> read_corpus(std::istream& in);
std::vector<Utterance> read_corpus(const std::filesystem::path& path);

struct CorpusStats {
  std::size_t utterances = 0;
  std::size_t dialogues = 0;
  std::map<std::string, std::size_t> intents;
  std::map<std::string, std::size_t> domains;
  std::map<std::string, std::size_t> slot_names;  // B-/I- prefix removed
  std::map<std::size_t, std::size_t> lengths;     // tokens -> count
};

CorpusStats compute_stats(std::span<const Utterance> utterances);
std::string format_stats(const CorpusStats& stats);

}  // namespace trinlu
