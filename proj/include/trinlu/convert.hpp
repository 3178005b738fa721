#pragma once

// Converters from the raw multi-turn dialogue corpora to canonical
// Utterance records.
//
// M2M (simulated-dialogue sim-M / sim-R): each file is a JSON array of
// dialogues; each turn carries optional system_utterance / user_utterance
// objects ({tokens, text, slots: [{slot, start, exclusive_end}]}) and the
// matching system_acts / user_acts lists ({type, slot?, value?}). The act
// types of an utterance, lowercased and combined, become its intent.
//
// MultiWOZ 2.2: dialogue files (JSON arrays) under split directories plus
// dialog_acts.json mapping dialogue id -> turn id -> {dialog_act, span_info}.
// Act names "Domain-Intent" give the combined intent and domain labels; the
// frames' non-categorical slot spans (character offsets) give BOI tags.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trinlu/corpus.hpp"

namespace trinlu {

struct ConvertOptions {
  bool user_turns = true;
  bool system_turns = true;
  /// Keep only files whose stem or a parent directory equals this name.
  std::optional<std::string> split;
  /// M2M only: overrides the domain inferred from the file location.
  std::optional<std::string> domain;
};

struct ConversionReport {
  std::string format;
  std::vector<std::string> files;
  std::size_t dialogues = 0;
  std::size_t records = 0;
  std::size_t skipped_empty = 0;
  std::size_t skipped_no_act = 0;
  std::size_t skipped_misaligned = 0;
  std::vector<std::string> misaligned_examples;  // "dialogue/turn" ids, first few
  std::map<std::string, std::size_t> intents;
  std::map<std::string, std::size_t> domains;
  std::map<std::string, std::size_t> slots;

  std::size_t candidates() const {
    return records + skipped_empty + skipped_no_act + skipped_misaligned;
  }
  double skip_rate() const;
  std::string text() const;
};

struct ConversionResult {
  std::vector<Utterance> utterances;  // canonical order
  ConversionReport report;
};

/// Infers restaurant/movie from a path containing sim-R/sim-M (or the words
/// restaurant/movie).
std::optional<std::string> m2m_domain_from_path(const std::filesystem::path& path);

/// One M2M file's content (a JSON array of dialogues).
ConversionResult convert_m2m_json(std::string_view json_text, std::string_view domain,
                                  const ConvertOptions& options = {});
/// A file or a directory searched recursively for *.json files.
ConversionResult convert_m2m(const std::filesystem::path& input, const ConvertOptions& options = {});

/// One MultiWOZ 2.2 dialogue file plus the dialog_acts.json content.
ConversionResult convert_multiwoz_json(std::string_view dialogues_json,
                                       std::string_view dialog_acts_json,
                                       const ConvertOptions& options = {});
/// A directory holding dialog_acts.json (here or in a parent) and dialogue
/// files, or a single dialogue file.
ConversionResult convert_multiwoz(const std::filesystem::path& input,
                                  const ConvertOptions& options = {});

/// Maps character-offset spans onto whitespace tokens of text. Returns
/// nullopt when a span boundary falls inside a token (trailing or leading
/// punctuation of the token excepted).
std::optional<std::vector<SlotSpan>> align_char_spans(std::string_view text,
                                                      const std::vector<SlotSpan>& char_spans);

}  // namespace trinlu
