#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trinlu/corpus.hpp"

namespace trinlu {

// Learnable toy corpus. Every utterance carries one intent cue word and one
// domain cue word; most also carry a slot span (1-2 tokens) whose words are
// drawn from per-type begin/inside pools, the rest a filler word. Segment
// order is shuffled, so positions vary. Word choice cycles so the default
// SyntheticSpec uses every word at least once. Intents and domains cycle, giving a
// balanced label distribution.
struct SyntheticSpec {
  std::size_t utterances = 64;
  std::size_t intents = 5;
  std::size_t domains = 3;
  std::size_t slot_types = 3;
  std::size_t begin_words = 3;   // per slot type
  std::size_t inside_words = 2;  // per slot type
  std::size_t fillers = 15;
  std::size_t extra_fillers = 0;  // up to this many additional filler tokens per utterance
  std::size_t turns_per_dialogue = 4;
  std::uint64_t seed = 7;
};

/// With the defaults: 64 utterances, 5 intents, 3 domains, 7 slot labels and
/// 38 word types (40 vocabulary entries with <pad> and <unk>).
std::vector<Utterance> make_synthetic_corpus(const SyntheticSpec& spec = {});

}  // namespace trinlu
