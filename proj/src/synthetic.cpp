#include "trinlu/synthetic.hpp"

#include <algorithm>
#include <random>

#include "trinlu/error.hpp"

namespace trinlu {

namespace {

std::string slot_name(std::size_t t) { return std::string(1, static_cast<char>('a' + t)); }

}  // namespace

std::vector<Utterance> make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.intents == 0 || spec.domains == 0 || spec.slot_types == 0 || spec.slot_types > 26 ||
      spec.begin_words == 0 || spec.inside_words == 0 || spec.fillers == 0 ||
      spec.turns_per_dialogue == 0)
    throw ConfigError("synthetic corpus sizes must be positive (at most 26 slot types)");
  std::mt19937_64 rng(spec.seed);
  auto pick = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  std::vector<Utterance> out;
  for (std::size_t i = 0; i < spec.utterances; ++i) {
    using Segment = std::vector<std::pair<std::string, std::string>>;  // (token, slot label)
    std::vector<Segment> segments;
    const std::size_t intent = i % spec.intents;
    const std::size_t domain = i % spec.domains;
    segments.push_back({{"i" + std::to_string(intent), std::string(kOutside)}});
    segments.push_back({{"d" + std::to_string(domain), std::string(kOutside)}});
    if (i % 4 != 3) {
      const std::size_t type = (i / 4) % spec.slot_types;
      const std::string name = slot_name(type);
      const std::size_t cycle = i / (4 * spec.slot_types);
      Segment span{{name + "b" + std::to_string(cycle % spec.begin_words), "B-" + name}};
      if (i % 4 == 2)
        span.push_back({name + "i" + std::to_string(cycle % spec.inside_words), "I-" + name});
      segments.push_back(std::move(span));
    } else {
      segments.push_back({{"f" + std::to_string((i / 4) % spec.fillers), std::string(kOutside)}});
    }
    const std::size_t extra = spec.extra_fillers ? pick(spec.extra_fillers + 1) : 0;
    for (std::size_t k = 0; k < extra; ++k)
      segments.push_back({{"f" + std::to_string(pick(spec.fillers)), std::string(kOutside)}});
    for (std::size_t k = segments.size() - 1; k > 0; --k) std::swap(segments[k], segments[pick(k + 1)]);

    Utterance u;
    for (const Segment& s : segments)
      for (const auto& [token, label] : s) {
        u.tokens.push_back(token);
        u.slots.push_back(label);
      }
    u.intent = "intent" + std::to_string(intent);
    u.domain = "domain" + std::to_string(domain);
    u.dialogue_id = "syn-" + std::to_string(i / spec.turns_per_dialogue);
    u.turn = static_cast<int>(i % spec.turns_per_dialogue);
    out.push_back(std::move(u));
  }
  sort_canonical(out);
  return out;
}

}  // namespace trinlu
