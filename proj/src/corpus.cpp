#include "trinlu/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "trinlu/error.hpp"

namespace trinlu {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> to_boi(std::size_t token_count, std::span<const SlotSpan> spans) {
  std::vector<std::string> labels(token_count, std::string(kOutside));
  std::vector<bool> covered(token_count, false);
  for (const SlotSpan& span : spans) {
    if (span.start >= span.end || span.end > token_count)
      throw DataError("slot span [" + std::to_string(span.start) + ", " +
                      std::to_string(span.end) + ") '" + span.name + "' outside " +
                      std::to_string(token_count) + " tokens");
    for (std::size_t i = span.start; i < span.end; ++i) {
      if (covered[i])
        throw DataError("slot span '" + span.name + "' overlaps another span at token " +
                        std::to_string(i));
      covered[i] = true;
      labels[i] = (i == span.start ? "B-" : "I-") + span.name;
    }
  }
  return labels;
}

bool is_valid_boi(std::span<const std::string> labels) {
  std::string_view previous = kOutside;
  for (const std::string& label : labels) {
    if (label.rfind("I-", 0) == 0) {
      const std::string_view name = std::string_view(label).substr(2);
      if (previous.size() < 2 || previous.substr(2) != name ||
          (previous.substr(0, 2) != "B-" && previous.substr(0, 2) != "I-"))
        return false;
    } else if (label != kOutside && label.rfind("B-", 0) != 0) {
      return false;
    }
    previous = label;
  }
  return true;
}

void validate(const Utterance& u) {
  const std::string where = "dialogue " + u.dialogue_id + " turn " + std::to_string(u.turn);
  if (u.tokens.empty()) throw DataError(where + ": empty utterance");
  if (u.tokens.size() != u.slots.size())
    throw DataError(where + ": " + std::to_string(u.tokens.size()) + " tokens but " +
                    std::to_string(u.slots.size()) + " slot labels");
  if (!is_valid_boi(u.slots)) throw DataError(where + ": slot labels violate BOI grammar");
  if (u.intent.empty() || u.domain.empty()) throw DataError(where + ": missing intent or domain");
}

std::string combine_labels(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::string out;
  for (const std::string& l : labels) {
    if (l.empty()) continue;
    if (!out.empty()) out += "+";
    out += l;
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  for (std::string word; in >> word;) tokens.push_back(to_lower(word));
  return tokens;
}

// --- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (!index_.emplace(labels_[i], static_cast<int>(i)).second)
      throw DataError("duplicate vocabulary entry '" + labels_[i] + "'");
}

std::optional<int> Vocabulary::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view label) const {
  if (auto id = find(label)) return *id;
  throw DataError("label '" + std::string(label) + "' not in vocabulary");
}

const std::string& Vocabulary::label(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= labels_.size())
    throw DataError("label id " + std::to_string(id) + " out of range");
  return labels_[id];
}

LabelVocabs LabelVocabs::build(std::span<const Utterance> training) {
  if (training.empty()) throw DataError("cannot build vocabularies from an empty corpus");
  std::set<std::string> tokens, slots, intents, domains;
  for (const Utterance& u : training) {
    tokens.insert(u.tokens.begin(), u.tokens.end());
    slots.insert(u.slots.begin(), u.slots.end());
    intents.insert(u.intent);
    domains.insert(u.domain);
  }
  tokens.erase(std::string(kPadToken));
  tokens.erase(std::string(kUnknownToken));
  slots.erase(std::string(kOutside));

  std::vector<std::string> token_list{std::string(kPadToken), std::string(kUnknownToken)};
  token_list.insert(token_list.end(), tokens.begin(), tokens.end());
  std::vector<std::string> slot_list{std::string(kOutside)};
  slot_list.insert(slot_list.end(), slots.begin(), slots.end());

  LabelVocabs v;
  v.tokens = Vocabulary(std::move(token_list));
  v.slots = Vocabulary(std::move(slot_list));
  v.intents = Vocabulary({intents.begin(), intents.end()});
  v.domains = Vocabulary({domains.begin(), domains.end()});
  return v;
}

EncodedUtterance pad_truncate(const Utterance& u, std::size_t n, const LabelVocabs& vocabs) {
  EncodedUtterance e;
  e.tokens.assign(n, kPadId);
  e.slots.assign(n, vocabs.outside_id());
  e.pad.assign(n, 1);
  const std::size_t kept = std::min(n, u.tokens.size());
  for (std::size_t i = 0; i < kept; ++i) {
    e.tokens[i] = static_cast<std::size_t>(vocabs.tokens.find(u.tokens[i]).value_or(kUnknownId));
    if (auto id = vocabs.slots.find(u.slots.at(i))) {
      e.slots[i] = *id;
    } else {
      e.slots[i] = kUnknownLabel;
      ++e.unseen_labels;
    }
    e.pad[i] = 0;
  }
  auto label_id = [&e](const Vocabulary& vocab, const std::string& label) {
    if (auto id = vocab.find(label)) return *id;
    ++e.unseen_labels;
    return kUnknownLabel;
  };
  e.intent = label_id(vocabs.intents, u.intent);
  e.domain = label_id(vocabs.domains, u.domain);
  return e;
}

// --- Folds -----------------------------------------------------------------

std::vector<Fold> kfold_split(std::span<const Utterance> utterances, std::size_t k,
                              std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  std::vector<std::string> dialogues;
  for (const Utterance& u : utterances) dialogues.push_back(u.dialogue_id);
  std::sort(dialogues.begin(), dialogues.end());
  dialogues.erase(std::unique(dialogues.begin(), dialogues.end()), dialogues.end());
  if (dialogues.size() < k)
    throw DataError("cannot split " + std::to_string(dialogues.size()) + " dialogues into " +
                    std::to_string(k) + " folds");

  std::mt19937_64 rng(seed);
  for (std::size_t i = dialogues.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(dialogues[i], dialogues[pick(rng)]);
  }
  std::unordered_map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < dialogues.size(); ++i) fold_of[dialogues[i]] = i % k;

  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const std::size_t f = fold_of.at(utterances[i].dialogue_id);
    for (std::size_t j = 0; j < k; ++j) (j == f ? folds[j].validation : folds[j].train).push_back(i);
  }
  return folds;
}

// --- JSON lines ------------------------------------------------------------

void sort_canonical(std::vector<Utterance>& utterances) {
  std::stable_sort(utterances.begin(), utterances.end(), [](const Utterance& a, const Utterance& b) {
    return std::tie(a.dialogue_id, a.turn) < std::tie(b.dialogue_id, b.turn);
  });
}

std::string to_json_line(const Utterance& u) {
  ordered_json j;
  j["tokens"] = u.tokens;
  j["slots"] = u.slots;
  j["intent"] = u.intent;
  j["domain"] = u.domain;
  j["dialogue_id"] = u.dialogue_id;
  j["turn"] = u.turn;
  return j.dump();
}

Utterance from_json_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Utterance u;
    u.tokens = j.at("tokens").get<std::vector<std::string>>();
    u.slots = j.at("slots").get<std::vector<std::string>>();
    u.intent = j.at("intent").get<std::string>();
    u.domain = j.at("domain").get<std::string>();
    u.dialogue_id = j.at("dialogue_id").get<std::string>();
    u.turn = j.at("turn").get<int>();
    return u;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed corpus record: ") + e.what());
  }
}

void write_corpus(std::ostream& out, std::span<const Utterance> utterances) {
  for (const Utterance& u : utterances) out << to_json_line(u) << '\n';
}

void write_corpus(const std::filesystem::path& path, std::span<const Utterance> utterances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_corpus(out, utterances);
}

std::vector<Utterance> read_corpus(std::istream& in) {
  std::vector<Utterance> out;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json_line(line));
      validate(out.back());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Utterance> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());
  try {
    return read_corpus(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// --- Statistics ------------------------------------------------------------

CorpusStats compute_stats(std::span<const Utterance> utterances) {
  CorpusStats s;
  std::set<std::string> dialogues;
  for (const Utterance& u : utterances) {
    ++s.utterances;
    dialogues.insert(u.dialogue_id);
    ++s.intents[u.intent];
    ++s.domains[u.domain];
    ++s.lengths[u.tokens.size()];
    for (const std::string& slot : u.slots)
      if (slot.rfind("B-", 0) == 0) ++s.slot_names[slot.substr(2)];
  }
  s.dialogues = dialogues.size();
  return s;
}

std::string format_stats(const CorpusStats& s) {
  std::ostringstream out;
  out << "utterances: " << s.utterances << "\n";
  out << "dialogues: " << s.dialogues << "\n";
  auto inventory = [&out](const char* title, const std::map<std::string, std::size_t>& counts) {
    out << title << " (" << counts.size() << "):\n";
    for (const auto& [label, count] : counts) out << "  " << label << "\t" << count << "\n";
  };
  inventory("intents", s.intents);
  inventory("domains", s.domains);
  inventory("slots", s.slot_names);
  out << "length histogram:\n";
  for (const auto& [length, count] : s.lengths) out << "  " << length << "\t" << count << "\n";
  return out.str();
}

}  // namespace trinlu
