#include "trinlu/convert.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include "trinlu/error.hpp"

namespace trinlu {

using nlohmann::json;

double ConversionReport::skip_rate() const {
  const std::size_t total = candidates();
  return total == 0 ? 0.0
                    : static_cast<double>(total - records) / static_cast<double>(total);
}

std::string ConversionReport::text() const {
  std::ostringstream out;
  out << "format: " << format << "\n";
  out << "files: " << files.size() << "\n";
  for (const std::string& f : files) out << "  " << f << "\n";
  out << "dialogues: " << dialogues << "\n";
  out << "records: " << records << "\n";
  out << "skipped (empty utterance): " << skipped_empty << "\n";
  out << "skipped (no dialogue act): " << skipped_no_act << "\n";
  out << "skipped (span misalignment): " << skipped_misaligned << "\n";
  for (const std::string& id : misaligned_examples) out << "  e.g. " << id << "\n";
  out << "skip rate: " << std::fixed << std::setprecision(4) << 100.0 * skip_rate() << "%\n";
  auto inventory = [&out](const char* title, const std::map<std::string, std::size_t>& counts) {
    out << title << " (" << counts.size() << "):\n";
    for (const auto& [label, count] : counts) out << "  " << label << "\t" << count << "\n";
  };
  inventory("intents", intents);
  inventory("domains", domains);
  inventory("slots", slots);
  return out.str();
}

namespace {

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + std::string(what) + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool matches_split(const std::filesystem::path& file, const std::optional<std::string>& split) {
  if (!split) return true;
  if (file.stem() == *split) return true;
  for (const auto& part : file.parent_path())
    if (part == *split) return true;
  return false;
}

std::vector<std::filesystem::path> dialogue_files(const std::filesystem::path& input,
                                                  const ConvertOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::exists(input)) throw DataError("input " + input.string() + " does not exist");
  std::vector<fs::path> files;
  if (fs::is_regular_file(input)) {
    files.push_back(input);
  } else {
    for (const auto& entry : fs::recursive_directory_iterator(input)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
      const std::string name = entry.path().filename().string();
      if (name == "dialog_acts.json" || name == "schema.json") continue;
      if (!matches_split(fs::relative(entry.path(), input), options.split)) continue;
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no dialogue files found in " + input.string());
  return files;
}

void record(ConversionResult& result, Utterance u) {
  validate(u);
  ConversionReport& r = result.report;
  ++r.records;
  ++r.intents[u.intent];
  ++r.domains[u.domain];
  for (const std::string& s : u.slots)
    if (s.rfind("B-", 0) == 0) ++r.slots[s.substr(2)];
  result.utterances.push_back(std::move(u));
}

void merge_into(ConversionResult& into, ConversionResult part) {
  ConversionReport& a = into.report;
  const ConversionReport& b = part.report;
  a.dialogues += b.dialogues;
  a.records += b.records;
  a.skipped_empty += b.skipped_empty;
  a.skipped_no_act += b.skipped_no_act;
  a.skipped_misaligned += b.skipped_misaligned;
  for (const auto& id : b.misaligned_examples)
    if (a.misaligned_examples.size() < 10) a.misaligned_examples.push_back(id);
  for (const auto& [k, v] : b.intents) a.intents[k] += v;
  for (const auto& [k, v] : b.domains) a.domains[k] += v;
  for (const auto& [k, v] : b.slots) a.slots[k] += v;
  std::move(part.utterances.begin(), part.utterances.end(), std::back_inserter(into.utterances));
}

std::string infer_m2m_domain(const json& dialogue) {
  for (const auto& turn : dialogue.value("turns", json::array()))
    for (const auto& intent : turn.value("user_intents", json::array())) {
      const std::string text = to_lower(intent.get<std::string>());
      if (text.find("restaurant") != std::string::npos) return "restaurant";
      if (text.find("movie") != std::string::npos) return "movie";
    }
  return {};
}

}  // namespace

std::optional<std::string> m2m_domain_from_path(const std::filesystem::path& path) {
  const std::string text = to_lower(path.generic_string());
  if (text.find("sim-r") != std::string::npos || text.find("restaurant") != std::string::npos)
    return "restaurant";
  if (text.find("sim-m") != std::string::npos || text.find("movie") != std::string::npos)
    return "movie";
  return std::nullopt;
}

ConversionResult convert_m2m_json(std::string_view json_text, std::string_view domain,
                                  const ConvertOptions& options) {
  const json dialogues = parse_json(json_text, "M2M file");
  if (!dialogues.is_array()) throw DataError("M2M file must hold a JSON array of dialogues");
  ConversionResult result;
  result.report.format = "m2m";
  for (const json& dialogue : dialogues) {
    const std::string id = dialogue.value("dialogue_id", "");
    if (id.empty()) throw DataError("M2M dialogue without dialogue_id");
    std::string dialogue_domain = options.domain.value_or(std::string(domain));
    if (dialogue_domain.empty()) dialogue_domain = infer_m2m_domain(dialogue);
    if (dialogue_domain.empty())
      throw DataError("cannot determine the domain of M2M dialogue " + id);
    ++result.report.dialogues;

    int turn_index = 0;
    for (const json& turn : dialogue.value("turns", json::array())) {
      for (const std::string speaker : {"system", "user"}) {
        const bool wanted = speaker == "system" ? options.system_turns : options.user_turns;
        const std::string key = speaker + "_utterance";
        if (!wanted || !turn.contains(key) || turn[key].is_null()) continue;
        const json& utterance = turn[key];
        const int this_turn = turn_index++;
        try {
          Utterance u;
          if (utterance.contains("tokens")) {
            for (const auto& t : utterance["tokens"]) u.tokens.push_back(to_lower(t.get<std::string>()));
          } else {
            u.tokens = tokenize(utterance.value("text", ""));
          }
          if (u.tokens.empty()) {
            ++result.report.skipped_empty;
            continue;
          }
          std::vector<std::string> acts;
          for (const auto& act : turn.value(speaker + "_acts", json::array()))
            acts.push_back(to_lower(act.at("type").get<std::string>()));
          if (acts.empty()) {
            ++result.report.skipped_no_act;
            continue;
          }
          std::vector<SlotSpan> spans;
          for (const auto& s : utterance.value("slots", json::array()))
            spans.push_back({s.at("start").get<std::size_t>(), s.at("exclusive_end").get<std::size_t>(),
                             to_lower(s.at("slot").get<std::string>())});
          std::sort(spans.begin(), spans.end(),
                    [](const SlotSpan& a, const SlotSpan& b) { return a.start < b.start; });
          u.slots = to_boi(u.tokens.size(), spans);
          u.intent = combine_labels(std::move(acts));
          u.domain = dialogue_domain;
          u.dialogue_id = id;
          u.turn = this_turn;
          record(result, std::move(u));
        } catch (const json::exception& e) {
          throw DataError("M2M dialogue " + id + " turn " + std::to_string(this_turn) + ": " + e.what());
        } catch (const DataError& e) {
          throw DataError("M2M dialogue " + id + " turn " + std::to_string(this_turn) + ": " + e.what());
        }
      }
    }
  }
  sort_canonical(result.utterances);
  return result;
}

ConversionResult convert_m2m(const std::filesystem::path& input, const ConvertOptions& options) {
  ConversionResult result;
  result.report.format = "m2m";
  for (const auto& file : dialogue_files(input, options)) {
    const std::string domain = options.domain ? *options.domain
                                              : m2m_domain_from_path(file).value_or("");
    ConversionResult part;
    try {
      part = convert_m2m_json(read_file(file), domain, options);
    } catch (const DataError& e) {
      throw DataError(file.string() + ": " + e.what());
    }
    result.report.files.push_back(file.string());
    merge_into(result, std::move(part));
  }
  sort_canonical(result.utterances);
  return result;
}

std::optional<std::vector<SlotSpan>> align_char_spans(std::string_view text,
                                                      const std::vector<SlotSpan>& char_spans) {
  struct TokenRange {
    std::size_t start, end, core_start, core_end;
  };
  std::vector<TokenRange> tokens;
  for (std::size_t i = 0; i < text.size();) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t cs = i, ce = j;
    while (cs < ce && std::ispunct(static_cast<unsigned char>(text[cs]))) ++cs;
    while (ce > cs && std::ispunct(static_cast<unsigned char>(text[ce - 1]))) --ce;
    tokens.push_back({i, j, cs, ce});
    i = j;
  }
  std::vector<SlotSpan> out;
  for (const SlotSpan& span : char_spans) {
    if (span.start >= span.end) return std::nullopt;
    std::optional<std::size_t> first, last;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (!first && (span.start == tokens[t].start || span.start == tokens[t].core_start)) first = t;
      if (span.end == tokens[t].end || span.end == tokens[t].core_end) last = t;
      if (last) break;
    }
    if (!first || !last || *last < *first) return std::nullopt;
    out.push_back({*first, *last + 1, span.name});
  }
  std::sort(out.begin(), out.end(), [](const SlotSpan& a, const SlotSpan& b) {
    return std::tie(a.start, a.end, a.name) < std::tie(b.start, b.end, b.name);
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const SlotSpan& a, const SlotSpan& b) {
                          return a.start == b.start && a.end == b.end && a.name == b.name;
                        }),
            out.end());
  return out;
}

namespace {

ConversionResult convert_multiwoz_dialogues(const json& dialogues, const json& acts,
                                            const ConvertOptions& options) {
  if (!dialogues.is_array()) throw DataError("MultiWOZ dialogue file must hold a JSON array");
  ConversionResult result;
  result.report.format = "multiwoz";
  for (const json& dialogue : dialogues) {
    const std::string id = dialogue.value("dialogue_id", "");
    if (id.empty()) throw DataError("MultiWOZ dialogue without dialogue_id");
    ++result.report.dialogues;
    for (const json& turn : dialogue.value("turns", json::array())) {
      const std::string speaker = to_lower(turn.value("speaker", ""));
      if ((speaker == "user" && !options.user_turns) || (speaker == "system" && !options.system_turns))
        continue;
      const std::string turn_id = turn.value("turn_id", "");
      try {
        const std::string text = turn.value("utterance", "");
        Utterance u;
        u.tokens = tokenize(text);
        if (u.tokens.empty()) {
          ++result.report.skipped_empty;
          continue;
        }
        std::vector<std::string> intents, domains;
        const json turn_acts = acts.contains(id) && acts[id].contains(turn_id)
                                   ? acts[id][turn_id].value("dialog_act", json::object())
                                   : json::object();
        for (const auto& [name, _] : turn_acts.items()) {
          const std::size_t dash = name.find('-');
          domains.push_back(to_lower(name.substr(0, dash)));
          intents.push_back(to_lower(dash == std::string::npos ? name : name.substr(dash + 1)));
        }
        if (intents.empty()) {
          ++result.report.skipped_no_act;
          continue;
        }
        std::vector<SlotSpan> char_spans;
        for (const auto& frame : turn.value("frames", json::array()))
          for (const auto& slot : frame.value("slots", json::array())) {
            if (!slot.contains("start") || !slot.contains("exclusive_end")) continue;
            std::string name = to_lower(slot.at("slot").get<std::string>());
            if (const std::size_t dash = name.find('-'); dash != std::string::npos)
              name = name.substr(dash + 1);
            char_spans.push_back({slot["start"].get<std::size_t>(),
                                  slot["exclusive_end"].get<std::size_t>(), name});
          }
        auto spans = align_char_spans(text, char_spans);
        std::optional<std::vector<std::string>> labels;
        if (spans) {
          try {
            labels = to_boi(u.tokens.size(), *spans);
          } catch (const DataError&) {
            // overlapping spans with different names
          }
        }
        if (!labels) {
          ++result.report.skipped_misaligned;
          if (result.report.misaligned_examples.size() < 10)
            result.report.misaligned_examples.push_back(id + "/" + turn_id);
          continue;
        }
        u.slots = std::move(*labels);
        u.intent = combine_labels(std::move(intents));
        u.domain = combine_labels(std::move(domains));
        u.dialogue_id = id;
        u.turn = std::stoi(turn_id);
        record(result, std::move(u));
      } catch (const json::exception& e) {
        throw DataError("MultiWOZ dialogue " + id + " turn " + turn_id + ": " + e.what());
      } catch (const std::invalid_argument&) {
        throw DataError("MultiWOZ dialogue " + id + ": non-numeric turn_id '" + turn_id + "'");
      }
    }
  }
  sort_canonical(result.utterances);
  return result;
}

}  // namespace

ConversionResult convert_multiwoz_json(std::string_view dialogues_json,
                                       std::string_view dialog_acts_json,
                                       const ConvertOptions& options) {
  return convert_multiwoz_dialogues(parse_json(dialogues_json, "MultiWOZ dialogue file"),
                                    parse_json(dialog_acts_json, "dialog_acts.json"), options);
}

ConversionResult convert_multiwoz(const std::filesystem::path& input, const ConvertOptions& options) {
  namespace fs = std::filesystem;
  std::optional<fs::path> acts_path;
  for (fs::path dir = fs::is_directory(input) ? input : input.parent_path(); !dir.empty();
       dir = dir.parent_path()) {
    if (fs::exists(dir / "dialog_acts.json")) {
      acts_path = dir / "dialog_acts.json";
      break;
    }
    if (dir == dir.parent_path()) break;
  }
  if (!acts_path) throw DataError("dialog_acts.json not found at or above " + input.string());
  const json acts = parse_json(read_file(*acts_path), acts_path->string());

  ConversionResult result;
  result.report.format = "multiwoz";
  for (const auto& file : dialogue_files(input, options)) {
    ConversionResult part;
    try {
      part = convert_multiwoz_dialogues(parse_json(read_file(file), file.string()), acts, options);
    } catch (const DataError& e) {
      throw DataError(file.string() + ": " + e.what());
    }
    result.report.files.push_back(file.string());
    merge_into(result, std::move(part));
  }
  sort_canonical(result.utterances);
  return result;
}

}  // namespace trinlu
