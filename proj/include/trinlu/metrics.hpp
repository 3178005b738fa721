#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "trinlu/error.hpp"

namespace trinlu {

struct SlotScores {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  /// P, R and F1 from counts; each is 0 when its denominator is 0.
  static SlotScores from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

template <typename Label>
double intent_accuracy(const std::vector<Label>& predicted, const std::vector<Label>& gold) {
  if (predicted.size() != gold.size())
    throw ShapeError("accuracy over " + std::to_string(predicted.size()) + " predictions and " +
                     std::to_string(gold.size()) + " references");
  if (gold.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += predicted[i] == gold[i];
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

/// Micro-averaged over non-PAD tokens. An empty pad vector means no padding.
template <typename Label>
SlotScores slot_token_f1(const std::vector<std::vector<Label>>& predicted,
                         const std::vector<std::vector<Label>>& gold,
                         const std::vector<std::vector<std::uint8_t>>& pad, const Label& outside) {
  if (predicted.size() != gold.size() || (!pad.empty() && pad.size() != gold.size()))
    throw ShapeError("slot F1 over sequence lists of different length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& p = predicted[s];
    const auto& g = gold[s];
    if (p.size() != g.size() || (!pad.empty() && pad[s].size() != g.size()))
      throw ShapeError("slot F1: sequence " + std::to_string(s) + " has mismatched lengths");
    for (std::size_t t = 0; t < g.size(); ++t) {
      if (!pad.empty() && pad[s][t]) continue;
      if (p[t] == g[t]) {
        tp += g[t] != outside;
        continue;
      }
      fp += p[t] != outside;
      fn += g[t] != outside;
    }
  }
  return SlotScores::from_counts(tp, fp, fn);
}

}  // namespace trinlu
