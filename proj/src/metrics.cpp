#include "trinlu/metrics.hpp"

namespace trinlu {

SlotScores SlotScores::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  SlotScores s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  if (tp + fp > 0) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace trinlu
