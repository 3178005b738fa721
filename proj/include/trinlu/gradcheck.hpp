#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "trinlu/autodiff.hpp"
#include "trinlu/joint_head.hpp"
#include "trinlu/model.hpp"

namespace trinlu {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t components_checked = 0;
  // Same maximum over components with max(|a|, |n|) >= resolved_floor only.
  // Below that the central difference is dominated by rounding of the loss.
  double max_resolved_error = 0.0;
  double resolved_floor = 0.0;
};

/// Builds the scalar loss on a fresh graph. Must be deterministic.
using LossBuilder = std::function<Var(Graph&)>;

/// Compares backward() against central differences (f(t+e) - f(t-e)) / 2e
/// for every component of every listed parameter. The error of a component
/// is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           double eps = 1e-4, double resolved_floor = 1e-6);

double relative_error(double analytic, double numeric);

/// Smallest |input| over every relu node of g. Central differences are
/// only meaningful when this exceeds the largest input shift a single
/// perturbation can cause.
double relu_margin(Graph& g);

/// Joint loss of the model on batch, checked over every parameter that
/// the loss reaches.
GradCheckResult check_model_gradients(TriNluModel& model, const Batch& batch, const TaskSet& tasks,
                                      double eps = 1e-4);

struct SmoothPointCheck {
  GradCheckResult result;
  std::uint64_t seed = 0;  // parameter and batch seed actually used
  double relu_margin = 0.0;
  std::size_t draws = 0;
};

/// Initialises the model and a random batch from seed, seed + 1, ... until
/// every relu input sits at least min_margin away from the kink, then runs
/// check_model_gradients there. Throws NumericalError after max_draws.
SmoothPointCheck check_model_at_smooth_point(const ModelConfig& config, std::uint64_t seed,
                                             std::size_t batch_size, const TaskSet& tasks,
                                             double min_margin = 1e-3, std::size_t max_draws = 1000);

}  // namespace trinlu
