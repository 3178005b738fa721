#include "trinlu/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trinlu/error.hpp"

namespace trinlu {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           double eps, double resolved_floor) {
  for (Parameter* p : params) {
    p->grad = Tensor(p->value.shape());
    p->touched = false;
  }
  {
    Graph g;
    g.backward(loss(g));
  }

  auto evaluate = [&loss] {
    Graph g;
    return loss(g).value()[0];
  };

  GradCheckResult result;
  result.resolved_floor = resolved_floor;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = evaluate();
      p->value[i] = saved - eps;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double err = relative_error(analytic, numeric);
      ++result.components_checked;
      if (std::max(std::abs(analytic), std::abs(numeric)) >= resolved_floor)
        result.max_resolved_error = std::max(result.max_resolved_error, err);
      if (result.worst_parameter.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}


double relu_margin(Graph& g) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Var v = g.at(i);
    if (g.op(v) != "relu") continue;
    for (double x : g.value(g.at(g.parents(v).front())).data()) margin = std::min(margin, std::abs(x));
  }
  return margin;
}

GradCheckResult check_model_gradients(TriNluModel& model, const Batch& batch, const TaskSet& tasks,
                                      double eps) {
  ParameterStore& store = model.parameters();
  std::vector<Parameter*> params;
  for (std::size_t i = 0; i < store.count(); ++i) params.push_back(&store[i]);
  const LossBuilder loss = [&](Graph& g) {
    return joint_loss(model.forward(g, batch), batch.targets, tasks);
  };
  return grad_check(loss, params, eps);
}

SmoothPointCheck check_model_at_smooth_point(const ModelConfig& config, std::uint64_t seed,
                                             std::size_t batch_size, const TaskSet& tasks,
                                             double min_margin, std::size_t max_draws) {
  for (std::size_t draw = 0; draw < max_draws; ++draw) {
    const std::uint64_t s = seed + draw;
    TriNluModel model(config, s);
    std::mt19937_64 rng(s);
    const Batch batch = random_batch(config, batch_size, rng);
    Graph g;
    model.forward(g, batch);
    const double margin = relu_margin(g);
    if (margin < min_margin) continue;
    return {check_model_gradients(model, batch, tasks), s, margin, draw + 1};
  }
  throw NumericalError("no draw with relu margin >= " + std::to_string(min_margin) + " in " +
                       std::to_string(max_draws) + " attempts");
}

}  // namespace trinlu
