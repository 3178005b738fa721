#include "trinlu/optim.hpp"

#include <cmath>

#include "trinlu/error.hpp"

namespace trinlu {

Adam::Adam(const ParameterStore& store, AdamOptions options) : options_(options) {
  for (std::size_t i = 0; i < store.count(); ++i) {
    m_.emplace_back(store[i].value.shape(), 0.0);
    v_.emplace_back(store[i].value.shape(), 0.0);
  }
}

void Adam::step(ParameterStore& store) {
  if (store.count() != m_.size()) throw ShapeError("optimizer state does not match the store");
  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store.count(); ++i) {
    Parameter& p = store[i];
    const bool has_grad = !p.grad.empty();
    if (has_grad && p.grad.shape() != p.value.shape())
      throw ShapeError("gradient of " + p.name + " has shape " + shape_string(p.grad.shape()) +
                       ", parameter " + shape_string(p.value.shape()));
    double* m = m_[i].raw();
    double* v = v_[i].raw();
    double* w = p.value.raw();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = has_grad ? p.grad[k] : 0.0;
      m[k] = options_.beta1 * m[k] + (1 - options_.beta1) * g;
      v[k] = options_.beta2 * v[k] + (1 - options_.beta2) * g * g;
      w[k] -= options_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + options_.eps);
    }
  }
}

}  // namespace trinlu
