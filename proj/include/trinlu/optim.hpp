#pragma once

#include <cstddef>
#include <vector>

#include "trinlu/autodiff.hpp"

namespace trinlu {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers follow the store's declaration
/// order; a parameter with no gradient this step is treated as grad 0.
class Adam {
 public:
  Adam(const ParameterStore& store, AdamOptions options = {});

  void step(ParameterStore& store);
  std::size_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace trinlu
