#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "support.hpp"
#include "trinlu/autodiff.hpp"
#include "trinlu/error.hpp"
#include "trinlu/gradcheck.hpp"

using namespace trinlu;
using testing::random_tensor;
using testing::weighted_sum;

namespace {

// Builds f from the current parameter values; checks 5 random draws.
double worst_over_draws(ParameterStore& store, const std::function<void(std::mt19937_64&)>& draw,
                        const LossBuilder& f) {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  auto params = testing::all_parameters(store);
  for (int i = 0; i < 5; ++i) {
    draw(rng);
    worst = std::max(worst, grad_check(f, params).max_relative_error);
  }
  return worst;
}

void fill_all(ParameterStore& store, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < store.count(); ++i) testing::randomize(store[i], rng);
}

// Keeps |x| >= 0.2 so a 1e-4 step never crosses the relu kink.
void fill_away_from_zero(Parameter& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& v : p.value.data()) v = sign(rng) ? mag(rng) : -mag(rng);
}

}  // namespace

TEST_CASE("matmul values") {
  Graph g;
  const Var id = g.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  const Var m = g.constant(Tensor::matrix({{3, 4}, {5, 6}}));
  CHECK(matmul(id, m).value() == Tensor::matrix({{3, 4}, {5, 6}}));
  const Var row = g.constant(Tensor::matrix({{1, 2}}));
  const Var col = g.constant(Tensor::matrix({{3}, {4}}));
  CHECK(matmul(row, col).value()[0] == 11.0);
  CHECK_THROWS_AS(matmul(row, row), ShapeError);
}

TEST_CASE("matmul gradient of sum(A x B) w.r.t. A") {
  ParameterStore store;
  Parameter& a = store.add("a", {3, 2});
  Parameter& b = store.add("b", {2, 4});
  std::mt19937_64 rng(3);
  testing::randomize(a, rng);
  testing::randomize(b, rng);
  std::vector<Parameter*> only_a{&a};
  const auto r = grad_check([&](Graph& g) { return sum(matmul(g.param(a), g.param(b))); }, only_a);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("softmax values and shift invariance") {
  // Oracle: exp(x_i) / sum_j exp(x_j) evaluated directly.
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const double oracle[3] = {std::exp(1.0) / z, std::exp(2.0) / z, std::exp(3.0) / z};
  const double pinned[3] = {0.09003, 0.24473, 0.66524};
  Graph g;
  const Tensor p = softmax(g.constant(Tensor::matrix({{1, 2, 3}}))).value();
  for (int i = 0; i < 3; ++i) {
    CHECK(pinned[i] == doctest::Approx(oracle[i]).epsilon(1e-4));
    CHECK(p[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
  const Tensor half = softmax(g.constant(Tensor::matrix({{0, 0}}))).value();
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  const Tensor shifted = softmax(g.constant(Tensor::matrix({{101, 102, 103}}))).value();
  CHECK(testing::max_abs_diff(shifted, p) < 1e-15);
}

TEST_CASE("softmax rejects non-finite input") {
  Graph g;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(softmax(g.constant(Tensor::matrix({{1, nan}}))), NumericalError);
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(5);
  Graph g;
  const Tensor p = softmax(g.constant(random_tensor({7, 5}, rng, -30, 30))).value();
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) s += p.at(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("elementwise activations") {
  Graph g;
  const Tensor t = tanh(g.constant(Tensor::vector({0.0, 1.0}))).value();
  CHECK(t[0] == 0.0);
  CHECK(0.76159 == doctest::Approx(std::tanh(1.0)).epsilon(1e-5));
  CHECK(t[1] == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
  const Tensor r = relu(g.constant(Tensor::vector({-2.0, 3.0}))).value();
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 3.0);
}

TEST_CASE("bias add broadcasts over rows") {
  Graph g;
  const Var m = g.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  const Var b = g.constant(Tensor::vector({10, 20}));
  CHECK(add(m, b).value() == Tensor::matrix({{11, 22}, {13, 24}}));
  CHECK(add(g.constant(Tensor::vector({1, 2})), g.constant(Tensor::vector({0, 0}))).value() ==
        Tensor::vector({1, 2}));
  CHECK_THROWS_AS(add(m, g.constant(Tensor::vector({1, 2, 3}))), ShapeError);
}

TEST_CASE("gradient of sum w.r.t. a bias is the row count") {
  ParameterStore store;
  Parameter& b = store.add("b", {3});
  Graph g;
  std::mt19937_64 rng(1);
  g.backward(sum(add(g.constant(random_tensor({5, 3}, rng)), g.param(b))));
  for (double v : b.grad.data()) CHECK(v == 5.0);
}

TEST_CASE("concat and flatten layout") {
  Graph g;
  const Var a = g.constant(Tensor::matrix({{1, 2}}));
  const Var b = g.constant(Tensor::matrix({{3}}));
  CHECK(concat({a, b}, 1).value() == Tensor::matrix({{1, 2, 3}}));
  const Var x = g.constant(Tensor({20, 768}));
  const Var y = g.constant(Tensor({20, 15}));
  const Var z = g.constant(Tensor({20, 2}));
  CHECK(concat({x, y, z}, 1).shape() == Shape{20, 785});
  const Var m = g.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(flatten(m).value().data()[2] == 3.0);
  CHECK(flatten(m).shape() == Shape{1, 4});
  CHECK(flatten(x).value().size() == 15360);
  CHECK(reshape(flatten(m), {2, 2}).value() == m.value());
  CHECK_THROWS_AS(concat({a, g.constant(Tensor::matrix({{1}, {2}}))}, 1), ShapeError);
}

TEST_CASE("concat splits the gradient back into the original shapes") {
  ParameterStore store;
  Parameter& a = store.add("a", {2, 3});
  Parameter& b = store.add("b", {2, 1});
  Graph g;
  g.backward(sum(concat({g.param(a), g.param(b)}, 1)));
  CHECK(a.grad == Tensor({2, 3}, 1.0));
  CHECK(b.grad == Tensor({2, 1}, 1.0));
}

TEST_CASE("layer norm values") {
  ParameterStore store;
  Parameter& gain = store.add("gain", {4});
  Parameter& shift = store.add("shift", {4});
  gain.value.fill(1.0);
  Graph g;
  const Tensor flat =
      layer_norm(g.constant(Tensor::matrix({{5, 5, 5, 5}})), g.param(gain), g.param(shift), 1e-5).value();
  for (double v : flat.data()) CHECK(v == 0.0);

  ParameterStore two;
  Parameter& g2 = two.add("gain", {2});
  Parameter& s2 = two.add("shift", {2});
  g2.value.fill(1.0);
  const Tensor pair = layer_norm(g.constant(Tensor::matrix({{1, 3}})), g.param(g2), g.param(s2), 1e-12).value();
  CHECK(pair[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(pair[1] == doctest::Approx(1.0).epsilon(1e-9));

  std::mt19937_64 rng(8);
  const Tensor out =
      layer_norm(g.constant(random_tensor({6, 4}, rng, -3, 3)), g.param(gain), g.param(shift), 1e-5).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 4; ++c) mean += out.at(r, c) / 4;
    for (std::size_t c = 0; c < 4; ++c) var += (out.at(r, c) - mean) * (out.at(r, c) - mean) / 4;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("cross entropy values") {
  Graph g;
  CHECK(cross_entropy(g.constant(Tensor::matrix({{1, 0, 0}})), 0).value()[0] == 0.0);
  const double half = cross_entropy(g.constant(Tensor::matrix({{0.5, 0.5}})), 1).value()[0];
  CHECK(half == doctest::Approx(-std::log(0.5)).epsilon(1e-15));
  CHECK(0.69315 == doctest::Approx(-std::log(0.5)).epsilon(1e-5));
  const double quarter =
      cross_entropy(g.constant(Tensor::matrix({{0.25, 0.25, 0.25, 0.25}})), 3).value()[0];
  CHECK(quarter == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(1.38629 == doctest::Approx(std::log(4.0)).epsilon(1e-5));
  // A zero probability is clamped instead of producing infinity.
  const double clamped = cross_entropy(g.constant(Tensor::matrix({{1, 0}})), 1).value()[0];
  CHECK(clamped == doctest::Approx(-std::log(kProbabilityFloor)));
  CHECK_THROWS_AS(cross_entropy(g.constant(Tensor::matrix({{0.5, 0.5}})), 2), DataError);
}

TEST_CASE("backward basics") {
  ParameterStore store;
  Parameter& x = store.add("x", {3});
  x.value = Tensor::vector({1, 2, 3});
  {
    Graph g;
    g.backward(sum(g.param(x)));
    CHECK(x.grad == Tensor({3}, 1.0));
  }
  store.zero_grad();
  {
    Graph g;
    const Var v = g.param(x);
    g.backward(sum(mul(v, v)));
    CHECK(x.grad == Tensor::vector({2, 4, 6}));
  }
  // Repeated backward calls accumulate until zero_grad.
  {
    Graph g;
    const Var v = g.param(x);
    g.backward(sum(mul(v, v)));
    CHECK(x.grad == Tensor::vector({4, 8, 12}));
  }
  Graph g;
  CHECK_THROWS_AS(g.backward(g.param(x)), ShapeError);
}

TEST_CASE("fan-out accumulates: x + x has the gradient of 2x") {
  ParameterStore store;
  Parameter& x = store.add("x", {4});
  std::mt19937_64 rng(2);
  testing::randomize(x, rng);
  Graph g1;
  const Var a = g1.param(x);
  g1.backward(weighted_sum(g1, add(a, a), 9));
  const Tensor twice = x.grad;
  store.zero_grad();
  Graph g2;
  g2.backward(weighted_sum(g2, scale(g2.param(x), 2.0), 9));
  CHECK(testing::max_abs_diff(twice, x.grad) < 1e-15);
}

TEST_CASE("gather rows rejects ids beyond the table") {
  ParameterStore store;
  Parameter& table = store.add("t", {4, 2});
  Graph g;
  const std::vector<std::size_t> ids{0, 4};
  CHECK_THROWS_AS(gather_rows(g.param(table), ids), DataError);
}

TEST_CASE("grad_check is exact on a linear map") {
  ParameterStore store;
  Parameter& theta = store.add("theta", {6});
  std::mt19937_64 rng(4);
  testing::randomize(theta, rng);
  std::vector<Parameter*> params{&theta};
  const auto r = grad_check([&](Graph& g) { return weighted_sum(g, g.param(theta), 1); }, params);
  CHECK(r.max_relative_error < 1e-10);
}

TEST_CASE("grad_check on a softmax + cross entropy layer") {
  ParameterStore store;
  Parameter& w = store.add("w", {5, 3});
  Parameter& b = store.add("b", {3});
  std::mt19937_64 rng(6);
  testing::randomize(w, rng);
  testing::randomize(b, rng);
  const Tensor x = random_tensor({4, 5}, rng);
  const std::vector<int> targets{0, 2, 1, 2};
  const std::vector<double> weights(4, 0.25);
  const auto r = grad_check(
      [&](Graph& g) {
        return cross_entropy(softmax(add(matmul(g.constant(x), g.param(w)), g.param(b))), targets, weights);
      },
      testing::all_parameters(store));
  CHECK(r.max_relative_error < 1e-6);
}

// Every differentiable operation at 5 random inputs.
TEST_CASE("per-operation gradient checks") {
  constexpr double kTolerance = 1e-5;
  ParameterStore store;
  auto fill = [&store](std::mt19937_64& rng) { fill_all(store, rng); };

  SUBCASE("matmul") {
    Parameter& a = store.add("a", {2, 3, 4});
    Parameter& b = store.add("b", {4, 2});
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      return weighted_sum(g, matmul(g.param(a), g.param(b)), 1);
    }) < kTolerance);
  }
  SUBCASE("bmm and transpose") {
    Parameter& a = store.add("a", {2, 3, 4});
    Parameter& b = store.add("b", {2, 3, 4});
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      return weighted_sum(g, bmm(g.param(a), transpose(g.param(b))), 2);
    }) < kTolerance);
  }
  SUBCASE("add, bias add, mul, scale") {
    Parameter& a = store.add("a", {3, 4});
    Parameter& b = store.add("b", {3, 4});
    Parameter& c = store.add("c", {4});
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      return weighted_sum(g, scale(mul(add(g.param(a), g.param(c)), g.param(b)), -1.7), 3);
    }) < kTolerance);
  }
  SUBCASE("tanh") {
    Parameter& a = store.add("a", {3, 4});
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      return weighted_sum(g, tanh(g.param(a)), 4);
    }) < kTolerance);
  }
  SUBCASE("relu") {
    Parameter& a = store.add("a", {3, 4});
    CHECK(worst_over_draws(store, [&](std::mt19937_64& rng) { fill_away_from_zero(a, rng); },
                           [&](Graph& g) { return weighted_sum(g, relu(g.param(a)), 5); }) < kTolerance);
  }
  SUBCASE("softmax") {
    Parameter& a = store.add("a", {2, 3, 5});
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      return weighted_sum(g, softmax(g.param(a)), 6);
    }) < kTolerance);
  }
  SUBCASE("concat, reshape, flatten, slice") {
    Parameter& a = store.add("a", {2, 3, 2});
    Parameter& b = store.add("b", {2, 3, 3});
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      const Var c = concat({g.param(a), g.param(b)}, 2);
      return add(weighted_sum(g, flatten(c), 7), weighted_sum(g, slice_last(c, 1, 3), 8));
    }) < kTolerance);
  }
  SUBCASE("repeat_positions") {
    Parameter& a = store.add("a", {2, 3});
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      return weighted_sum(g, repeat_positions(g.param(a), 4), 9);
    }) < kTolerance);
  }
  SUBCASE("layer_norm") {
    Parameter& x = store.add("x", {3, 5});
    Parameter& gain = store.add("gain", {5});
    Parameter& shift = store.add("shift", {5});
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      return weighted_sum(g, layer_norm(g.param(x), g.param(gain), g.param(shift), 1e-5), 10);
    }) < kTolerance);
  }
  SUBCASE("gather_rows") {
    Parameter& table = store.add("table", {6, 3});
    const std::vector<std::size_t> ids{1, 4, 1, 0};
    CHECK(worst_over_draws(store, fill, [&](Graph& g) {
      return weighted_sum(g, gather_rows(g.param(table), ids), 11);
    }) < kTolerance);
  }
  SUBCASE("cross_entropy") {
    Parameter& p = store.add("p", {4, 3});
    const std::vector<int> targets{0, 2, -1, 1};
    const std::vector<double> weights{0.3, 1.0, 1.0, 0.5};
    auto positive = [&p](std::mt19937_64& rng) { testing::randomize(p, rng, 0.1, 0.9); };
    CHECK(worst_over_draws(store, positive, [&](Graph& g) {
      return cross_entropy(g.param(p), targets, weights);
    }) < kTolerance);
  }
}

TEST_CASE("dropout keeps expectation and zero rate is the identity") {
  std::mt19937_64 rng(1);
  Graph g;
  const Var x = g.constant(Tensor({10000}, 1.0));
  CHECK(dropout(x, 0.0, rng).value() == x.value());
  const Tensor d = dropout(x, 0.25, rng).value();
  CHECK(d.sum() / 10000 == doctest::Approx(1.0).epsilon(0.03));
  for (double v : d.data()) CHECK((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-12));
}
