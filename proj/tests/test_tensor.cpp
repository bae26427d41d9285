#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "antkit/ops.hpp"
#include "antkit/tensor.hpp"
#include "doctest.h"

using namespace antkit;
namespace ops = antkit::ops;

TEST_CASE("construction and basic accessors") {
  Tensor z({2, 3});
  CHECK(z.numel() == 6);
  for (double v : z.data()) CHECK(v == 0.0);

  Tensor f = Tensor::full({2, 2}, 1.5);
  for (double v : f.data()) CHECK(v == 1.5);

  Tensor s = Tensor::scalar(4.25);
  CHECK(s.item() == 4.25);
  CHECK_THROWS_AS(f.item(), TensorError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), TensorError);

  CHECK(shape_str({1, 2, 3}) == "[1x2x3]");
  CHECK(shape_numel({4, 5}) == 20);
}

TEST_CASE("backward is defined only from scalars") {
  Tensor a = Tensor({2}, {1.0, 2.0}).requires_grad();
  Tensor y = ops::add(a, a);
  CHECK_THROWS_AS(y.backward(), TensorError);
}

TEST_CASE("dot gradients") {
  Tensor a = Tensor({3}, {1.0, -2.0, 3.0}).requires_grad();
  Tensor b = Tensor({3}, {4.0, 5.0, -6.0}).requires_grad();
  Tensor y = ops::dot(a, b);
  CHECK(y.item() == doctest::Approx(1 * 4 + -2 * 5 + 3 * -6));
  y.backward();
  for (int i = 0; i < 3; ++i) {
    CHECK(a.grad()[i] == b.data()[i]);
    CHECK(b.grad()[i] == a.data()[i]);
  }
}

TEST_CASE("relu and relu6 values and gradients away from kinks") {
  Tensor x = Tensor({4}, {-1.0, 0.5, 5.0, 7.0}).requires_grad();
  Tensor y = ops::relu6(x);
  CHECK(y.data() == std::vector<double>{0.0, 0.5, 5.0, 6.0});
  ops::sum_all(y).backward();
  CHECK(x.grad() == std::vector<double>{0.0, 1.0, 1.0, 0.0});

  Tensor x2 = Tensor({3}, {-2.0, 0.25, 9.0}).requires_grad();
  Tensor y2 = ops::relu(x2);
  CHECK(y2.data() == std::vector<double>{0.0, 0.25, 9.0});
  ops::sum_all(y2).backward();
  CHECK(x2.grad() == std::vector<double>{0.0, 1.0, 1.0});
}

TEST_CASE("sigmoid value and derivative") {
  Tensor x = Tensor({2}, {0.0, 2.0}).requires_grad();
  Tensor y = ops::sigmoid(x);
  CHECK(y.data()[0] == doctest::Approx(0.5));
  CHECK(y.data()[1] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  ops::sum_all(y).backward();
  for (int i = 0; i < 2; ++i) {
    double s = y.data()[i];
    CHECK(x.grad()[i] == doctest::Approx(s * (1 - s)));
  }
}

TEST_CASE("reshape preserves data and routes gradients") {
  Tensor x = Tensor({2, 3}, {1, 2, 3, 4, 5, 6}).requires_grad();
  Tensor y = ops::reshape(x, {3, 2});
  CHECK(y.shape() == std::vector<int>{3, 2});
  CHECK(y.data() == x.data());
  CHECK_THROWS_AS(ops::reshape(x, {4, 2}), TensorError);
  ops::dot(ops::reshape(y, {6}), Tensor({6}, {1, 1, 1, 1, 1, 2})).backward();
  CHECK(x.grad()[5] == 2.0);
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("softmax output is a probability vector") {
  for (auto logits : {std::vector<double>{0, 0, 0}, {1, 2, 3}, {-4, 0, 4}}) {
    Tensor p = ops::softmax_vec(Tensor({3}, logits));
    double sum = 0;
    for (double v : p.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  Tensor uniform = ops::softmax_vec(Tensor({3}));
  CHECK(uniform.data()[0] == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(ops::softmax_vec(Tensor({2, 3})), TensorError);
}

TEST_CASE("cross entropy of uniform logits is log K") {
  Tensor logits({2, 5});
  Tensor loss = ops::cross_entropy(logits, {0, 3});
  CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient is softmax minus one-hot over batch") {
  Tensor logits = Tensor({2, 3}, {0.2, -0.1, 0.5, 1.0, 0.0, -1.0}).requires_grad();
  std::vector<double> p(6);  // row softmax, computed by hand
  for (int n = 0; n < 2; ++n) {
    double z = 0;
    for (int k = 0; k < 3; ++k) z += std::exp(logits.data()[n * 3 + k]);
    for (int k = 0; k < 3; ++k) p[n * 3 + k] = std::exp(logits.data()[n * 3 + k]) / z;
  }
  ops::cross_entropy(logits, {2, 0}).backward();
  for (int n = 0; n < 2; ++n)
    for (int k = 0; k < 3; ++k) {
      double expect = p[n * 3 + k] - ((n == 0 ? 2 : 0) == k ? 1.0 : 0.0);
      CHECK(logits.grad()[n * 3 + k] == doctest::Approx(expect / 2).epsilon(1e-12));
    }
}

TEST_CASE("global average pool and its gradient spread") {
  Tensor x = Tensor({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40}).requires_grad();
  Tensor y = ops::global_avg_pool(x);
  CHECK(y.shape() == std::vector<int>{1, 2, 1, 1});
  CHECK(y.data()[0] == doctest::Approx(2.5));
  CHECK(y.data()[1] == doctest::Approx(25.0));
  ops::dot(ops::reshape(y, {2}), Tensor({2}, {1.0, 2.0})).backward();
  for (int i = 0; i < 4; ++i) {
    CHECK(x.grad()[i] == doctest::Approx(0.25));
    CHECK(x.grad()[4 + i] == doctest::Approx(0.5));
  }
}

TEST_CASE("channel scale broadcasts the mask over the map") {
  Tensor u = Tensor({1, 2, 1, 2}, {1, 2, 3, 4}).requires_grad();
  Tensor m = Tensor({1, 2, 1, 1}, {0.5, 2.0}).requires_grad();
  Tensor y = ops::channel_scale(u, m);
  CHECK(y.data() == std::vector<double>{0.5, 1.0, 6.0, 8.0});
  ops::sum_all(y).backward();
  CHECK(u.grad() == std::vector<double>{0.5, 0.5, 2.0, 2.0});
  CHECK(m.grad()[0] == doctest::Approx(3.0));
  CHECK(m.grad()[1] == doctest::Approx(7.0));
}

TEST_CASE("scale by component routes gradients to the selected weight") {
  Tensor t = Tensor({3}, {1.0, 2.0, 3.0}).requires_grad();
  Tensor w = Tensor({2}, {0.25, 4.0}).requires_grad();
  Tensor y = ops::scale_by_component(t, w, 1);
  CHECK(y.data() == std::vector<double>{4.0, 8.0, 12.0});
  ops::dot(y, Tensor({3}, {1, 1, 1})).backward();
  CHECK(t.grad() == std::vector<double>{4.0, 4.0, 4.0});
  CHECK(w.grad()[0] == 0.0);
  CHECK(w.grad()[1] == doctest::Approx(6.0));
}

TEST_CASE("batch norm train mode normalizes and updates running stats") {
  // One channel, four values: mean 2.5, biased var 1.25, unbiased 5/3.
  Tensor x = Tensor({4, 1, 1, 1}, {1, 2, 3, 4}).requires_grad();
  Tensor gamma = Tensor({1}, {2.0}).requires_grad();
  Tensor beta = Tensor({1}, {10.0}).requires_grad();
  std::vector<double> rm = {7.0}, rv = {3.0};
  Tensor y = ops::batch_norm(x, gamma, beta, rm, rv, true);

  double mean = 0, var = 0;
  for (double v : y.data()) mean += v / 4;
  for (double v : y.data()) var += (v - mean) * (v - mean) / 4;
  CHECK(mean == doctest::Approx(10.0).epsilon(1e-9));  // beta
  CHECK(var == doctest::Approx(4.0 * 1.25 / (1.25 + 1e-5)).epsilon(1e-6));

  CHECK(rm[0] == doctest::Approx(0.9 * 7.0 + 0.1 * 2.5).epsilon(1e-12));
  CHECK(rv[0] == doctest::Approx(0.9 * 3.0 + 0.1 * (5.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("batch norm eval mode applies running estimates") {
  Tensor x({2, 1, 1, 1}, {3.0, 5.0});
  Tensor gamma = Tensor::full({1}, 1.0);
  Tensor beta({1});
  std::vector<double> rm = {3.0}, rv = {4.0};
  Tensor y = ops::batch_norm(x, gamma, beta, rm, rv, false);
  CHECK(y.data()[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(y.data()[1] == doctest::Approx(2.0 / std::sqrt(4.0 + 1e-5)));
  CHECK(rm[0] == 3.0);  // eval never touches the estimates
  CHECK(rv[0] == 4.0);
}

TEST_CASE("batch norm with update_running off leaves estimates alone") {
  Tensor x({4, 1, 1, 1}, {1, 2, 3, 4});
  Tensor gamma = Tensor::full({1}, 1.0);
  Tensor beta({1});
  std::vector<double> rm = {7.0}, rv = {3.0};
  ops::batch_norm(x, gamma, beta, rm, rv, true, false);
  CHECK(rm[0] == 7.0);
  CHECK(rv[0] == 3.0);
}

TEST_CASE("zero_grad clears accumulated gradients") {
  Tensor a = Tensor({2}, {1.0, 2.0}).requires_grad();
  ops::sum_all(a).backward();
  CHECK(a.grad()[0] == 1.0);
  a.zero_grad();
  CHECK(a.grad()[0] == 0.0);
}

TEST_CASE("gradients accumulate across backward calls") {
  Tensor a = Tensor({2}, {1.0, 2.0}).requires_grad();
  ops::sum_all(a).backward();
  ops::sum_all(a).backward();
  CHECK(a.grad()[0] == 2.0);
}

TEST_CASE("results of grad-free inputs carry no graph") {
  Tensor a({2}, {1.0, 2.0});
  Tensor y = ops::add(a, a);
  CHECK(!y.needs_grad());
  Tensor b = Tensor({2}, {1.0, 1.0}).requires_grad();
  CHECK(ops::add(a, b).needs_grad());
}

TEST_CASE("composite graph matches central differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto randn = [&](std::vector<int> shape) {
    Tensor t(shape);
    for (double& v : t.data()) v = dist(rng);
    return t;
  };
  Tensor a = randn({6}).requires_grad();
  Tensor b = randn({6}).requires_grad();
  Tensor c = randn({6});

  auto loss = [&]() {
    return ops::dot(ops::sigmoid(ops::add(a, ops::relu(b))), c);
  };
  loss().backward();
  std::vector<double> ga = a.grad(), gb = b.grad();

  const double eps = 1e-5;
  for (int i = 0; i < 6; ++i) {
    for (auto [t, g] : {std::pair{&a, &ga}, std::pair{&b, &gb}}) {
      double keep = t->data()[i];
      t->data()[i] = keep + eps;
      double up = loss().item();
      t->data()[i] = keep - eps;
      double dn = loss().item();
      t->data()[i] = keep;
      double fd = (up - dn) / (2 * eps);
      CHECK((*g)[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("activation tracking hashes the linear segment pattern") {
  ops::track_activations() = true;
  ops::reset_activation_stats();
  ops::relu(Tensor({3}, {-1.0, 0.5, 2.0}));
  std::uint64_t h1 = ops::activation_pattern();
  ops::reset_activation_stats();
  ops::relu(Tensor({3}, {-2.0, 0.7, 3.0}));  // same segments
  CHECK(ops::activation_pattern() == h1);
  ops::reset_activation_stats();
  ops::relu(Tensor({3}, {1.0, 0.5, 2.0}));  // first element switched segment
  CHECK(ops::activation_pattern() != h1);
  ops::track_activations() = false;
}
