#include "antkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "antkit/ops.hpp"

namespace antkit {

namespace {

struct Eval {
  double value;
  std::uint64_t pattern;
};

}  // namespace

GradcheckResult gradcheck_network(Network& net, const Tensor& input,
                                  double epsilon, int min_coords,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto& params = net.parameters();
  if (params.empty()) throw ConfigError("gradcheck needs parameters");

  Tensor out0 = net.forward(input, true, nullptr, false);
  Tensor probe(out0.shape());
  {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : probe.data()) v = dist(rng);
  }

  auto eval = [&]() -> Eval {
    ops::reset_activation_stats();
    ops::track_activations() = true;
    Tensor out = net.forward(input, true, nullptr, false);
    ops::track_activations() = false;
    Tensor loss = ops::dot(out, probe);
    return {loss.item(), ops::activation_pattern()};
  };

  for (auto& p : params) p.tensor.zero_grad();
  {
    Tensor out = net.forward(input, true, nullptr, false);
    Tensor loss = ops::dot(out, probe);
    loss.backward();
  }
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (auto& p : params) grads.push_back(p.tensor.grad());

  GradcheckResult res;
  // Checks one coordinate; shrinks the displacement when the two evaluations
  // land in different activation segments, and skips if that never resolves.
  auto check_coord = [&](std::size_t pi, std::size_t j) {
    double& theta = params[pi].tensor.data()[j];
    const double orig = theta;
    for (double shrink : {1.0, 8.0, 64.0}) {
      const double eps = epsilon / shrink;
      theta = orig + eps;
      Eval plus = eval();
      theta = orig - eps;
      Eval minus = eval();
      theta = orig;
      if (plus.pattern != minus.pattern) continue;
      const double fd = (plus.value - minus.value) / (2 * eps);
      const double an = grads[pi][j];
      const double rel =
          std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
      ++res.coords_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = params[pi].name + "[" + std::to_string(j) + "]";
      }
      return;
    }
    ++res.coords_skipped;
  };

  // Every ensemble weight is mandatory.
  for (std::size_t pi = 0; pi < params.size(); ++pi)
    if (params[pi].name.find(".lambda") != std::string::npos)
      for (std::size_t j = 0; j < params[pi].tensor.data().size(); ++j)
        check_coord(pi, j);

  std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
  const int budget = min_coords * 20;
  for (int attempts = 0; res.coords_checked < min_coords && attempts < budget;
       ++attempts) {
    const std::size_t pi = pick_param(rng);
    auto& data = params[pi].tensor.data();
    std::uniform_int_distribution<std::size_t> pick_j(0, data.size() - 1);
    check_coord(pi, pick_j(rng));
  }
  return res;
}

}  // namespace antkit
