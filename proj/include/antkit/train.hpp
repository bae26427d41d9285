#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "antkit/arch.hpp"
#include "antkit/data.hpp"

namespace antkit {

struct TrainError : std::runtime_error {
  explicit TrainError(const std::string& m) : std::runtime_error(m) {}
};

// Defaults mirror the published recipe; everything is overridable.
struct TrainConfig {
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 4.0e-5;
  double lr_init = 0.01;
  double lr_gamma = 0.1;
  std::vector<int> milestones = {200, 300};
  int max_epochs = 400;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool augment = false;
  double target_train_acc = 0.0;  // > 0: stop once reached
};

// Piecewise-constant: lr_init * gamma^(milestones passed).
double lr_schedule(int epoch, const TrainConfig& cfg);

struct SgdState {
  std::vector<std::vector<double>> velocity;  // one buffer per parameter
};

// Classical L2 folded into the gradient (decaying parameters only), then
// v <- mu*v + g and a step along g + mu*v (Nesterov) or v.
void sgd_step(std::vector<NamedParam>& params, SgdState& state, double lr,
              const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double lr = 0, loss = 0, train_acc = 0, eval_acc = 0;
};

struct History {
  std::vector<EpochStats> epochs;
};

std::string history_csv(const History& h);

double evaluate(Network& net, const Dataset& ds, int batch_size);

// Seeded shuffle/augment/update loop; aborts with the first non-finite layer
// named when the loss leaves the reals. Accuracy on the training set is
// accumulated from the training-mode forward passes of the epoch.
History train(Network& net, const Dataset& train_set, const Dataset& eval_set,
              const TrainConfig& cfg);

// Re-runs a traced forward pass and names the first unit whose output holds a
// non-finite value ("loss" when everything upstream is clean).
std::string first_nan_layer(Network& net, const Tensor& x,
                            const std::vector<int>& labels);

}  // namespace antkit
