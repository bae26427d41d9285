#pragma once

#include <cstdint>
#include <vector>

#include "antkit/conv.hpp"
#include "antkit/tensor.hpp"

namespace antkit::ops {

// Finite-difference gradient checks must stay away from ReLU/ReLU6 kinks.
// While tracking is on, the activation ops record (a) the smallest distance of
// any pre-activation to a kink and (b) an order-sensitive hash of the linear
// segment every element landed in. Two evaluations whose pattern hashes differ
// straddle a kink and are not comparable by central differences.
bool& track_activations();
void reset_activation_stats();
double kink_margin();
std::uint64_t activation_pattern();

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias,
              const ConvSpec& spec);
Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor relu6(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor global_avg_pool(const Tensor& x);

// Train mode normalizes with batch statistics (N*H*W >= 2 required) and, when
// update_running is set, folds them into the running estimates with momentum
// 0.1 (unbiased variance, reference-framework convention). Eval mode applies
// the running estimates. Epsilon is fixed at 1e-5.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean,
                  std::vector<double>& running_var, bool train,
                  bool update_running = true);

Tensor softmax_vec(const Tensor& logits);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor add(const Tensor& a, const Tensor& b);
// u: [N,C,H,W], m: [N,C,1,1]; channel-wise broadcast product.
Tensor channel_scale(const Tensor& u, const Tensor& m);
// y = t * w[j]; gradients flow to both t and the selected component of w.
Tensor scale_by_component(const Tensor& t, const Tensor& w, int j);
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor sum_all(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);

}  // namespace antkit::ops
