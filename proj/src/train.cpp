#include "antkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "antkit/ops.hpp"

namespace antkit {

double lr_schedule(int epoch, const TrainConfig& cfg) {
  double lr = cfg.lr_init;
  for (int m : cfg.milestones)
    if (epoch >= m) lr *= cfg.lr_gamma;
  return lr;
}

void sgd_step(std::vector<NamedParam>& params, SgdState& state, double lr,
              const TrainConfig& cfg) {
  if (state.velocity.size() != params.size())
    state.velocity.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    NamedParam& p = params[i];
    std::vector<double>& value = p.tensor.data();
    std::vector<double>& grad = p.tensor.grad();
    std::vector<double>& v = state.velocity[i];
    if (v.size() != value.size()) v.assign(value.size(), 0.0);
    const double wd = p.decay ? cfg.weight_decay : 0.0;
    for (std::size_t j = 0; j < value.size(); ++j) {
      double g = grad[j] + wd * value[j];
      v[j] = cfg.momentum * v[j] + g;
      value[j] -= lr * (cfg.nesterov ? g + cfg.momentum * v[j] : v[j]);
    }
  }
}

std::string history_csv(const History& h) {
  std::ostringstream out;
  out << "epoch,lr,loss,train_acc,eval_acc\n";
  char buf[160];
  for (const auto& e : h.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.6f,%.6f\n", e.epoch, e.lr,
                  e.loss, e.train_acc, e.eval_acc);
    out << buf;
  }
  return out.str();
}

namespace {

Tensor batch_tensor(const Dataset& ds, const std::vector<int>& idx,
                    std::size_t begin, std::size_t end, bool do_augment,
                    const std::vector<double>& mean, std::mt19937_64& rng) {
  const int b = int(end - begin);
  Tensor x({b, ds.channels, ds.height, ds.width});
  double* dst = x.data().data();
  const std::size_t isize = ds.image_size();
  for (int j = 0; j < b; ++j) {
    const int i = idx[begin + j];
    if (do_augment) {
      Tensor a = augment(ds.image(i), mean, rng);
      std::copy(a.data().begin(), a.data().end(), dst + j * isize);
    } else {
      const double* src = ds.image_ptr(i);
      std::copy(src, src + isize, dst + j * isize);
    }
  }
  return x;
}

int correct_count(const Tensor& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0);
  const int c = logits.dim(1);
  int correct = 0;
  const auto& v = logits.data();
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < c; ++k)
      if (v[std::size_t(i) * c + k] > v[std::size_t(i) * c + best]) best = k;
    if (best == labels[i]) ++correct;
  }
  return correct;
}

}  // namespace

double evaluate(Network& net, const Dataset& ds, int batch_size) {
  if (ds.n == 0) return 0.0;
  std::vector<int> idx(ds.n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 dummy(0);
  int correct = 0;
  for (std::size_t b = 0; b < idx.size(); b += batch_size) {
    const std::size_t e = std::min(idx.size(), b + batch_size);
    Tensor x = batch_tensor(ds, idx, b, e, false, {}, dummy);
    Tensor logits = net.forward(x, false);
    std::vector<int> labels(idx.begin() + b, idx.begin() + e);
    for (auto& l : labels) l = ds.labels[l];
    correct += correct_count(logits, labels);
  }
  return double(correct) / ds.n;
}

std::string first_nan_layer(Network& net, const Tensor& x,
                            const std::vector<int>& labels) {
  std::vector<std::pair<std::string, Tensor>> trace;
  Tensor logits = net.forward(x, true, &trace, false);
  for (const auto& [name, t] : trace)
    for (double v : t.data())
      if (!std::isfinite(v)) return name;
  Tensor loss = ops::cross_entropy(logits, labels);
  if (!std::isfinite(loss.item())) return "loss";
  return "none";
}

History train(Network& net, const Dataset& train_set, const Dataset& eval_set,
              const TrainConfig& cfg) {
  if (train_set.n == 0) throw TrainError("training set is empty");
  if (cfg.batch_size < 1) throw TrainError("batch size must be >= 1");

  std::mt19937_64 rng(cfg.seed);
  auto& params = net.parameters();
  SgdState state;
  const std::vector<double> mean =
      cfg.augment ? channel_means(train_set) : std::vector<double>();

  History hist;
  std::vector<int> idx(train_set.n);
  std::iota(idx.begin(), idx.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::shuffle(idx.begin(), idx.end(), rng);

    double loss_sum = 0;
    int correct = 0;
    for (std::size_t b = 0; b < idx.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(idx.size(), b + cfg.batch_size);
      Tensor x = batch_tensor(train_set, idx, b, e, cfg.augment, mean, rng);
      std::vector<int> labels;
      for (std::size_t j = b; j < e; ++j)
        labels.push_back(train_set.labels[idx[j]]);

      Tensor logits = net.forward(x, true);
      Tensor loss = ops::cross_entropy(logits, labels);
      const double lval = loss.item();
      if (!std::isfinite(lval))
        throw TrainError("non-finite loss in epoch " + std::to_string(epoch) +
                         "; first non-finite layer: " +
                         first_nan_layer(net, x, labels));
      loss_sum += lval * double(e - b);
      correct += correct_count(logits, labels);

      for (auto& p : params) p.tensor.zero_grad();
      loss.backward();
      sgd_step(params, state, lr, cfg);
    }

    EpochStats st;
    st.epoch = epoch;
    st.lr = lr;
    st.loss = loss_sum / train_set.n;
    st.train_acc = double(correct) / train_set.n;
    st.eval_acc = eval_set.n > 0 ? evaluate(net, eval_set, cfg.batch_size)
                                 : st.train_acc;
    hist.epochs.push_back(st);
    if (cfg.target_train_acc > 0 && st.train_acc >= cfg.target_train_acc)
      break;
  }
  return hist;
}

}  // namespace antkit
