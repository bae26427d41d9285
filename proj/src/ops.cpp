#include "antkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "antkit/kernels.hpp"

namespace antkit::ops {

namespace {

bool g_track = false;
double g_margin = std::numeric_limits<double>::infinity();
std::uint64_t g_pattern = 1469598103934665603ull;  // FNV-1a offset basis

void note_segment(int seg, double margin) {
  if (margin < g_margin) g_margin = margin;
  g_pattern ^= static_cast<std::uint64_t>(seg + 1);
  g_pattern *= 1099511628211ull;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw TensorError(msg);
}

void require4d(const Tensor& x, const char* who) {
  require(x.ndim() == 4, std::string(who) + " expects an NxCxHxW tensor, got " +
                             shape_str(x.shape()));
}

}  // namespace

bool& track_activations() { return g_track; }

void reset_activation_stats() {
  g_margin = std::numeric_limits<double>::infinity();
  g_pattern = 1469598103934665603ull;
}

double kink_margin() { return g_margin; }
std::uint64_t activation_pattern() { return g_pattern; }

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias,
              const ConvSpec& spec) {
  spec.validate();
  require4d(x, "conv2d");
  require(w.ndim() == 4, "conv2d weight must be C2 x C1/g x K x K");
  const int c1 = spec.in_channels, c2 = spec.out_channels, k = spec.kernel;
  require(x.dim(1) == c1, "conv2d: input has " + std::to_string(x.dim(1)) +
                              " channels, spec says " + std::to_string(c1));
  require(w.dim(0) == c2 && w.dim(1) == c1 / spec.groups && w.dim(2) == k &&
              w.dim(3) == k,
          "conv2d: weight shape " + shape_str(w.shape()) + " does not match spec");
  require(!spec.bias == !bias, "conv2d: bias presence must match spec.bias");
  if (bias)
    require(bias->ndim() == 1 && bias->dim(0) == c2, "conv2d: bias must be [C2]");

  kernels::ConvShape cs{spec, x.dim(0), x.dim(2), x.dim(3)};
  const int h2 = cs.h2(), w2 = cs.w2();
  require(h2 >= 1 && w2 >= 1, "conv2d: output extent collapsed to zero");

  std::vector<double> y(static_cast<size_t>(cs.n) * c2 * h2 * w2);
  kernels::conv2d_forward(cs, x.data().data(), w.data().data(),
                          bias ? bias->data().data() : nullptr, y.data());

  std::vector<std::shared_ptr<TensorNode>> parents{x.ptr(), w.ptr()};
  if (bias) parents.push_back(bias->ptr());
  auto xp = x.ptr();
  auto wp = w.ptr();
  auto bp = bias ? bias->ptr() : nullptr;
  return make_result(
      {cs.n, c2, h2, w2}, std::move(y), std::move(parents),
      [cs, xp, wp, bp](TensorNode& out) {
        if (xp->needs_grad) {
          xp->ensure_grad();
          kernels::conv2d_grad_input(cs, out.grad.data(), wp->value.data(),
                                     xp->grad.data());
        }
        if (wp->needs_grad) {
          wp->ensure_grad();
          kernels::conv2d_grad_weight(cs, out.grad.data(), xp->value.data(),
                                      wp->grad.data());
        }
        if (bp && bp->needs_grad) {
          bp->ensure_grad();
          kernels::conv2d_grad_bias(cs, out.grad.data(), bp->grad.data());
        }
      });
}

Tensor fully_connected(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.ndim() == 2, "fully_connected expects NxC input, got " +
                             shape_str(x.shape()));
  const int n = x.dim(0), cin = x.dim(1);
  require(w.ndim() == 2 && w.dim(1) == cin,
          "fully_connected: weight " + shape_str(w.shape()) +
              " incompatible with input " + shape_str(x.shape()));
  const int cout = w.dim(0);
  require(b.ndim() == 1 && b.dim(0) == cout, "fully_connected: bias must be [Cout]");

  std::vector<double> y(static_cast<size_t>(n) * cout);
  kernels::fc_forward(n, cin, cout, x.data().data(), w.data().data(),
                      b.data().data(), y.data());

  auto xp = x.ptr();
  auto wp = w.ptr();
  auto bp = b.ptr();
  return make_result(
      {n, cout}, std::move(y), {xp, wp, bp},
      [n, cin, cout, xp, wp, bp](TensorNode& out) {
        if (xp->needs_grad) {
          xp->ensure_grad();
          kernels::fc_grad_input(n, cin, cout, out.grad.data(), wp->value.data(),
                                 xp->grad.data());
        }
        if (wp->needs_grad) {
          wp->ensure_grad();
          kernels::fc_grad_weight(n, cin, cout, out.grad.data(), xp->value.data(),
                                  wp->grad.data());
        }
        if (bp->needs_grad) {
          bp->ensure_grad();
          kernels::fc_grad_bias(n, cin, cout, out.grad.data(), bp->grad.data());
        }
      });
}

Tensor relu(const Tensor& x) {
  std::vector<double> y(x.data().size());
  for (size_t i = 0; i < y.size(); ++i) {
    const double v = x.data()[i];
    if (g_track) note_segment(v < 0.0 ? 0 : 1, std::fabs(v));
    y[i] = v > 0.0 ? v : 0.0;
  }
  auto xp = x.ptr();
  return make_result(x.shape(), std::move(y), {xp}, [xp](TensorNode& out) {
    if (!xp->needs_grad) return;
    xp->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i)
      if (xp->value[i] > 0.0) xp->grad[i] += out.grad[i];
  });
}

Tensor relu6(const Tensor& x) {
  std::vector<double> y(x.data().size());
  for (size_t i = 0; i < y.size(); ++i) {
    const double v = x.data()[i];
    if (g_track)
      note_segment(v < 0.0 ? 0 : (v > 6.0 ? 2 : 1),
                   std::min(std::fabs(v), std::fabs(v - 6.0)));
    y[i] = std::min(std::max(v, 0.0), 6.0);
  }
  auto xp = x.ptr();
  return make_result(x.shape(), std::move(y), {xp}, [xp](TensorNode& out) {
    if (!xp->needs_grad) return;
    xp->ensure_grad();
    // Subgradient 0 at both kinks.
    for (size_t i = 0; i < out.grad.size(); ++i) {
      const double v = xp->value[i];
      if (v > 0.0 && v < 6.0) xp->grad[i] += out.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> y(x.data().size());
  for (size_t i = 0; i < y.size(); ++i) {
    const double v = x.data()[i];
    // Branch on sign so neither exp overflows.
    if (v >= 0.0) {
      y[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      y[i] = e / (1.0 + e);
    }
  }
  auto xp = x.ptr();
  return make_result(x.shape(), std::move(y), {xp}, [xp](TensorNode& out) {
    if (!xp->needs_grad) return;
    xp->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i) {
      const double s = out.value[i];
      xp->grad[i] += out.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require4d(x, "global_avg_pool");
  const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<double> y(static_cast<size_t>(n) * c);
  for (int i = 0; i < n * c; ++i) {
    const double* src = x.data().data() + static_cast<size_t>(i) * hw;
    double acc = 0.0;
    for (int j = 0; j < hw; ++j) acc += src[j];
    y[static_cast<size_t>(i)] = acc / hw;
  }
  auto xp = x.ptr();
  return make_result({n, c, 1, 1}, std::move(y), {xp}, [xp, hw](TensorNode& out) {
    if (!xp->needs_grad) return;
    xp->ensure_grad();
    const double inv = 1.0 / hw;
    for (size_t i = 0; i < out.grad.size(); ++i) {
      double* dst = xp->grad.data() + i * hw;
      const double gi = out.grad[i] * inv;
      for (int j = 0; j < hw; ++j) dst[j] += gi;
    }
  });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean,
                  std::vector<double>& running_var, bool train,
                  bool update_running) {
  require4d(x, "batch_norm");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(gamma.ndim() == 1 && gamma.dim(0) == c && beta.ndim() == 1 &&
              beta.dim(0) == c,
          "batch_norm: gamma/beta must be [C]");
  require(running_mean.size() == static_cast<size_t>(c) &&
              running_var.size() == static_cast<size_t>(c),
          "batch_norm: running stats must be [C]");
  const int m = n * h * w;
  if (train && m < 2)
    throw TensorError("batch_norm: train mode needs N*H*W >= 2, got " +
                      std::to_string(m));

  constexpr double kEps = 1e-5;
  constexpr double kMomentum = 0.1;
  const int hw = h * w;

  std::vector<double> mean(c), inv_std(c);
  if (train) {
    std::vector<double> var(c, 0.0);
    for (int ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* src = x.data().data() + (static_cast<size_t>(ni) * c + ci) * hw;
        for (int j = 0; j < hw; ++j) acc += src[j];
      }
      mean[ci] = acc / m;
      double vacc = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* src = x.data().data() + (static_cast<size_t>(ni) * c + ci) * hw;
        for (int j = 0; j < hw; ++j) {
          const double d = src[j] - mean[ci];
          vacc += d * d;
        }
      }
      var[ci] = vacc / m;
      inv_std[ci] = 1.0 / std::sqrt(var[ci] + kEps);
    }
    if (update_running)
      for (int ci = 0; ci < c; ++ci) {
        running_mean[ci] = (1.0 - kMomentum) * running_mean[ci] + kMomentum * mean[ci];
        running_var[ci] = (1.0 - kMomentum) * running_var[ci] +
                          kMomentum * var[ci] * m / (m - 1);
      }
  } else {
    for (int ci = 0; ci < c; ++ci) {
      mean[ci] = running_mean[ci];
      inv_std[ci] = 1.0 / std::sqrt(running_var[ci] + kEps);
    }
  }

  std::vector<double> xhat(x.data().size());
  std::vector<double> y(x.data().size());
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const size_t base = (static_cast<size_t>(ni) * c + ci) * hw;
      const double g = gamma.data()[ci], b = beta.data()[ci];
      for (int j = 0; j < hw; ++j) {
        const double xh = (x.data()[base + j] - mean[ci]) * inv_std[ci];
        xhat[base + j] = xh;
        y[base + j] = g * xh + b;
      }
    }

  auto xp = x.ptr();
  auto gp = gamma.ptr();
  auto bp = beta.ptr();
  return make_result(
      x.shape(), std::move(y), {xp, gp, bp},
      [xp, gp, bp, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, hw,
       m, train](TensorNode& out) {
        std::vector<double> sum_gy(c, 0.0), sum_gy_xhat(c, 0.0);
        for (int ni = 0; ni < n; ++ni)
          for (int ci = 0; ci < c; ++ci) {
            const size_t base = (static_cast<size_t>(ni) * c + ci) * hw;
            for (int j = 0; j < hw; ++j) {
              sum_gy[ci] += out.grad[base + j];
              sum_gy_xhat[ci] += out.grad[base + j] * xhat[base + j];
            }
          }
        if (gp->needs_grad) {
          gp->ensure_grad();
          for (int ci = 0; ci < c; ++ci) gp->grad[ci] += sum_gy_xhat[ci];
        }
        if (bp->needs_grad) {
          bp->ensure_grad();
          for (int ci = 0; ci < c; ++ci) bp->grad[ci] += sum_gy[ci];
        }
        if (!xp->needs_grad) return;
        xp->ensure_grad();
        for (int ni = 0; ni < n; ++ni)
          for (int ci = 0; ci < c; ++ci) {
            const size_t base = (static_cast<size_t>(ni) * c + ci) * hw;
            const double k = gp->value[ci] * inv_std[ci];
            if (train) {
              const double mg = sum_gy[ci] / m, mgx = sum_gy_xhat[ci] / m;
              for (int j = 0; j < hw; ++j)
                xp->grad[base + j] +=
                    k * (out.grad[base + j] - mg - xhat[base + j] * mgx);
            } else {
              for (int j = 0; j < hw; ++j) xp->grad[base + j] += k * out.grad[base + j];
            }
          }
      });
}

Tensor softmax_vec(const Tensor& logits) {
  require(logits.ndim() == 1, "softmax_vec expects a 1-D tensor");
  const auto& v = logits.data();
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> y(v.size());
  double z = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    y[i] = std::exp(v[i] - mx);
    z += y[i];
  }
  for (double& e : y) e /= z;
  auto xp = logits.ptr();
  return make_result(logits.shape(), std::move(y), {xp}, [xp](TensorNode& out) {
    if (!xp->needs_grad) return;
    xp->ensure_grad();
    double dotv = 0.0;
    for (size_t i = 0; i < out.grad.size(); ++i) dotv += out.grad[i] * out.value[i];
    for (size_t i = 0; i < out.grad.size(); ++i)
      xp->grad[i] += (out.grad[i] - dotv) * out.value[i];
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require(logits.ndim() == 2, "cross_entropy expects NxC logits");
  const int n = logits.dim(0), c = logits.dim(1);
  require(static_cast<int>(labels.size()) == n,
          "cross_entropy: need one label per row");
  for (int l : labels)
    require(l >= 0 && l < c, "cross_entropy: label out of range");

  std::vector<double> probs(logits.data().size());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data().data() + static_cast<size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j < c; ++j)
      probs[static_cast<size_t>(i) * c + j] = std::exp(row[j] - lse);
    loss += lse - row[labels[static_cast<size_t>(i)]];
  }
  loss /= n;

  auto xp = logits.ptr();
  return make_result(
      {1}, {loss}, {xp},
      [xp, probs = std::move(probs), labels, n, c](TensorNode& out) {
        if (!xp->needs_grad) return;
        xp->ensure_grad();
        const double g = out.grad[0] / n;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < c; ++j) {
            const size_t k = static_cast<size_t>(i) * c + j;
            xp->grad[k] += g * (probs[k] - (labels[static_cast<size_t>(i)] == j ? 1.0 : 0.0));
          }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  std::vector<double> y(a.data().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  auto ap = a.ptr();
  auto bp = b.ptr();
  return make_result(a.shape(), std::move(y), {ap, bp}, [ap, bp](TensorNode& out) {
    for (const auto& p : {ap, bp}) {
      if (!p->needs_grad) continue;
      p->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i) p->grad[i] += out.grad[i];
    }
  });
}

Tensor channel_scale(const Tensor& u, const Tensor& m) {
  require4d(u, "channel_scale");
  const int n = u.dim(0), c = u.dim(1), hw = u.dim(2) * u.dim(3);
  require(m.ndim() == 4 && m.dim(0) == n && m.dim(1) == c && m.dim(2) == 1 &&
              m.dim(3) == 1,
          "channel_scale: mask must be [N,C,1,1] matching the map");
  std::vector<double> y(u.data().size());
  for (int i = 0; i < n * c; ++i) {
    const double s = m.data()[static_cast<size_t>(i)];
    const double* src = u.data().data() + static_cast<size_t>(i) * hw;
    double* dst = y.data() + static_cast<size_t>(i) * hw;
    for (int j = 0; j < hw; ++j) dst[j] = src[j] * s;
  }
  auto up = u.ptr();
  auto mp = m.ptr();
  return make_result(u.shape(), std::move(y), {up, mp},
                     [up, mp, n, c, hw](TensorNode& out) {
                       if (up->needs_grad) {
                         up->ensure_grad();
                         for (int i = 0; i < n * c; ++i) {
                           const double s = mp->value[static_cast<size_t>(i)];
                           for (int j = 0; j < hw; ++j)
                             up->grad[static_cast<size_t>(i) * hw + j] +=
                                 out.grad[static_cast<size_t>(i) * hw + j] * s;
                         }
                       }
                       if (mp->needs_grad) {
                         mp->ensure_grad();
                         for (int i = 0; i < n * c; ++i) {
                           double acc = 0.0;
                           for (int j = 0; j < hw; ++j)
                             acc += out.grad[static_cast<size_t>(i) * hw + j] *
                                    up->value[static_cast<size_t>(i) * hw + j];
                           mp->grad[static_cast<size_t>(i)] += acc;
                         }
                       }
                     });
}

Tensor scale_by_component(const Tensor& t, const Tensor& w, int j) {
  require(w.ndim() == 1 && j >= 0 && j < w.dim(0),
          "scale_by_component: index out of range");
  const double s = w.data()[static_cast<size_t>(j)];
  std::vector<double> y(t.data().size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = t.data()[i] * s;
  auto tp = t.ptr();
  auto wp = w.ptr();
  return make_result(t.shape(), std::move(y), {tp, wp}, [tp, wp, j](TensorNode& out) {
    const double s = wp->value[static_cast<size_t>(j)];
    if (tp->needs_grad) {
      tp->ensure_grad();
      for (size_t i = 0; i < out.grad.size(); ++i) tp->grad[i] += out.grad[i] * s;
    }
    if (wp->needs_grad) {
      wp->ensure_grad();
      double acc = 0.0;
      for (size_t i = 0; i < out.grad.size(); ++i) acc += out.grad[i] * tp->value[i];
      wp->grad[static_cast<size_t>(j)] += acc;
    }
  });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: element count mismatch for " + shape_str(shape));
  auto xp = x.ptr();
  return make_result(std::move(shape), x.data(), {xp}, [xp](TensorNode& out) {
    if (!xp->needs_grad) return;
    xp->ensure_grad();
    for (size_t i = 0; i < out.grad.size(); ++i) xp->grad[i] += out.grad[i];
  });
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto xp = x.ptr();
  return make_result({1}, {acc}, {xp}, [xp](TensorNode& out) {
    if (!xp->needs_grad) return;
    xp->ensure_grad();
    for (double& g : xp->grad) g += out.grad[0];
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require(a.numel() == b.numel(), "dot: element count mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) acc += a.data()[i] * b.data()[i];
  auto ap = a.ptr();
  auto bp = b.ptr();
  return make_result({1}, {acc}, {ap, bp}, [ap, bp](TensorNode& out) {
    const double g = out.grad[0];
    if (ap->needs_grad) {
      ap->ensure_grad();
      for (size_t i = 0; i < ap->grad.size(); ++i) ap->grad[i] += g * bp->value[i];
    }
    if (bp->needs_grad) {
      bp->ensure_grad();
      for (size_t i = 0; i < bp->grad.size(); ++i) bp->grad[i] += g * ap->value[i];
    }
  });
}

}  // namespace antkit::ops
