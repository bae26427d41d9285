// Times the convolution and fully-connected kernels with the OpenMP path
// enabled and disabled. The serial path is the reference implementation the
// tests compare against, so the speedup here is the whole point of keeping
// two paths around.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "antkit/kernels.hpp"

using namespace antkit;
using namespace antkit::kernels;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

struct Case {
  const char* name;
  ConvShape shape;
};

void report(const char* name, double sf, double pf, double sb, double pb) {
  std::printf(
      "%-28s fwd %8.2f ms -> %8.2f ms (%4.1fx)   bwd %8.2f ms -> %8.2f ms "
      "(%4.1fx)\n",
      name, sf, pf, sf / pf, sb, pb, sb / pb);
}

void bench_conv(const Case& c, std::mt19937_64& rng) {
  const ConvShape& s = c.shape;
  const ConvSpec& sp = s.spec;
  const int h2 = s.h2(), w2 = s.w2();
  auto x = randn(std::size_t(s.n) * sp.in_channels * s.h1 * s.w1, rng);
  auto w = randn(std::size_t(sp.out_channels) * (sp.in_channels / sp.groups) *
                     sp.kernel * sp.kernel,
                 rng);
  std::vector<double> y(std::size_t(s.n) * sp.out_channels * h2 * w2);
  std::vector<double> gx(x.size()), gw(w.size());
  auto gy = randn(y.size(), rng);

  double sf, sb, pf, pb;
  parallel_enabled() = false;
  sf = time_ms(3, [&] { conv2d_forward(s, x.data(), w.data(), nullptr, y.data()); });
  sb = time_ms(3, [&] {
    conv2d_grad_input(s, gy.data(), w.data(), gx.data());
    conv2d_grad_weight(s, gy.data(), x.data(), gw.data());
  });
  parallel_enabled() = true;
  pf = time_ms(3, [&] { conv2d_forward(s, x.data(), w.data(), nullptr, y.data()); });
  pb = time_ms(3, [&] {
    conv2d_grad_input(s, gy.data(), w.data(), gx.data());
    conv2d_grad_weight(s, gy.data(), x.data(), gw.data());
  });
  report(c.name, sf, pf, sb, pb);
}

void bench_fc(int n, int cin, int cout, std::mt19937_64& rng) {
  auto x = randn(std::size_t(n) * cin, rng);
  auto w = randn(std::size_t(cout) * cin, rng);
  auto b = randn(cout, rng);
  std::vector<double> y(std::size_t(n) * cout), gx(x.size()), gw(w.size());
  auto gy = randn(y.size(), rng);

  double sf, sb, pf, pb;
  parallel_enabled() = false;
  sf = time_ms(5, [&] { fc_forward(n, cin, cout, x.data(), w.data(), b.data(), y.data()); });
  sb = time_ms(5, [&] {
    fc_grad_input(n, cin, cout, gy.data(), w.data(), gx.data());
    fc_grad_weight(n, cin, cout, gy.data(), x.data(), gw.data());
  });
  parallel_enabled() = true;
  pf = time_ms(5, [&] { fc_forward(n, cin, cout, x.data(), w.data(), b.data(), y.data()); });
  pb = time_ms(5, [&] {
    fc_grad_input(n, cin, cout, gy.data(), w.data(), gx.data());
    fc_grad_weight(n, cin, cout, gy.data(), x.data(), gw.data());
  });
  report("fc 64x1280 -> 100", sf, pf, sb, pb);
}

}  // namespace

int main() {
  std::printf("OpenMP %s, %u hardware threads\n",
              omp_available() ? "available" : "not compiled in",
              std::thread::hardware_concurrency());
  std::mt19937_64 rng(7);

  std::vector<Case> cases = {
      {"conv3x3 s2 3->32 224^2", {{3, 32, 3, 2, 1, 1, false}, 1, 224, 224}},
      {"dw3x3 s1 144 56^2", {{144, 144, 3, 1, 1, 144, false}, 1, 56, 56}},
      {"conv1x1 g1 144->24 56^2", {{144, 24, 1, 1, 0, 1, false}, 1, 56, 56}},
      {"conv1x1 g2 192->32 28^2", {{192, 32, 1, 1, 0, 2, false}, 1, 28, 28}},
      {"conv1x1 320->1280 7^2", {{320, 1280, 1, 1, 0, 1, false}, 1, 7, 7}},
  };
  for (const auto& c : cases) bench_conv(c, rng);
  bench_fc(64, 1280, 100, rng);
  parallel_enabled() = true;
  return 0;
}
