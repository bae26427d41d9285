#include "antkit/kernels.hpp"

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace antkit::kernels {

bool omp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

bool& parallel_enabled() {
  static bool on = omp_available();
  return on;
}

bool& counting_enabled() {
  static bool on = false;
  return on;
}

static std::uint64_t g_macs = 0;

std::uint64_t mac_count() { return g_macs; }
void reset_mac_count() { g_macs = 0; }

static int out_group(const ConvSpec& s, int co) {
  return s.layout == GroupLayout::blocked ? co / (s.out_channels / s.groups)
                                          : co % s.groups;
}

// Zero-padded copy of one image. Padding the input up front lets every output
// element run the full KxK window unconditionally, which is what makes the
// counted MACs equal the analytic C2*(C1/g)*K^2*H2*W2 exactly.
static std::vector<double> pad_input(const ConvShape& cs, const double* x) {
  const int c1 = cs.spec.in_channels, p = cs.spec.padding;
  const int hp = cs.h1 + 2 * p, wp = cs.w1 + 2 * p;
  std::vector<double> xp(static_cast<size_t>(cs.n) * c1 * hp * wp, 0.0);
  for (int n = 0; n < cs.n; ++n)
    for (int c = 0; c < c1; ++c)
      for (int h = 0; h < cs.h1; ++h) {
        const double* src = x + ((static_cast<size_t>(n) * c1 + c) * cs.h1 + h) * cs.w1;
        double* dst = xp.data() +
                      ((static_cast<size_t>(n) * c1 + c) * hp + h + p) * wp + p;
        for (int w = 0; w < cs.w1; ++w) dst[w] = src[w];
      }
  return xp;
}

void conv2d_forward(const ConvShape& cs, const double* x, const double* w,
                    const double* b, double* y) {
  const ConvSpec& s = cs.spec;
  const int c1 = s.in_channels, c2 = s.out_channels, k = s.kernel;
  const int g = s.groups, c1g = c1 / g, st = s.stride, p = s.padding;
  const int h2 = cs.h2(), w2 = cs.w2();
  const int hp = cs.h1 + 2 * p, wp = cs.w1 + 2 * p;
  const std::vector<double> xp = pad_input(cs, x);
  const double* xpd = xp.data();

  const bool count = counting_enabled();
  const bool par = parallel_enabled() && !count;
  std::uint64_t* macs = count ? &g_macs : nullptr;

#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int n = 0; n < cs.n; ++n)
    for (int co = 0; co < c2; ++co) {
      const int ci0 = out_group(s, co) * c1g;
      const double* wrow = w + static_cast<size_t>(co) * c1g * k * k;
      for (int ho = 0; ho < h2; ++ho)
        for (int wo = 0; wo < w2; ++wo) {
          double acc = b ? b[co] : 0.0;
          for (int ci = 0; ci < c1g; ++ci) {
            const double* xc = xpd + ((static_cast<size_t>(n) * c1 + ci0 + ci) * hp +
                                      ho * st) * wp + wo * st;
            const double* wc = wrow + static_cast<size_t>(ci) * k * k;
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                acc += xc[kh * wp + kw] * wc[kh * k + kw];
                if (macs) ++*macs;
              }
          }
          y[((static_cast<size_t>(n) * c2 + co) * h2 + ho) * w2 + wo] = acc;
        }
    }
}

void conv2d_grad_input(const ConvShape& cs, const double* gy, const double* w,
                       double* gx) {
  const ConvSpec& s = cs.spec;
  const int c1 = s.in_channels, c2 = s.out_channels, k = s.kernel;
  const int g = s.groups, c1g = c1 / g, c2g = c2 / g, st = s.stride, p = s.padding;
  const int h2 = cs.h2(), w2 = cs.w2();
  const bool par = parallel_enabled() && !counting_enabled();

  // Gather form: each thread owns one input element, so writes are disjoint
  // and the accumulation order matches the serial path.
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int n = 0; n < cs.n; ++n)
    for (int ci = 0; ci < c1; ++ci) {
      const int q = ci / c1g, cil = ci % c1g;
      for (int hi = 0; hi < cs.h1; ++hi)
        for (int wi = 0; wi < cs.w1; ++wi) {
          double acc = 0.0;
          for (int j = 0; j < c2g; ++j) {
            const int co = s.layout == GroupLayout::blocked ? q * c2g + j : q + j * g;
            const double* wc = w + (static_cast<size_t>(co) * c1g + cil) * k * k;
            for (int kh = 0; kh < k; ++kh) {
              const int hos = hi + p - kh;
              if (hos < 0 || hos % st != 0) continue;
              const int ho = hos / st;
              if (ho >= h2) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int wos = wi + p - kw;
                if (wos < 0 || wos % st != 0) continue;
                const int wo = wos / st;
                if (wo >= w2) continue;
                acc += gy[((static_cast<size_t>(n) * c2 + co) * h2 + ho) * w2 + wo] *
                       wc[kh * k + kw];
              }
            }
          }
          gx[((static_cast<size_t>(n) * c1 + ci) * cs.h1 + hi) * cs.w1 + wi] += acc;
        }
    }
}

void conv2d_grad_weight(const ConvShape& cs, const double* gy, const double* x,
                        double* gw) {
  const ConvSpec& s = cs.spec;
  const int c1 = s.in_channels, c2 = s.out_channels, k = s.kernel;
  const int g = s.groups, c1g = c1 / g, st = s.stride, p = s.padding;
  const int h2 = cs.h2(), w2 = cs.w2();
  const int hp = cs.h1 + 2 * p, wp = cs.w1 + 2 * p;
  const std::vector<double> xp = pad_input(cs, x);
  const double* xpd = xp.data();
  const bool par = parallel_enabled() && !counting_enabled();

#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int co = 0; co < c2; ++co)
    for (int cil = 0; cil < c1g; ++cil) {
      const int ci = out_group(s, co) * c1g + cil;
      for (int kh = 0; kh < k; ++kh)
        for (int kw = 0; kw < k; ++kw) {
          double acc = 0.0;
          for (int n = 0; n < cs.n; ++n) {
            const double* xc =
                xpd + ((static_cast<size_t>(n) * c1 + ci) * hp + kh) * wp + kw;
            const double* gyc =
                gy + (static_cast<size_t>(n) * c2 + co) * h2 * w2;
            for (int ho = 0; ho < h2; ++ho)
              for (int wo = 0; wo < w2; ++wo)
                acc += gyc[ho * w2 + wo] * xc[(ho * st) * wp + wo * st];
          }
          gw[((static_cast<size_t>(co) * c1g + cil) * k + kh) * k + kw] += acc;
        }
    }
}

void conv2d_grad_bias(const ConvShape& cs, const double* gy, double* gb) {
  const int c2 = cs.spec.out_channels;
  const int hw = cs.h2() * cs.w2();
  for (int n = 0; n < cs.n; ++n)
    for (int co = 0; co < c2; ++co) {
      const double* gyc = gy + (static_cast<size_t>(n) * c2 + co) * hw;
      double acc = 0.0;
      for (int i = 0; i < hw; ++i) acc += gyc[i];
      gb[co] += acc;
    }
}

void fc_forward(int n, int cin, int cout, const double* x, const double* w,
                const double* b, double* y) {
  const bool count = counting_enabled();
  const bool par = parallel_enabled() && !count;
  std::uint64_t* macs = count ? &g_macs : nullptr;

#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int i = 0; i < n; ++i)
    for (int co = 0; co < cout; ++co) {
      double acc = b ? b[co] : 0.0;
      const double* xi = x + static_cast<size_t>(i) * cin;
      const double* wc = w + static_cast<size_t>(co) * cin;
      for (int ci = 0; ci < cin; ++ci) {
        acc += xi[ci] * wc[ci];
        if (macs) ++*macs;
      }
      y[static_cast<size_t>(i) * cout + co] = acc;
    }
}

void fc_grad_input(int n, int cin, int cout, const double* gy, const double* w,
                   double* gx) {
  const bool par = parallel_enabled() && !counting_enabled();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int i = 0; i < n; ++i)
    for (int ci = 0; ci < cin; ++ci) {
      double acc = 0.0;
      for (int co = 0; co < cout; ++co)
        acc += gy[static_cast<size_t>(i) * cout + co] *
               w[static_cast<size_t>(co) * cin + ci];
      gx[static_cast<size_t>(i) * cin + ci] += acc;
    }
}

void fc_grad_weight(int n, int cin, int cout, const double* gy, const double* x,
                    double* gw) {
  const bool par = parallel_enabled() && !counting_enabled();
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += gy[static_cast<size_t>(i) * cout + co] *
               x[static_cast<size_t>(i) * cin + ci];
      gw[static_cast<size_t>(co) * cin + ci] += acc;
    }
}

void fc_grad_bias(int n, int cin, int cout, const double* gy, double* gb) {
  (void)cin;
  for (int co = 0; co < cout; ++co) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += gy[static_cast<size_t>(i) * cout + co];
    gb[co] += acc;
  }
}

}  // namespace antkit::kernels
