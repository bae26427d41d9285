#pragma once

#include <cstdint>

#include "antkit/conv.hpp"

namespace antkit::kernels {

// Runtime switch between the serial reference path and the OpenMP path. Both
// run the same per-element routine in the same order, so results are
// bit-identical; the switch exists for benchmarking and for the MAC counter.
bool& parallel_enabled();
bool omp_available();

// Multiply-accumulate instrumentation for the empirical cost oracle. While
// counting is enabled the kernels run serially and bump a single counter once
// per fused multiply-add in the forward conv/FC inner loops (the layers whose
// analytic MAdds the cost model reports).
bool& counting_enabled();
std::uint64_t mac_count();
void reset_mac_count();

struct ConvShape {
  ConvSpec spec;
  int n = 1, h1 = 0, w1 = 0;
  int h2() const { return spec.out_extent(h1); }
  int w2() const { return spec.out_extent(w1); }
};

void conv2d_forward(const ConvShape& cs, const double* x, const double* w,
                    const double* b, double* y);
void conv2d_grad_input(const ConvShape& cs, const double* gy, const double* w,
                       double* gx);
void conv2d_grad_weight(const ConvShape& cs, const double* gy, const double* x,
                        double* gw);
void conv2d_grad_bias(const ConvShape& cs, const double* gy, double* gb);

void fc_forward(int n, int cin, int cout, const double* x, const double* w,
                const double* b, double* y);
void fc_grad_input(int n, int cin, int cout, const double* gy, const double* w,
                   double* gx);
void fc_grad_weight(int n, int cin, int cout, const double* gy, const double* x,
                    double* gw);
void fc_grad_bias(int n, int cin, int cout, const double* gy, double* gb);

}  // namespace antkit::kernels
