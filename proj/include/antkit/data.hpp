#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "antkit/errors.hpp"
#include "antkit/tensor.hpp"

namespace antkit {

struct Dataset {
  int n = 0, channels = 0, height = 0, width = 0;
  std::vector<double> pixels;  // n*channels*height*width, CHW per image
  std::vector<int> labels;
  std::string split;

  std::size_t image_size() const {
    return std::size_t(channels) * height * width;
  }
  const double* image_ptr(int i) const {
    return pixels.data() + std::size_t(i) * image_size();
  }
  Tensor image(int i) const;  // [C,H,W] copy
};

// CIFAR-100 binary layout: per record one coarse label byte, one fine label
// byte, then 3072 pixel bytes (R,G,B planes, row-major 32x32). Fine labels
// kept; pixels scaled to [0,1]. max_items < 0 reads everything.
Dataset load_cifar100_binary(const std::string& path, int max_items = -1);

struct SynthSpec {
  int classes = 2;
  int per_class = 32;
  int size = 32;
  int channels = 3;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

// Deterministic separable classes: each class is a fixed oriented grating
// (integer frequencies, so it averages out exactly) on top of a distinct
// per-class channel offset, plus Gaussian noise. At zero noise the channel
// means separate the classes linearly and a nearest-centroid rule is exact.
Dataset synth_dataset(const SynthSpec& spec);

std::vector<double> channel_means(const Dataset& ds);

// Deterministic core of the augmentation: zero-pad 4 on every side, crop a
// 32x32 window at (dy,dx) in [0,8]^2, optionally mirror horizontally.
std::vector<double> pad_crop_flip(const std::vector<double>& chw, int channels,
                                  int dy, int dx, bool flip);

// Training pipeline: random crop, coin-flip mirror, channel-mean subtraction.
// Draw order: dy, dx, flip. Input must be [C,32,32].
Tensor augment(const Tensor& image, const std::vector<double>& mean,
               std::mt19937_64& rng);

}  // namespace antkit
