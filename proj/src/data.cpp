#include "antkit/data.hpp"

#include <cmath>
#include <fstream>

namespace antkit {

Tensor Dataset::image(int i) const {
  if (i < 0 || i >= n) throw TensorError("dataset image index out of range");
  Tensor t({channels, height, width});
  const double* src = image_ptr(i);
  std::copy(src, src + image_size(), t.data().begin());
  return t;
}

Dataset load_cifar100_binary(const std::string& path, int max_items) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file: " + path);
  in.seekg(0, std::ios::end);
  const std::streamoff file_size = in.tellg();
  in.seekg(0);

  constexpr std::streamoff record = 2 + 3 * 32 * 32;
  if (file_size % record != 0)
    throw FormatError("truncated record in " + path + ": file size " +
                      std::to_string(file_size) + ", trailing " +
                      std::to_string(file_size % record) +
                      " bytes at byte offset " +
                      std::to_string((file_size / record) * record));
  int total = int(file_size / record);
  if (max_items >= 0) total = std::min(total, max_items);

  Dataset ds;
  ds.n = total;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.split = "cifar100";
  ds.pixels.resize(std::size_t(total) * 3 * 32 * 32);
  ds.labels.resize(total);

  std::vector<unsigned char> buf(record);
  for (int i = 0; i < total; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), record))
      throw FormatError("read failure in " + path + " at byte offset " +
                        std::to_string(std::streamoff(i) * record));
    const int fine = buf[1];
    if (fine > 99)
      throw FormatError("fine label " + std::to_string(fine) +
                        " out of range at byte offset " +
                        std::to_string(std::streamoff(i) * record + 1));
    ds.labels[i] = fine;
    double* dst = ds.pixels.data() + std::size_t(i) * 3 * 32 * 32;
    for (std::size_t p = 0; p < 3 * 32 * 32; ++p)
      dst[p] = buf[2 + p] / 255.0;
  }
  return ds;
}

Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.classes < 1 || spec.per_class < 0 || spec.size < 1 ||
      spec.channels < 1)
    throw FormatError("synthetic dataset spec out of range");
  Dataset ds;
  ds.n = spec.classes * spec.per_class;
  ds.channels = spec.channels;
  ds.height = spec.size;
  ds.width = spec.size;
  ds.split = "synth";
  ds.pixels.resize(std::size_t(ds.n) * ds.image_size());
  ds.labels.resize(ds.n);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double tau = 2.0 * 3.14159265358979323846;

  int idx = 0;
  for (int k = 0; k < spec.classes; ++k) {
    const int fy = 1 + k % 4;
    const int fx = 1 + (k / 4) % 4;
    const double phase = k * 0.448;
    for (int j = 0; j < spec.per_class; ++j, ++idx) {
      ds.labels[idx] = k;
      double* img = ds.pixels.data() + std::size_t(idx) * ds.image_size();
      for (int c = 0; c < spec.channels; ++c) {
        const double offset =
            0.35 * (k + 1.0) / spec.classes * (c + 1.0) / spec.channels;
        for (int y = 0; y < spec.size; ++y)
          for (int x = 0; x < spec.size; ++x) {
            double v = 0.5 + offset +
                       0.15 * std::sin(tau * (fy * y + fx * x) / spec.size +
                                       phase);
            if (spec.noise > 0) v += spec.noise * gauss(rng);
            img[(std::size_t(c) * spec.size + y) * spec.size + x] = v;
          }
      }
    }
  }
  return ds;
}

std::vector<double> channel_means(const Dataset& ds) {
  std::vector<double> mean(ds.channels, 0.0);
  if (ds.n == 0) return mean;
  const std::size_t plane = std::size_t(ds.height) * ds.width;
  for (int i = 0; i < ds.n; ++i) {
    const double* img = ds.image_ptr(i);
    for (int c = 0; c < ds.channels; ++c)
      for (std::size_t p = 0; p < plane; ++p) mean[c] += img[c * plane + p];
  }
  for (double& m : mean) m /= double(ds.n) * plane;
  return mean;
}

std::vector<double> pad_crop_flip(const std::vector<double>& chw, int channels,
                                  int dy, int dx, bool flip) {
  constexpr int s = 32, pad = 4;
  if (chw.size() != std::size_t(channels) * s * s)
    throw TensorError("augmentation expects a Cx32x32 image");
  if (dy < 0 || dy > 2 * pad || dx < 0 || dx > 2 * pad)
    throw TensorError("crop offset out of the padded range");
  std::vector<double> out(chw.size(), 0.0);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < s; ++y) {
      const int sy = y + dy - pad;  // source row in the unpadded image
      if (sy < 0 || sy >= s) continue;
      for (int x = 0; x < s; ++x) {
        const int sx = x + dx - pad;
        if (sx < 0 || sx >= s) continue;
        const int ox = flip ? s - 1 - x : x;
        out[(std::size_t(c) * s + y) * s + ox] =
            chw[(std::size_t(c) * s + sy) * s + sx];
      }
    }
  return out;
}

Tensor augment(const Tensor& image, const std::vector<double>& mean,
               std::mt19937_64& rng) {
  const auto& shape = image.shape();
  if (shape.size() != 3 || shape[1] != 32 || shape[2] != 32)
    throw TensorError("augmentation expects a [C,32,32] image, got " +
                      shape_str(shape));
  const int channels = shape[0];
  if (int(mean.size()) != channels)
    throw TensorError("channel mean size mismatch");
  std::uniform_int_distribution<int> off(0, 8);
  const int dy = off(rng);
  const int dx = off(rng);
  const bool flip = (rng() & 1u) != 0;
  std::vector<double> v = pad_crop_flip(image.data(), channels, dy, dx, flip);
  for (int c = 0; c < channels; ++c)
    for (int p = 0; p < 32 * 32; ++p) v[std::size_t(c) * 32 * 32 + p] -= mean[c];
  Tensor out({channels, 32, 32});
  out.data() = std::move(v);
  return out;
}

}  // namespace antkit
