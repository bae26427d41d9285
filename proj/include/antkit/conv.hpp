#pragma once

#include <stdexcept>
#include <string>

namespace antkit {

// Output-channel-to-group assignment for group convolutions. Blocked is the
// contiguous layout every mainstream framework implements (group q owns output
// channels [q*C2/g, (q+1)*C2/g)). Interleaved assigns output channel c to
// group c mod g, so channel c reads the contiguous input slab starting at
// (c mod g)*(C1/g); stacking interleaved group convs self-shuffles the
// channels. Input channels are contiguous per group in both layouts.
enum class GroupLayout { blocked, interleaved };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int groups = 1;
  bool bias = false;
  GroupLayout layout = GroupLayout::blocked;

  bool depthwise() const {
    return groups == in_channels && in_channels == out_channels;
  }
  int out_extent(int in) const {
    return (in + 2 * padding - kernel) / stride + 1;
  }
  void validate() const {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1 ||
        padding < 0 || groups < 1)
      throw ConfigError("conv spec fields must be positive (padding >= 0)");
    if (in_channels % groups != 0 || out_channels % groups != 0)
      throw ConfigError("conv channels (" + std::to_string(in_channels) + "->" +
                        std::to_string(out_channels) + ") not divisible by groups " +
                        std::to_string(groups));
  }
};

}  // namespace antkit
