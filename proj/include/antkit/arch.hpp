#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "antkit/blocks.hpp"
#include "antkit/errors.hpp"

namespace antkit {

enum class StageOp {
  conv2d,
  antblock,
  e_antblock,
  inverted_residual,
  conv1x1,
  avgpool,
  fc,
};

const char* stage_op_name(StageOp op);
StageOp stage_op_from(const std::string& s);

struct StageSpec {
  std::string name;
  StageOp op = StageOp::conv2d;
  int out_channels = 0;
  int n = 1;  // repetitions; stride applies to the first, the rest use 1
  int s = 1;
  int t = 1;                       // expansion factor
  int r = 0;                       // attention reduction ratio; 0 = none
  int g = 1;                       // projection groups
  Placement placement = Placement::none;
  std::vector<int> branch_groups;  // e_antblock branches, one g per branch
  bool share_trunk = false;        // e_antblock: branches share expand/dw/attn

  bool attention() const {
    return (op == StageOp::antblock || op == StageOp::e_antblock) &&
           placement != Placement::none;
  }
  bool block_like() const {
    return op == StageOp::antblock || op == StageOp::e_antblock ||
           op == StageOp::inverted_residual;
  }
  bool operator==(const StageSpec&) const = default;
};

struct NetworkSpec {
  std::string name;
  std::array<int, 3> input_shape{3, 224, 224};  // C,H,W
  int num_classes = 1000;
  double alpha = 1.0;
  std::vector<StageSpec> stages;

  bool operator==(const NetworkSpec&) const = default;
};

// Channel counts and spatial extents per stage after width scaling.
struct ResolvedStage {
  StageSpec stage;
  int in_channels = 0;
  int out_channels = 0;
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;
};

// Torchvision-style divisibility rounding: nearest multiple, floored at the
// divisor, bumped up one step if rounding lost more than 10%.
int make_divisible(double v, int divisor);

std::vector<ResolvedStage> resolve(const NetworkSpec& spec);

// strict_attention_divisibility additionally demands r | C' at every block,
// the published-table situation. Builders with irregular ratios rely on the
// floor rule instead and skip it.
void validate_spec(const NetworkSpec& spec, bool strict_attention_divisibility);

NetworkSpec antnet_imagenet(int g, double alpha = 1.0);
NetworkSpec antnet_cifar(int g);
NetworkSpec antnet_cifar_fixed_r(int r);  // one reduction ratio everywhere
NetworkSpec mobilenet_v2_imagenet();
NetworkSpec mobilenet_v2_cifar();
NetworkSpec e_antnet_cifar(bool share_trunk = false);

// Desk-scale variant: every repetition capped at 1 and channels quartered
// (rounded to widths compatible with each stage's attention ratio).
NetworkSpec reduce_spec(const NetworkSpec& spec);

// Strict parsing additionally demands r | C' at every attended block, the
// published-table situation; round-tripped specs of built networks (width
// reductions, checkpoints) rely on the floor rule and parse non-strict.
NetworkSpec parse_spec(const std::string& text,
                       bool strict_attention_divisibility = true);
std::string emit_spec(const NetworkSpec& spec);
NetworkSpec load_spec(const std::string& path);

// Executable-unit name for repetition k of a stage: "ant2.1", or the bare
// stage name when the stage is not repeated.
std::string rep_name(const StageSpec& st, int k);

struct NamedParam {
  std::string name;
  Tensor tensor;
  bool decay = false;  // participates in weight decay
};

struct NamedStat {
  std::string name;
  std::vector<double>* values = nullptr;
};

class Network {
 public:
  Network(const NetworkSpec& spec, std::uint64_t seed);

  Tensor forward(const Tensor& x, bool train,
                 std::vector<std::pair<std::string, Tensor>>* trace = nullptr,
                 bool update_running = true);

  std::vector<NamedParam>& parameters() { return params_; }
  std::vector<NamedStat> running_stats();
  std::vector<Tensor> lambdas();
  const NetworkSpec& spec() const { return spec_; }
  const std::vector<ResolvedStage>& resolved() const { return resolved_; }

 private:
  struct Unit {  // one executable layer (stage repetition)
    std::string name;
    StageOp op;
    std::optional<ConvBN> conv;           // conv2d / conv1x1, relu6 after
    std::optional<AntBlockParams> block;  // antblock / inverted_residual
    std::optional<EAntBlockParams> eblock;
    Tensor fc_w, fc_b;
  };

  void register_conv_bn(const std::string& name, ConvBN& l);
  void register_attention(const std::string& name, AttentionParams& a);
  void register_block(const std::string& name, AntBlockParams& p);

  NetworkSpec spec_;
  std::vector<ResolvedStage> resolved_;
  std::vector<Unit> units_;
  std::vector<NamedParam> params_;
};

}  // namespace antkit
