#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "antkit/conv.hpp"
#include "antkit/ops.hpp"
#include "antkit/tensor.hpp"

namespace antkit {

// Where the channel-attention unit sits relative to the expand/depthwise/
// project pipeline. between is the proposed design; before_expansion and
// after_projection are the ablation variants; none is the plain inverted
// residual baseline.
enum class Placement { between, before_expansion, after_projection, none };
enum class AttnNonlin { relu, none };

const char* placement_name(Placement p);
Placement placement_from(const std::string& s);

// Attention bottleneck width. Floor division clamped to >= 1, matching the
// reference squeeze-excitation implementations; identical to exact division
// whenever r divides the channel count.
int attention_hidden(int channels, int r);

struct BlockConfig {
  int in_channels = 0;
  int out_channels = 0;
  int expansion = 1;
  int stride = 1;
  int groups = 1;
  int reduction = 1;
  Placement placement = Placement::between;
  AttnNonlin attn_nonlin = AttnNonlin::relu;
  bool attn_bias = true;
  GroupLayout proj_layout = GroupLayout::blocked;

  int expanded() const { return in_channels * expansion; }
  bool has_attention() const { return placement != Placement::none; }
  // Channel count the attention unit sees at its placement.
  int attention_channels() const;
  bool residual() const { return stride == 1 && in_channels == out_channels; }
  void validate() const;
};

struct ConvBN {
  ConvSpec spec;
  Tensor w;
  Tensor gamma, beta;
  std::vector<double> run_mean, run_var;
  bool defined() const { return w.defined(); }
};

ConvBN make_conv_bn(const ConvSpec& spec, std::mt19937_64& rng);
Tensor conv_bn(const Tensor& x, ConvBN& l, bool train, bool update_running);

struct AttentionParams {
  int channels = 0;
  int hidden = 0;
  AttnNonlin nonlin = AttnNonlin::relu;
  bool bias_enabled = true;
  Tensor w1, b1, w2, b2;  // biases stay zero and untrained when disabled
};

AttentionParams make_attention(int channels, int r, AttnNonlin nonlin, bool bias,
                               std::mt19937_64& rng);
// Global pool -> FC1 -> nonlinearity -> FC2 -> sigmoid, as an [N,C,1,1] mask.
Tensor attention_mask(const Tensor& u, AttentionParams& a);
Tensor channel_attention(const Tensor& u, AttentionParams& a);

struct AntBlockParams {
  BlockConfig cfg;
  std::optional<AttentionParams> pre_attn;   // placement == before_expansion
  std::optional<ConvBN> expand;              // absent when expansion == 1
  ConvBN dw;
  std::optional<AttentionParams> mid_attn;   // placement == between
  ConvBN proj;
  std::optional<AttentionParams> post_attn;  // placement == after_projection
};

AntBlockParams make_ant_block(const BlockConfig& cfg, std::mt19937_64& rng);

// Pipeline through the depthwise stage (and mid attention); shared by the
// plain forward and the trunk-sharing ensemble.
Tensor ant_trunk_forward(const Tensor& x, AntBlockParams& p, bool train,
                         bool update_running);
// F(x): the block without its residual skip.
Tensor ant_block_residual_fn(const Tensor& x, AntBlockParams& p, bool train,
                             bool update_running);
Tensor ant_block_forward(const Tensor& x, AntBlockParams& p, bool train,
                         bool update_running = true);
// placement == none, groups == 1 required; otherwise identical by definition.
Tensor inverted_residual_forward(const Tensor& x, AntBlockParams& p, bool train,
                                 bool update_running = true);

struct EAntBlockParams {
  bool share_trunk = false;
  Tensor lambdas;  // one logit per branch; softmax-normalized in the forward
  // One entry per branch. With share_trunk the trunk members of branches
  // past the first stay empty; every branch owns its projection.
  std::vector<AntBlockParams> branches;
};

EAntBlockParams make_e_ant_block(const BlockConfig& base,
                                 const std::vector<int>& branch_groups,
                                 bool share_trunk, std::mt19937_64& rng);
Tensor e_ant_block_forward(const Tensor& x, EAntBlockParams& e, bool train,
                           bool update_running = true);

// Initialization helpers (fan-out Kaiming for conv kernels, small normal for
// FC weights; deterministic in rng draw order).
void fill_normal(Tensor& t, double stddev, std::mt19937_64& rng);
Tensor make_fc_weight(int cout, int cin, std::mt19937_64& rng);

}  // namespace antkit
