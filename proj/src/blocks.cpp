#include "antkit/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace antkit {

const char* placement_name(Placement p) {
  switch (p) {
    case Placement::between: return "between";
    case Placement::before_expansion: return "before_expansion";
    case Placement::after_projection: return "after_projection";
    case Placement::none: return "none";
  }
  return "?";
}

Placement placement_from(const std::string& s) {
  if (s == "between") return Placement::between;
  if (s == "before_expansion") return Placement::before_expansion;
  if (s == "after_projection") return Placement::after_projection;
  if (s == "none") return Placement::none;
  throw ConfigError("unknown placement '" + s + "'");
}

int attention_hidden(int channels, int r) {
  int h = channels / r;
  return h < 1 ? 1 : h;
}

int BlockConfig::attention_channels() const {
  switch (placement) {
    case Placement::before_expansion: return in_channels;
    case Placement::between: return expanded();
    case Placement::after_projection: return out_channels;
    case Placement::none: return 0;
  }
  return 0;
}

void BlockConfig::validate() const {
  if (in_channels < 1 || out_channels < 1)
    throw ConfigError("block channels must be positive");
  if (expansion < 1) throw ConfigError("expansion factor must be >= 1");
  if (stride != 1 && stride != 2)
    throw ConfigError("block stride must be 1 or 2");
  if (groups < 1) throw ConfigError("groups must be >= 1");
  if (expanded() % groups != 0)
    throw ConfigError("projection input channels not divisible by groups");
  if (out_channels % groups != 0)
    throw ConfigError("projection output channels not divisible by groups");
  if (has_attention() && reduction < 1)
    throw ConfigError("attention reduction must be >= 1");
}

void fill_normal(Tensor& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data()) v = dist(rng);
}

ConvBN make_conv_bn(const ConvSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  if (spec.bias) throw ConfigError("conv+bn layers carry no conv bias");
  ConvBN l;
  l.spec = spec;
  l.w = Tensor({spec.out_channels, spec.in_channels / spec.groups, spec.kernel,
                spec.kernel});
  l.w.requires_grad();
  // Fan-out Kaiming: variance 2 / (K^2 * C2 / g).
  double fan_out =
      double(spec.kernel) * spec.kernel * spec.out_channels / spec.groups;
  fill_normal(l.w, std::sqrt(2.0 / fan_out), rng);
  l.gamma = Tensor::full({spec.out_channels}, 1.0).requires_grad();
  l.beta = Tensor::full({spec.out_channels}, 0.0).requires_grad();
  l.run_mean.assign(spec.out_channels, 0.0);
  l.run_var.assign(spec.out_channels, 1.0);
  return l;
}

Tensor conv_bn(const Tensor& x, ConvBN& l, bool train, bool update_running) {
  Tensor y = ops::conv2d(x, l.w, nullptr, l.spec);
  return ops::batch_norm(y, l.gamma, l.beta, l.run_mean, l.run_var, train,
                         update_running && train);
}

Tensor make_fc_weight(int cout, int cin, std::mt19937_64& rng) {
  Tensor w({cout, cin});
  w.requires_grad();
  fill_normal(w, 0.01, rng);
  return w;
}

AttentionParams make_attention(int channels, int r, AttnNonlin nonlin, bool bias,
                               std::mt19937_64& rng) {
  if (channels < 1) throw ConfigError("attention channels must be positive");
  if (r < 1) throw ConfigError("attention reduction must be >= 1");
  AttentionParams a;
  a.channels = channels;
  a.hidden = attention_hidden(channels, r);
  a.nonlin = nonlin;
  a.bias_enabled = bias;
  a.w1 = make_fc_weight(a.hidden, channels, rng);
  a.b1 = Tensor::full({a.hidden}, 0.0).requires_grad(bias);
  a.w2 = make_fc_weight(channels, a.hidden, rng);
  a.b2 = Tensor::full({channels}, 0.0).requires_grad(bias);
  return a;
}

Tensor attention_mask(const Tensor& u, AttentionParams& a) {
  const auto& s = u.shape();
  if (s.size() != 4 || s[1] != a.channels)
    throw TensorError("attention input mismatch: got " + shape_str(s) +
                      ", unit expects " + std::to_string(a.channels) +
                      " channels");
  Tensor pooled = ops::reshape(ops::global_avg_pool(u), {s[0], a.channels});
  Tensor h = ops::fully_connected(pooled, a.w1, a.b1);
  if (a.nonlin == AttnNonlin::relu) h = ops::relu(h);
  Tensor m = ops::sigmoid(ops::fully_connected(h, a.w2, a.b2));
  return ops::reshape(m, {s[0], a.channels, 1, 1});
}

Tensor channel_attention(const Tensor& u, AttentionParams& a) {
  return ops::channel_scale(u, attention_mask(u, a));
}

AntBlockParams make_ant_block(const BlockConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  AntBlockParams p;
  p.cfg = cfg;
  const int cp = cfg.expanded();
  if (cfg.placement == Placement::before_expansion)
    p.pre_attn = make_attention(cfg.in_channels, cfg.reduction,
                                cfg.attn_nonlin, cfg.attn_bias, rng);
  if (cfg.expansion > 1) {
    ConvSpec e;
    e.in_channels = cfg.in_channels;
    e.out_channels = cp;
    e.kernel = 1;
    e.stride = 1;
    e.padding = 0;
    p.expand = make_conv_bn(e, rng);
  }
  ConvSpec d;
  d.in_channels = cp;
  d.out_channels = cp;
  d.kernel = 3;
  d.stride = cfg.stride;
  d.padding = 1;
  d.groups = cp;
  p.dw = make_conv_bn(d, rng);
  if (cfg.placement == Placement::between)
    p.mid_attn = make_attention(cp, cfg.reduction, cfg.attn_nonlin,
                                cfg.attn_bias, rng);
  ConvSpec pr;
  pr.in_channels = cp;
  pr.out_channels = cfg.out_channels;
  pr.kernel = 1;
  pr.stride = 1;
  pr.padding = 0;
  pr.groups = cfg.groups;
  pr.layout = cfg.proj_layout;
  p.proj = make_conv_bn(pr, rng);
  if (cfg.placement == Placement::after_projection)
    p.post_attn = make_attention(cfg.out_channels, cfg.reduction,
                                 cfg.attn_nonlin, cfg.attn_bias, rng);
  return p;
}

Tensor ant_trunk_forward(const Tensor& x, AntBlockParams& p, bool train,
                         bool update_running) {
  Tensor h = x;
  if (p.pre_attn) h = channel_attention(h, *p.pre_attn);
  if (p.expand) h = ops::relu6(conv_bn(h, *p.expand, train, update_running));
  h = ops::relu6(conv_bn(h, p.dw, train, update_running));
  if (p.mid_attn) h = channel_attention(h, *p.mid_attn);
  return h;
}

Tensor ant_block_residual_fn(const Tensor& x, AntBlockParams& p, bool train,
                             bool update_running) {
  Tensor h = ant_trunk_forward(x, p, train, update_running);
  h = conv_bn(h, p.proj, train, update_running);  // linear projection
  if (p.post_attn) h = channel_attention(h, *p.post_attn);
  return h;
}

Tensor ant_block_forward(const Tensor& x, AntBlockParams& p, bool train,
                         bool update_running) {
  Tensor f = ant_block_residual_fn(x, p, train, update_running);
  return p.cfg.residual() ? ops::add(x, f) : f;
}

Tensor inverted_residual_forward(const Tensor& x, AntBlockParams& p, bool train,
                                 bool update_running) {
  if (p.cfg.placement != Placement::none || p.cfg.groups != 1)
    throw ConfigError("inverted residual requires placement=none, groups=1");
  return ant_block_forward(x, p, train, update_running);
}

EAntBlockParams make_e_ant_block(const BlockConfig& base,
                                 const std::vector<int>& branch_groups,
                                 bool share_trunk, std::mt19937_64& rng) {
  if (branch_groups.empty())
    throw ConfigError("ensemble block needs at least one branch");
  if (share_trunk && base.placement == Placement::after_projection)
    throw ConfigError(
        "share_trunk is incompatible with after_projection attention");
  EAntBlockParams e;
  e.share_trunk = share_trunk;
  e.lambdas =
      Tensor::full({int(branch_groups.size())}, 0.0).requires_grad();
  for (std::size_t j = 0; j < branch_groups.size(); ++j) {
    BlockConfig cfg = base;
    cfg.groups = branch_groups[j];
    if (share_trunk && j > 0) {
      // Trunk lives in branch 0; later branches carry only their projection.
      cfg.validate();
      AntBlockParams p;
      p.cfg = cfg;
      ConvSpec pr;
      pr.in_channels = cfg.expanded();
      pr.out_channels = cfg.out_channels;
      pr.kernel = 1;
      pr.stride = 1;
      pr.padding = 0;
      pr.groups = cfg.groups;
      pr.layout = cfg.proj_layout;
      p.proj = make_conv_bn(pr, rng);
      e.branches.push_back(std::move(p));
    } else {
      e.branches.push_back(make_ant_block(cfg, rng));
    }
  }
  return e;
}

Tensor e_ant_block_forward(const Tensor& x, EAntBlockParams& e, bool train,
                           bool update_running) {
  Tensor w = ops::softmax_vec(e.lambdas);
  std::vector<Tensor> outs;
  if (e.share_trunk) {
    Tensor trunk = ant_trunk_forward(x, e.branches[0], train, update_running);
    for (auto& br : e.branches)
      outs.push_back(conv_bn(trunk, br.proj, train, update_running));
  } else {
    for (auto& br : e.branches)
      outs.push_back(ant_block_residual_fn(x, br, train, update_running));
  }
  Tensor acc = ops::scale_by_component(outs[0], w, 0);
  for (std::size_t j = 1; j < outs.size(); ++j)
    acc = ops::add(acc, ops::scale_by_component(outs[j], w, int(j)));
  return e.branches[0].cfg.residual() ? ops::add(x, acc) : acc;
}

}  // namespace antkit
