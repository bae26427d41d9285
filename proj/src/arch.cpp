#include "antkit/arch.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace antkit {

using ordered_json = nlohmann::ordered_json;

const char* stage_op_name(StageOp op) {
  switch (op) {
    case StageOp::conv2d: return "conv2d";
    case StageOp::antblock: return "antblock";
    case StageOp::e_antblock: return "e_antblock";
    case StageOp::inverted_residual: return "inverted_residual";
    case StageOp::conv1x1: return "conv1x1";
    case StageOp::avgpool: return "avgpool";
    case StageOp::fc: return "fc";
  }
  return "?";
}

StageOp stage_op_from(const std::string& s) {
  if (s == "conv2d") return StageOp::conv2d;
  if (s == "antblock") return StageOp::antblock;
  if (s == "e_antblock") return StageOp::e_antblock;
  if (s == "inverted_residual") return StageOp::inverted_residual;
  if (s == "conv1x1") return StageOp::conv1x1;
  if (s == "avgpool") return StageOp::avgpool;
  if (s == "fc") return StageOp::fc;
  throw FormatError("unknown stage op '" + s + "'");
}

int make_divisible(double v, int divisor) {
  int new_v = std::max(divisor, (int(v + divisor / 2.0) / divisor) * divisor);
  if (new_v < 0.9 * v) new_v += divisor;
  return new_v;
}

namespace {

[[noreturn]] void stage_error(const StageSpec& st, const std::string& what) {
  throw ConfigError("stage '" + st.name + "': " + what);
}

// Smallest channel multiple keeping t*C divisible by r.
int ratio_divisor(const StageSpec& st) {
  return st.r / std::gcd(st.t, st.r);
}

// Divisor for width scaling at stage i: multiples of 8, refined so grouped
// projections stay splittable and attention widths stay divisible by their
// ratio, both within the stage's repeats and into the next stage's first
// block.
int stage_divisor(const NetworkSpec& spec, std::size_t i) {
  const StageSpec& st = spec.stages[i];
  int d = 8;
  if (st.block_like()) {
    d = std::lcm(d, st.g);
    for (int bg : st.branch_groups) d = std::lcm(d, bg);
    if (st.attention() && st.n > 1) d = std::lcm(d, ratio_divisor(st));
  }
  if (i + 1 < spec.stages.size()) {
    const StageSpec& nx = spec.stages[i + 1];
    if (nx.block_like()) {
      d = std::lcm(d, nx.g);
      for (int bg : nx.branch_groups) d = std::lcm(d, bg);
      if (nx.attention()) d = std::lcm(d, ratio_divisor(nx));
    }
  }
  return d;
}

int conv_out_extent(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

void check_stage_fields(const StageSpec& st) {
  if (st.name.empty()) throw ConfigError("stage without a name");
  if (st.out_channels < 1 && st.op != StageOp::avgpool)
    stage_error(st, "out_channels must be positive");
  if (st.n < 1) stage_error(st, "repetition count must be >= 1");
  if (st.s != 1 && st.s != 2) stage_error(st, "stride must be 1 or 2");
  if (st.t < 1) stage_error(st, "expansion factor must be >= 1");
  if (st.r < 0) stage_error(st, "reduction ratio must be >= 0");
  if (st.g < 1) stage_error(st, "groups must be >= 1");
  switch (st.op) {
    case StageOp::antblock:
      if (st.placement != Placement::none && st.r < 1)
        stage_error(st, "attention needs a positive reduction ratio");
      break;
    case StageOp::e_antblock:
      if (st.branch_groups.empty())
        stage_error(st, "e_antblock needs branch_groups");
      for (int bg : st.branch_groups)
        if (bg < 1) stage_error(st, "branch groups must be >= 1");
      if (st.placement != Placement::none && st.r < 1)
        stage_error(st, "attention needs a positive reduction ratio");
      if (st.share_trunk && st.placement == Placement::after_projection)
        stage_error(st, "share_trunk cannot attend after the projection");
      break;
    case StageOp::inverted_residual:
      if (st.placement != Placement::none)
        stage_error(st, "inverted_residual carries no attention unit");
      if (st.g != 1) stage_error(st, "inverted_residual projects with g=1");
      break;
    case StageOp::conv1x1:
    case StageOp::fc:
    case StageOp::avgpool:
      if (st.s != 1) stage_error(st, "stride must be 1 here");
      if (st.n != 1) stage_error(st, "repetition must be 1 here");
      break;
    case StageOp::conv2d:
      break;
  }
  if (st.op != StageOp::e_antblock) {
    if (!st.branch_groups.empty())
      stage_error(st, "branch_groups only apply to e_antblock");
    if (st.share_trunk) stage_error(st, "share_trunk only applies to e_antblock");
  }
}

}  // namespace

std::vector<ResolvedStage> resolve(const NetworkSpec& spec) {
  if (spec.alpha <= 0.0) throw ConfigError("width multiplier must be positive");
  if (spec.num_classes < 1) throw ConfigError("num_classes must be positive");
  for (int d : spec.input_shape)
    if (d < 1) throw ConfigError("input shape extents must be positive");
  if (spec.stages.empty()) throw ConfigError("spec has no stages");

  const bool scale = spec.alpha != 1.0;
  std::vector<ResolvedStage> out;
  int c = spec.input_shape[0];
  int h = spec.input_shape[1];
  int w = spec.input_shape[2];

  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const StageSpec& st = spec.stages[i];
    check_stage_fields(st);
    ResolvedStage rs;
    rs.stage = st;
    rs.in_channels = c;
    rs.in_h = h;
    rs.in_w = w;
    switch (st.op) {
      case StageOp::conv2d:
        rs.out_channels = scale ? make_divisible(st.out_channels * spec.alpha,
                                                 stage_divisor(spec, i))
                                : st.out_channels;
        rs.out_h = conv_out_extent(h, 3, st.s, 1);
        rs.out_w = conv_out_extent(w, 3, st.s, 1);
        break;
      case StageOp::conv1x1:
        // Head widens with alpha but never narrows below its table width.
        rs.out_channels = spec.alpha > 1.0
                              ? make_divisible(st.out_channels * spec.alpha, 8)
                              : st.out_channels;
        rs.out_h = h;
        rs.out_w = w;
        break;
      case StageOp::antblock:
      case StageOp::e_antblock:
      case StageOp::inverted_residual: {
        rs.out_channels = scale ? make_divisible(st.out_channels * spec.alpha,
                                                 stage_divisor(spec, i))
                                : st.out_channels;
        const int cp_first = st.t * c;
        const int cp_rest = st.t * rs.out_channels;
        auto div_check = [&](int channels, int g, const char* what) {
          if (channels % g != 0)
            stage_error(st, std::string(what) + " " + std::to_string(channels) +
                                " not divisible by groups " + std::to_string(g));
        };
        std::vector<int> gs = st.branch_groups.empty()
                                  ? std::vector<int>{st.g}
                                  : st.branch_groups;
        for (int g : gs) {
          div_check(cp_first, g, "expanded width");
          if (st.n > 1) div_check(cp_rest, g, "expanded width");
          div_check(rs.out_channels, g, "output width");
        }
        rs.out_h = conv_out_extent(h, 3, st.s, 1);
        rs.out_w = conv_out_extent(w, 3, st.s, 1);
        break;
      }
      case StageOp::avgpool:
        rs.out_channels = c;
        rs.out_h = 1;
        rs.out_w = 1;
        break;
      case StageOp::fc:
        if (h != 1 || w != 1) stage_error(st, "fc expects pooled 1x1 input");
        rs.out_channels = st.out_channels;
        rs.out_h = 1;
        rs.out_w = 1;
        break;
    }
    if (rs.out_h < 1 || rs.out_w < 1)
      stage_error(st, "spatial extent vanished");
    c = rs.out_channels;
    h = rs.out_h;
    w = rs.out_w;
    out.push_back(std::move(rs));
  }
  return out;
}

void validate_spec(const NetworkSpec& spec,
                   bool strict_attention_divisibility) {
  auto resolved = resolve(spec);
  if (!strict_attention_divisibility) return;
  for (const auto& rs : resolved) {
    const StageSpec& st = rs.stage;
    if (!st.attention()) continue;
    for (int k = 0; k < st.n; ++k) {
      const int cin = k == 0 ? rs.in_channels : rs.out_channels;
      int cp = st.t * cin;
      if (st.placement == Placement::before_expansion) cp = cin;
      if (st.placement == Placement::after_projection) cp = rs.out_channels;
      if (cp % st.r != 0)
        stage_error(st, "attended width " + std::to_string(cp) +
                            " not divisible by reduction ratio " +
                            std::to_string(st.r));
    }
  }
}

namespace {

StageSpec conv_stage(const std::string& name, int out, int s) {
  StageSpec st;
  st.name = name;
  st.op = StageOp::conv2d;
  st.out_channels = out;
  st.s = s;
  return st;
}

StageSpec ant_stage(const std::string& name, int out, int n, int s, int t,
                    int r, int g) {
  StageSpec st;
  st.name = name;
  st.op = StageOp::antblock;
  st.out_channels = out;
  st.n = n;
  st.s = s;
  st.t = t;
  st.r = r;
  st.g = g;
  st.placement = Placement::between;
  return st;
}

StageSpec tail_conv(int out) {
  StageSpec st;
  st.name = "conv8";
  st.op = StageOp::conv1x1;
  st.out_channels = out;
  return st;
}

StageSpec tail_pool() {
  StageSpec st;
  st.name = "pool9";
  st.op = StageOp::avgpool;
  st.out_channels = 0;
  return st;
}

StageSpec tail_fc(int classes) {
  StageSpec st;
  st.name = "fc10";
  st.op = StageOp::fc;
  st.out_channels = classes;
  return st;
}

// Shared stage table; CIFAR keeps the stem and the 96-channel producer's
// successor at stride 1 so the final map stays 4x4.
NetworkSpec ant_skeleton(bool cifar, int g, double alpha) {
  NetworkSpec sp;
  sp.input_shape = cifar ? std::array<int, 3>{3, 32, 32}
                         : std::array<int, 3>{3, 224, 224};
  sp.num_classes = cifar ? 100 : 1000;
  sp.alpha = alpha;
  sp.stages = {
      conv_stage("conv0", 32, cifar ? 1 : 2),
      ant_stage("ant1", 16, 1, 1, 1, 8, 1),  // the t=1 row always uses g=1
      ant_stage("ant2", 24, 2, 2, 6, 8, g),
      ant_stage("ant3", 32, 3, 2, 6, 12, g),
      ant_stage("ant4", 64, 4, 2, 6, 16, g),
      ant_stage("ant5", 96, 3, 1, 6, 24, g),
      ant_stage("ant6", 160, 3, cifar ? 1 : 2, 6, 32, g),
      ant_stage("ant7", 320, 1, 1, 6, 64, g),
      tail_conv(1280),
      tail_pool(),
      tail_fc(sp.num_classes),
  };
  return sp;
}

std::string alpha_suffix(double alpha) {
  if (alpha == 1.0) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "_a%g", alpha);
  return buf;
}

}  // namespace

NetworkSpec antnet_imagenet(int g, double alpha) {
  if (g != 1 && g != 2) throw ConfigError("antnet uses g in {1,2}");
  NetworkSpec sp = ant_skeleton(false, g, alpha);
  sp.name = "antnet_imagenet_g" + std::to_string(g) + alpha_suffix(alpha);
  validate_spec(sp, true);
  return sp;
}

NetworkSpec antnet_cifar(int g) {
  if (g != 1 && g != 2) throw ConfigError("antnet uses g in {1,2}");
  NetworkSpec sp = ant_skeleton(true, g, 1.0);
  sp.name = "antnet_cifar_g" + std::to_string(g);
  validate_spec(sp, true);
  return sp;
}

NetworkSpec antnet_cifar_fixed_r(int r) {
  if (r < 1) throw ConfigError("reduction ratio must be >= 1");
  NetworkSpec sp = ant_skeleton(true, 1, 1.0);
  sp.name = "antnet_cifar_r" + std::to_string(r);
  for (auto& st : sp.stages)
    if (st.op == StageOp::antblock) st.r = r;
  // Irregular ratios may not divide every expanded width; the attention
  // bottleneck floors instead, so only the floor-tolerant validation applies.
  validate_spec(sp, false);
  return sp;
}

namespace {

NetworkSpec mobilenet_v2_skeleton(bool cifar) {
  NetworkSpec sp = ant_skeleton(cifar, 1, 1.0);
  sp.name = cifar ? "mobilenetv2_cifar" : "mobilenetv2_imagenet";
  int idx = 0;
  for (auto& st : sp.stages) {
    if (st.op != StageOp::antblock) continue;
    ++idx;
    st.op = StageOp::inverted_residual;
    st.name = "ir" + std::to_string(idx);
    st.r = 0;
    st.g = 1;
    st.placement = Placement::none;
  }
  validate_spec(sp, true);
  return sp;
}

}  // namespace

NetworkSpec mobilenet_v2_imagenet() { return mobilenet_v2_skeleton(false); }
NetworkSpec mobilenet_v2_cifar() { return mobilenet_v2_skeleton(true); }

NetworkSpec e_antnet_cifar(bool share_trunk) {
  NetworkSpec sp = ant_skeleton(true, 1, 1.0);
  sp.name = share_trunk ? "e_antnet_cifar_shared" : "e_antnet_cifar";
  for (auto& st : sp.stages) {
    if (st.op != StageOp::antblock || st.t == 1) continue;  // ant1 stays plain
    st.op = StageOp::e_antblock;
    st.branch_groups = {1, 2};
    st.share_trunk = share_trunk;
    st.g = 1;
  }
  validate_spec(sp, true);
  return sp;
}

namespace {

int round_to_multiple(double v, int m) {
  long long k = (long long)std::floor(v / m + 0.5);
  long long r = k * (long long)m;
  return int(r < m ? m : r);
}

}  // namespace

NetworkSpec reduce_spec(const NetworkSpec& spec) {
  NetworkSpec out = spec;
  out.name += "_reduced";
  for (auto& st : out.stages) {
    st.n = 1;
    if (st.op == StageOp::avgpool || st.op == StageOp::fc) continue;
    int d = 8;
    if (st.attention()) d = std::lcm(d, ratio_divisor(st));
    st.out_channels = round_to_multiple(st.out_channels / 4.0, d);
  }
  validate_spec(out, false);
  return out;
}

namespace {

const ordered_json& req_field(const ordered_json& o, const char* key,
                              const std::string& ctx) {
  auto it = o.find(key);
  if (it == o.end()) throw FormatError(ctx + ": missing field '" + key + "'");
  return *it;
}

int req_int(const ordered_json& o, const char* key, const std::string& ctx) {
  const auto& f = req_field(o, key, ctx);
  if (!f.is_number_integer())
    throw FormatError(ctx + ": field '" + key + "' must be an integer");
  return f.get<int>();
}

std::string req_str(const ordered_json& o, const char* key,
                    const std::string& ctx) {
  const auto& f = req_field(o, key, ctx);
  if (!f.is_string())
    throw FormatError(ctx + ": field '" + key + "' must be a string");
  return f.get<std::string>();
}

void reject_unknown(const ordered_json& o,
                    const std::vector<std::string>& known,
                    const std::string& ctx) {
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const auto& k : known) ok = ok || it.key() == k;
    if (!ok) throw FormatError(ctx + ": unknown field '" + it.key() + "'");
  }
}

}  // namespace

NetworkSpec parse_spec(const std::string& text,
                       bool strict_attention_divisibility) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw FormatError(std::string("spec parse: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("spec: top level must be an object");
  reject_unknown(j, {"name", "input_shape", "num_classes", "alpha", "stages"},
                 "spec");

  NetworkSpec sp;
  sp.name = req_str(j, "name", "spec");
  const auto& ishape = req_field(j, "input_shape", "spec");
  if (!ishape.is_array() || ishape.size() != 3)
    throw FormatError("spec: input_shape must be [C,H,W]");
  for (int k = 0; k < 3; ++k) {
    if (!ishape[k].is_number_integer())
      throw FormatError("spec: input_shape entries must be integers");
    sp.input_shape[k] = ishape[k].get<int>();
  }
  sp.num_classes = req_int(j, "num_classes", "spec");
  const auto& alpha = req_field(j, "alpha", "spec");
  if (!alpha.is_number()) throw FormatError("spec: alpha must be a number");
  sp.alpha = alpha.get<double>();

  const auto& stages = req_field(j, "stages", "spec");
  if (!stages.is_array() || stages.empty())
    throw FormatError("spec: stages must be a non-empty array");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& js = stages[i];
    std::string ctx = "stages[" + std::to_string(i) + "]";
    if (!js.is_object()) throw FormatError(ctx + ": must be an object");
    if (js.contains("name") && js["name"].is_string())
      ctx = "stage '" + js["name"].get<std::string>() + "'";
    reject_unknown(js,
                   {"name", "op", "out_channels", "n", "s", "t", "r", "g",
                    "placement", "branch_groups", "share_trunk"},
                   ctx);
    StageSpec st;
    st.name = req_str(js, "name", ctx);
    st.op = stage_op_from(req_str(js, "op", ctx));
    st.out_channels = req_int(js, "out_channels", ctx);
    st.n = req_int(js, "n", ctx);
    st.s = req_int(js, "s", ctx);
    st.t = req_int(js, "t", ctx);
    st.r = req_int(js, "r", ctx);
    st.g = req_int(js, "g", ctx);
    st.placement = placement_from(req_str(js, "placement", ctx));
    if (js.contains("branch_groups")) {
      const auto& bg = js["branch_groups"];
      if (!bg.is_array())
        throw FormatError(ctx + ": branch_groups must be an array");
      for (const auto& v : bg) {
        if (!v.is_number_integer())
          throw FormatError(ctx + ": branch_groups entries must be integers");
        st.branch_groups.push_back(v.get<int>());
      }
    }
    if (js.contains("share_trunk")) {
      if (!js["share_trunk"].is_boolean())
        throw FormatError(ctx + ": share_trunk must be a boolean");
      st.share_trunk = js["share_trunk"].get<bool>();
    }
    sp.stages.push_back(std::move(st));
  }
  validate_spec(sp, strict_attention_divisibility);
  return sp;
}

std::string emit_spec(const NetworkSpec& spec) {
  ordered_json j;
  j["name"] = spec.name;
  j["input_shape"] = spec.input_shape;
  j["num_classes"] = spec.num_classes;
  j["alpha"] = spec.alpha;
  j["stages"] = ordered_json::array();
  for (const auto& st : spec.stages) {
    ordered_json js;
    js["name"] = st.name;
    js["op"] = stage_op_name(st.op);
    js["out_channels"] = st.out_channels;
    js["n"] = st.n;
    js["s"] = st.s;
    js["t"] = st.t;
    js["r"] = st.r;
    js["g"] = st.g;
    js["placement"] = placement_name(st.placement);
    if (st.op == StageOp::e_antblock) {
      js["branch_groups"] = st.branch_groups;
      js["share_trunk"] = st.share_trunk;
    }
    j["stages"].push_back(std::move(js));
  }
  return j.dump(2) + "\n";
}

NetworkSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open spec file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

std::string rep_name(const StageSpec& st, int k) {
  return st.n > 1 ? st.name + "." + std::to_string(k) : st.name;
}

void Network::register_conv_bn(const std::string& name, ConvBN& l) {
  params_.push_back({name + ".w", l.w, true});
  params_.push_back({name + ".bn.gamma", l.gamma, false});
  params_.push_back({name + ".bn.beta", l.beta, false});
}

void Network::register_attention(const std::string& name, AttentionParams& a) {
  params_.push_back({name + ".w1", a.w1, true});
  if (a.bias_enabled) params_.push_back({name + ".b1", a.b1, false});
  params_.push_back({name + ".w2", a.w2, true});
  if (a.bias_enabled) params_.push_back({name + ".b2", a.b2, false});
}

void Network::register_block(const std::string& name, AntBlockParams& p) {
  if (p.pre_attn) register_attention(name + ".attn", *p.pre_attn);
  if (p.expand) register_conv_bn(name + ".expand", *p.expand);
  if (p.dw.defined()) register_conv_bn(name + ".dw", p.dw);
  if (p.mid_attn) register_attention(name + ".attn", *p.mid_attn);
  register_conv_bn(name + ".proj", p.proj);
  if (p.post_attn) register_attention(name + ".attn", *p.post_attn);
}

Network::Network(const NetworkSpec& spec, std::uint64_t seed)
    : spec_(spec), resolved_(resolve(spec)) {
  std::mt19937_64 rng(seed);
  for (const auto& rs : resolved_) {
    const StageSpec& st = rs.stage;
    switch (st.op) {
      case StageOp::conv2d:
      case StageOp::conv1x1: {
        Unit u;
        u.name = st.name;
        u.op = st.op;
        ConvSpec cs;
        cs.in_channels = rs.in_channels;
        cs.out_channels = rs.out_channels;
        cs.kernel = st.op == StageOp::conv2d ? 3 : 1;
        cs.stride = st.s;
        cs.padding = st.op == StageOp::conv2d ? 1 : 0;
        u.conv = make_conv_bn(cs, rng);
        register_conv_bn(u.name, *u.conv);
        units_.push_back(std::move(u));
        break;
      }
      case StageOp::avgpool: {
        Unit u;
        u.name = st.name;
        u.op = st.op;
        units_.push_back(std::move(u));
        break;
      }
      case StageOp::fc: {
        Unit u;
        u.name = st.name;
        u.op = st.op;
        u.fc_w = make_fc_weight(rs.out_channels, rs.in_channels, rng);
        u.fc_b = Tensor::full({rs.out_channels}, 0.0).requires_grad();
        params_.push_back({u.name + ".w", u.fc_w, true});
        params_.push_back({u.name + ".b", u.fc_b, false});
        units_.push_back(std::move(u));
        break;
      }
      case StageOp::antblock:
      case StageOp::inverted_residual: {
        for (int k = 0; k < st.n; ++k) {
          Unit u;
          u.name = rep_name(st, k);
          u.op = st.op;
          BlockConfig cfg;
          cfg.in_channels = k == 0 ? rs.in_channels : rs.out_channels;
          cfg.out_channels = rs.out_channels;
          cfg.expansion = st.t;
          cfg.stride = k == 0 ? st.s : 1;
          cfg.groups = st.g;
          cfg.reduction = st.r;
          cfg.placement =
              st.op == StageOp::inverted_residual ? Placement::none
                                                  : st.placement;
          u.block = make_ant_block(cfg, rng);
          register_block(u.name, *u.block);
          units_.push_back(std::move(u));
        }
        break;
      }
      case StageOp::e_antblock: {
        for (int k = 0; k < st.n; ++k) {
          Unit u;
          u.name = rep_name(st, k);
          u.op = st.op;
          BlockConfig cfg;
          cfg.in_channels = k == 0 ? rs.in_channels : rs.out_channels;
          cfg.out_channels = rs.out_channels;
          cfg.expansion = st.t;
          cfg.stride = k == 0 ? st.s : 1;
          cfg.reduction = st.r;
          cfg.placement = st.placement;
          u.eblock = make_e_ant_block(cfg, st.branch_groups, st.share_trunk,
                                      rng);
          for (std::size_t b = 0; b < u.eblock->branches.size(); ++b)
            register_block(u.name + ".branch" + std::to_string(b),
                           u.eblock->branches[b]);
          params_.push_back({u.name + ".lambda", u.eblock->lambdas, false});
          units_.push_back(std::move(u));
        }
        break;
      }
    }
  }
}

Tensor Network::forward(const Tensor& x, bool train,
                        std::vector<std::pair<std::string, Tensor>>* trace,
                        bool update_running) {
  Tensor h = x;
  for (auto& u : units_) {
    switch (u.op) {
      case StageOp::conv2d:
      case StageOp::conv1x1:
        h = ops::relu6(conv_bn(h, *u.conv, train, update_running));
        break;
      case StageOp::antblock:
      case StageOp::inverted_residual:
        h = ant_block_forward(h, *u.block, train, update_running);
        break;
      case StageOp::e_antblock:
        h = e_ant_block_forward(h, *u.eblock, train, update_running);
        break;
      case StageOp::avgpool:
        h = ops::global_avg_pool(h);
        break;
      case StageOp::fc: {
        const auto& s = h.shape();
        h = ops::fully_connected(ops::reshape(h, {s[0], s[1]}), u.fc_w,
                                 u.fc_b);
        break;
      }
    }
    if (trace) trace->emplace_back(u.name, h);
  }
  return h;
}

namespace {

void collect_stats(const std::string& name, ConvBN& l,
                   std::vector<NamedStat>& out) {
  out.push_back({name + ".bn.mean", &l.run_mean});
  out.push_back({name + ".bn.var", &l.run_var});
}

void collect_block_stats(const std::string& name, AntBlockParams& p,
                         std::vector<NamedStat>& out) {
  if (p.expand) collect_stats(name + ".expand", *p.expand, out);
  if (p.dw.defined()) collect_stats(name + ".dw", p.dw, out);
  collect_stats(name + ".proj", p.proj, out);
}

}  // namespace

std::vector<NamedStat> Network::running_stats() {
  std::vector<NamedStat> out;
  for (auto& u : units_) {
    if (u.conv) collect_stats(u.name, *u.conv, out);
    if (u.block) collect_block_stats(u.name, *u.block, out);
    if (u.eblock)
      for (std::size_t b = 0; b < u.eblock->branches.size(); ++b)
        collect_block_stats(u.name + ".branch" + std::to_string(b),
                            u.eblock->branches[b], out);
  }
  return out;
}

std::vector<Tensor> Network::lambdas() {
  std::vector<Tensor> out;
  for (auto& u : units_)
    if (u.eblock) out.push_back(u.eblock->lambdas);
  return out;
}

}  // namespace antkit
