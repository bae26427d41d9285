#include "antkit/costmodel.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "antkit/kernels.hpp"
#include "json.hpp"

namespace antkit {

std::pair<long long, long long> conv_cost(const ConvSpec& spec, int h2,
                                          int w2) {
  spec.validate();
  long long weights = (long long)spec.out_channels *
                      (spec.in_channels / spec.groups) * spec.kernel *
                      spec.kernel;
  long long params = weights + (spec.bias ? spec.out_channels : 0);
  return {params, weights * h2 * w2};
}

AttentionCost attention_cost(int channels, int r, bool bias) {
  if (channels < 1 || r < 1)
    throw ConfigError("attention cost needs positive channels and ratio");
  int hidden = attention_hidden(channels, r);
  AttentionCost c;
  c.weight_params = 2LL * channels * hidden;
  c.bias_params = bias ? channels + hidden : 0;
  c.madds = c.weight_params;
  return c;
}

namespace {

std::string shape_hwc(int h, int w, int c) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

struct RepShape {
  int in_c, out_c;
  int h1, w1;  // block input map
  int h2, w2;  // after the (possibly strided) depthwise layer
};

// Rows for one block repetition's sublayers, shared by the plain and
// ensemble paths. with_trunk/with_proj let the shared-trunk convention cost
// each half separately.
void block_rows(std::vector<CostRow>& rows, const std::string& name,
                const StageSpec& st, int groups, const RepShape& rs,
                const CostConventions& cv, bool with_trunk, bool with_proj) {
  const int cp = st.t * rs.in_c;
  const long long bn = cv.count_bn_params ? 2 : 0;
  auto attn_row = [&](int channels, int h, int w) {
    if (!cv.count_attention) return;
    AttentionCost ac = attention_cost(channels, st.r, true);
    rows.push_back({name + ".attn", "attention", shape_hwc(h, w, channels),
                    ac.weight_params + ac.bias_params, ac.madds});
  };
  if (with_trunk) {
    if (st.placement == Placement::before_expansion)
      attn_row(rs.in_c, rs.h1, rs.w1);
    if (st.t > 1) {
      ConvSpec e;
      e.in_channels = rs.in_c;
      e.out_channels = cp;
      e.kernel = 1;
      auto [p, m] = conv_cost(e, rs.h1, rs.w1);
      rows.push_back({name + ".expand", "conv1x1",
                      shape_hwc(rs.h1, rs.w1, cp), p + bn * cp, m});
    }
    ConvSpec d;
    d.in_channels = cp;
    d.out_channels = cp;
    d.kernel = 3;
    d.stride = rs.h1 == rs.h2 ? 1 : 2;
    d.padding = 1;
    d.groups = cp;
    auto [p, m] = conv_cost(d, rs.h2, rs.w2);
    rows.push_back({name + ".dw", "dwconv3x3", shape_hwc(rs.h2, rs.w2, cp),
                    p + bn * cp, m});
    if (st.placement == Placement::between) attn_row(cp, rs.h2, rs.w2);
  }
  if (with_proj) {
    ConvSpec pr;
    pr.in_channels = cp;
    pr.out_channels = rs.out_c;
    pr.kernel = 1;
    pr.groups = groups;
    auto [p, m] = conv_cost(pr, rs.h2, rs.w2);
    rows.push_back({name + ".proj", groups > 1 ? "gconv1x1" : "conv1x1",
                    shape_hwc(rs.h2, rs.w2, rs.out_c), p + bn * rs.out_c, m});
    if (st.placement == Placement::after_projection)
      attn_row(rs.out_c, rs.h2, rs.w2);
  }
}

}  // namespace

long long attention_weight_increment(const NetworkSpec& spec) {
  long long total = 0;
  for (const auto& rs : resolve(spec)) {
    const StageSpec& st = rs.stage;
    if (!st.attention()) continue;
    for (int k = 0; k < st.n; ++k) {
      int cin = k == 0 ? rs.in_channels : rs.out_channels;
      int ch = st.t * cin;
      if (st.placement == Placement::before_expansion) ch = cin;
      if (st.placement == Placement::after_projection) ch = rs.out_channels;
      total += attention_cost(ch, st.r, false).weight_params;
    }
  }
  return total;
}

CostReport network_cost(const NetworkSpec& spec,
                        const CostConventions& conventions) {
  CostReport rep;
  rep.model = spec.name;
  rep.conventions = conventions;
  const long long bn = conventions.count_bn_params ? 2 : 0;

  for (const auto& r : resolve(spec)) {
    const StageSpec& st = r.stage;
    switch (st.op) {
      case StageOp::conv2d:
      case StageOp::conv1x1: {
        ConvSpec cs;
        cs.in_channels = r.in_channels;
        cs.out_channels = r.out_channels;
        cs.kernel = st.op == StageOp::conv2d ? 3 : 1;
        cs.stride = st.s;
        cs.padding = st.op == StageOp::conv2d ? 1 : 0;
        auto [p, m] = conv_cost(cs, r.out_h, r.out_w);
        rep.rows.push_back({st.name,
                            st.op == StageOp::conv2d ? "conv3x3" : "conv1x1",
                            shape_hwc(r.out_h, r.out_w, r.out_channels),
                            p + bn * r.out_channels, m});
        break;
      }
      case StageOp::avgpool:
        rep.rows.push_back({st.name, "avgpool",
                            shape_hwc(1, 1, r.out_channels), 0, 0});
        break;
      case StageOp::fc:
        rep.rows.push_back({st.name, "fc", shape_hwc(1, 1, r.out_channels),
                            (long long)r.in_channels * r.out_channels +
                                r.out_channels,
                            (long long)r.in_channels * r.out_channels});
        break;
      case StageOp::antblock:
      case StageOp::inverted_residual: {
        for (int k = 0; k < st.n; ++k) {
          RepShape shape;
          shape.in_c = k == 0 ? r.in_channels : r.out_channels;
          shape.out_c = r.out_channels;
          shape.h1 = k == 0 ? r.in_h : r.out_h;
          shape.w1 = k == 0 ? r.in_w : r.out_w;
          shape.h2 = r.out_h;
          shape.w2 = r.out_w;
          block_rows(rep.rows, rep_name(st, k), st, st.g, shape, conventions,
                     true, true);
        }
        break;
      }
      case StageOp::e_antblock: {
        const bool shared = conventions.branch_sharing || st.share_trunk;
        for (int k = 0; k < st.n; ++k) {
          RepShape shape;
          shape.in_c = k == 0 ? r.in_channels : r.out_channels;
          shape.out_c = r.out_channels;
          shape.h1 = k == 0 ? r.in_h : r.out_h;
          shape.w1 = k == 0 ? r.in_w : r.out_w;
          shape.h2 = r.out_h;
          shape.w2 = r.out_w;
          const std::string base = rep_name(st, k);
          if (shared) {
            block_rows(rep.rows, base, st, 1, shape, conventions, true, false);
            for (std::size_t b = 0; b < st.branch_groups.size(); ++b)
              block_rows(rep.rows, base + ".branch" + std::to_string(b), st,
                         st.branch_groups[b], shape, conventions, false, true);
          } else {
            for (std::size_t b = 0; b < st.branch_groups.size(); ++b)
              block_rows(rep.rows, base + ".branch" + std::to_string(b), st,
                         st.branch_groups[b], shape, conventions, true, true);
          }
          rep.rows.push_back({base + ".lambda", "lambda",
                              std::to_string(st.branch_groups.size()),
                              (long long)st.branch_groups.size(), 0});
        }
        break;
      }
    }
  }
  for (const auto& row : rep.rows) {
    rep.total_params += row.params;
    rep.total_madds += row.madds;
  }
  return rep;
}

std::uint64_t empirical_cost_check(Network& net, const Tensor& input) {
  kernels::reset_mac_count();
  kernels::counting_enabled() = true;
  try {
    net.forward(input, false);
  } catch (...) {
    kernels::counting_enabled() = false;
    throw;
  }
  kernels::counting_enabled() = false;
  return kernels::mac_count();
}

std::string report_text(const CostReport& r) {
  std::ostringstream out;
  out << "model: " << r.model << "\n";
  out << "conventions: count_bn_params="
      << (r.conventions.count_bn_params ? "true" : "false")
      << " count_attention="
      << (r.conventions.count_attention ? "true" : "false")
      << " branch_sharing=" << (r.conventions.branch_sharing ? "true" : "false")
      << "\n";
  std::size_t lw = 5, ow = 2, sw = 9;
  for (const auto& row : r.rows) {
    lw = std::max(lw, row.layer.size());
    ow = std::max(ow, row.op.size());
    sw = std::max(sw, row.out_shape.size());
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-*s  %*s  %12s  %14s\n", int(lw),
                "layer", int(ow), "op", int(sw), "out_shape", "params",
                "madds");
  out << buf;
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-*s  %*s  %12lld  %14lld\n",
                  int(lw), row.layer.c_str(), int(ow), row.op.c_str(), int(sw),
                  row.out_shape.c_str(), row.params, row.madds);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s  %-*s  %*s  %12lld  %14lld\n", int(lw),
                "total", int(ow), "", int(sw), "", r.total_params,
                r.total_madds);
  out << buf;
  return out.str();
}

std::string report_csv(const CostReport& r) {
  std::ostringstream out;
  out << "layer,op,out_shape,params,madds\n";
  for (const auto& row : r.rows)
    out << row.layer << "," << row.op << "," << row.out_shape << ","
        << row.params << "," << row.madds << "\n";
  out << "total,,," << r.total_params << "," << r.total_madds << "\n";
  return out.str();
}

std::string report_json(const CostReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["conventions"] = {{"count_bn_params", r.conventions.count_bn_params},
                      {"count_attention", r.conventions.count_attention},
                      {"branch_sharing", r.conventions.branch_sharing}};
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"layer", row.layer},
                         {"op", row.op},
                         {"out_shape", row.out_shape},
                         {"params", row.params},
                         {"madds", row.madds}});
  j["total_params"] = r.total_params;
  j["total_madds"] = r.total_madds;
  return j.dump(2) + "\n";
}

const std::vector<LiteratureRow>& literature_rows() {
  static const std::vector<LiteratureRow> rows = {
      {"MobileNetV1", "imagenet", 4.2, 575},
      {"SqueezeNext", "imagenet", 3.2, 708},
      {"ShuffleNet (1.5)", "imagenet", 3.4, 292},
      {"ShuffleNet (x2)", "imagenet", 5.4, 524},
      {"CondenseNet (G=C=4)", "imagenet", 2.9, 274},
      {"CondenseNet (G=C=8)", "imagenet", 4.8, 529},
      {"MobileNetV2", "imagenet", 3.4, 300},
      {"MobileNetV2 (1.4)", "imagenet", 6.9, 585},
      {"NASNet-A", "imagenet", 5.3, 564},
      {"AmoebaNet-A", "imagenet", 5.1, 555},
      {"PNASNet", "imagenet", 5.1, 588},
      {"DARTS", "imagenet", 4.9, 595},
      {"ANTNet (g=1)", "imagenet", 3.7, 322},
      {"ANTNet (g=2)", "imagenet", 3.2, 267},
      {"e-ANTNet", "imagenet", 5.5, 545},
      {"ANTNet (a=1.4)", "imagenet", 6.8, 598},
      {"ShuffleNet (1.5)", "cifar100", 2.3, 91.0},
      {"MobileNetV2", "cifar100", 2.4, 91.1},
      {"ANTNet (g=1)", "cifar100", 2.7, 91.4},
      {"ANTNet (g=2)", "cifar100", 2.2, 73.2},
      {"e-ANTNet", "cifar100", 4.4, 154.9},
  };
  return rows;
}

std::string compare_table(const std::vector<CostReport>& reports,
                          const std::string& dataset,
                          const std::string& baseline,
                          const std::string& format) {
  if (reports.empty()) throw ConfigError("compare needs at least one report");
  const CostReport* base = nullptr;
  if (baseline.empty()) {
    base = &reports.front();
  } else {
    for (const auto& r : reports)
      if (r.model == baseline) base = &r;
    // Silently rebasing on another model would make every delta wrong.
    if (!base)
      throw ConfigError("baseline '" + baseline +
                        "' is not among the compared models");
  }

  struct Line {
    std::string model;
    double params_m, madds_m;
    bool computed;
    double dp, dm;  // percent reduction vs baseline
  };
  std::vector<Line> lines;
  for (const auto& r : reports) {
    Line l;
    l.model = r.model;
    l.params_m = r.total_params / 1e6;
    l.madds_m = r.total_madds / 1e6;
    l.computed = true;
    l.dp = 100.0 * (1.0 - double(r.total_params) / base->total_params);
    l.dm = 100.0 * (1.0 - double(r.total_madds) / base->total_madds);
    lines.push_back(l);
  }
  for (const auto& f : literature_rows()) {
    if (f.dataset != dataset) continue;
    Line l;
    l.model = f.model;
    l.params_m = f.params_m;
    l.madds_m = f.madds_m;
    l.computed = false;
    l.dp = 100.0 * (1.0 - f.params_m / (base->total_params / 1e6));
    l.dm = 100.0 * (1.0 - f.madds_m / (base->total_madds / 1e6));
    lines.push_back(l);
  }

  std::ostringstream out;
  char buf[256];
  if (format == "csv") {
    out << "model,source,params_m,madds_m,params_vs_" << base->model
        << "_pct,madds_vs_" << base->model << "_pct\n";
    for (const auto& l : lines) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.4f,%.2f,%.2f\n",
                    l.model.c_str(), l.computed ? "computed" : "published",
                    l.params_m, l.madds_m, l.dp, l.dm);
      out << buf;
    }
    return out.str();
  }
  std::size_t mw = 5;
  for (const auto& l : lines) mw = std::max(mw, l.model.size());
  out << "baseline: " << base->model << " (dataset: " << dataset << ")\n";
  std::snprintf(buf, sizeof buf, "%-*s  %-9s  %10s  %10s  %9s  %9s\n", int(mw),
                "model", "source", "params(M)", "madds(M)", "dparams%",
                "dmadds%");
  out << buf;
  for (const auto& l : lines) {
    std::snprintf(buf, sizeof buf, "%-*s  %-9s  %10.4f  %10.4f  %9.2f  %9.2f\n",
                  int(mw), l.model.c_str(),
                  l.computed ? "computed" : "published", l.params_m, l.madds_m,
                  l.dp, l.dm);
    out << buf;
  }
  return out.str();
}

}  // namespace antkit
