#include "antkit/fcrf.hpp"

#include <algorithm>

#include "json.hpp"

namespace antkit {

DependencyMatrix::DependencyMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), words_((cols + 63) / 64) {
  if (rows < 1 || cols < 1)
    throw AnalysisError("dependency matrix needs positive dimensions");
  bits_.assign(std::size_t(rows_) * words_, 0);
}

DependencyMatrix DependencyMatrix::identity(int n) {
  DependencyMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.set(i, i, true);
  return m;
}

DependencyMatrix DependencyMatrix::all_true(int rows, int cols) {
  DependencyMatrix m(rows, cols);
  for (int o = 0; o < rows; ++o)
    for (int w = 0; w < m.words_; ++w) {
      int lo = w * 64;
      int hi = std::min(cols, lo + 64);
      std::uint64_t word = hi - lo == 64 ? ~0ull : ((1ull << (hi - lo)) - 1);
      m.bits_[std::size_t(o) * m.words_ + w] = word;
    }
  return m;
}

DependencyMatrix DependencyMatrix::group_conv(int cout, int cin, int g,
                                              GroupLayout layout) {
  if (g < 1 || cout % g != 0 || cin % g != 0)
    throw AnalysisError("group conv pattern needs g dividing both extents");
  DependencyMatrix m(cout, cin);
  const int in_per = cin / g;
  const int out_per = cout / g;
  for (int o = 0; o < cout; ++o) {
    int q = layout == GroupLayout::blocked ? o / out_per : o % g;
    for (int i = q * in_per; i < (q + 1) * in_per; ++i) m.set(o, i, true);
  }
  return m;
}

bool DependencyMatrix::get(int o, int i) const {
  return (bits_[std::size_t(o) * words_ + i / 64] >> (i % 64)) & 1u;
}

void DependencyMatrix::set(int o, int i, bool v) {
  std::uint64_t& w = bits_[std::size_t(o) * words_ + i / 64];
  if (v)
    w |= 1ull << (i % 64);
  else
    w &= ~(1ull << (i % 64));
}

DependencyMatrix DependencyMatrix::compose(const DependencyMatrix& first) const {
  if (cols_ != first.rows_)
    throw AnalysisError("dependency chain mismatch: " + std::to_string(cols_) +
                        " vs " + std::to_string(first.rows_));
  DependencyMatrix out(rows_, first.cols_);
  for (int o = 0; o < rows_; ++o) {
    std::uint64_t* dst = &out.bits_[std::size_t(o) * out.words_];
    for (int k = 0; k < cols_; ++k) {
      if (!get(o, k)) continue;
      const std::uint64_t* src = &first.bits_[std::size_t(k) * first.words_];
      for (int w = 0; w < out.words_; ++w) dst[w] |= src[w];
    }
  }
  return out;
}

void DependencyMatrix::union_with(const DependencyMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw AnalysisError("dependency union needs equal shapes");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
}

bool DependencyMatrix::all() const { return !first_false().has_value(); }

double DependencyMatrix::density() const {
  long long count = 0;
  for (std::uint64_t w : bits_) count += __builtin_popcountll(w);
  return double(count) / (double(rows_) * cols_);
}

std::optional<std::pair<int, int>> DependencyMatrix::first_false() const {
  for (int o = 0; o < rows_; ++o)
    for (int i = 0; i < cols_; ++i)
      if (!get(o, i)) return std::make_pair(o, i);
  return std::nullopt;
}

std::string DependencyMatrix::grid() const {
  std::string out;
  out.reserve(std::size_t(rows_) * (cols_ + 1));
  for (int o = 0; o < rows_; ++o) {
    for (int i = 0; i < cols_; ++i) out.push_back(get(o, i) ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

DependencyMatrix block_dependency(const BlockConfig& cfg) {
  cfg.validate();
  const int c1 = cfg.in_channels;
  const int cp = cfg.expanded();
  const int c2 = cfg.out_channels;
  DependencyMatrix d = DependencyMatrix::identity(c1);
  if (cfg.placement == Placement::before_expansion)
    d = DependencyMatrix::all_true(c1, c1).compose(d);
  if (cfg.expansion > 1)
    d = DependencyMatrix::all_true(cp, c1).compose(d);
  // Depthwise and BN/activation stages are per-channel: identity, no-op.
  if (cfg.placement == Placement::between)
    d = DependencyMatrix::all_true(cp, cp).compose(d);
  d = DependencyMatrix::group_conv(c2, cp, cfg.groups, cfg.proj_layout)
          .compose(d);
  if (cfg.placement == Placement::after_projection)
    d = DependencyMatrix::all_true(c2, c2).compose(d);
  if (cfg.residual()) d.union_with(DependencyMatrix::identity(c1));
  return d;
}

DependencyMatrix e_block_dependency(const BlockConfig& base,
                                    const std::vector<int>& branch_groups) {
  if (branch_groups.empty())
    throw AnalysisError("ensemble dependency needs at least one branch");
  std::optional<DependencyMatrix> acc;
  for (int g : branch_groups) {
    BlockConfig cfg = base;
    cfg.groups = g;
    // Branch functions are summed, so dependencies union; the residual is
    // already unioned inside each branch when active.
    DependencyMatrix d = block_dependency(cfg);
    if (acc)
      acc->union_with(d);
    else
      acc = std::move(d);
  }
  return *acc;
}

namespace {

BlockConfig stage_block_config(const StageSpec& st, int in_c, int out_c,
                               int stride) {
  BlockConfig cfg;
  cfg.in_channels = in_c;
  cfg.out_channels = out_c;
  cfg.expansion = st.t;
  cfg.stride = stride;
  cfg.groups = st.g;
  cfg.reduction = st.r;
  cfg.placement =
      st.op == StageOp::inverted_residual ? Placement::none : st.placement;
  return cfg;
}

}  // namespace

DependencyMatrix network_dependency(const NetworkSpec& spec) {
  auto resolved = resolve(spec);
  DependencyMatrix d = DependencyMatrix::identity(spec.input_shape[0]);
  for (const auto& rs : resolved) {
    const StageSpec& st = rs.stage;
    switch (st.op) {
      case StageOp::conv2d:
      case StageOp::conv1x1:
        d = DependencyMatrix::all_true(rs.out_channels, rs.in_channels)
                .compose(d);
        break;
      case StageOp::antblock:
      case StageOp::inverted_residual:
        for (int k = 0; k < st.n; ++k) {
          int in_c = k == 0 ? rs.in_channels : rs.out_channels;
          d = block_dependency(
                  stage_block_config(st, in_c, rs.out_channels,
                                     k == 0 ? st.s : 1))
                  .compose(d);
        }
        break;
      case StageOp::e_antblock:
        for (int k = 0; k < st.n; ++k) {
          int in_c = k == 0 ? rs.in_channels : rs.out_channels;
          d = e_block_dependency(
                  stage_block_config(st, in_c, rs.out_channels,
                                     k == 0 ? st.s : 1),
                  st.branch_groups)
                  .compose(d);
        }
        break;
      case StageOp::avgpool:
      case StageOp::fc:
        // Classifier head: all-mixing by construction, excluded from the
        // trunk verdict.
        return d;
    }
  }
  return d;
}

FcrfVerdict check_fcrf(const NetworkSpec& spec) {
  FcrfVerdict v;
  auto resolved = resolve(spec);
  for (const auto& rs : resolved) {
    const StageSpec& st = rs.stage;
    if (!st.block_like()) continue;
    for (int k = 0; k < st.n; ++k) {
      int in_c = k == 0 ? rs.in_channels : rs.out_channels;
      BlockConfig cfg = stage_block_config(st, in_c, rs.out_channels,
                                           k == 0 ? st.s : 1);
      DependencyMatrix d = st.op == StageOp::e_antblock
                               ? e_block_dependency(cfg, st.branch_groups)
                               : block_dependency(cfg);
      v.blocks.push_back({rep_name(st, k), d.all(), d.density()});
    }
  }
  DependencyMatrix trunk = network_dependency(spec);
  v.fcrf = trunk.all();
  v.witness = trunk.first_false();
  v.matrix_density = trunk.density();
  return v;
}

FcrfVerdict check_fcrf(const BlockConfig& cfg) {
  FcrfVerdict v;
  DependencyMatrix d = block_dependency(cfg);
  v.fcrf = d.all();
  v.witness = d.first_false();
  v.matrix_density = d.density();
  v.blocks.push_back({"block", v.fcrf, v.matrix_density});
  return v;
}

std::string verdict_json(const FcrfVerdict& v) {
  nlohmann::ordered_json j;
  j["fcrf"] = v.fcrf;
  if (v.witness)
    j["witness"] = {{"out", v.witness->first}, {"in", v.witness->second}};
  else
    j["witness"] = nullptr;
  j["matrix_density"] = v.matrix_density;
  j["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : v.blocks)
    j["blocks"].push_back(
        {{"name", b.name}, {"fcrf", b.fcrf}, {"density", b.density}});
  return j.dump(2) + "\n";
}

}  // namespace antkit
