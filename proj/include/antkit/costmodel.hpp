#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "antkit/arch.hpp"

namespace antkit {

// Counting switches, echoed in every report. Defaults are the convention
// under which the published MobileNetV2 budget reproduces: BN pairs counted
// as parameters, attention FCs counted in both columns, ensemble branches
// costed without trunk sharing.
struct CostConventions {
  bool count_bn_params = true;
  bool count_attention = true;
  bool branch_sharing = false;

  bool operator==(const CostConventions&) const = default;
};

struct CostRow {
  std::string layer;
  std::string op;
  std::string out_shape;  // HxWxC
  long long params = 0;
  long long madds = 0;
};

struct CostReport {
  std::string model;
  CostConventions conventions;
  std::vector<CostRow> rows;
  long long total_params = 0;
  long long total_madds = 0;
};

// params = C2*(C1/g)*K*K (+C2 with bias); madds = weight params * H2 * W2.
// One multiply-accumulate is one MAdd; bias adds are free.
std::pair<long long, long long> conv_cost(const ConvSpec& spec, int h2, int w2);

struct AttentionCost {
  long long weight_params = 0;
  long long bias_params = 0;
  long long madds = 0;
};

// Two FCs over the pooled vector: weights 2*C*hidden with the floor-rule
// hidden width (equal to 2*C^2/r whenever r | C); biases reported separately.
AttentionCost attention_cost(int channels, int r, bool bias);

// Sum of attention FC weight counts over every block of the spec; equals the
// closed form 2*sum(n_i * C'_i^2 / r_i) when every ratio divides exactly.
long long attention_weight_increment(const NetworkSpec& spec);

CostReport network_cost(const NetworkSpec& spec,
                        const CostConventions& conventions = {});

// Runs a forward pass with multiply-accumulate instrumentation and returns
// the exact count. Conv and FC kernels only, matching the analytic column.
std::uint64_t empirical_cost_check(Network& net, const Tensor& input);

std::string report_text(const CostReport& r);
std::string report_csv(const CostReport& r);
std::string report_json(const CostReport& r);

// Published budget figures quoted for comparison; never computed.
struct LiteratureRow {
  std::string model;
  std::string dataset;  // "imagenet" | "cifar100"
  double params_m = 0;  // millions
  double madds_m = 0;   // millions
};

const std::vector<LiteratureRow>& literature_rows();

// Side-by-side table of computed reports plus the published rows for the
// dataset, with percentage deltas against the named baseline report. An
// empty baseline means the first report; a name that matches none of the
// reports is a ConfigError.
std::string compare_table(const std::vector<CostReport>& reports,
                          const std::string& dataset,
                          const std::string& baseline,
                          const std::string& format);

}  // namespace antkit
