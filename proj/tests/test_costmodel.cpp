#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <string>
#include <vector>

#include "antkit/costmodel.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace antkit;

namespace {

std::pair<long long, long long> totals(const NetworkSpec& spec,
                                       CostConventions cv = {}) {
  CostReport r = network_cost(spec, cv);
  return {r.total_params, r.total_madds};
}

// The ensemble variant of the ImageNet table: every expanded stage becomes a
// two-branch block, exactly like the CIFAR builder's transformation.
NetworkSpec e_antnet_imagenet() {
  NetworkSpec spec = antnet_imagenet(2);
  spec.name = "e_antnet_imagenet";
  for (auto& st : spec.stages)
    if (st.op == StageOp::antblock && st.t > 1) {
      st.op = StageOp::e_antblock;
      st.branch_groups = {1, 2};
      st.g = 1;
    }
  return spec;
}

}  // namespace

TEST_CASE("imagenet budgets under the default conventions") {
  CHECK(totals(antnet_imagenet(2)) ==
        std::pair<long long, long long>{3346695, 245244096});
  CHECK(totals(antnet_imagenet(1)) ==
        std::pair<long long, long long>{3828039, 301089984});
  CHECK(totals(mobilenet_v2_imagenet()) ==
        std::pair<long long, long long>{3504872, 300774272});
  CHECK(totals(antnet_imagenet(2, 1.4)) ==
        std::pair<long long, long long>{5716772, 461773280});
  CHECK(totals(e_antnet_imagenet()) ==
        std::pair<long long, long long>{5479490, 504110208});
}

TEST_CASE("cifar budgets under the default conventions") {
  CHECK(totals(antnet_cifar(2)) ==
        std::pair<long long, long long>{2193795, 35390784});
  CHECK(totals(antnet_cifar(1)) ==
        std::pair<long long, long long>{2675139, 44188992});
  CHECK(totals(mobilenet_v2_cifar()) ==
        std::pair<long long, long long>{2351972, 43873280});
  CHECK(totals(antnet_cifar_fixed_r(8)) ==
        std::pair<long long, long long>{3488064, 45001344});
  CHECK(totals(antnet_cifar_fixed_r(16)) ==
        std::pair<long long, long long>{2923586, 44437312});
  CHECK(totals(antnet_cifar_fixed_r(32)) ==
        std::pair<long long, long long>{2641058, 44155008});
}

TEST_CASE("ensemble budgets with and without trunk sharing") {
  CHECK(totals(e_antnet_cifar()) ==
        std::pair<long long, long long>{4326590, 71193984});
  CHECK(totals(e_antnet_cifar(true)) ==
        std::pair<long long, long long>{3159491, 52987200});
  // The sharing convention flag reproduces the shared builder's numbers.
  CostConventions cv;
  cv.branch_sharing = true;
  CHECK(totals(e_antnet_cifar(), cv) ==
        std::pair<long long, long long>{3159491, 52987200});
}

TEST_CASE("depthwise separable spot value") {
  // 3x3 depthwise then 1x1 pointwise, 32 -> 64 channels on a 112x112 map.
  auto dw = conv_cost({32, 32, 3, 1, 1, 32, false}, 112, 112);
  auto pw = conv_cost({32, 64, 1, 1, 0, 1, false}, 112, 112);
  CHECK(dw.second + pw.second == 29302784);
  // Which is h*w*C1*(K*K + C2), the usual closed form.
  CHECK(dw.second + pw.second == 112LL * 112 * 32 * (9 + 64));
}

TEST_CASE("grouped projection spot value") {
  auto gc = conv_cost({144, 24, 1, 1, 0, 2, false}, 56, 56);
  CHECK(gc.first == 24LL * 72);
  CHECK(gc.second == 5419008);
  // Doubling the groups halves both columns.
  auto g1 = conv_cost({144, 24, 1, 1, 0, 1, false}, 56, 56);
  CHECK(g1.first == 2 * gc.first);
  CHECK(g1.second == 2 * gc.second);
}

TEST_CASE("convolution cost conventions") {
  // Stem: 3->32, 3x3. Params exclude BN here; BN lives in the report rows.
  auto stem = conv_cost({3, 32, 3, 2, 1, 1, false}, 112, 112);
  CHECK(stem.first == 864);
  CHECK(stem.second == 864LL * 112 * 112);
  auto biased = conv_cost({3, 32, 3, 2, 1, 1, true}, 112, 112);
  CHECK(biased.first == 864 + 32);
  CHECK(biased.second == stem.second);  // bias adds are free
}

TEST_CASE("attention unit cost") {
  AttentionCost a = attention_cost(144, 8, true);
  CHECK(a.weight_params == 2 * 144 * 18);
  CHECK(a.bias_params == 144 + 18);
  CHECK(a.madds == 2 * 144 * 18);
  // Ratio equal to the width bottoms out at a single hidden unit.
  AttentionCost tight = attention_cost(64, 64, false);
  CHECK(tight.weight_params == 2 * 64);
  CHECK(tight.bias_params == 0);
}

TEST_CASE("attention increment matches the per-block closed form") {
  NetworkSpec spec = antnet_imagenet(2);
  long long closed = 0;
  for (const auto& rs : resolve(spec)) {
    const StageSpec& st = rs.stage;
    if (!st.attention()) continue;
    for (int k = 0; k < st.n; ++k) {
      long long cp = st.t * (k == 0 ? rs.in_channels : rs.out_channels);
      closed += 2 * cp * cp / st.r;
    }
  }
  CHECK(closed == 315712);
  CHECK(attention_weight_increment(spec) == closed);
  // Same table, same attention cost, independent of input resolution.
  CHECK(attention_weight_increment(antnet_cifar(2)) == closed);
}

TEST_CASE("instrumented forward reproduces the analytic madds") {
  std::mt19937_64 rng(19);
  auto pick = [&](std::initializer_list<int> xs) {
    std::vector<int> v(xs);
    return v[rng() % v.size()];
  };
  int checked = 0;
  for (int trial = 0; trial < 22; ++trial) {
    NetworkSpec spec;
    spec.name = "random" + std::to_string(trial);
    spec.input_shape = {pick({1, 2, 3}), 8, 8};
    spec.num_classes = pick({2, 5});

    StageSpec stem;
    stem.name = "conv0";
    stem.op = StageOp::conv2d;
    stem.out_channels = pick({4, 6, 8});
    stem.s = pick({1, 2});
    spec.stages.push_back(stem);

    StageSpec blk;
    blk.name = "b1";
    blk.op = trial % 4 == 3 ? StageOp::inverted_residual : StageOp::antblock;
    blk.out_channels = pick({4, 8});
    blk.n = pick({1, 2});
    blk.s = pick({1, 2});
    blk.t = pick({1, 2, 3});
    blk.g = blk.op == StageOp::antblock ? pick({1, 2}) : 1;
    if (blk.op == StageOp::antblock) {
      blk.placement = static_cast<Placement>(trial % 3);  // skips none
      blk.r = pick({1, 2, 4});
    }
    spec.stages.push_back(blk);

    if (trial % 2 == 0) {
      StageSpec e;
      e.name = "e2";
      e.op = StageOp::e_antblock;
      e.out_channels = blk.out_channels;
      e.t = 2;
      e.r = 2;
      e.placement = Placement::between;
      e.branch_groups = {1, 2};
      e.share_trunk = trial % 4 == 0;
      spec.stages.push_back(e);
    }

    StageSpec head;
    head.name = "head";
    head.op = StageOp::conv1x1;
    head.out_channels = 16;
    spec.stages.push_back(head);
    StageSpec pool;
    pool.name = "pool";
    pool.op = StageOp::avgpool;
    spec.stages.push_back(pool);
    StageSpec fc;
    fc.name = "fc";
    fc.op = StageOp::fc;
    fc.out_channels = spec.num_classes;
    spec.stages.push_back(fc);

    CostReport rep = network_cost(spec);
    Network net(spec, trial);
    Tensor input({1, spec.input_shape[0], 8, 8});
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : input.data()) v = dist(rng);
    CHECK(empirical_cost_check(net, input) ==
          std::uint64_t(rep.total_madds));
    ++checked;
  }
  CHECK(checked >= 20);

  // The published network itself, desk-sized.
  NetworkSpec red = reduce_spec(antnet_cifar(2));
  Network net(red, 5);
  Tensor input = Tensor::full({1, 3, 32, 32}, 0.25);
  CHECK(empirical_cost_check(net, input) ==
        std::uint64_t(network_cost(red).total_madds));
}

TEST_CASE("rows always sum to the report totals") {
  for (const auto& spec : {antnet_imagenet(2), antnet_cifar(1),
                           e_antnet_cifar(), e_antnet_cifar(true),
                           mobilenet_v2_imagenet()}) {
    CostReport rep = network_cost(spec);
    long long p = 0, m = 0;
    for (const auto& row : rep.rows) {
      p += row.params;
      m += row.madds;
    }
    CHECK(p == rep.total_params);
    CHECK(m == rep.total_madds);
  }
}

TEST_CASE("dropping batch norm removes two parameters per normalized channel") {
  NetworkSpec spec = antnet_cifar(2);
  CostConventions no_bn;
  no_bn.count_bn_params = false;
  auto [p_with, m_with] = totals(spec);
  auto [p_without, m_without] = totals(spec, no_bn);
  CHECK(m_with == m_without);  // normalization is parameter bookkeeping only

  Network net(spec, 1);
  long long bn_values = 0;
  for (auto& s : net.running_stats()) bn_values += (long long)s.values->size();
  CHECK(p_with - p_without == bn_values);  // mean+var pairs == gamma+beta pairs
}

TEST_CASE("dropping attention recovers the attention-free skeleton") {
  CostConventions no_attn;
  no_attn.count_attention = false;
  // With attention rows removed, the g=1 table costs exactly what the
  // inverted-residual baseline costs.
  CHECK(totals(antnet_cifar(1), no_attn) == totals(mobilenet_v2_cifar()));
  CHECK(totals(antnet_imagenet(1), no_attn) == totals(mobilenet_v2_imagenet()));

  auto [p_with, m_with] = totals(antnet_imagenet(2));
  auto [p_without, m_without] = totals(antnet_imagenet(2), no_attn);
  long long weights = attention_weight_increment(antnet_imagenet(2));
  CHECK(p_with - p_without >= weights);  // weights plus their biases
  CHECK(m_with - m_without == weights);  // madds see only the weights
}

TEST_CASE("csv and json reports are machine readable") {
  CostReport rep = network_cost(antnet_cifar(2));
  std::string csv = report_csv(rep);
  CHECK(csv.rfind("layer,op,out_shape,params,madds\n", 0) == 0);
  CHECK(csv.find("\ntotal,,,2193795,35390784\n") != std::string::npos);

  nlohmann::json j = nlohmann::json::parse(report_json(rep));
  CHECK(j["model"] == "antnet_cifar_g2");
  CHECK(j["total_params"] == 2193795);
  CHECK(j["total_madds"] == 35390784);
  CHECK(j["conventions"]["count_bn_params"] == true);
  CHECK(j["rows"].is_array());
  CHECK(!j["rows"].empty());

  std::string text = report_text(rep);
  CHECK(text.find("antnet_cifar_g2") != std::string::npos);
  CHECK(text.find("total") != std::string::npos);
}

TEST_CASE("literature table carries the published reference rows") {
  const auto& rows = literature_rows();
  int imagenet = 0, cifar = 0;
  for (const auto& r : rows) (r.dataset == "imagenet" ? imagenet : cifar)++;
  CHECK(imagenet == 16);
  CHECK(cifar == 5);
  bool found = false;
  for (const auto& r : rows)
    if (r.model == "MobileNetV2" && r.dataset == "imagenet") {
      found = true;
      CHECK(r.params_m == 3.4);
      CHECK(r.madds_m == 300.0);
    }
  CHECK(found);
}

TEST_CASE("comparison table computes percentage reductions") {
  std::vector<CostReport> reps = {network_cost(antnet_cifar(2)),
                                  network_cost(mobilenet_v2_cifar())};
  std::string csv =
      compare_table(reps, "cifar100", "mobilenetv2_cifar", "csv");
  CHECK(csv.rfind("model,source,params_m,madds_m,params_vs_mobilenetv2_cifar"
                  "_pct,madds_vs_mobilenetv2_cifar_pct\n",
                  0) == 0);
  CHECK(csv.find("antnet_cifar_g2,computed,2.1938,35.3908,6.73,19.33") !=
        std::string::npos);
  CHECK(csv.find("mobilenetv2_cifar,computed") != std::string::npos);
  CHECK(csv.find("ANTNet (g=2),published") != std::string::npos);
  // Published CIFAR rows ride along; ImageNet rows stay out.
  CHECK(csv.find("NASNet") == std::string::npos);

  std::string text =
      compare_table(reps, "cifar100", "mobilenetv2_cifar", "text");
  CHECK(text.find("published") != std::string::npos);

  // Empty baseline falls back to the first report; a wrong name must not.
  std::string def = compare_table(reps, "cifar100", "", "text");
  CHECK(def.find("baseline: antnet_cifar_g2") != std::string::npos);
  CHECK_THROWS_AS(compare_table(reps, "cifar100", "shufflenet", "csv"),
                  ConfigError);
}
