#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "antkit/fcrf.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace antkit;

namespace {

std::string spec_dir() { return ANTKIT_SPEC_DIR; }

DependencyMatrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  DependencyMatrix m(rows, cols);
  for (int o = 0; o < rows; ++o)
    for (int i = 0; i < cols; ++i) m.set(o, i, rng() % 3 == 0);
  return m;
}

// Empirical dependency of a built block: wiggle one input channel and record
// which output channels move. Observed dependencies must be a subset of the
// structural claim; anything else is a false "false".
DependencyMatrix numeric_dependency(const BlockConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AntBlockParams p = make_ant_block(cfg, rng);
  const int h = 3;
  Tensor x({1, cfg.in_channels, h, h});
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : x.data()) v = dist(rng);
  Tensor base = ant_block_forward(x, p, false);

  const int ho = base.shape()[2], wo = base.shape()[3];
  DependencyMatrix seen(cfg.out_channels, cfg.in_channels);
  for (int i = 0; i < cfg.in_channels; ++i) {
    Tensor shifted({1, cfg.in_channels, h, h});
    shifted.data() = x.data();
    for (int px = 0; px < h * h; ++px) shifted.data()[i * h * h + px] += 0.5;
    Tensor out = ant_block_forward(shifted, p, false);
    for (int o = 0; o < cfg.out_channels; ++o) {
      double delta = 0;
      for (int px = 0; px < ho * wo; ++px)
        delta = std::max(delta, std::abs(out.data()[o * ho * wo + px] -
                                         base.data()[o * ho * wo + px]));
      if (delta > 1e-9) seen.set(o, i, true);
    }
  }
  return seen;
}

}  // namespace

TEST_CASE("matrix primitives") {
  DependencyMatrix id = DependencyMatrix::identity(4);
  CHECK(id.get(2, 2));
  CHECK(!id.get(2, 3));
  CHECK(id.density() == doctest::Approx(0.25));
  CHECK(!id.all());

  DependencyMatrix full = DependencyMatrix::all_true(3, 70);  // crosses words
  CHECK(full.all());
  CHECK(full.density() == doctest::Approx(1.0));
  CHECK(!full.first_false().has_value());

  DependencyMatrix m(2, 2);
  CHECK(m.first_false() == std::pair{0, 0});
  m.set(0, 0, true);
  m.set(0, 1, true);
  CHECK(m.first_false() == std::pair{1, 0});
  CHECK(m.grid() == "11\n00\n");
}

TEST_CASE("group conv patterns for both layouts") {
  DependencyMatrix blocked =
      DependencyMatrix::group_conv(4, 8, 2, GroupLayout::blocked);
  for (int o = 0; o < 4; ++o)
    for (int i = 0; i < 8; ++i)
      CHECK(blocked.get(o, i) == ((o / 2) == (i / 4)));

  DependencyMatrix inter =
      DependencyMatrix::group_conv(4, 8, 2, GroupLayout::interleaved);
  for (int o = 0; o < 4; ++o)
    for (int i = 0; i < 8; ++i)
      CHECK(inter.get(o, i) == ((o % 2) == (i / 4)));

  DependencyMatrix dense =
      DependencyMatrix::group_conv(5, 3, 1, GroupLayout::blocked);
  CHECK(dense.all());
}

TEST_CASE("composition semantics") {
  DependencyMatrix id = DependencyMatrix::identity(6);
  std::mt19937_64 rng(4);
  DependencyMatrix a = random_matrix(6, 6, rng);
  CHECK(a.compose(id) == a);
  CHECK(id.compose(a) == a);

  // An all-mixing layer anywhere in the chain absorbs grouped structure.
  DependencyMatrix local =
      DependencyMatrix::group_conv(6, 6, 2, GroupLayout::blocked);
  DependencyMatrix mix = DependencyMatrix::all_true(6, 6);
  CHECK(mix.compose(local).all());
  CHECK(local.compose(mix).all());

  // Two grouped layers over the same partition stay block-diagonal.
  CHECK(local.compose(local) == local);

  DependencyMatrix b = random_matrix(6, 6, rng);
  DependencyMatrix c = random_matrix(6, 6, rng);
  CHECK(a.compose(b.compose(c)) == a.compose(b).compose(c));
}

TEST_CASE("union and residual identity") {
  DependencyMatrix m(3, 3);
  m.set(0, 1, true);
  DependencyMatrix id = DependencyMatrix::identity(3);
  m.union_with(id);
  CHECK(m.get(0, 0));
  CHECK(m.get(0, 1));
  CHECK(m.get(1, 1));
  CHECK(!m.get(1, 0));
}

TEST_CASE("attended blocks have a full receptive field for any grouping") {
  for (int g : {1, 2}) {
    for (Placement pl : {Placement::between, Placement::before_expansion,
                         Placement::after_projection}) {
      BlockConfig cfg;
      cfg.in_channels = 8;
      cfg.out_channels = 8;
      cfg.expansion = 2;
      cfg.groups = g;
      cfg.reduction = 4;
      cfg.placement = pl;
      FcrfVerdict v = check_fcrf(cfg);
      CAPTURE(g);
      CAPTURE(placement_name(pl));
      CHECK(v.fcrf);
      CHECK(v.matrix_density == doctest::Approx(1.0));
      CHECK(!v.witness.has_value());
    }
  }
}

TEST_CASE("ungrouped projection mixes everything even without attention") {
  BlockConfig cfg;
  cfg.in_channels = 8;
  cfg.out_channels = 8;
  cfg.expansion = 2;
  cfg.groups = 1;
  cfg.placement = Placement::none;
  CHECK(check_fcrf(cfg).fcrf);
}

TEST_CASE("grouped attention-free block is channel-local") {
  BlockConfig cfg;
  cfg.in_channels = 8;
  cfg.out_channels = 8;
  cfg.expansion = 1;
  cfg.groups = 2;
  cfg.placement = Placement::none;
  cfg.stride = 2;  // no residual
  DependencyMatrix m = block_dependency(cfg);
  CHECK(m.density() == doctest::Approx(0.5));
  FcrfVerdict v = check_fcrf(cfg);
  CHECK(!v.fcrf);
  REQUIRE(v.witness.has_value());
  auto [o, i] = *v.witness;
  CHECK(!m.get(o, i));
}

TEST_CASE("ensemble dependency is the union over branches") {
  BlockConfig base;
  base.in_channels = 8;
  base.out_channels = 8;
  base.expansion = 1;  // t > 1 would mix everything through the dense expand
  base.placement = Placement::none;
  base.stride = 2;

  // One dense branch rescues the grouped one.
  DependencyMatrix mixed = e_block_dependency(base, {1, 2});
  CHECK(mixed.all());
  // Two grouped branches over the same partition stay local.
  DependencyMatrix local = e_block_dependency(base, {2, 2});
  CHECK(local.density() == doctest::Approx(0.5));
  CHECK(!local.all());
}

TEST_CASE("published networks pass, the ablated stack fails with a witness") {
  CHECK(check_fcrf(antnet_cifar(2)).fcrf);
  CHECK(check_fcrf(antnet_imagenet(2)).fcrf);
  CHECK(check_fcrf(mobilenet_v2_cifar()).fcrf);
  CHECK(check_fcrf(e_antnet_cifar()).fcrf);

  NetworkSpec ablated = load_spec(spec_dir() + "/grouped_stack_ablated.json");
  FcrfVerdict v = check_fcrf(ablated);
  CHECK(!v.fcrf);
  REQUIRE(v.witness.has_value());
  DependencyMatrix m = network_dependency(ablated);
  CHECK(!m.get(v.witness->first, v.witness->second));
  CHECK(v.matrix_density == doctest::Approx(0.5));
  CHECK(v.blocks.size() == 2);
  for (const auto& b : v.blocks) CHECK(!b.fcrf);
}

TEST_CASE("per-block verdicts name every repetition") {
  FcrfVerdict v = check_fcrf(antnet_cifar(2));
  REQUIRE(v.blocks.size() == 17);
  CHECK(v.blocks.front().name == "ant1");
  CHECK(v.blocks[1].name == "ant2.0");
  CHECK(v.blocks.back().name == "ant7");
  for (const auto& b : v.blocks) CHECK(b.fcrf);
}

TEST_CASE("classifier layers never influence the trunk verdict") {
  NetworkSpec ablated = load_spec(spec_dir() + "/grouped_stack_ablated.json");
  DependencyMatrix bare = network_dependency(ablated);

  NetworkSpec with_head = ablated;
  StageSpec pool;
  pool.name = "pool";
  pool.op = StageOp::avgpool;
  with_head.stages.push_back(pool);
  StageSpec fc;
  fc.name = "fc";
  fc.op = StageOp::fc;
  fc.out_channels = 10;
  with_head.stages.push_back(fc);
  CHECK(network_dependency(with_head) == bare);
  CHECK(!check_fcrf(with_head).fcrf);
}

TEST_CASE("structural matrix covers every numerically observed dependency") {
  std::vector<BlockConfig> cases;
  for (int g : {1, 2})
    for (Placement pl : {Placement::between, Placement::before_expansion,
                         Placement::after_projection, Placement::none}) {
      BlockConfig cfg;
      cfg.in_channels = 6;
      cfg.out_channels = 6;
      cfg.expansion = 2;
      cfg.groups = g;
      cfg.reduction = 3;
      cfg.placement = pl;
      cases.push_back(cfg);
      cfg.stride = 2;
      cfg.out_channels = 4;
      cases.push_back(cfg);
    }
  BlockConfig inter = cases[1];
  inter.proj_layout = GroupLayout::interleaved;
  inter.groups = 2;
  cases.push_back(inter);
  REQUIRE(cases.size() >= 10);

  int config_index = 0;
  for (const auto& cfg : cases) {
    DependencyMatrix claimed = block_dependency(cfg);
    DependencyMatrix observed = numeric_dependency(cfg, 100 + config_index);
    CAPTURE(config_index);
    for (int o = 0; o < cfg.out_channels; ++o)
      for (int i = 0; i < cfg.in_channels; ++i)
        if (observed.get(o, i)) CHECK(claimed.get(o, i));
    ++config_index;
  }
}

TEST_CASE("verdict serialization") {
  FcrfVerdict good = check_fcrf(antnet_cifar(2));
  nlohmann::json j = nlohmann::json::parse(verdict_json(good));
  CHECK(j["fcrf"] == true);
  CHECK(j["witness"].is_null());
  CHECK(j["matrix_density"] == 1.0);
  CHECK(j["blocks"].size() == 17);
  CHECK(j["blocks"][0]["name"] == "ant1");

  NetworkSpec ablated = load_spec(spec_dir() + "/grouped_stack_ablated.json");
  nlohmann::json jb = nlohmann::json::parse(verdict_json(check_fcrf(ablated)));
  CHECK(jb["fcrf"] == false);
  CHECK(jb["witness"]["out"].is_number_integer());
  CHECK(jb["witness"]["in"] == 4);
}
