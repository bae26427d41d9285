#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "antkit/checkpoint.hpp"
#include "antkit/costmodel.hpp"
#include "antkit/fcrf.hpp"
#include "antkit/gradcheck.hpp"
#include "antkit/train.hpp"

namespace {

using namespace antkit;

std::string data_path(const std::string& p) {
  const char* root = std::getenv("ANTKIT_DATA_DIR");
  if (!root || !*root || p.empty() || p.front() == '/') return p;
  return std::string(root) + "/" + p;
}

CostConventions parse_conventions(const std::string& csv) {
  CostConventions cv;
  std::size_t pos = 0;
  while (pos <= csv.size() && !csv.empty()) {
    std::size_t comma = csv.find(',', pos);
    std::string tok = csv.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (tok == "no-bn")
      cv.count_bn_params = false;
    else if (tok == "no-attention")
      cv.count_attention = false;
    else if (tok == "share-trunk")
      cv.branch_sharing = true;
    else if (!tok.empty())
      throw FormatError("unknown conventions token '" + tok + "'");
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return cv;
}

NetworkSpec load_maybe_reduced(const std::string& path, bool reduce) {
  NetworkSpec spec = load_spec(path);
  return reduce ? reduce_spec(spec) : spec;
}

int cmd_describe(const std::string& path) {
  NetworkSpec spec = load_spec(path);
  auto resolved = resolve(spec);
  std::size_t nw = 5, ow = 2;
  for (const auto& rs : resolved) {
    nw = std::max(nw, rs.stage.name.size());
    ow = std::max(ow, std::string(stage_op_name(rs.stage.op)).size());
  }
  char buf[256];
  std::printf("network: %s  classes: %d  alpha: %g\n", spec.name.c_str(),
              spec.num_classes, spec.alpha);
  std::snprintf(buf, sizeof buf,
                "%-*s  %-*s  %-12s  %-12s  %2s  %2s  %2s  %3s  %2s  %s\n",
                int(nw), "stage", int(ow), "op", "in", "out", "n", "s", "t",
                "r", "g", "placement");
  std::fputs(buf, stdout);
  for (const auto& rs : resolved) {
    const StageSpec& st = rs.stage;
    std::string in = std::to_string(rs.in_h) + "x" + std::to_string(rs.in_w) +
                     "x" + std::to_string(rs.in_channels);
    std::string out = std::to_string(rs.out_h) + "x" +
                      std::to_string(rs.out_w) + "x" +
                      std::to_string(rs.out_channels);
    std::snprintf(buf, sizeof buf,
                  "%-*s  %-*s  %-12s  %-12s  %2d  %2d  %2d  %3d  %2d  %s\n",
                  int(nw), st.name.c_str(), int(ow), stage_op_name(st.op),
                  in.c_str(), out.c_str(), st.n, st.s, st.t, st.r, st.g,
                  placement_name(st.placement));
    std::fputs(buf, stdout);
  }
  return 0;
}

int cmd_cost(const std::string& path, const std::string& conventions,
             const std::string& format, bool reduce) {
  NetworkSpec spec = load_maybe_reduced(path, reduce);
  CostReport rep = network_cost(spec, parse_conventions(conventions));
  if (format == "csv")
    std::cout << report_csv(rep);
  else if (format == "json")
    std::cout << report_json(rep);
  else
    std::cout << report_text(rep);
  return 0;
}

int cmd_compare(const std::vector<std::string>& paths,
                const std::string& baseline, const std::string& conventions,
                const std::string& format) {
  std::vector<CostReport> reports;
  CostConventions cv = parse_conventions(conventions);
  for (const auto& p : paths) reports.push_back(network_cost(load_spec(p), cv));
  const std::string dataset =
      load_spec(paths.front()).input_shape[1] >= 128 ? "imagenet" : "cifar100";
  const std::string base = baseline.empty() ? reports.front().model : baseline;
  std::cout << compare_table(reports, dataset, base, format);
  return 0;
}

int cmd_fcrf(const std::string& path, const std::string& dump) {
  NetworkSpec spec = load_spec(path);
  FcrfVerdict v = check_fcrf(spec);
  if (!dump.empty()) {
    std::ofstream out(dump);
    if (!out) throw FormatError("cannot write matrix dump: " + dump);
    out << network_dependency(spec).grid();
  }
  std::cout << verdict_json(v);
  return v.fcrf ? 0 : 1;
}

int cmd_gradcheck(const std::string& path, bool reduce, std::uint64_t seed,
                  double eps, int coords, int batch, double tol) {
  NetworkSpec spec = load_maybe_reduced(path, reduce);
  Network net(spec, seed);
  Tensor input(
      {batch, spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]});
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : input.data()) v = dist(rng);
  GradcheckResult res = gradcheck_network(net, input, eps, coords, seed + 2);
  std::printf("max_rel_err=%.3e worst=%s coords_checked=%d coords_skipped=%d\n",
              res.max_rel_err, res.worst_param.c_str(), res.coords_checked,
              res.coords_skipped);
  return res.max_rel_err < tol ? 0 : 1;
}

struct TrainFlags {
  std::string spec_path;
  bool reduce = false;
  bool synth = false;
  std::string cifar, eval_path;
  int limit = 512;
  int classes = 2, per_class = 32;
  double noise = 0.05;
  TrainConfig cfg;
  std::string history_path, save_path, load_path;
};

int cmd_train(TrainFlags& f) {
  NetworkSpec spec = load_maybe_reduced(f.spec_path, f.reduce);
  Network net(spec, f.cfg.seed);
  if (!f.load_path.empty()) load_checkpoint(f.load_path, net);

  Dataset train_set, eval_set;
  if (f.synth) {
    SynthSpec ss;
    ss.classes = f.classes;
    ss.per_class = f.per_class;
    ss.size = spec.input_shape[1];
    ss.channels = spec.input_shape[0];
    ss.noise = f.noise;
    ss.seed = f.cfg.seed;
    if (f.classes > spec.num_classes)
      throw ConfigError("synthetic classes exceed the network's classes");
    train_set = synth_dataset(ss);
  } else if (!f.cifar.empty()) {
    train_set = load_cifar100_binary(data_path(f.cifar), f.limit);
    if (!f.eval_path.empty())
      eval_set = load_cifar100_binary(data_path(f.eval_path), f.limit);
  } else {
    throw FormatError("train needs --synth or --cifar FILE");
  }

  History hist = train(net, train_set, eval_set, f.cfg);
  const std::string csv = history_csv(hist);
  if (f.history_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(f.history_path);
    if (!out) throw FormatError("cannot write history: " + f.history_path);
    out << csv;
  }
  if (!f.save_path.empty()) save_checkpoint(f.save_path, net);

  const double final_acc =
      hist.epochs.empty() ? 0.0 : hist.epochs.back().train_acc;
  std::fprintf(stderr, "final train accuracy %.4f after %zu epochs\n",
               final_acc, hist.epochs.size());
  if (f.cfg.target_train_acc > 0 && final_acc < f.cfg.target_train_acc)
    return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ANTBlock/ANTNet analysis toolkit"};
  app.require_subcommand(1);

  std::string spec_path, conventions, format = "text", dump, baseline;
  std::vector<std::string> paths;
  bool reduce = false;
  std::uint64_t seed = 0;
  double eps = 1e-4, tol = 1e-4;
  int coords = 200, batch = 2;
  TrainFlags tf;

  auto* describe = app.add_subcommand("describe", "stage table of a spec");
  describe->add_option("spec", spec_path, "spec JSON file")->required();

  auto* cost = app.add_subcommand("cost", "parameter/MAdds report");
  cost->add_option("spec", spec_path, "spec JSON file")->required();
  cost->add_option("--conventions", conventions,
                   "comma list: no-bn,no-attention,share-trunk");
  cost->add_option("--format", format, "text|csv|json");
  cost->add_flag("--reduce", reduce, "desk-scale variant of the spec");

  auto* compare = app.add_subcommand("compare", "budgets side by side");
  compare->add_option("specs", paths, "spec JSON files")->required();
  compare->add_option("--baseline", baseline, "baseline model name");
  compare->add_option("--conventions", conventions,
                      "comma list: no-bn,no-attention,share-trunk");
  compare->add_option("--format", format, "text|csv");

  auto* fcrf = app.add_subcommand("fcrf", "full channel receptive field check");
  fcrf->add_option("spec", spec_path, "spec JSON file")->required();
  fcrf->add_option("--dump-matrix", dump, "write the 0/1 dependency grid");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check");
  gradcheck->add_option("spec", spec_path, "spec JSON file")->required();
  gradcheck->add_flag("--reduce", reduce, "desk-scale variant of the spec");
  gradcheck->add_option("--seed", seed, "rng seed");
  gradcheck->add_option("--eps", eps, "central-difference displacement");
  gradcheck->add_option("--coords", coords, "minimum coordinates to check");
  gradcheck->add_option("--batch", batch, "input batch size");
  gradcheck->add_option("--tol", tol, "pass threshold on max_rel_err");

  auto* train = app.add_subcommand("train", "desk-scale training loop");
  train->add_option("spec", tf.spec_path, "spec JSON file")->required();
  train->add_flag("--reduce", tf.reduce, "desk-scale variant of the spec");
  train->add_flag("--synth", tf.synth, "synthetic separable dataset");
  train->add_option("--cifar", tf.cifar, "CIFAR-100 binary file");
  train->add_option("--eval", tf.eval_path, "evaluation split file");
  train->add_option("--limit", tf.limit, "max records to read");
  train->add_option("--classes", tf.classes, "synthetic class count");
  train->add_option("--per-class", tf.per_class, "synthetic images per class");
  train->add_option("--noise", tf.noise, "synthetic noise level");
  train->add_option("--epochs", tf.cfg.max_epochs, "epoch budget");
  train->add_option("--batch", tf.cfg.batch_size, "batch size");
  train->add_option("--lr", tf.cfg.lr_init, "initial learning rate");
  train->add_option("--momentum", tf.cfg.momentum, "momentum");
  train->add_option("--wd", tf.cfg.weight_decay, "weight decay");
  train->add_option("--gamma", tf.cfg.lr_gamma, "lr decay factor");
  train->add_option("--milestones", tf.cfg.milestones, "lr decay epochs");
  train->add_option("--seed", tf.cfg.seed, "rng seed");
  train->add_flag("--augment", tf.cfg.augment, "crop/flip/mean pipeline");
  train->add_option("--target-train-acc", tf.cfg.target_train_acc,
                    "stop early and gate the exit code");
  train->add_option("--history", tf.history_path, "write history CSV here");
  train->add_option("--save", tf.save_path, "write a checkpoint");
  train->add_option("--load", tf.load_path, "start from a checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (describe->parsed()) return cmd_describe(spec_path);
    if (cost->parsed()) return cmd_cost(spec_path, conventions, format, reduce);
    if (compare->parsed())
      return cmd_compare(paths, baseline, conventions, format);
    if (fcrf->parsed()) return cmd_fcrf(spec_path, dump);
    if (gradcheck->parsed())
      return cmd_gradcheck(spec_path, reduce, seed, eps, coords, batch, tol);
    if (train->parsed()) return cmd_train(tf);
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return 2;
  } catch (const TensorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainError& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
