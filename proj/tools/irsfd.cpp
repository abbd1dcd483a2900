#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irsfd/experiment.hpp"
#include "irsfd/overhead.hpp"
#include "irsfd/schemes.hpp"
#include "irsfd/unfolding.hpp"

namespace {

using namespace irsfd;

struct CommonOptions {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> schemes;
  std::string out = "results";
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_schemes = true) {
  cmd->add_option("-c,--config", o.config, "Experiment JSON (scenario, settings, seeds, ...)")->check(CLI::ExistingFile);
  cmd->add_option("-s,--seeds", o.seeds, "Seed list; overrides the config")->delimiter(',');
  if (with_schemes)
    cmd->add_option("--schemes", o.schemes, "ssca,unfolding,full-csi,random-irs,no-irs,hd")->delimiter(',');
  cmd->add_option("-o,--out", o.out, "Output directory");
  cmd->add_option("-j,--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
}

ExperimentSpec load_spec(const CommonOptions& o) {
  ExperimentSpec spec = o.config.empty() ? ExperimentSpec{} : load_experiment(o.config);
  if (!o.seeds.empty()) spec.seeds = o.seeds;
  if (!o.schemes.empty()) {
    spec.schemes.clear();
    for (const auto& s : o.schemes) spec.schemes.push_back(parse_scheme(s));
  }
  if (o.threads) spec.threads = *o.threads;
  return spec;
}

int finish(const ExperimentReport& rep, const std::string& dir) {
  write_report(rep, dir);
  for (const auto& [name, _] : rep.files) std::cout << "wrote " << (std::filesystem::path(dir) / name).string() << '\n';
  if (rep.failures > 0) {
    std::cerr << rep.failures << " point(s) failed; see the status column\n";
    return 2;
  }
  return 0;
}

int run_train(const CommonOptions& o, int samples, std::string checkpoint, std::string trace) {
  const ExperimentSpec spec = load_spec(o);
  const std::uint64_t seed = o.seeds.empty() ? spec.model_seed : o.seeds.front();
  SchemeSettings s = spec.settings;
  if (samples > 0) s.pool_size = samples;
  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  if (checkpoint.empty()) checkpoint = (dir / "model.ckpt").string();
  if (trace.empty()) trace = (dir / "train_trace.csv").string();
  std::cerr << "training on " << s.pool_size << " samples, " << s.train.layers << " layers, "
            << s.train.epochs << " epochs\n";
  TrainTrace tt;
  const UnfoldingModel model = train_model(spec.scenario, s, seed, nullptr, &tt);
  save_checkpoint(checkpoint, model.lpbn, model.sabn);
  std::cout << "wrote " << checkpoint << '\n';
  std::ofstream out(trace);
  if (!out) throw InvalidArgument("cannot write " + trace);
  write_train_trace_csv(out, tt);
  std::cout << "wrote " << trace << '\n';
  return 0;
}

int run_eval(const CommonOptions& o, int samples, const std::string& checkpoint) {
  const ExperimentSpec spec = load_spec(o);
  const auto [lpbn, sabn] = load_checkpoint(checkpoint);
  sabn.check(spec.scenario);
  const std::vector<std::uint64_t> seeds = spec.seeds.empty() ? std::vector<std::uint64_t>{1} : spec.seeds;
  std::ostringstream csv;
  csv << "seed,samples,network_rate,bcd_rate,ratio\n";
  char line[256];
  for (std::uint64_t seed : seeds) {
    const std::vector<FullCsi> test = draw_samples(spec.scenario, samples, derive_seed(seed, 99));
    const double net = network_average_rate(test, lpbn, sabn, spec.scenario, spec.settings.unfolding);
    const double bcd = average_bcd_rate(test, lpbn.theta, spec.scenario, spec.settings.bcd, seed);
    std::snprintf(line, sizeof line, "%llu,%d,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(seed), samples,
                  net, bcd, net / bcd);
    csv << line;
  }
  std::cout << csv.str();
  ExperimentReport rep;
  rep.files["eval.csv"] = csv.str();
  return finish(rep, o.out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-timescale beamforming for IRS-aided full-duplex MIMO"};
  app.require_subcommand(1);

  CommonOptions conv_opt, sweep_opt, over_opt, train_opt, eval_opt;

  auto* conv = app.add_subcommand("convergence", "BCD, SSCA and training traces");
  add_common(conv, conv_opt);

  auto* sweep = app.add_subcommand("sweep", "Run a sweep experiment from a config");
  add_common(sweep, sweep_opt);
  std::string kind;
  std::vector<double> values;
  sweep->add_option("-k,--kind", kind, "Experiment kind, e.g. sweep-T; overrides the config");
  sweep->add_option("--values", values, "Sweep points; overrides the config")->delimiter(',');
  bool plot = false;
  sweep->add_flag("--gnuplot", plot, "Also write plot.gp");

  auto* over = app.add_subcommand("overhead", "CSI signalling bits per coherence block");
  add_common(over, over_opt, false);
  std::vector<double> t_values;
  over->add_option("-T,--elements", t_values, "IRS element counts")->delimiter(',');

  auto* tr = app.add_subcommand("train-unfolding", "Train the unfolded network and save a checkpoint");
  add_common(tr, train_opt, false);
  int train_samples = 0;
  std::string checkpoint, trace;
  tr->add_option("-n,--samples", train_samples, "Training samples (default: settings.pool_size)");
  tr->add_option("--checkpoint", checkpoint, "Checkpoint path (default: <out>/model.ckpt)");
  tr->add_option("--trace", trace, "Training trace CSV (default: <out>/train_trace.csv)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint against converged BCD");
  add_common(ev, eval_opt, false);
  int eval_samples = 20;
  std::string eval_ckpt;
  ev->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  ev->add_option("-n,--samples", eval_samples, "Held-out samples per seed")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*conv) {
      ExperimentSpec spec = load_spec(conv_opt);
      spec.kind = ExperimentKind::Convergence;
      spec.validate();
      return finish(run_experiment(spec), conv_opt.out);
    }
    if (*sweep) {
      ExperimentSpec spec = load_spec(sweep_opt);
      if (!kind.empty()) spec.kind = parse_experiment_kind(kind);
      if (!values.empty()) spec.values = values;
      if (plot) spec.gnuplot = true;
      spec.validate();
      return finish(run_experiment(spec), sweep_opt.out);
    }
    if (*over) {
      ExperimentSpec spec = load_spec(over_opt);
      spec.kind = ExperimentKind::Overhead;
      if (!t_values.empty()) spec.values = t_values;
      spec.validate();
      return finish(run_experiment(spec), over_opt.out);
    }
    if (*tr) return run_train(train_opt, train_samples, checkpoint, trace);
    if (*ev) return run_eval(eval_opt, eval_samples, eval_ckpt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
