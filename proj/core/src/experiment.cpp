#include "irsfd/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "irsfd/channels.hpp"
#include "irsfd/scenario_io.hpp"
#include "irsfd/system.hpp"
#include "json.hpp"

namespace irsfd {

using nlohmann::json;

namespace {

struct KindInfo {
  ExperimentKind kind;
  const char* name;
  const char* parameter;
};

constexpr KindInfo kKinds[] = {
    {ExperimentKind::Convergence, "convergence", "none"},
    {ExperimentKind::SweepT, "sweep-T", "irs_elements"},
    {ExperimentKind::SweepPower, "sweep-power", "ap_power_dbm"},
    {ExperimentKind::SweepSi, "sweep-SI", "si_power_db"},
    {ExperimentKind::SweepQuantization, "sweep-quantization", "quantization_bits"},
    {ExperimentKind::SweepDelay, "sweep-delay", "delay_s"},
    {ExperimentKind::SweepError, "sweep-error", "csi_error"},
    {ExperimentKind::Overhead, "overhead", "irs_elements"},
    {ExperimentKind::SampleCount, "sample-count", "pool_size"},
    {ExperimentKind::LayerCount, "layer-count", "layers"},
    {ExperimentKind::AntennaSweep, "antenna-sweep", "ap_antennas"},
    {ExperimentKind::RandomLocations, "random-locations", "location_radius_m"},
};

const KindInfo& info(ExperimentKind k) {
  for (const auto& i : kKinds)
    if (i.kind == k) return i;
  throw InvalidArgument("unknown experiment kind");
}

// Round-trip exact, locale independent.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int as_count(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 1e6)
    throw InvalidArgument(std::string("sweep value for ") + what + " must be a non-negative integer");
  return static_cast<int>(v);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::mutex log_mutex;

void log_failure(const std::string& what) {
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "irsfd: " << what << '\n';
}

struct Row {
  Scheme scheme;
  double value;
  std::uint64_t seed;
  double ul = std::numeric_limits<double>::quiet_NaN();
  double dl = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::string status = "ok";
};

std::string csv_status(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out + "\"";
}

std::string gnuplot_script(const ExperimentSpec& spec) {
  std::ostringstream gp;
  gp << "# Mean total weighted sum-rate per scheme from summary.csv\n"
     << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set xlabel '" << sweep_parameter(spec.kind) << "'\n"
     << "set ylabel 'weighted sum-rate (bits/s/Hz)'\n"
     << "plot ";
  for (std::size_t i = 0; i < spec.schemes.size(); ++i) {
    if (i) gp << ", \\\n     ";
    gp << "'summary.csv' using 2:(strcol(1) eq '" << scheme_name(spec.schemes[i]) << "' ? $5 : 1/0) with linespoints title '"
       << scheme_name(spec.schemes[i]) << "'";
  }
  gp << '\n';
  return gp.str();
}

ExperimentReport run_overhead(const ExperimentSpec& spec, const std::vector<double>& values) {
  std::ostringstream out;
  out << "irs_elements,q,ts,as,k,l,n_u,n_d,m_u,m_d,q_single,q_mixed\n";
  for (double v : values) {
    OverheadParams p = spec.overhead;
    p.t = static_cast<std::uint64_t>(as_count(v, "irs_elements"));
    const Overhead o = csi_overhead(p);
    out << p.t << ',' << p.q << ',' << p.ts << ',' << p.as << ',' << p.k << ',' << p.l << ',' << p.n_u << ','
        << p.n_d << ',' << p.m_u << ',' << p.m_d << ',' << o.single_timescale << ',' << o.mixed_timescale << '\n';
  }
  ExperimentReport rep;
  rep.files["overhead.csv"] = out.str();
  return rep;
}

ExperimentReport run_convergence(const ExperimentSpec& spec) {
  const ScenarioConfig& cfg = spec.scenario;
  const SchemeSettings& s = spec.settings;
  std::vector<std::string> bcd(spec.seeds.size()), ssca(spec.seeds.size()), train_out(spec.seeds.size());
  std::atomic<int> failures{0};
  const bool with_unfolding =
      std::find(spec.schemes.begin(), spec.schemes.end(), Scheme::Unfolding) != spec.schemes.end();

  parallel_for(spec.seeds.size(), spec.threads, [&](std::size_t i) {
    const std::uint64_t seed = spec.seeds[i];
    try {
      const Trial trial = make_trial(cfg, seed, s);
      const PhaseVector theta = trial_random_theta(trial);
      Rng rng(derive_seed(seed, 14));
      const BcdResult res =
          run_bcd(effective_channels(trial.slots.front().actual, theta), random_feasible_init(cfg, rng), cfg, s.bcd);
      std::ostringstream b;
      for (std::size_t it = 0; it < res.trace.objective.size(); ++it)
        b << seed << ',' << it + 1 << ',' << num(res.trace.objective[it]) << ','
          << num(it < res.trace.sum_rate.size() ? res.trace.sum_rate[it] : std::nan("")) << '\n';
      bcd[i] = b.str();

      SscaConfig sc = s.ssca;
      sc.seed = derive_seed(seed, 15);
      const SscaResult sr = run_ssca(trial.pool, cfg, sc, s.bcd);
      std::ostringstream o;
      for (std::size_t it = 0; it < sr.trace.batch_sum_rate.size(); ++it)
        o << seed << ',' << it + 1 << ',' << num(sr.trace.batch_sum_rate[it]) << ',' << num(sr.trace.f_norm[it])
          << '\n';
      ssca[i] = o.str();

      if (with_unfolding) {
        TrainConfig tcfg = s.train;
        tcfg.seed = derive_seed(seed, 16);
        tcfg.eval_every = std::max(tcfg.eval_every, 1);
        const std::vector<FullCsi> heldout{trial.slots.front().actual};
        const TrainResult tr = train(trial.pool, tcfg, cfg, heldout, nullptr, s.unfolding);
        std::ostringstream t;
        for (std::size_t k = 0; k < tr.trace.step.size(); ++k)
          t << seed << ',' << tr.trace.step[k] << ',' << num(tr.trace.loss[k]) << ','
            << num(tr.trace.heldout_rate[k]) << '\n';
        train_out[i] = t.str();
      }
    } catch (const std::exception& e) {
      ++failures;
      log_failure("convergence seed " + std::to_string(seed) + ": " + e.what());
    }
  });

  ExperimentReport rep;
  auto join = [](const std::string& header, const std::vector<std::string>& parts) {
    std::string all = header;
    for (const auto& p : parts) all += p;
    return all;
  };
  rep.files["bcd_trace.csv"] = join("seed,iteration,objective,sum_rate\n", bcd);
  rep.files["ssca_trace.csv"] = join("seed,iteration,batch_sum_rate,f_norm\n", ssca);
  if (with_unfolding) rep.files["train_trace.csv"] = join("seed,step,loss,heldout_sum_rate\n", train_out);
  rep.failures = failures;
  return rep;
}

}  // namespace

std::string experiment_name(ExperimentKind k) { return info(k).name; }

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (const auto& i : kKinds)
    if (name == i.name) return i.kind;
  throw InvalidArgument("unknown experiment kind '" + name + "'");
}

std::string sweep_parameter(ExperimentKind k) { return info(k).parameter; }

std::vector<double> default_sweep_values(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Convergence: return {0.0};
    case ExperimentKind::SweepT: return {8, 16, 32, 64};
    case ExperimentKind::SweepPower: return {10, 20, 30, 40};
    case ExperimentKind::SweepSi: return {-120, -100, -80, -60, -40};
    case ExperimentKind::SweepQuantization: return {0, 1, 2, 3, 4};
    case ExperimentKind::SweepDelay: return {0.0, 0.5e-3, 1e-3, 2e-3, 4e-3};
    case ExperimentKind::SweepError: return {0.0, 0.01, 0.05, 0.1, 0.2};
    case ExperimentKind::Overhead: return {0, 100, 200, 400};
    case ExperimentKind::SampleCount: return {5, 10, 30, 50};
    case ExperimentKind::LayerCount: return {2, 4, 6, 8};
    case ExperimentKind::AntennaSweep: return {4, 8, 16};
    case ExperimentKind::RandomLocations: return {0, 5, 10, 20};
  }
  return {};
}

void ExperimentSpec::validate() const {
  if (kind != ExperimentKind::Overhead) {
    if (schemes.empty()) throw InvalidArgument("experiment: at least one scheme is required");
    if (seeds.empty()) throw InvalidArgument("experiment: seeds must be listed explicitly");
    scenario.validate();
  }
  if (threads < 1) throw InvalidArgument("experiment: threads must be >= 1");
}

void apply_sweep_value(ExperimentKind kind, double value, ScenarioConfig& cfg, SchemeSettings& s) {
  switch (kind) {
    case ExperimentKind::Convergence:
    case ExperimentKind::Overhead: break;
    case ExperimentKind::SweepT: cfg.irs_elements = as_count(value, "irs_elements"); break;
    case ExperimentKind::SweepPower: cfg.ap_power = dbm_to_watts(value); break;
    case ExperimentKind::SweepSi: cfg.si_power = db_to_linear(value); break;
    case ExperimentKind::SweepQuantization: s.impairments.quantization_bits = as_count(value, "quantization_bits"); break;
    case ExperimentKind::SweepDelay: s.impairments.delay = value; break;
    case ExperimentKind::SweepError: s.impairments.csi_error = value; break;
    case ExperimentKind::SampleCount: s.pool_size = as_count(value, "pool_size"); break;
    case ExperimentKind::LayerCount: s.train.layers = as_count(value, "layers"); break;
    case ExperimentKind::AntennaSweep:
      cfg.nt = as_count(value, "ap_antennas");
      cfg.nr = cfg.nt;
      break;
    case ExperimentKind::RandomLocations: cfg.location_radius = value; break;
  }
  cfg.validate();
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<double> values = spec.values.empty() ? default_sweep_values(spec.kind) : spec.values;
  if (spec.kind == ExperimentKind::Overhead) return run_overhead(spec, values);
  if (spec.kind == ExperimentKind::Convergence) return run_convergence(spec);

  const bool with_unfolding =
      std::find(spec.schemes.begin(), spec.schemes.end(), Scheme::Unfolding) != spec.schemes.end();

  // Scenario and settings per sweep point; invalid points fail as a whole.
  struct Point {
    ScenarioConfig cfg;
    SchemeSettings settings;
    std::optional<UnfoldingModel> model;
    std::string error;
  };
  std::vector<Point> points(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) {
    points[v].cfg = spec.scenario;
    points[v].settings = spec.settings;
    try {
      apply_sweep_value(spec.kind, values[v], points[v].cfg, points[v].settings);
    } catch (const std::exception& e) {
      points[v].error = e.what();
      log_failure(experiment_name(spec.kind) + " value " + num(values[v]) + ": " + e.what());
    }
  }
  if (with_unfolding)
    parallel_for(points.size(), spec.threads, [&](std::size_t v) {
      if (!points[v].error.empty()) return;
      try {
        points[v].model = train_model(points[v].cfg, points[v].settings, spec.model_seed);
      } catch (const std::exception& e) {
        log_failure("unfolding training at " + num(values[v]) + ": " + e.what());
      }
    });

  const std::size_t n_seeds = spec.seeds.size();
  std::vector<std::vector<Row>> rows(values.size() * n_seeds);
  parallel_for(rows.size(), spec.threads, [&](std::size_t task) {
    const std::size_t v = task / n_seeds;
    const std::uint64_t seed = spec.seeds[task % n_seeds];
    const Point& point = points[v];
    std::optional<Trial> trial;
    std::string trial_error = point.error;
    if (trial_error.empty()) {
      try {
        trial = make_trial(point.cfg, seed, point.settings);
      } catch (const std::exception& e) {
        trial_error = e.what();
      }
    }
    for (Scheme scheme : spec.schemes) {
      Row row{scheme, values[v], seed};
      const auto start = std::chrono::steady_clock::now();
      try {
        if (!trial_error.empty()) throw InvalidArgument(trial_error);
        if (scheme == Scheme::Unfolding && !point.model) throw NumericalError("no trained network for this point");
        const SchemeResult r =
            run_scheme(scheme, *trial, point.settings, point.model ? &*point.model : nullptr, nullptr);
        row.ul = r.ul_rate;
        row.dl = r.dl_rate;
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        log_failure(experiment_name(spec.kind) + " " + scheme_name(scheme) + " value " + num(values[v]) + " seed " +
                    std::to_string(seed) + ": " + e.what());
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows[task].push_back(std::move(row));
    }
  });

  ExperimentReport rep;
  std::ostringstream results, timing, summary;
  results << "experiment,scheme,parameter,value,delay_correlation,seed,ul_rate,dl_rate,total_rate,status\n";
  timing << "experiment,scheme,parameter,value,seed,wall_seconds\n";
  summary << "scheme,value,ul_rate,dl_rate,total_rate,count\n";
  const std::string exp = experiment_name(spec.kind);
  const std::string param = sweep_parameter(spec.kind);
  for (const auto& task_rows : rows)
    for (const Row& r : task_rows) {
      const std::string rho = spec.kind == ExperimentKind::SweepDelay
                                  ? num(delay_correlation(r.value, spec.scenario.doppler_hz))
                                  : std::string();
      results << exp << ',' << scheme_name(r.scheme) << ',' << param << ',' << num(r.value) << ',' << rho << ','
              << r.seed << ',' << num(r.ul) << ',' << num(r.dl) << ',' << num(r.ul + r.dl) << ','
              << csv_status(r.status) << '\n';
      timing << exp << ',' << scheme_name(r.scheme) << ',' << param << ',' << num(r.value) << ',' << r.seed << ','
             << num(r.seconds) << '\n';
      if (r.status != "ok") ++rep.failures;
    }
  // Seed-averaged rates of the successful rows.
  for (Scheme scheme : spec.schemes)
    for (std::size_t v = 0; v < values.size(); ++v) {
      double ul = 0.0, dl = 0.0;
      int count = 0;
      for (std::size_t s = 0; s < n_seeds; ++s)
        for (const Row& r : rows[v * n_seeds + s])
          if (r.scheme == scheme && r.status == "ok") {
            ul += r.ul;
            dl += r.dl;
            ++count;
          }
      const double c = count > 0 ? count : std::nan("");
      summary << scheme_name(scheme) << ',' << num(values[v]) << ',' << num(ul / c) << ',' << num(dl / c) << ','
              << num((ul + dl) / c) << ',' << count << '\n';
    }
  rep.files["results.csv"] = results.str();
  rep.files["timing.csv"] = timing.str();
  rep.files["summary.csv"] = summary.str();
  if (spec.gnuplot) rep.files["plot.gp"] = gnuplot_script(spec);
  return rep;
}

void write_report(const ExperimentReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : report.files) {
    const std::filesystem::path path = std::filesystem::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << content;
  }
}

namespace {

std::vector<Scheme> parse_schemes(const json& j) {
  std::vector<Scheme> out;
  for (const auto& s : j) out.push_back(parse_scheme(s.get<std::string>()));
  return out;
}

void read_bcd(const json& j, BcdConfig& c) {
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.bisection_tolerance = j.value("bisection_tolerance", c.bisection_tolerance);
  c.bisection_max_steps = j.value("bisection_max_steps", c.bisection_max_steps);
}

void read_ssca(const json& j, SscaConfig& c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.curvature = j.value("curvature", c.curvature);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.rho_scale = j.value("rho_scale", c.rho_scale);
  c.rho_offset = j.value("rho_offset", c.rho_offset);
  c.rho_exponent = j.value("rho_exponent", c.rho_exponent);
  c.gamma_scale = j.value("gamma_scale", c.gamma_scale);
  c.gamma_offset = j.value("gamma_offset", c.gamma_offset);
  c.gamma_exponent = j.value("gamma_exponent", c.gamma_exponent);
  c.warm_start = j.value("warm_start", c.warm_start);
}

void read_train(const json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.theta_learning_rate = j.value("theta_learning_rate", c.theta_learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.layers = j.value("layers", c.layers);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.train_theta = j.value("train_theta", c.train_theta);
  if (j.contains("theta_mode")) {
    const std::string m = j["theta_mode"].get<std::string>();
    if (m == "sgd") c.theta_mode = ThetaMode::Sgd;
    else if (m == "ssca") c.theta_mode = ThetaMode::Ssca;
    else throw InvalidArgument("train.theta_mode must be 'sgd' or 'ssca'");
  }
  if (j.contains("ssca")) read_ssca(j["ssca"], c.ssca);
}

void read_settings(const json& j, SchemeSettings& s) {
  s.pool_size = j.value("pool_size", s.pool_size);
  s.test_slots = j.value("test_slots", s.test_slots);
  s.full_csi_outer_iterations = j.value("full_csi_outer_iterations", s.full_csi_outer_iterations);
  s.impairments.quantization_bits = j.value("quantization_bits", s.impairments.quantization_bits);
  s.impairments.delay = j.value("delay_s", s.impairments.delay);
  s.impairments.csi_error = j.value("csi_error", s.impairments.csi_error);
  s.overhead_bits = j.value("overhead_bits", s.overhead_bits);
  s.slots_per_block = j.value("slots_per_block", s.slots_per_block);
  if (j.contains("bcd")) read_bcd(j["bcd"], s.bcd);
  if (j.contains("ssca")) read_ssca(j["ssca"], s.ssca);
  if (j.contains("train")) read_train(j["train"], s.train);
}

void read_overhead(const json& j, OverheadParams& p) {
  p.q = j.value("q", p.q);
  p.ts = j.value("ts", p.ts);
  p.as = j.value("as", p.as);
  p.k = j.value("k", p.k);
  p.l = j.value("l", p.l);
  p.n_u = j.value("n_u", p.n_u);
  p.n_d = j.value("n_d", p.n_d);
  p.m_u = j.value("m_u", p.m_u);
  p.m_d = j.value("m_d", p.m_d);
}

}  // namespace

ExperimentSpec parse_experiment(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("experiment: malformed JSON: ") + e.what());
  }
  try {
    ExperimentSpec spec;
    if (root.contains("kind")) spec.kind = parse_experiment_kind(root["kind"].get<std::string>());
    if (root.contains("schemes")) spec.schemes = parse_schemes(root["schemes"]);
    if (root.contains("seeds")) spec.seeds = root["seeds"].get<std::vector<std::uint64_t>>();
    if (root.contains("values")) spec.values = root["values"].get<std::vector<double>>();
    if (root.contains("scenario")) spec.scenario = parse_scenario(root["scenario"].dump());
    if (root.contains("settings")) read_settings(root["settings"], spec.settings);
    if (root.contains("overhead")) read_overhead(root["overhead"], spec.overhead);
    spec.model_seed = root.value("model_seed", spec.model_seed);
    spec.threads = root.value("threads", spec.threads);
    spec.gnuplot = root.value("gnuplot", spec.gnuplot);
    return spec;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("experiment: ") + e.what());
  }
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("experiment: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

}  // namespace irsfd
