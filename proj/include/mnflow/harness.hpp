#pragma once

// Experiment drivers behind the CLI: dataset generation, training, sampling
// statistics, fixed-point census, N-sweeps, score-field plots and
// exact-vs-Taylor trajectory comparisons. Every output file carries a
// provenance header echoing the full effective configuration.

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "mnflow/classify.hpp"
#include "mnflow/flow.hpp"
#include "mnflow/nets.hpp"
#include "mnflow/stability.hpp"
#include "mnflow/svg.hpp"

namespace mnflow {

// ---- configuration -------------------------------------------------------------

// Flat `key = value` text with [dataset] [flow] [classify] [train] [output]
// sections. '#' starts a comment.
struct Config {
  std::map<std::string, std::map<std::string, std::string>> kv;

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }

  static Config parse(std::istream& is) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": bad section");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos || section.empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value inside a section");
      cfg.kv[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    return parse(f);
  }

  bool has(const std::string& sec, const std::string& key) const {
    auto s = kv.find(sec);
    return s != kv.end() && s->second.count(key) > 0;
  }
  std::string get(const std::string& sec, const std::string& key, const std::string& def) const {
    auto s = kv.find(sec);
    if (s == kv.end()) return def;
    auto k = s->second.find(key);
    return k == s->second.end() ? def : k->second;
  }
  std::string require(const std::string& sec, const std::string& key) const {
    if (!has(sec, key)) throw ConfigError("missing config key " + sec + "." + key);
    return kv.at(sec).at(key);
  }
  double get_double(const std::string& sec, const std::string& key, double def) const {
    if (!has(sec, key)) return def;
    try {
      return std::stod(kv.at(sec).at(key));
    } catch (...) {
      throw ConfigError("config " + sec + "." + key + ": not a number");
    }
  }
  long get_int(const std::string& sec, const std::string& key, long def) const {
    if (!has(sec, key)) return def;
    try {
      return std::stol(kv.at(sec).at(key));
    } catch (...) {
      throw ConfigError("config " + sec + "." + key + ": not an integer");
    }
  }
  bool get_bool(const std::string& sec, const std::string& key, bool def) const {
    if (!has(sec, key)) return def;
    std::string v = kv.at(sec).at(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("config " + sec + "." + key + ": not a boolean");
  }
  std::vector<double> get_list(const std::string& sec, const std::string& key,
                               const std::vector<double>& def) const {
    if (!has(sec, key)) return def;
    std::vector<double> out;
    std::stringstream ss(kv.at(sec).at(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      try {
        out.push_back(std::stod(tok));
      } catch (...) {
        throw ConfigError("config " + sec + "." + key + ": bad list entry '" + tok + "'");
      }
    }
    if (out.empty()) throw ConfigError("config " + sec + "." + key + ": empty list");
    return out;
  }
  void set(const std::string& sec, const std::string& key, const std::string& val) {
    kv[sec][key] = val;
  }

  std::vector<std::string> echo() const {
    std::vector<std::string> lines;
    for (const auto& [sec, keys] : kv)
      for (const auto& [k, v] : keys) lines.push_back(sec + "." + k + " = " + v);
    return lines;
  }
};

struct RunOptions {
  std::string out = "out";
  int workers = 1;
  std::optional<std::uint64_t> seed;  // overrides [dataset] seed
  bool dump_trajectories = false;
};

// ---- small utilities --------------------------------------------------------------

inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      while (true) {
        int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class OutFile {
 public:
  OutFile(const std::filesystem::path& path, const std::string& command, const Config& cfg,
          std::uint64_t master_seed) {
    std::filesystem::create_directories(path.parent_path());
    f_.open(path);
    if (!f_) throw IoError("cannot open " + path.string());
    f_ << "# mnflow " << command << "\n";
    for (const auto& line : cfg.echo()) f_ << "# " << line << "\n";
    f_ << "# master_seed = " << master_seed << "\n";
  }
  std::ofstream& stream() { return f_; }

 private:
  std::ofstream f_;
};

// ---- builders ------------------------------------------------------------------------

inline DatasetSpec build_dataset(const Config& cfg, std::uint64_t seed) {
  std::string kind = cfg.get("dataset", "kind", "orthogonal");
  int N = static_cast<int>(cfg.get_int("dataset", "N", 31));
  int d = static_cast<int>(cfg.get_int("dataset", "d", 30));
  double norm = cfg.get_double("dataset", "norm", 1.0);
  DatasetSpec spec;
  if (kind == "orthogonal")
    spec = make_orthogonal(N, d, norm, seed);
  else if (kind == "obtuse")
    spec = make_obtuse_simplex(N, d, seed);
  else if (kind == "triangle")
    spec = make_equilateral_triangle(d, cfg.get_double("dataset", "side", std::sqrt(3.0)));
  else
    throw ConfigError("dataset.kind must be orthogonal|obtuse|triangle");
  int augment = static_cast<int>(cfg.get_int("dataset", "augment", 0));
  if (augment > 0) {
    std::uint64_t aseed = cfg.has("dataset", "augment_seed")
                              ? cfg.get_int("dataset", "augment_seed", 0)
                              : mix_seed(seed, 77);
    spec = augment_boundary_points(spec, augment, aseed);
  }
  return spec;
}

inline NoiseSchedule build_schedule(const Config& cfg) {
  double T = cfg.get_double("flow", "T", 100.0);
  int S = static_cast<int>(cfg.get_int("flow", "S", 150));
  double split = cfg.get_double("flow", "split_sigma", 1.0);
  double alpha = cfg.get_double("flow", "alpha", 1.0);
  return make_schedule(T, S, split, alpha);
}

struct MetricThreshold {
  Metric metric;
  double threshold;
};

inline std::vector<MetricThreshold> build_classify(const Config& cfg) {
  std::vector<MetricThreshold> out;
  std::vector<std::string> metrics;
  {
    std::stringstream ss(cfg.get("classify", "metrics", "linf"));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = Config::trim(tok);
      if (!tok.empty()) metrics.push_back(tok);
    }
  }
  std::vector<double> thresholds = cfg.get_list("classify", "thresholds", {0.2});
  for (const auto& ms : metrics) {
    Metric m;
    if (ms == "linf")
      m = Metric::Linf;
    else if (ms == "l2")
      m = Metric::L2;
    else
      throw ConfigError("classify.metrics entries must be linf|l2");
    for (double t : thresholds) out.push_back({m, t});
  }
  return out;
}

// Trained denoisers live in a checkpoint directory as level_%03d.txt keyed by
// schedule index 0 (highest noise) .. S-1.
struct TrainedLevels {
  std::vector<NetParams> nets;
  std::vector<double> sigmas;
};

inline TrainedLevels load_trained_levels(const std::string& dir) {
  TrainedLevels tl;
  for (int i = 0;; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "level_%03d.txt", i);
    std::filesystem::path p = std::filesystem::path(dir) / name;
    if (!std::filesystem::exists(p)) break;
    double sigma = 0;
    tl.nets.push_back(load_checkpoint(p.string(), &sigma));
    tl.sigmas.push_back(sigma);
  }
  if (tl.nets.empty()) throw ConfigError("no checkpoints found in " + dir);
  return tl;
}

// Single-level denoiser for score flow / fixed-point iterations.
inline std::function<Vec(const Vec&)> build_score_denoiser(const Config& cfg,
                                                           const DatasetSpec& spec,
                                                           double sigma_t0) {
  std::string src = cfg.get("flow", "denoiser", "closed");
  if (src == "closed") {
    double alpha = cfg.get_double("flow", "alpha", 1.0);
    double rho = cfg.get_double("flow", "rho", alpha * sigma_t0);
    return denoiser_fn(ClosedFormDenoiser(spec, capped_rho(spec, rho)));
  }
  if (src == "taylor") {
    double alpha = cfg.get_double("flow", "alpha", 1.0);
    double rho = cfg.get_double("flow", "rho", alpha * sigma_t0);
    double r = capped_rho(spec, rho);
    return [spec, r](const Vec& y) { return taylor_denoise(spec, y, r); };
  }
  if (src == "trained") {
    TrainedLevels tl = load_trained_levels(cfg.require("flow", "checkpoint_dir"));
    int best = 0;
    for (std::size_t i = 1; i < tl.sigmas.size(); ++i)
      if (std::abs(tl.sigmas[i] - sigma_t0) < std::abs(tl.sigmas[best] - sigma_t0))
        best = static_cast<int>(i);
    return net_fn(tl.nets[best]);
  }
  throw ConfigError("flow.denoiser must be closed|taylor|trained");
}

inline DenFamily build_prob_family(const Config& cfg, const DatasetSpec& spec,
                                   const NoiseSchedule& sched) {
  std::string src = cfg.get("flow", "denoiser", "closed");
  if (src == "closed") return closed_form_family(spec);
  if (src == "taylor") return taylor_family(spec);
  if (src == "trained") {
    auto tl = std::make_shared<TrainedLevels>(load_trained_levels(cfg.require("flow", "checkpoint_dir")));
    if (static_cast<int>(tl->nets.size()) != sched.S)
      throw ConfigError("checkpoint count does not match schedule S");
    return [tl](const Vec& y, const LevelInfo& lv) { return forward(tl->nets[lv.index], y); };
  }
  throw ConfigError("flow.denoiser must be closed|taylor|trained");
}

// ---- cmd_gen_dataset -------------------------------------------------------------------

inline void cmd_gen_dataset(const Config& cfg, const RunOptions& opt) {
  std::uint64_t seed = opt.seed.value_or(cfg.get_int("dataset", "seed", 0));
  DatasetSpec spec = build_dataset(cfg, seed);
  std::filesystem::create_directories(opt.out);
  save_dataset(spec, (std::filesystem::path(opt.out) / "dataset.txt").string());
}

// ---- cmd_sample ---------------------------------------------------------------------------

struct SampleOutcome {
  std::vector<Vec> terminals;        // finished trajectories, indexed by id
  std::vector<char> failed;          // non-finite flags per id
  std::vector<Trajectory> dumps;     // only when dumping
  int nonfinite_count = 0;
};

inline SampleOutcome run_sampling(const Config& cfg, const RunOptions& opt,
                                  const DatasetSpec& spec, std::uint64_t master_seed) {
  const int samples = static_cast<int>(cfg.get_int("output", "samples", 500));
  const std::string flow = cfg.get("flow", "flow", "score");
  SampleOutcome out;
  out.terminals.resize(samples);
  out.failed.assign(samples, 0);
  if (opt.dump_trajectories) out.dumps.resize(samples);
  const int dump_stride = static_cast<int>(cfg.get_int("output", "dump_stride", 10));
  const int d = spec.dim();

  if (flow == "score") {
    const double sigma_t0 = cfg.get_double("flow", "sigma_t0", 0.095);
    const double gamma = cfg.get_double("flow", "gamma", 5e-4);
    const int iters = static_cast<int>(cfg.get_int("flow", "iters", 3000));
    const double init_std = cfg.get_double("flow", "init_std", 10.0);
    auto den = build_score_denoiser(cfg, spec, sigma_t0);
    parallel_for(samples, opt.workers, [&](int i) {
      Rng rng(mix_seed(master_seed, i));
      Vec y0 = gaussian_vector(d, rng, init_std);
      try {
        Trajectory tr = score_flow_numeric(den, y0, gamma, iters, sigma_t0);
        out.terminals[i] = tr.terminal();
        if (opt.dump_trajectories) {
          Trajectory thin;
          thin.meta = tr.meta;
          for (int k = 0; k < tr.size(); k += dump_stride) thin.push(tr.times[k], tr.states[k]);
          out.dumps[i] = std::move(thin);
        }
      } catch (const NonFinite&) {
        out.failed[i] = 1;
      }
    });
  } else if (flow == "prob") {
    NoiseSchedule sched = build_schedule(cfg);
    const double init_std = cfg.get_double("flow", "init_std", std::sqrt(sched.T));
    DenFamily family = build_prob_family(cfg, spec, sched);
    parallel_for(samples, opt.workers, [&](int i) {
      Rng rng(mix_seed(master_seed, i));
      Vec yT = gaussian_vector(d, rng, init_std);
      try {
        Trajectory tr = prob_flow_numeric(family, yT, sched);
        out.terminals[i] = tr.terminal();
        if (opt.dump_trajectories) {
          Trajectory thin;
          thin.meta = tr.meta;
          for (int k = 0; k < tr.size(); k += dump_stride) thin.push(tr.times[k], tr.states[k]);
          out.dumps[i] = std::move(thin);
        }
      } catch (const NonFinite&) {
        out.failed[i] = 1;
      }
    });
  } else {
    throw ConfigError("flow.flow must be score|prob");
  }
  for (char f : out.failed) out.nonfinite_count += f;
  return out;
}

inline const std::vector<std::string>& category_names() {
  static const std::vector<std::string> names = {"training", "virtual", "augmented", "boundary",
                                                 "other"};
  return names;
}

inline const std::vector<std::string>& category_colors() {
  static const std::vector<std::string> colors = {"#d62728", "#1f77b4", "#9467bd", "#2ca02c",
                                                  "#7f7f7f"};
  return colors;
}

inline void write_stats_files(const Config& cfg, const RunOptions& opt, const DatasetSpec& spec,
                              const SampleOutcome& res, std::uint64_t seed,
                              const std::string& command) {
  namespace fs = std::filesystem;
  auto pairs = build_classify(cfg);
  fs::path dir(opt.out);

  OutFile stats(dir / "stats.csv", command, cfg, seed);
  stats.stream() << "# nonfinite_excluded = " << res.nonfinite_count << "\n";
  stats.stream() << "metric,threshold,kind,count,fraction\n";
  OutFile labels(dir / "labels.csv", command, cfg, seed);
  labels.stream() << "traj_id,kind,detail,distance,metric,threshold\n";

  std::vector<svg::BarGroup> groups;
  for (const auto& mt : pairs) {
    std::vector<ConvergenceLabel> lab;
    for (std::size_t i = 0; i < res.terminals.size(); ++i) {
      if (res.failed[i]) {
        labels.stream() << i << ",nonfinite,-1,nan," << metric_name(mt.metric) << ","
                        << g17(mt.threshold) << "\n";
        continue;
      }
      ConvergenceLabel l = classify(spec, res.terminals[i], mt.metric, mt.threshold);
      lab.push_back(l);
      labels.stream() << i << "," << label_name(l.kind) << "," << l.detail << ","
                      << g17(l.distance) << "," << metric_name(mt.metric) << ","
                      << g17(mt.threshold) << "\n";
    }
    StatsReport rep = aggregate(lab);
    svg::BarGroup grp;
    grp.label = std::string(metric_name(mt.metric)) + " " + svg::num(mt.threshold);
    for (int k = 0; k < 5; ++k) {
      LabelKind kind = static_cast<LabelKind>(k);
      stats.stream() << metric_name(mt.metric) << "," << g17(mt.threshold) << ","
                     << label_name(kind) << "," << rep.count(kind) << ","
                     << g17(rep.fraction(kind)) << "\n";
      grp.values.push_back(rep.fraction(kind));
    }
    groups.push_back(grp);
  }
  svg::write_stacked_bars((dir / "stats_bars.svg").string(), "convergence types",
                          category_names(), category_colors(), groups);

  // 3D projection of terminals, colored by the first metric/threshold pair.
  std::array<int, 3> axes{0, 1, 2};
  auto ax = cfg.get_list("classify", "axes", {0, 1, 2});
  if (ax.size() != 3) throw ConfigError("classify.axes must have 3 entries");
  for (int k = 0; k < 3; ++k) axes[k] = static_cast<int>(ax[k]);
  if (spec.n_dirs() >= 3) {
    OutFile scatter(dir / "scatter3.csv", command, cfg, seed);
    scatter.stream() << "traj_id,p0,p1,p2,kind\n";
    svg::Canvas cv(520, 520);
    cv.text(20, 24, "terminals projected on 3 frame axes (p0,p1)", 13);
    double lo = 1e300, hi = -1e300;
    std::vector<std::pair<Eigen::Vector3d, LabelKind>> pts;
    for (std::size_t i = 0; i < res.terminals.size(); ++i) {
      if (res.failed[i]) continue;
      Eigen::Vector3d p = project3(spec, res.terminals[i], axes);
      ConvergenceLabel l = classify(spec, res.terminals[i], pairs[0].metric, pairs[0].threshold);
      scatter.stream() << i << "," << g17(p[0]) << "," << g17(p[1]) << "," << g17(p[2]) << ","
                       << label_name(l.kind) << "\n";
      pts.emplace_back(p, l.kind);
      lo = std::min({lo, p[0], p[1]});
      hi = std::max({hi, p[0], p[1]});
    }
    if (!pts.empty() && hi > lo) {
      auto mapc = [&](double v) { return 40 + 440 * (v - lo) / (hi - lo); };
      for (auto& [p, kind] : pts)
        cv.circle(mapc(p[0]), 520 - mapc(p[1]),  3,
                  category_colors()[static_cast<int>(kind)]);
      cv.save((dir / "scatter3.svg").string());
    }
  }

  if (opt.dump_trajectories) {
    OutFile dump(dir / "trajectories.csv", command, cfg, seed);
    dump.stream() << "traj_id,step,t,sigma";
    for (int j = 0; j < spec.dim(); ++j) dump.stream() << ",coord_" << j;
    dump.stream() << "\n";
    const bool prob = cfg.get("flow", "flow", "score") == "prob";
    const double sigma_t0 = cfg.get_double("flow", "sigma_t0", 0.095);
    for (std::size_t i = 0; i < res.dumps.size(); ++i) {
      const Trajectory& tr = res.dumps[i];
      for (int k = 0; k < tr.size(); ++k) {
        double sigma = prob ? std::sqrt(tr.times[k]) : sigma_t0;
        dump.stream() << i << "," << k << "," << g17(tr.times[k]) << "," << g17(sigma);
        for (int j = 0; j < spec.dim(); ++j) dump.stream() << "," << g17(tr.states[k][j]);
        dump.stream() << "\n";
      }
    }
  }
}

inline void cmd_sample(const Config& cfg, const RunOptions& opt) {
  std::uint64_t seed = opt.seed.value_or(cfg.get_int("dataset", "seed", 0));
  DatasetSpec spec = build_dataset(cfg, seed);
  SampleOutcome res = run_sampling(cfg, opt, spec, mix_seed(seed, 9001));
  write_stats_files(cfg, opt, spec, res, seed, "sample");
}

// ---- cmd_fixed_point ------------------------------------------------------------------------

// Fixed-point census over all pair/triplet/quadruplet subset sums.
inline void cmd_fixed_point(const Config& cfg, const RunOptions& opt) {
  std::uint64_t seed = opt.seed.value_or(cfg.get_int("dataset", "seed", 0));
  DatasetSpec spec = build_dataset(cfg, seed);
  if (spec.kind != Geometry::Orthogonal) throw ConfigError("fixed-point census needs an orthogonal dataset");
  const double sigma_t0 = cfg.get_double("flow", "sigma_t0", 0.095);
  const int iters = static_cast<int>(cfg.get_int("flow", "iters", 10));
  auto pairs = build_classify(cfg);
  const Metric metric = pairs[0].metric;
  const double threshold = pairs[0].threshold;
  auto den = build_score_denoiser(cfg, spec, sigma_t0);

  const int m = spec.n_core() - 1;
  std::vector<int> cards = {2, 3, 4};
  OutFile census(std::filesystem::path(opt.out) / "census.csv", "fixed-point", cfg, seed);
  census.stream() << "cardinality,total,stable,percent\n";
  std::vector<svg::BarGroup> groups;
  for (int card : cards) {
    if (card > m) continue;
    auto combos = combinations(m, card);
    std::vector<char> ok(combos.size(), 0);
    parallel_for(static_cast<int>(combos.size()), opt.workers, [&](int i) {
      std::vector<int> subset(combos[i]);
      for (int& v : subset) ++v;
      Vec start = virtual_point(spec, subset);
      Trajectory tr = fixed_point_iterate(den, start, iters);
      ok[i] = frame_dist(spec, tr.terminal(), start, metric) <= threshold ? 1 : 0;
    });
    long stable = 0;
    for (char c : ok) stable += c;
    double pct = combos.empty() ? 0.0 : 100.0 * stable / combos.size();
    census.stream() << card << "," << combos.size() << "," << stable << "," << g17(pct) << "\n";
    groups.push_back({"card " + std::to_string(card), {pct / 100.0}});
  }
  svg::write_stacked_bars((std::filesystem::path(opt.out) / "census_bars.svg").string(),
                          "stable fraction by cardinality", {"stable"}, {"#1f77b4"}, groups);
}

// ---- cmd_sweep_n -----------------------------------------------------------------------------

inline void cmd_sweep_n(const Config& cfg, const RunOptions& opt) {
  std::uint64_t seed = opt.seed.value_or(cfg.get_int("dataset", "seed", 0));
  auto n_values_d = cfg.get_list("output", "n_values", {10, 15, 20, 25, 30});
  int sweep_seeds = static_cast<int>(cfg.get_int("output", "sweep_seeds", 5));
  auto pairs = build_classify(cfg);

  OutFile combined(std::filesystem::path(opt.out) / "sweep.csv", "sweep-n", cfg, seed);
  combined.stream() << "N,seed,metric,threshold,kind,count,fraction\n";
  std::vector<svg::BarGroup> groups;
  for (double n_d : n_values_d) {
    int N = static_cast<int>(n_d);
    std::vector<double> mean_frac(5, 0.0);
    for (int s = 0; s < sweep_seeds; ++s) {
      std::uint64_t run_seed = mix_seed(seed, 100 * N + s);
      Config sub = cfg;
      sub.set("dataset", "N", std::to_string(N));
      DatasetSpec spec = build_dataset(sub, run_seed);
      SampleOutcome res = run_sampling(sub, opt, spec, mix_seed(run_seed, 9001));
      for (const auto& mt : pairs) {
        std::vector<ConvergenceLabel> lab;
        for (std::size_t i = 0; i < res.terminals.size(); ++i)
          if (!res.failed[i]) lab.push_back(classify(spec, res.terminals[i], mt.metric, mt.threshold));
        StatsReport rep = aggregate(lab);
        for (int k = 0; k < 5; ++k) {
          LabelKind kind = static_cast<LabelKind>(k);
          combined.stream() << N << "," << s << "," << metric_name(mt.metric) << ","
                            << g17(mt.threshold) << "," << label_name(kind) << ","
                            << rep.count(kind) << "," << g17(rep.fraction(kind)) << "\n";
          if (&mt == &pairs[0]) mean_frac[k] += rep.fraction(kind) / sweep_seeds;
        }
      }
    }
    groups.push_back({"N=" + std::to_string(N), mean_frac});
  }
  svg::write_stacked_bars((std::filesystem::path(opt.out) / "sweep_bars.svg").string(),
                          "convergence types vs N (seed-averaged)", category_names(),
                          category_colors(), groups);
}

// ---- cmd_field --------------------------------------------------------------------------------

// Exact score field on a 2D grid with ReLU boundary lines overlaid.
inline void cmd_field(const Config& cfg, const RunOptions& opt) {
  std::uint64_t seed = opt.seed.value_or(cfg.get_int("dataset", "seed", 0));
  DatasetSpec spec = build_dataset(cfg, seed);
  for (int r = 0; r < spec.n_points(); ++r)
    for (int j = 2; j < spec.dim(); ++j)
      if (std::abs(spec.points(r, j)) > 1e-12)
        throw NotPlanar("field: dataset does not lie in the first two coordinates");
  const double sigma = cfg.get_double("flow", "sigma_t0", 0.095);
  const double rho = cfg.get_double("flow", "rho", 0.1);
  const int grid = static_cast<int>(cfg.get_int("output", "grid", 100));
  const bool normalized = cfg.get_bool("output", "normalized", true);
  ClosedFormDenoiser den(spec, rho);

  double lo0 = spec.points.col(0).minCoeff(), hi0 = spec.points.col(0).maxCoeff();
  double lo1 = spec.points.col(1).minCoeff(), hi1 = spec.points.col(1).maxCoeff();
  double pad = 0.5 * std::max(hi0 - lo0, hi1 - lo1) + 0.25;
  lo0 -= pad; hi0 += pad; lo1 -= pad; hi1 += pad;

  OutFile quiver(std::filesystem::path(opt.out) / "field.csv", "field", cfg, seed);
  quiver.stream() << "x,y,sx,sy\n";
  svg::Canvas cv(620, 620);
  auto mapx = [&](double x) { return 30 + 560 * (x - lo0) / (hi0 - lo0); };
  auto mapy = [&](double y) { return 590 - 560 * (y - lo1) / (hi1 - lo1); };
  double cell = std::min((hi0 - lo0), (hi1 - lo1)) / grid;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      Vec y = Vec::Zero(spec.dim());
      y[0] = lo0 + (hi0 - lo0) * (i + 0.5) / grid;
      y[1] = lo1 + (hi1 - lo1) * (j + 0.5) / grid;
      Vec s = score(den, y, sigma);
      double n = s.norm();
      Vec a = s;
      if (normalized && n > 1e-300) a = s * (std::log(n) / n);
      quiver.stream() << g17(y[0]) << "," << g17(y[1]) << "," << g17(a[0]) << "," << g17(a[1])
                      << "\n";
      double an = a.head(2).norm();
      if (an > 1e-300) {
        double len = 0.45 * cell;
        double x2 = y[0] + len * a[0] / an, y2 = y[1] + len * a[1] / an;
        if ((i + j) % 2 == 0) {  // thin the SVG, CSV keeps the full grid
          cv.line(mapx(y[0]), mapy(y[1]), mapx(x2), mapy(y2), "#555555", 0.6);
          cv.circle(mapx(x2), mapy(y2), 0.9, "#555555");
        }
      }
    }
  }
  // ReLU boundary lines u_j . (y-base) = lo|hi, drawn across the bounding box.
  Vec base = spec.base();
  for (int j = 0; j < spec.n_dirs(); ++j) {
    ReluBand bd = relu_band(spec, j, rho);
    for (double level : {bd.lo, bd.hi}) {
      double ux = spec.units(j, 0), uy = spec.units(j, 1);
      double c = level + ux * base[0] + uy * base[1];
      std::vector<std::pair<double, double>> pts;
      auto consider = [&](double x, double y) {
        if (x >= lo0 - 1e-9 && x <= hi0 + 1e-9 && y >= lo1 - 1e-9 && y <= hi1 + 1e-9)
          pts.emplace_back(mapx(x), mapy(y));
      };
      if (std::abs(uy) > 1e-12) {
        consider(lo0, (c - ux * lo0) / uy);
        consider(hi0, (c - ux * hi0) / uy);
      }
      if (std::abs(ux) > 1e-12) {
        consider((c - uy * lo1) / ux, lo1);
        consider((c - uy * hi1) / ux, hi1);
      }
      if (pts.size() >= 2) cv.line(pts[0].first, pts[0].second, pts[1].first, pts[1].second,
                                   "black", 1.2);
    }
  }
  for (int r = 0; r < spec.n_points(); ++r)
    cv.circle(mapx(spec.points(r, 0)), mapy(spec.points(r, 1)), 4, "#d62728");
  cv.save((std::filesystem::path(opt.out) / "field.svg").string());
}

// ---- cmd_compare_traj ---------------------------------------------------------------------------

inline void cmd_compare_traj(const Config& cfg, const RunOptions& opt) {
  std::uint64_t seed = opt.seed.value_or(cfg.get_int("dataset", "seed", 0));
  DatasetSpec spec = build_dataset(cfg, seed);
  if (spec.kind != Geometry::Orthogonal) throw ConfigError("compare-traj needs an orthogonal dataset");
  const double sigma = cfg.get_double("flow", "sigma_t0", 0.03);
  const double rho = cfg.get_double("flow", "rho", 0.09);
  const double gamma = cfg.get_double("flow", "gamma", 2e-5);
  const int iters = static_cast<int>(cfg.get_int("flow", "iters", 3000));
  const int starts = static_cast<int>(cfg.get_int("output", "starts", 5));

  OutFile paths(std::filesystem::path(opt.out) / "compare_traj.csv", "compare-traj", cfg, seed);
  paths.stream() << "start_id,flow,step,t";
  for (int j = 0; j < spec.dim(); ++j) paths.stream() << ",coord_" << j;
  paths.stream() << "\n";
  OutFile summary(std::filesystem::path(opt.out) / "compare_summary.csv", "compare-traj", cfg,
                  seed);
  summary.stream() << "start_id,max_gap\n";

  svg::Canvas cv(620, 620);
  cv.text(20, 24, "score flow: exact (purple) vs approximated (green)", 13);
  double worst = 0;
  Rng rng(mix_seed(seed, 4242));
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int s = 0; s < starts; ++s) {
    Vec z(spec.n_dirs());
    for (int j = 0; j < spec.n_dirs(); ++j) z[j] = u(rng) * spec.norms[j];
    Vec y0 = spec.base() + spec.units.transpose() * z;
    TrajectoryComparison cmp = compare_score_trajectories(spec, rho, sigma, y0, gamma, iters);
    worst = std::max(worst, cmp.max_gap);
    summary.stream() << s << "," << g17(cmp.max_gap) << "\n";
    auto write_traj = [&](const Trajectory& tr, const char* name) {
      for (int k = 0; k < tr.size(); k += 10) {
        paths.stream() << s << "," << name << "," << k << "," << g17(tr.times[k]);
        for (int j = 0; j < spec.dim(); ++j) paths.stream() << "," << g17(tr.states[k][j]);
        paths.stream() << "\n";
      }
    };
    write_traj(cmp.exact, "exact");
    write_traj(cmp.taylor, "taylor");
    auto draw = [&](const Trajectory& tr, const char* color) {
      std::vector<std::pair<double, double>> pts;
      for (int k = 0; k < tr.size(); k += 5)
        pts.emplace_back(30 + 400 * (tr.states[k][0] + 0.5) / 2.0,
                         590 - 400 * (tr.states[k][1] + 0.5) / 2.0);
      cv.polyline(pts, color, 1.2);
    };
    draw(cmp.exact, "#9467bd");
    draw(cmp.taylor, "#2ca02c");
  }
  summary.stream() << "# worst_gap = " << g17(worst) << "\n";
  cv.save((std::filesystem::path(opt.out) / "compare_traj.svg").string());
}

// ---- cmd_train -------------------------------------------------------------------------------------

inline void cmd_train(const Config& cfg, const RunOptions& opt) {
  std::uint64_t seed = opt.seed.value_or(cfg.get_int("dataset", "seed", 0));
  DatasetSpec spec = build_dataset(cfg, seed);
  NoiseSchedule sched = build_schedule(cfg);

  TrainConfig tc;
  tc.K = static_cast<int>(cfg.get_int("train", "K", 64));
  tc.lr0 = cfg.get_double("train", "lr0", 1e-4);
  tc.inner = static_cast<int>(cfg.get_int("train", "inner", 10000));
  tc.eta = cfg.get_double("train", "eta", 3.0);
  tc.outer = static_cast<int>(cfg.get_int("train", "outer", 7));
  tc.mu0 = cfg.get_double("train", "mu0", 1.0);
  const int M = static_cast<int>(cfg.get_int("train", "M", 500));
  const std::string mode = cfg.get("train", "mode", "al");
  const double lambda = cfg.get_double("train", "lambda", 0.25);

  struct LevelLog {
    std::vector<TrainRound> rounds;
    bool diverged = false;
  };
  std::vector<LevelLog> logs(sched.S);
  std::filesystem::create_directories(opt.out);
  parallel_for(sched.S, opt.workers, [&](int i) {
    double sigma = sched.sigma_at(i);
    NoisyDataset data = gen_noisy(spec, M, sigma, mix_seed(seed, 1000 + i));
    TrainConfig level_cfg = tc;
    level_cfg.seed = mix_seed(seed, 2000 + i);
    auto cb = [&](const TrainRound& r, const NetParams&, const ALState*) {
      logs[i].rounds.push_back(r);
    };
    try {
      NetParams p = mode == "al" ? train_al(data, level_cfg, cb)
                                 : train_penalized(data, lambda, level_cfg, cb);
      char name[32];
      std::snprintf(name, sizeof name, "level_%03d.txt", i);
      save_checkpoint(p, sigma, level_cfg.seed, (std::filesystem::path(opt.out) / name).string());
    } catch (const Diverged&) {
      logs[i].diverged = true;  // logged and continued
    }
  });

  OutFile log(std::filesystem::path(opt.out) / "train_log.csv", "train", cfg, seed);
  log.stream() << "level,sigma,outer_round,mu,lr,loss,max_interp_err,cost_raw,cost_balanced,"
                  "diverged\n";
  for (int i = 0; i < sched.S; ++i) {
    for (const TrainRound& r : logs[i].rounds)
      log.stream() << i << "," << g17(sched.sigma_at(i)) << "," << r.outer_k << "," << g17(r.mu)
                   << "," << g17(r.lr) << "," << g17(r.loss) << "," << g17(r.max_interp_err)
                   << "," << g17(r.cost.raw) << "," << g17(r.cost.balanced) << ","
                   << (logs[i].diverged ? 1 : 0) << "\n";
  }
}

// ---- cmd_stability ------------------------------------------------------------------------------------

inline void cmd_stability(const Config& cfg, const RunOptions& opt) {
  std::uint64_t seed = opt.seed.value_or(cfg.get_int("dataset", "seed", 0));
  DatasetSpec spec = build_dataset(cfg, seed);
  const double rho = cfg.get_double("flow", "rho", 0.1);
  const int max_card = static_cast<int>(cfg.get_int("output", "max_cardinality", 4));
  OutFile out(std::filesystem::path(opt.out) / "stability.csv", "stability", cfg, seed);
  if (spec.kind == Geometry::Orthogonal) {
    out.stream() << "cardinality,subset,score_norm,max_real_eig,stable\n";
    ClosedFormDenoiser den(spec, rho);
    for (auto& [subset, point] : enumerate_stable_points_orthogonal(spec, rho, max_card)) {
      StabilityReport rep = classify_stability(den, point, 1.0);
      out.stream() << subset.size() << ",";
      for (std::size_t k = 0; k < subset.size(); ++k)
        out.stream() << (k ? " " : "") << subset[k];
      out.stream() << "," << g17(rep.score_norm) << "," << g17(rep.max_real_eig) << ","
                   << (rep.stable ? 1 : 0) << "\n";
    }
  } else if (spec.kind == Geometry::ObtuseSimplex) {
    out.stream() << "cardinality,subset,sum_condition,stable_verified\n";
    ClosedFormDenoiser den(spec, rho);
    const int n = spec.n_points();
    for (int card = 2; card <= std::min(max_card, n); ++card) {
      for (auto& combo : combinations(n, card)) {
        bool has_base = !combo.empty() && combo.front() == 0;
        if (static_cast<int>(combo.size()) < (has_base ? 3 : 2)) continue;
        bool cond = obtuse_sum_stability(spec, combo, rho);
        Vec p = spec.base();
        for (int idx : combo)
          if (idx > 0) p += spec.points.row(idx).transpose() - spec.base();
        bool verified = false;
        try {
          StabilityReport rep = classify_stability(den, p, 1.0);
          verified = rep.stable;
        } catch (const OnBoundary&) {
          verified = false;
        }
        out.stream() << combo.size() << ",";
        for (std::size_t k = 0; k < combo.size(); ++k) out.stream() << (k ? " " : "") << combo[k];
        out.stream() << "," << (cond ? 1 : 0) << "," << (verified ? 1 : 0) << "\n";
      }
    }
  } else {
    throw ConfigError("stability: orthogonal or obtuse datasets only");
  }
}

}  // namespace mnflow
