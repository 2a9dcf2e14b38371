// Command-line front end. Each subcommand composes the library into one
// deterministic pipeline step: solve a single problem instance, sweep the
// homotopy for solution records, pack records into a training dataset,
// train an imitation policy, evaluate optimality gaps, or roll a policy
// out under a blend schedule. A run owns its output directory through a
// lock file and leaves a manifest (resolved config, input and output
// content hashes, tool versions, no timestamps) so identical reruns leave
// identical files.

#include <fcntl.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "homopt/dataset.hpp"
#include "homopt/errors.hpp"
#include "homopt/eval.hpp"
#include "homopt/homotopy.hpp"
#include "homopt/io.hpp"
#include "homopt/mlp.hpp"
#include "homopt/pendulum.hpp"
#include "homopt/problem.hpp"
#include "homopt/records.hpp"
#include "homopt/rng.hpp"
#include "homopt/spacecraft.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace homopt;

constexpr const char* kVersion = "0.1.0";

std::string trim(std::string_view s) {
  const auto from = s.find_first_not_of(" \t\r\n");
  if (from == std::string_view::npos) return {};
  const auto to = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(from, to - from + 1));
}

// Flat key/value store keyed "section.key". Layers are applied in order
// (defaults, then the config file, then command-line overrides) and later
// writers win, which gives the CLI > file > defaults precedence.
class Config {
 public:
  void set(const std::string& key, std::string value) {
    values_[key] = std::move(value);
  }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw OutOfRange("missing config key: " + key);
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double number(const std::string& key) const {
    try {
      return io::parse_double(str(key));
    } catch (const SchemaMismatch&) {
      throw OutOfRange("config " + key + " is not a number: " + str(key));
    }
  }

  long integer(const std::string& key) const {
    const std::string text = str(key);
    long value = 0;
    const auto res =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
      throw OutOfRange("config " + key + " is not an integer: " + text);
    return value;
  }

  std::uint64_t seed() const {
    const std::string text = str("run.seed");
    std::uint64_t value = 0;
    const auto res =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
      throw OutOfRange("config run.seed is not an unsigned integer: " + text);
    return value;
  }

  const std::map<std::string, std::string>& items() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

Config default_config() {
  Config c;
  c.set("run.problem", "pendulum");
  c.set("run.seed", "2024");
  c.set("run.output", "out");
  c.set("run.alpha", "0");
  c.set("run.beta", "1");
  c.set("solver.tolerance", "1e-8");
  // Multistart probes polish wild random guesses and need headroom beyond
  // the 200-iteration default the library uses for warm starts.
  c.set("solver.max_iterations", "300");
  c.set("solver.max_backtracks", "30");
  c.set("solver.attempts", "64");
  c.set("integrator.rtol", "1e-12");
  c.set("integrator.atol", "1e-12");
  c.set("integrator.h_init", "1e-4");
  c.set("integrator.h_max", "10");
  c.set("integrator.max_steps", "500000");
  c.set("homotopy.initial_step", "0.05");
  c.set("homotopy.max_step", "0.2");
  c.set("homotopy.stall_threshold", "1e-6");
  c.set("sweep.n_states", "0");
  c.set("dataset.samples", "200");
  c.set("dataset.val_fraction", "0.1");
  c.set("dataset.format", "bin");
  c.set("train.width", "100");
  c.set("train.depth", "4");
  c.set("train.epochs", "2000");
  c.set("train.batch", "20000");
  c.set("train.lr", "1e-3");
  c.set("train.decay", "1e-5");
  c.set("eval.step", "0.005");
  c.set("eval.alpha_grid", "");
  c.set("rollout.horizon", "8");
  c.set("rollout.capture", "1");
  return c;
}

// INI-style file: [section] headers, key = value lines, # or ; comments.
// Keys before the first header land in the run section.
void load_config_file(Config& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open config file: " + path);
  std::string line;
  std::string section = "run";
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string at = path + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']')
        throw SchemaMismatch(at + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw SchemaMismatch(at + ": empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw SchemaMismatch(at + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw SchemaMismatch(at + ": empty key");
    cfg.set(section + "." + key, trim(t.substr(eq + 1)));
  }
}

fs::path resolve_output_dir(const Config& cfg) {
  fs::path out = cfg.str("run.output");
  if (out.is_relative()) {
    if (const char* root = std::getenv("HOMOPT_OUTPUT_ROOT"))
      out = fs::path(root) / out;
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec)
    throw IOFailure("cannot create output directory " + out.string() + ": " +
                    ec.message());
  return out;
}

// One live command per output directory. O_EXCL creation is atomic, so two
// racing instances cannot both own the directory; the lock is removed when
// the command finishes or throws.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw IOFailure("output directory is locked (" + path_.string() +
                      " exists); remove the stale lock if no other run is "
                      "active");
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      // A lock that cannot even record its owner is still a lock.
    }
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
  fs::path path_;
};

std::string fnv1a_hex(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot hash missing file: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 0x100000001b3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string("fnv1a:") + hex;
}

// Inputs are hashed under the paths the user gave, outputs under their
// names inside the run directory. nlohmann objects iterate sorted by key,
// so the dump is canonical.
void write_manifest(const fs::path& dir, const std::string& command,
                    const Config& cfg, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  json conf = json::object();
  for (const auto& [key, value] : cfg.items()) conf[key] = value;
  m["config"] = conf;
  json in = json::object();
  for (const auto& path : inputs) in[path] = fnv1a_hex(path);
  m["inputs"] = in;
  json out = json::object();
  for (const auto& name : outputs) out[name] = fnv1a_hex(dir / name);
  m["outputs"] = out;
  m["tool"] = {{"name", "homopt"},
               {"version", kVersion},
               {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                             std::to_string(EIGEN_MAJOR_VERSION) + "." +
                             std::to_string(EIGEN_MINOR_VERSION)}};
  const fs::path path = dir / ("manifest_" + command + ".json");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IOFailure("cannot open for writing: " + path.string());
  f << m.dump(2) << '\n';
  if (!f) throw IOFailure("write failed: " + path.string());
}

Problem problem_of(const Config& cfg) {
  return problem_from_string(cfg.str("run.problem"));
}

shooting::SolveOptions solver_options(const Config& cfg) {
  shooting::SolveOptions opts;
  opts.tol = cfg.number("solver.tolerance");
  opts.max_iterations = static_cast<int>(cfg.integer("solver.max_iterations"));
  opts.max_backtracks = static_cast<int>(cfg.integer("solver.max_backtracks"));
  return opts;
}

ode::IntegratorConfig integrator_config(const Config& cfg) {
  ode::IntegratorConfig icfg;
  icfg.rtol = cfg.number("integrator.rtol");
  icfg.atol = cfg.number("integrator.atol");
  icfg.h_init = cfg.number("integrator.h_init");
  icfg.h_max = cfg.number("integrator.h_max");
  icfg.max_steps = cfg.integer("integrator.max_steps");
  return icfg;
}

// The [bodies] section swaps in alternative ephemerides and the [craft]
// section rescales the vehicle; absent keys keep the J2000 table and the
// reference spacecraft.
spacecraft::Params craft_params(const Config& cfg) {
  spacecraft::Params p;
  const auto maybe = [&cfg](const std::string& key, double& slot) {
    if (cfg.has(key)) slot = cfg.number(key);
  };
  const auto body = [&](const std::string& name, kepler::OrbitalElements& el) {
    maybe("bodies." + name + "_semi_major_axis", el.semi_major_axis);
    maybe("bodies." + name + "_eccentricity", el.eccentricity);
    maybe("bodies." + name + "_inclination", el.inclination);
    maybe("bodies." + name + "_raan", el.raan);
    maybe("bodies." + name + "_arg_periapsis", el.arg_periapsis);
    maybe("bodies." + name + "_mean_anomaly_epoch", el.mean_anomaly_epoch);
  };
  body("earth", p.earth);
  body("mars", p.mars);
  maybe("craft.thrust_max", p.thrust_max);
  maybe("craft.isp", p.isp);
  maybe("craft.g0", p.g0);
  maybe("craft.mu", p.mu);
  maybe("craft.wet_mass", p.wet_mass);
  return p;
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> parts;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find(',', begin);
    if (end == std::string::npos) end = text.size();
    parts.push_back(io::parse_double(trim(text.substr(begin, end - begin))));
    begin = end + 1;
    if (end == text.size()) break;
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = parts[i];
  return v;
}

Eigen::VectorXd initial_state(const Config& cfg, Problem problem,
                              const spacecraft::Params& p) {
  if (cfg.has("run.s0") && !cfg.str("run.s0").empty()) {
    const Eigen::VectorXd s0 = parse_vector(cfg.str("run.s0"));
    if (s0.size() != state_dim(problem))
      throw OutOfRange("initial state needs " +
                       std::to_string(state_dim(problem)) + " components");
    return s0;
  }
  if (problem == Problem::Pendulum)
    return Eigen::VectorXd(pendulum::nominal_state());
  return Eigen::VectorXd(spacecraft::nominal_state(p));
}

std::vector<double> alpha_grid(const Config& cfg, Problem problem) {
  const std::string text = cfg.str("eval.alpha_grid", "");
  std::vector<double> grid;
  if (!text.empty()) {
    const Eigen::VectorXd v = parse_vector(text);
    for (Eigen::Index i = 0; i < v.size(); ++i) grid.push_back(v[i]);
  } else {
    // The transfer grid starts at 0.1: at beta = 1 the alpha = 0 corner is
    // minimum fuel with a free clock, whose infimum is approached by ever
    // longer coasting transfers, so there is no finite optimum to compare
    // against.
    const double start = problem == Problem::Pendulum ? 0.0 : 0.1;
    for (double a = start; a < 1.0 + 1e-9; a += 0.1)
      grid.push_back(std::round(a * 10.0) / 10.0);
  }
  if (grid.empty()) throw OutOfRange("empty evaluation grid");
  for (const double a : grid)
    if (a < 0.0 || a > 1.0)
      throw OutOfRange("evaluation grid values must lie in [0, 1]");
  return grid;
}

homotopy::SolveFn make_solver(Problem problem, const spacecraft::Params& p,
                              const shooting::SolveOptions& opts,
                              const ode::IntegratorConfig& icfg) {
  if (problem == Problem::Pendulum)
    return [opts, icfg](const Eigen::VectorXd& s0, const Eigen::VectorXd& z,
                        const homotopy::HomotopyParams& params) {
      return pendulum::solve(pendulum::State(s0), z, params.alpha, opts, icfg);
    };
  return [p, opts, icfg](const Eigen::VectorXd& s0, const Eigen::VectorXd& z,
                         const homotopy::HomotopyParams& params) {
    return spacecraft::solve(spacecraft::State(s0), z, params.alpha,
                             params.beta, p, opts, icfg);
  };
}

homotopy::SolutionRecord make_record(Problem problem, const Eigen::VectorXd& s0,
                                     const shooting::SolveReport& rep,
                                     const homotopy::HomotopyParams& params) {
  return {to_string(problem), s0, rep.z, params, rep.residual_norm};
}

// Dense dump of one realized optimum: state, costate, and the PMP control
// on a uniform time grid, one row per sample.
void save_trajectory_csv(const dataset::Trajectory& traj,
                         const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IOFailure("cannot open for writing: " + path.string());
  if (traj.problem == Problem::Pendulum)
    out << "t,x,v,theta,omega,lx,lv,ltheta,lomega,u,cost\n";
  else
    out << "t,rx,ry,rz,vx,vy,vz,m,lrx,lry,lrz,lvx,lvy,lvz,lm,ux,uy,uz,cost\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    out << io::format_double(traj.times[i]);
    for (Eigen::Index c = 0; c < traj.states[i].size(); ++c)
      out << ',' << io::format_double(traj.states[i][c]);
    for (Eigen::Index c = 0; c < traj.costates[i].size(); ++c)
      out << ',' << io::format_double(traj.costates[i][c]);
    for (Eigen::Index c = 0; c < traj.controls[i].size(); ++c)
      out << ',' << io::format_double(traj.controls[i][c]);
    out << ',' << io::format_double(traj.running_cost[i]) << '\n';
  }
  if (!out) throw IOFailure("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Sweep orchestration.

using MultistartFn = std::function<shooting::SolveReport(
    const homotopy::HomotopyParams&, std::uint64_t)>;

struct HopSweepConfig {
  homotopy::CriteriaOptions criteria;
  double hop_pitch = 0.05;   // first re-anchor target past the stuck blend
  double retry_pitch = 0.1;  // added per failed re-anchor attempt
  int retries = 4;
  double step_floor = 1e-4;  // outright step underflow
  int creep_wins = 10;       // accepted steps that count as creeping
  double creep_span = 0.005; // when together they advance less than this
};

// Warm-started continuation with fold hopping for the transfer sweeps.
// Plain step doubling and halving crosses most of the blend square, but
// the solution branch folds: near a fold the feasible step shrinks toward
// zero, either underflowing outright or creeping (many accepted steps that
// barely advance, each success re-doubling the step so the underflow test
// alone never fires). Both symptoms trigger a re-anchor: a fresh multistart
// a little past the stuck blend, continuing the sweep on the branch that
// exists there.
std::vector<homotopy::SolutionRecord> sweep_with_hops(
    const homotopy::SolveFn& solve, const MultistartFn& multistart,
    const homotopy::SolutionRecord& start, homotopy::BlendAxis axis,
    const HopSweepConfig& hcfg, std::uint64_t hop_seed, const char* name) {
  std::vector<homotopy::SolutionRecord> out{start};
  homotopy::HomotopyParams params = start.params;
  Eigen::VectorXd z = start.z;
  const bool on_beta = axis == homotopy::BlendAxis::Beta;
  const auto at = [&](double blend) {
    homotopy::HomotopyParams q = params;
    (on_beta ? q.beta : q.alpha) = blend;
    return q;
  };

  double blend = on_beta ? params.beta : params.alpha;
  double step = hcfg.criteria.initial_step;
  int wins = 0;
  double win_mark = blend;
  int hops = 0;

  while (blend < 1.0) {
    const bool creeping =
        wins >= hcfg.creep_wins && blend - win_mark < hcfg.creep_span;
    if (step < hcfg.step_floor || creeping) {
      double target = std::min(1.0, blend + hcfg.hop_pitch);
      shooting::SolveReport rep;
      for (int retry = 0; retry < hcfg.retries; ++retry) {
        rep = multistart(at(target),
                         derive_seed(hop_seed, 16ULL * hops + retry));
        if (shooting::successful(rep)) break;
        target = std::min(1.0, target + hcfg.retry_pitch);
      }
      if (!shooting::successful(rep))
        throw Stalled(std::string(name) +
                      " sweep could not re-anchor past blend " +
                      io::format_double(blend));
      std::printf("  [%s] %s at %.4f, re-anchored at %.4f\n", name,
                  creeping ? "creep" : "fold", blend, target);
      std::fflush(stdout);
      ++hops;
      blend = target;
      params = at(target);
      z = rep.z;
      out.push_back({start.problem, start.s0, z, params, rep.residual_norm});
      step = hcfg.criteria.initial_step;
      wins = 0;
      win_mark = blend;
      continue;
    }

    const double next = std::min(1.0, blend + step);
    const shooting::SolveReport rep = solve(start.s0, z, at(next));
    if (shooting::successful(rep)) {
      blend = next;
      params = at(next);
      z = rep.z;
      out.push_back({start.problem, start.s0, z, params, rep.residual_norm});
      ++wins;
      if (blend - win_mark >= hcfg.creep_span) {
        wins = 0;
        win_mark = blend;
      }
      step = std::min({step * 2.0, hcfg.criteria.max_step, 1.0 - blend});
      if (step <= 0.0 && blend < 1.0) step = hcfg.criteria.initial_step;
    } else {
      step *= 0.5;
    }
  }
  std::printf("  [%s] done: %zu records, %d hops\n", name, out.size(), hops);
  std::fflush(stdout);
  return out;
}

bool sweep_file_complete(const fs::path& path, homotopy::BlendAxis axis) {
  if (!fs::exists(path)) return false;
  const auto recs = records::load_jsonl(path.string());
  if (recs.empty()) return false;
  const auto& last = recs.back().params;
  const double blend =
      axis == homotopy::BlendAxis::Beta ? last.beta : last.alpha;
  return blend >= 1.0 - 1e-12;
}

// State sweeps fan out of anchor records in independently seeded blocks,
// so the file is reproducible record for record. A complete file is
// reused as is; anything else is recomputed whole, which rewrites the
// same bytes for every record that was already there.
std::vector<homotopy::SolutionRecord> state_blocks(
    const fs::path& path, const homotopy::SolveFn& solve,
    const std::vector<homotopy::SolutionRecord>& anchors, int n_states,
    const homotopy::StateOptions& sopts, std::uint64_t seed,
    std::uint64_t stream_base) {
  const std::size_t expected = anchors.size() * static_cast<std::size_t>(n_states);
  if (fs::exists(path)) {
    auto existing = records::load_jsonl(path.string());
    if (existing.size() == expected) {
      std::printf("state sweeps already complete (%zu records)\n",
                  existing.size());
      return existing;
    }
  }
  std::vector<homotopy::SolutionRecord> all;
  all.reserve(expected);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    Rng rng(derive_seed(seed, stream_base + i));
    const auto block =
        homotopy::homotopy_state(solve, anchors[i], n_states, sopts, rng);
    all.insert(all.end(), block.begin(), block.end());
    std::printf("  state sweep %zu/%zu at alpha=%s: %d records\n", i + 1,
                anchors.size(), io::format_double(anchors[i].params.alpha).c_str(),
                n_states);
    std::fflush(stdout);
  }
  records::save_jsonl(path.string(), all);
  return all;
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_solve(const Config& cfg) {
  const Problem problem = problem_of(cfg);
  const spacecraft::Params p = craft_params(cfg);
  const auto opts = solver_options(cfg);
  const auto icfg = integrator_config(cfg);
  const double alpha = cfg.number("run.alpha");
  const double beta =
      problem == Problem::Pendulum ? 1.0 : cfg.number("run.beta");
  if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0)
    throw OutOfRange("blend weights must lie in [0, 1]");
  const Eigen::VectorXd s0 = initial_state(cfg, problem, p);

  const fs::path dir = resolve_output_dir(cfg);
  DirLock lock(dir);

  std::vector<std::string> inputs;
  shooting::SolveReport rep;
  if (cfg.has("run.warm_start")) {
    const std::string warm = cfg.str("run.warm_start");
    const auto pool = records::load_jsonl(warm);
    if (pool.empty())
      throw SchemaMismatch("warm-start file has no records: " + warm);
    const auto nearest = std::min_element(
        pool.begin(), pool.end(), [&](const auto& a, const auto& b) {
          const auto d = [&](const homotopy::SolutionRecord& r) {
            return std::hypot(r.params.alpha - alpha, r.params.beta - beta);
          };
          return d(a) < d(b);
        });
    rep = make_solver(problem, p, opts, icfg)(s0, nearest->z, {alpha, beta});
    inputs.push_back(warm);
  } else {
    const int attempts = static_cast<int>(cfg.integer("solver.attempts"));
    rep = problem == Problem::Pendulum
              ? pendulum::solve_multistart(pendulum::State(s0), alpha,
                                           cfg.seed(), attempts, opts, icfg)
              : spacecraft::solve_multistart(spacecraft::State(s0), alpha,
                                             beta, cfg.seed(), attempts, p,
                                             opts, icfg);
  }
  if (!shooting::successful(rep)) {
    std::fprintf(stderr,
                 "solve did not converge: residual %.3e after %d iterations\n",
                 rep.residual_norm, rep.iterations);
    return 3;
  }

  const auto record = make_record(problem, s0, rep, {alpha, beta});
  records::save_jsonl((dir / "record.jsonl").string(), {record});

  dataset::RealizeOptions ro;
  ro.samples = static_cast<int>(cfg.integer("dataset.samples"));
  ro.spacecraft = p;
  ro.integrator = icfg;
  save_trajectory_csv(dataset::realize_trajectory(record, ro),
                      dir / "trajectory.csv");

  write_manifest(dir, "solve", cfg, inputs,
                 {"record.jsonl", "trajectory.csv"});
  std::printf(
      "solved %s at alpha=%s beta=%s: duration %.6f, residual %.3e, "
      "%d iterations\n",
      to_string(problem).c_str(), io::format_double(alpha).c_str(),
      io::format_double(beta).c_str(), rep.z[0], rep.residual_norm,
      rep.iterations);
  return 0;
}

int cmd_sweep(const Config& cfg) {
  const Problem problem = problem_of(cfg);
  const spacecraft::Params p = craft_params(cfg);
  const auto opts = solver_options(cfg);
  const auto icfg = integrator_config(cfg);
  const std::uint64_t seed = cfg.seed();
  const int attempts = static_cast<int>(cfg.integer("solver.attempts"));
  const int n_states = static_cast<int>(cfg.integer("sweep.n_states"));
  if (n_states < 0) throw OutOfRange("sweep.n_states must be non-negative");

  homotopy::CriteriaOptions copts;
  copts.initial_step = cfg.number("homotopy.initial_step");
  copts.max_step = cfg.number("homotopy.max_step");
  copts.stall_threshold = cfg.number("homotopy.stall_threshold");

  const fs::path dir = resolve_output_dir(cfg);
  DirLock lock(dir);
  const auto solver = make_solver(problem, p, opts, icfg);
  const Eigen::VectorXd s0 = initial_state(cfg, problem, p);
  std::vector<std::string> outputs;

  if (problem == Problem::Pendulum) {
    // The swingup branch folds too: the minimum-effort family (duration
    // near 14) terminates a little past alpha = 0.11 while a faster
    // family continues, so the criteria sweep gets the same fold-hopping
    // driver as the transfer.
    const MultistartFn multistart = [&](const homotopy::HomotopyParams& q,
                                        std::uint64_t s) {
      return pendulum::solve_multistart(pendulum::State(s0), q.alpha, s,
                                        attempts, opts, icfg);
    };
    HopSweepConfig hcfg;
    hcfg.criteria = copts;

    const fs::path cpath = dir / "records_criteria.jsonl";
    std::vector<homotopy::SolutionRecord> criteria;
    if (sweep_file_complete(cpath, homotopy::BlendAxis::Alpha)) {
      criteria = records::load_jsonl(cpath.string());
      std::printf("criteria sweep already complete (%zu records)\n",
                  criteria.size());
    } else {
      const auto rep = pendulum::solve_multistart(
          pendulum::State(s0), 0.0, derive_seed(seed, 11), attempts, opts,
          icfg);
      if (!shooting::successful(rep))
        throw NoConvergence("pendulum solve at alpha=0 did not converge");
      criteria = sweep_with_hops(solver, multistart,
                                 make_record(problem, s0, rep, {0.0, 1.0}),
                                 homotopy::BlendAxis::Alpha, hcfg,
                                 derive_seed(seed, 12), "criteria");
      records::save_jsonl(cpath.string(), criteria);
    }
    outputs.push_back("records_criteria.jsonl");

    const fs::path spath = dir / "records_states.jsonl";
    if (n_states == 0) {
      if (!fs::exists(spath)) records::save_jsonl(spath.string(), {});
    } else {
      // No state block at alpha = 0: with a pure u^2 cost the Hamiltonian
      // vanishes identically along extremals, the free-time condition
      // loses its duration sensitivity, and warm-started re-solves at
      // perturbed states fail on the near-singular Jacobian. The nominal
      // alpha = 0 record still covers that corner of the dataset.
      std::vector<homotopy::SolutionRecord> anchors;
      for (const auto& r : criteria)
        if (r.params.alpha > 0.0) anchors.push_back(r);
      state_blocks(spath, solver, anchors, n_states,
                   homotopy::pendulum_state_options(), seed, 1000);
    }
    outputs.push_back("records_states.jsonl");
  } else {
    const MultistartFn multistart = [&](const homotopy::HomotopyParams& q,
                                        std::uint64_t s) {
      return spacecraft::solve_multistart(spacecraft::State(s0), q.alpha,
                                          q.beta, s, attempts, p, opts, icfg);
    };
    HopSweepConfig hcfg;
    hcfg.criteria = copts;

    const auto anchored_sweep =
        [&](const fs::path& path, const char* name,
            const homotopy::HomotopyParams& corner, homotopy::BlendAxis axis,
            std::uint64_t anchor_stream, std::uint64_t hop_stream) {
          if (sweep_file_complete(path, axis)) {
            auto recs = records::load_jsonl(path.string());
            std::printf("%s sweep already complete (%zu records)\n", name,
                        recs.size());
            return recs;
          }
          const auto rep =
              multistart(corner, derive_seed(seed, anchor_stream));
          if (!shooting::successful(rep))
            throw NoConvergence(std::string(name) +
                                " anchor solve did not converge");
          std::printf("  [%s] anchor at alpha=%s beta=%s: duration %.3f\n",
                      name, io::format_double(corner.alpha).c_str(),
                      io::format_double(corner.beta).c_str(), rep.z[0]);
          auto recs = sweep_with_hops(solver, multistart,
                                      make_record(problem, s0, rep, corner),
                                      axis, hcfg, derive_seed(seed, hop_stream),
                                      name);
          records::save_jsonl(path.string(), recs);
          return recs;
        };

    // Both beta sweeps anchor a nudge inside the square: on the beta = 0
    // edge the objective is pure u^2 with a free clock, which any
    // sufficiently long coast makes arbitrarily cheap, so the corner
    // itself has no root to start from.
    anchored_sweep(dir / "records_quad_time.jsonl", "quad->time",
                   {1.0, 0.01}, homotopy::BlendAxis::Beta, 21, 22);
    outputs.push_back("records_quad_time.jsonl");

    const auto quad_effort =
        anchored_sweep(dir / "records_quad_effort.jsonl", "quad->effort",
                       {0.1, 0.1}, homotopy::BlendAxis::Beta, 23, 24);
    outputs.push_back("records_quad_effort.jsonl");

    const fs::path epath = dir / "records_effort_time.jsonl";
    std::vector<homotopy::SolutionRecord> effort_time;
    if (sweep_file_complete(epath, homotopy::BlendAxis::Alpha)) {
      effort_time = records::load_jsonl(epath.string());
      std::printf("effort->time sweep already complete (%zu records)\n",
                  effort_time.size());
    } else {
      effort_time =
          sweep_with_hops(solver, multistart, quad_effort.back(),
                          homotopy::BlendAxis::Alpha, hcfg,
                          derive_seed(seed, 25), "effort->time");
      records::save_jsonl(epath.string(), effort_time);
    }
    outputs.push_back("records_effort_time.jsonl");

    const fs::path spath = dir / "records_states.jsonl";
    if (n_states == 0) {
      if (!fs::exists(spath)) records::save_jsonl(spath.string(), {});
    } else {
      // Anchor one block near each evaluation grid point so the dataset
      // covers the alpha axis instead of clustering where the sweep
      // stepped finely.
      std::vector<homotopy::SolutionRecord> anchors;
      for (const double g : alpha_grid(cfg, problem)) {
        const auto nearest = std::min_element(
            effort_time.begin(), effort_time.end(),
            [&](const auto& a, const auto& b) {
              return std::abs(a.params.alpha - g) <
                     std::abs(b.params.alpha - g);
            });
        anchors.push_back(*nearest);
      }
      state_blocks(spath, solver, anchors, n_states,
                   homotopy::spacecraft_state_options(), seed, 3000);
    }
    outputs.push_back("records_states.jsonl");
  }

  write_manifest(dir, "sweep", cfg, {}, outputs);
  return 0;
}

int cmd_dataset(const Config& cfg, const std::vector<std::string>& paths) {
  if (paths.empty())
    throw OutOfRange("dataset needs at least one --records file");
  std::vector<homotopy::SolutionRecord> all;
  for (const auto& path : paths) {
    const auto recs = records::load_jsonl(path);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  if (all.empty()) throw SchemaMismatch("no records in the input files");

  dataset::BuildOptions bo;
  bo.realize.samples = static_cast<int>(cfg.integer("dataset.samples"));
  bo.realize.spacecraft = craft_params(cfg);
  bo.realize.integrator = integrator_config(cfg);
  bo.val_fraction = cfg.number("dataset.val_fraction");
  bo.seed = cfg.seed();

  const std::string format = cfg.str("dataset.format");
  if (format != "bin" && format != "csv")
    throw OutOfRange("dataset.format must be bin or csv");

  const fs::path dir = resolve_output_dir(cfg);
  DirLock lock(dir);
  const dataset::Dataset ds = dataset::build(all, bo);
  const std::string name = "dataset." + format;
  dataset::save(ds, (dir / name).string());
  write_manifest(dir, "dataset", cfg, paths, {name});
  std::printf("dataset: %ld rows from %zu trajectories (%d train, %d val)\n",
              static_cast<long>(ds.rows.rows()), all.size(),
              dataset::split_count(ds, dataset::Split::Train),
              dataset::split_count(ds, dataset::Split::Validation));
  return 0;
}

int cmd_train(const Config& cfg, const std::string& dataset_path) {
  if (dataset_path.empty()) throw OutOfRange("train needs --dataset");
  const dataset::Dataset ds = dataset::load(dataset_path);

  mlp::Architecture arch;
  arch.input_dim = ds.input_size();
  arch.hidden_width = static_cast<int>(cfg.integer("train.width"));
  arch.hidden_layers = static_cast<int>(cfg.integer("train.depth"));
  arch.output_dim = ds.control_size();

  mlp::TrainConfig tc;
  tc.epochs = static_cast<int>(cfg.integer("train.epochs"));
  tc.batch = static_cast<int>(cfg.integer("train.batch"));
  tc.lr = cfg.number("train.lr");
  tc.decay = cfg.number("train.decay");
  tc.val_fraction = cfg.number("dataset.val_fraction");
  tc.seed = cfg.seed();

  const fs::path dir = resolve_output_dir(cfg);
  DirLock lock(dir);
  const mlp::TrainResult result = mlp::train(ds, arch, tc);

  const std::string label = mlp::arch_label(arch);
  const std::string weights = "weights_" + label + ".bin";
  const std::string history = "history_" + label + ".csv";
  mlp::save_weights(result.params, (dir / weights).string());
  mlp::save_history(result.history, (dir / history).string());
  write_manifest(dir, "train", cfg, {dataset_path}, {weights, history});
  std::printf("trained %s for %d epochs: train mse %.6f, val mse %.6f\n",
              label.c_str(), tc.epochs, result.history.back().train_mse,
              result.history.back().val_mse);
  return 0;
}

// A usable reference must share the rollout's start state and sit at
// beta = 1, where the blended cost the gap compares is defined.
std::vector<homotopy::SolutionRecord> reference_pool(
    const std::vector<homotopy::SolutionRecord>& records, Problem problem,
    const Eigen::VectorXd& s0) {
  std::vector<homotopy::SolutionRecord> pool;
  for (const auto& r : records) {
    if (r.problem != to_string(problem)) continue;
    if (std::abs(r.params.beta - 1.0) > 1e-9) continue;
    if (r.s0.size() != s0.size() || (r.s0 - s0).norm() > 1e-12) continue;
    pool.push_back(r);
  }
  return pool;
}

// Reference optimum at one grid alpha: reuse an exact record when the
// sweep produced one, otherwise warm-start from the nearest records and
// fall back to walking the blend over in short hops.
homotopy::SolutionRecord reference_record(
    double target, std::vector<homotopy::SolutionRecord> pool,
    const homotopy::SolveFn& solve, Problem problem,
    const Eigen::VectorXd& s0) {
  std::sort(pool.begin(), pool.end(), [&](const auto& a, const auto& b) {
    return std::abs(a.params.alpha - target) <
           std::abs(b.params.alpha - target);
  });
  if (std::abs(pool.front().params.alpha - target) < 1e-9)
    return pool.front();

  const homotopy::HomotopyParams params{target, 1.0};
  for (std::size_t k = 0; k < std::min<std::size_t>(3, pool.size()); ++k) {
    const auto rep = solve(s0, pool[k].z, params);
    if (shooting::successful(rep))
      return make_record(problem, s0, rep, params);
  }

  homotopy::SolutionRecord cur = pool.front();
  for (int guard = 0; guard < 200; ++guard) {
    const double gap = target - cur.params.alpha;
    if (std::abs(gap) < 1e-12) return cur;
    const double a = std::abs(gap) <= 0.02
                         ? target
                         : cur.params.alpha + std::copysign(0.02, gap);
    const homotopy::HomotopyParams q{a, 1.0};
    const auto rep = solve(s0, cur.z, q);
    if (!shooting::successful(rep)) break;
    cur = make_record(problem, s0, rep, q);
  }
  throw NoConvergence("no reference solution at alpha " +
                      io::format_double(target));
}

int cmd_eval(const Config& cfg, const std::vector<std::string>& weights_paths,
             const std::string& records_path) {
  if (weights_paths.empty()) throw OutOfRange("eval needs --weights");
  if (records_path.empty()) throw OutOfRange("eval needs --records");

  const Problem problem = problem_of(cfg);
  const spacecraft::Params p = craft_params(cfg);
  const auto solver = make_solver(problem, p, solver_options(cfg),
                                  integrator_config(cfg));
  const Eigen::VectorXd s0 = initial_state(cfg, problem, p);

  const auto pool =
      reference_pool(records::load_jsonl(records_path), problem, s0);
  if (pool.empty())
    throw SchemaMismatch(
        "no reference records match the problem, start state, and beta = 1");

  eval::RolloutOptions ropts;
  ropts.step = cfg.number("eval.step");
  ropts.spacecraft = p;

  std::vector<eval::Reference> references;
  for (const double g : alpha_grid(cfg, problem))
    references.push_back(
        eval::make_reference(reference_record(g, pool, solver, problem, s0),
                             ropts));

  const fs::path dir = resolve_output_dir(cfg);
  DirLock lock(dir);
  std::vector<eval::GapTable> tables;
  std::vector<std::string> outputs;
  for (const auto& path : weights_paths) {
    const mlp::MlpParams params = mlp::load_weights(path);
    const std::string label = mlp::arch_label(params.arch);
    tables.push_back(eval::eval_grid(eval::policy_law(params, problem), label,
                                     problem, s0, references, ropts));
    const std::string details = "gap_details_" + label + ".csv";
    eval::save_gap_details(tables.back(), (dir / details).string());
    outputs.push_back(details);
  }
  eval::save_gap_tables(tables, (dir / "gap_table.csv").string());
  outputs.insert(outputs.begin(), "gap_table.csv");

  std::vector<std::string> inputs = weights_paths;
  inputs.push_back(records_path);
  write_manifest(dir, "eval", cfg, inputs, outputs);
  for (const auto& table : tables)
    std::printf("policy %s: mean gap %.4f%%\n", table.label.c_str(),
                table.mean_gap());
  return 0;
}

int cmd_rollout(const Config& cfg, const std::string& weights_path,
                const std::string& schedule_text) {
  if (weights_path.empty()) throw OutOfRange("rollout needs --weights");
  if (schedule_text.empty()) throw OutOfRange("rollout needs --schedule");

  const Problem problem = problem_of(cfg);
  const spacecraft::Params p = craft_params(cfg);
  const Eigen::VectorXd s0 = initial_state(cfg, problem, p);
  const eval::Schedule schedule = eval::parse_schedule(schedule_text);
  const double horizon = cfg.number("rollout.horizon");

  eval::RolloutOptions ropts;
  ropts.step = cfg.number("eval.step");
  ropts.capture = cfg.integer("rollout.capture") != 0;
  ropts.spacecraft = p;

  const mlp::MlpParams params = mlp::load_weights(weights_path);
  const fs::path dir = resolve_output_dir(cfg);
  DirLock lock(dir);
  const eval::RolloutResult result =
      eval::rollout(eval::policy_law(params, problem), problem, s0, schedule,
                    horizon, ropts);
  eval::save_rollout_csv(result, schedule, (dir / "rollout.csv").string());
  write_manifest(dir, "rollout", cfg, {weights_path}, {"rollout.csv"});
  std::printf("rollout: cost %.6f, terminal defect %.6f, %s at t=%.3f\n",
              result.cost, result.terminal_defect,
              result.termination == eval::Termination::Captured ? "captured"
                                                                : "horizon",
              result.trajectory.duration());
  return 0;
}

// ---------------------------------------------------------------------------
// Flag plumbing.

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string problem;
  std::string output;
  std::string seed;
  std::string s0;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file,
                  "key = value config file with [section] headers");
  cmd->add_option("--set", f.overrides,
                  "override one config entry, section.key=value");
  cmd->add_option("--problem", f.problem, "pendulum or spacecraft");
  cmd->add_option("--output", f.output,
                  "output directory; relative paths land under "
                  "HOMOPT_OUTPUT_ROOT when it is set");
  cmd->add_option("--seed", f.seed, "master seed for every random draw");
  cmd->add_option("--s0", f.s0, "initial state, comma separated");
}

Config resolve_config(const CommonFlags& f) {
  Config cfg = default_config();
  if (!f.config_file.empty()) load_config_file(cfg, f.config_file);
  for (const auto& entry : f.overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw OutOfRange("--set expects section.key=value: " + entry);
    std::string key = trim(entry.substr(0, eq));
    if (key.empty()) throw OutOfRange("--set has an empty key: " + entry);
    if (key.find('.') == std::string::npos) key = "run." + key;
    cfg.set(key, trim(entry.substr(eq + 1)));
  }
  if (!f.problem.empty()) cfg.set("run.problem", f.problem);
  if (!f.output.empty()) cfg.set("run.output", f.output);
  if (!f.seed.empty()) cfg.set("run.seed", f.seed);
  if (!f.s0.empty()) cfg.set("run.s0", f.s0);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "homopt: optimal-control demonstrations by indirect shooting and "
      "homotopy, imitation policies, and closed-loop gap evaluation"};
  app.require_subcommand(1);
  CommonFlags common;

  auto* solve = app.add_subcommand(
      "solve", "solve one problem instance and dump the optimal trajectory");
  add_common_flags(solve, common);
  std::string alpha, beta, warm_start, attempts;
  solve->add_option("--alpha", alpha, "time weight in [0, 1]");
  solve->add_option("--beta", beta,
                    "smoothing weight in [0, 1] (spacecraft only)");
  solve->add_option("--warm-start", warm_start,
                    "records file; the nearest record seeds the solver");
  solve->add_option("--attempts", attempts, "multistart attempts");

  auto* sweep = app.add_subcommand(
      "sweep", "run the homotopy sweeps and collect solution records");
  add_common_flags(sweep, common);
  std::string n_states;
  sweep->add_option("--n-states", n_states,
                    "initial-state sweep records per anchor");

  auto* dataset_cmd = app.add_subcommand(
      "dataset", "realize records into a flat training dataset");
  add_common_flags(dataset_cmd, common);
  std::vector<std::string> records_paths;
  std::string ds_format, ds_samples;
  dataset_cmd->add_option("--records", records_paths,
                          "records files (repeatable)");
  dataset_cmd->add_option("--format", ds_format, "bin or csv");
  dataset_cmd->add_option("--samples", ds_samples,
                          "time samples per trajectory");

  auto* train = app.add_subcommand("train", "fit an imitation policy");
  add_common_flags(train, common);
  std::string dataset_path, width, depth, epochs, batch;
  train->add_option("--dataset", dataset_path, "dataset file from `dataset`");
  train->add_option("--width", width, "hidden layer width");
  train->add_option("--depth", depth, "hidden layer count");
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--batch", batch, "minibatch size");

  auto* eval_cmd = app.add_subcommand(
      "eval", "optimality-gap table for trained policies");
  add_common_flags(eval_cmd, common);
  std::vector<std::string> weights_paths;
  std::string eval_records, grid;
  eval_cmd->add_option("--weights", weights_paths,
                       "weights files (repeatable, one gap column each)");
  eval_cmd->add_option("--records", eval_records,
                       "records file supplying reference optima");
  eval_cmd->add_option("--grid", grid, "alpha grid, comma separated");

  auto* rollout = app.add_subcommand(
      "rollout", "roll a policy out under a blend schedule");
  add_common_flags(rollout, common);
  std::string rollout_weights, schedule, horizon, capture;
  rollout->add_option("--weights", rollout_weights, "weights file");
  rollout->add_option("--schedule", schedule,
                      "piecewise-constant alpha, t0:a0,t1:a1,...");
  rollout->add_option("--horizon", horizon, "rollout horizon");
  rollout->add_option("--capture", capture,
                      "1 stops at goal capture, 0 runs the full horizon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Config cfg = resolve_config(common);
    if (app.got_subcommand(solve)) {
      if (!alpha.empty()) cfg.set("run.alpha", alpha);
      if (!beta.empty()) cfg.set("run.beta", beta);
      if (!warm_start.empty()) cfg.set("run.warm_start", warm_start);
      if (!attempts.empty()) cfg.set("solver.attempts", attempts);
      return cmd_solve(cfg);
    }
    if (app.got_subcommand(sweep)) {
      if (!n_states.empty()) cfg.set("sweep.n_states", n_states);
      return cmd_sweep(cfg);
    }
    if (app.got_subcommand(dataset_cmd)) {
      if (!ds_format.empty()) cfg.set("dataset.format", ds_format);
      if (!ds_samples.empty()) cfg.set("dataset.samples", ds_samples);
      return cmd_dataset(cfg, records_paths);
    }
    if (app.got_subcommand(train)) {
      if (!width.empty()) cfg.set("train.width", width);
      if (!depth.empty()) cfg.set("train.depth", depth);
      if (!epochs.empty()) cfg.set("train.epochs", epochs);
      if (!batch.empty()) cfg.set("train.batch", batch);
      return cmd_train(cfg, dataset_path);
    }
    if (app.got_subcommand(eval_cmd)) {
      if (!grid.empty()) cfg.set("eval.alpha_grid", grid);
      return cmd_eval(cfg, weights_paths, eval_records);
    }
    if (app.got_subcommand(rollout)) {
      if (!horizon.empty()) cfg.set("rollout.horizon", horizon);
      if (!capture.empty()) cfg.set("rollout.capture", capture);
      return cmd_rollout(cfg, rollout_weights, schedule);
    }
    return 2;
  } catch (const OutOfRange& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const SchemaMismatch& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const IOFailure& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
