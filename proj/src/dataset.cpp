#include "homopt/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "homopt/errors.hpp"
#include "homopt/io.hpp"
#include "homopt/pendulum.hpp"
#include "homopt/rng.hpp"

namespace homopt::dataset {

namespace {

constexpr char kBinaryMagic[8] = {'H', 'O', 'P', 'T', 'D', 'S', '0', '1'};
constexpr char kCsvMagic[] = "# homopt-dataset v1";

std::vector<std::string> column_names(Problem problem) {
  if (problem == Problem::Pendulum)
    return {"x", "v", "theta", "omega", "alpha", "u", "trajectory_id",
            "split"};
  return {"rx", "ry", "rz", "vx",  "vy", "vz",            "m",
          "alpha", "ux", "uy", "uz", "trajectory_id", "split"};
}

Trajectory realize_pendulum(const homotopy::SolutionRecord& record,
                            const RealizeOptions& opts) {
  const auto d = pendulum::Decision::unpack(record.z);
  const double alpha = record.params.alpha;

  Eigen::VectorXd y0(9);
  y0.head<4>() = record.s0;
  y0.segment<4>(4) = d.costate0;
  y0[8] = 0.0;
  const auto field = [alpha](const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    pendulum::augmented_rate_with_cost(y, alpha, dy);
  };
  const ode::SolutionPath path =
      ode::integrate(field, y0, 0.0, d.duration, opts.integrator);

  Trajectory traj;
  traj.problem = Problem::Pendulum;
  traj.params = record.params;
  for (int i = 0; i < opts.samples; ++i) {
    const double t = d.duration * i / (opts.samples - 1.0);
    const Eigen::VectorXd y = ode::sample_at(path, t);
    const pendulum::State s = y.head<4>();
    const pendulum::Costate lambda = y.segment<4>(4);
    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.costates.push_back(lambda);
    traj.controls.push_back(Eigen::VectorXd::Constant(
        1, pendulum::optimal_control(s, lambda, alpha)));
    traj.running_cost.push_back(y[8]);
  }
  return traj;
}

Trajectory realize_spacecraft(const homotopy::SolutionRecord& record,
                              const RealizeOptions& opts) {
  const auto d = spacecraft::Decision::unpack(record.z);
  const double alpha = record.params.alpha;
  const double beta = record.params.beta;
  const spacecraft::Params& p = opts.spacecraft;

  Eigen::VectorXd y0(15);
  y0.head<7>() = record.s0;
  y0.segment<7>(7) = d.costate0;
  y0[14] = 0.0;
  const auto field = [alpha, beta, &p](const Eigen::VectorXd& y,
                                       Eigen::VectorXd& dy) {
    spacecraft::augmented_rate_with_cost(y, alpha, beta, p, dy);
  };
  const ode::SolutionPath path =
      ode::integrate(field, y0, 0.0, d.duration, opts.integrator);

  Trajectory traj;
  traj.problem = Problem::Spacecraft;
  traj.params = record.params;
  for (int i = 0; i < opts.samples; ++i) {
    const double t = d.duration * i / (opts.samples - 1.0);
    const Eigen::VectorXd y = ode::sample_at(path, t);
    const spacecraft::State s = y.head<7>();
    const spacecraft::Costate lambda = y.segment<7>(7);
    const Eigen::Vector3d lv = lambda.segment<3>(3);

    double u = spacecraft::throttle(s, lambda, alpha, beta, p);
    Eigen::Vector3d thrust = Eigen::Vector3d::Zero();
    if (u > 0.0 && lv.norm() > 0.0)
      thrust = u * spacecraft::thrust_direction(lv);
    else
      u = 0.0;

    traj.times.push_back(t);
    traj.states.push_back(s);
    traj.costates.push_back(lambda);
    traj.controls.push_back(thrust);
    traj.running_cost.push_back(y[14]);
  }
  return traj;
}

double split_hash(std::uint64_t seed, std::uint64_t trajectory_id) {
  return static_cast<double>(derive_seed(seed, trajectory_id) >> 11) *
         0x1.0p-53;
}

void validate(const Dataset& ds) {
  if (ds.rows.rows() == 0) throw SchemaMismatch("dataset has no rows");
  if (!ds.rows.allFinite())
    throw SchemaMismatch("dataset contains non-finite values");
  const Eigen::Index alpha_col = ds.state_size();
  for (Eigen::Index i = 0; i < ds.rows.rows(); ++i) {
    const double alpha = ds.rows(i, alpha_col);
    if (alpha < 0.0 || alpha > 1.0)
      throw SchemaMismatch("alpha outside [0, 1] in dataset row");
  }
}

}  // namespace

Trajectory realize_trajectory(const homotopy::SolutionRecord& record,
                              const RealizeOptions& opts) {
  if (opts.samples < 2) throw OutOfRange("need at least 2 samples");
  return problem_from_string(record.problem) == Problem::Pendulum
             ? realize_pendulum(record, opts)
             : realize_spacecraft(record, opts);
}

Dataset build(const std::vector<homotopy::SolutionRecord>& records,
              const BuildOptions& opts) {
  if (records.empty()) throw OutOfRange("build needs at least one record");

  Dataset ds;
  ds.problem = problem_from_string(records.front().problem);
  ds.columns = column_names(ds.problem);

  const int n_state = ds.state_size();
  const int n_control = ds.control_size();
  const Eigen::Index n_cols = n_state + 1 + n_control + 2;
  ds.rows.resize(static_cast<Eigen::Index>(records.size()) * opts.realize.samples,
                 n_cols);

  Eigen::Index row = 0;
  for (std::size_t id = 0; id < records.size(); ++id) {
    if (problem_from_string(records[id].problem) != ds.problem)
      throw SchemaMismatch("mixed problems in one dataset");
    const Trajectory traj = realize_trajectory(records[id], opts.realize);
    const double split =
        split_hash(opts.seed, id) < opts.val_fraction ? 1.0 : 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i, ++row) {
      ds.rows.block(row, 0, 1, n_state) = traj.states[i].transpose();
      ds.rows(row, n_state) = traj.params.alpha;
      ds.rows.block(row, n_state + 1, 1, n_control) =
          traj.controls[i].transpose();
      ds.rows(row, n_state + 1 + n_control) = static_cast<double>(id);
      ds.rows(row, n_state + 1 + n_control + 1) = split;
    }
  }
  validate(ds);
  return ds;
}

namespace {

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  out << kCsvMagic << '\n';
  out << "# problem " << to_string(ds.problem) << '\n';
  for (std::size_t i = 0; i < ds.columns.size(); ++i)
    out << ds.columns[i] << (i + 1 < ds.columns.size() ? ',' : '\n');
  for (Eigen::Index r = 0; r < ds.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.rows.cols(); ++c)
      out << io::format_double(ds.rows(r, c))
          << (c + 1 < ds.rows.cols() ? ',' : '\n');
  }
  if (!out) throw IOFailure("write failed: " + path);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOFailure("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvMagic)
    throw SchemaMismatch("not a homopt dataset CSV: " + path);
  if (!std::getline(in, line) || line.rfind("# problem ", 0) != 0)
    throw SchemaMismatch("missing problem header: " + path);

  Dataset ds;
  ds.problem = problem_from_string(line.substr(10));
  if (!std::getline(in, line)) throw SchemaMismatch("missing column header");
  std::stringstream header(line);
  std::string field;
  while (std::getline(header, field, ',')) ds.columns.push_back(field);

  std::vector<double> values;
  Eigen::Index n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t begin = 0;
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(ds.columns.size());
         ++c) {
      std::size_t end = line.find(',', begin);
      if (end == std::string::npos) end = line.size();
      values.push_back(io::parse_double(
          std::string_view(line).substr(begin, end - begin)));
      begin = end + 1;
    }
    ++n_rows;
  }
  ds.rows.resize(n_rows, static_cast<Eigen::Index>(ds.columns.size()));
  for (Eigen::Index r = 0; r < n_rows; ++r)
    for (Eigen::Index c = 0; c < ds.rows.cols(); ++c)
      ds.rows(r, c) = values[r * ds.rows.cols() + c];
  validate(ds);
  return ds;
}

void save_bin(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  out.write(kBinaryMagic, sizeof(kBinaryMagic));
  const std::string problem = to_string(ds.problem);
  io::write_u32le(out, static_cast<std::uint32_t>(problem.size()));
  out.write(problem.data(), problem.size());
  io::write_u32le(out, static_cast<std::uint32_t>(ds.rows.rows()));
  io::write_u32le(out, static_cast<std::uint32_t>(ds.rows.cols()));
  for (const auto& name : ds.columns) {
    io::write_u32le(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), name.size());
  }
  for (Eigen::Index r = 0; r < ds.rows.rows(); ++r)
    for (Eigen::Index c = 0; c < ds.rows.cols(); ++c)
      io::write_f64le(out, ds.rows(r, c));
  if (!out) throw IOFailure("write failed: " + path);
}

Dataset load_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBinaryMagic, sizeof(magic)) != 0)
    throw SchemaMismatch("not a homopt dataset binary: " + path);

  Dataset ds;
  const std::uint32_t problem_size = io::read_u32le(in);
  std::string problem(problem_size, '\0');
  in.read(problem.data(), problem_size);
  ds.problem = problem_from_string(problem);
  const std::uint32_t n_rows = io::read_u32le(in);
  const std::uint32_t n_cols = io::read_u32le(in);
  for (std::uint32_t c = 0; c < n_cols; ++c) {
    const std::uint32_t len = io::read_u32le(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    ds.columns.push_back(name);
  }
  if (!in) throw SchemaMismatch("truncated dataset header: " + path);
  ds.rows.resize(n_rows, n_cols);
  for (std::uint32_t r = 0; r < n_rows; ++r)
    for (std::uint32_t c = 0; c < n_cols; ++c)
      ds.rows(r, c) = io::read_f64le(in);
  validate(ds);
  return ds;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void save(const Dataset& ds, const std::string& path) {
  if (has_suffix(path, ".csv")) return save_csv(ds, path);
  if (has_suffix(path, ".bin")) return save_bin(ds, path);
  throw IOFailure("dataset path must end in .csv or .bin: " + path);
}

Dataset load(const std::string& path) {
  if (has_suffix(path, ".csv")) return load_csv(path);
  if (has_suffix(path, ".bin")) return load_bin(path);
  throw IOFailure("dataset path must end in .csv or .bin: " + path);
}

int split_count(const Dataset& ds, Split split) {
  const double wanted = split == Split::Validation ? 1.0 : 0.0;
  int count = 0;
  for (Eigen::Index r = 0; r < ds.rows.rows(); ++r)
    if (ds.rows(r, ds.split_column()) == wanted) ++count;
  return count;
}

Batch minibatch(const Dataset& ds, int k, Split split, std::uint64_t seed) {
  const double wanted = split == Split::Validation ? 1.0 : 0.0;
  std::vector<Eigen::Index> pool;
  for (Eigen::Index r = 0; r < ds.rows.rows(); ++r)
    if (ds.rows(r, ds.split_column()) == wanted) pool.push_back(r);
  if (pool.empty()) throw EmptySplit("requested split has no rows");
  if (k <= 0 || k > static_cast<int>(pool.size()))
    throw EmptySplit("batch size " + std::to_string(k) +
                     " exceeds split size " + std::to_string(pool.size()));

  // Partial Fisher-Yates: the first k entries become the sample.
  Rng rng(seed);
  for (int i = 0; i < k; ++i) {
    const std::uint64_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }

  Batch batch;
  batch.inputs.resize(k, ds.input_size());
  batch.targets.resize(k, ds.control_size());
  for (int i = 0; i < k; ++i) {
    batch.inputs.row(i) = ds.rows.block(pool[i], 0, 1, ds.input_size());
    batch.targets.row(i) =
        ds.rows.block(pool[i], ds.input_size(), 1, ds.control_size());
  }
  return batch;
}

}  // namespace homopt::dataset
