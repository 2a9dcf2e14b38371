#include "homopt/mlp.hpp"

#include <cmath>
#include <fstream>

#include "homopt/errors.hpp"
#include "homopt/io.hpp"
#include "homopt/rng.hpp"

namespace homopt::mlp {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr char kWeightsMagic[8] = {'H', 'O', 'P', 'T', 'M', 'L', '0', '1'};

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

void validate_arch(const Architecture& arch) {
  if (arch.input_dim < 1 || arch.hidden_width < 1 || arch.hidden_layers < 1 ||
      arch.output_dim < 1)
    throw OutOfRange("architecture dimensions must all be >= 1");
}

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Activations kept column-per-sample; everything the backward pass reuses.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;  // input of each linear layer
  std::vector<Eigen::MatrixXd> zhat;          // normalized pre-affine
  std::vector<RowArray> inv_std;              // per-sample 1/sqrt(var+eps)
  std::vector<Eigen::MatrixXd> pre_act;       // affine output, pre-softplus
  Eigen::MatrixXd y;                          // tanh head output (k x n)
};

Eigen::MatrixXd forward_impl(const MlpParams& params,
                             const Eigen::MatrixXd& inputs,
                             ForwardCache* cache) {
  if (inputs.cols() != params.arch.input_dim)
    throw OutOfRange("input width does not match the architecture");
  const int layers = params.arch.hidden_layers;

  Eigen::MatrixXd x =
      ((inputs.transpose().colwise() - params.input_mean).array().colwise() /
       params.input_std.array())
          .matrix();

  for (int l = 0; l < layers; ++l) {
    if (cache) cache->layer_inputs.push_back(x);
    Eigen::MatrixXd z = params.weights[l] * x;
    z.colwise() += params.biases[l];

    const RowArray mean = z.array().colwise().mean();
    z.array().rowwise() -= mean;
    const RowArray inv_std =
        (z.array().square().colwise().mean() + kLayerNormEps).rsqrt();
    z.array().rowwise() *= inv_std;

    Eigen::MatrixXd g =
        (z.array().colwise() * params.ln_gain[l].array()).matrix();
    g.colwise() += params.ln_bias[l];

    if (cache) {
      cache->zhat.push_back(std::move(z));
      cache->inv_std.push_back(inv_std);
      cache->pre_act.push_back(g);
    }
    x = g.unaryExpr([](double v) { return softplus(v); });
  }

  if (cache) cache->layer_inputs.push_back(x);
  Eigen::MatrixXd out = params.weights[layers] * x;
  out.colwise() += params.biases[layers];
  Eigen::MatrixXd y = out.array().tanh().matrix();
  if (cache) cache->y = y;
  return y.transpose();
}

Gradients zero_gradients(const Architecture& arch) {
  Gradients g;
  int fan_in = arch.input_dim;
  for (int l = 0; l < arch.hidden_layers; ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(arch.hidden_width, fan_in));
    g.biases.push_back(Eigen::VectorXd::Zero(arch.hidden_width));
    g.ln_gain.push_back(Eigen::VectorXd::Zero(arch.hidden_width));
    g.ln_bias.push_back(Eigen::VectorXd::Zero(arch.hidden_width));
    fan_in = arch.hidden_width;
  }
  g.weights.push_back(Eigen::MatrixXd::Zero(arch.output_dim, fan_in));
  g.biases.push_back(Eigen::VectorXd::Zero(arch.output_dim));
  return g;
}

// Spacecraft head: raw (n x 3) to thrust vectors (n x 3) plus, when dy is
// given, the pullback of dp through the angle mapping.
Eigen::MatrixXd map_spacecraft(const Eigen::MatrixXd& raw,
                               const Eigen::MatrixXd* dp,
                               Eigen::MatrixXd* dy) {
  Eigen::MatrixXd out(raw.rows(), 3);
  if (dy) dy->setZero(raw.rows(), 3);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double u = (raw(i, 0) + 1.0) / 2.0;
    const double phi = (raw(i, 1) + 1.0) * M_PI / 2.0;
    const double theta = (raw(i, 2) + 1.0) * M_PI;
    const double sin_t = std::sin(theta);
    const double cos_t = std::cos(theta);
    const double sin_p = std::sin(phi);
    const double cos_p = std::cos(phi);
    const Eigen::Vector3d dir(sin_t * cos_p, sin_t * sin_p, cos_t);
    out.row(i) = u * dir.transpose();
    if (dy) {
      const Eigen::Vector3d g = dp->row(i).transpose();
      const Eigen::Vector3d d_phi(-sin_t * sin_p, sin_t * cos_p, 0.0);
      const Eigen::Vector3d d_theta(cos_t * cos_p, cos_t * sin_p, -sin_t);
      (*dy)(i, 0) = 0.5 * g.dot(dir);
      (*dy)(i, 1) = u * (M_PI / 2.0) * g.dot(d_phi);
      (*dy)(i, 2) = u * M_PI * g.dot(d_theta);
    }
  }
  return out;
}

}  // namespace

bool operator==(const Architecture& a, const Architecture& b) {
  return a.input_dim == b.input_dim && a.hidden_width == b.hidden_width &&
         a.hidden_layers == b.hidden_layers && a.output_dim == b.output_dim;
}

std::string arch_label(const Architecture& arch) {
  return std::to_string(arch.hidden_width) + "x" +
         std::to_string(arch.hidden_layers);
}

MlpParams init(const Architecture& arch, std::uint64_t seed) {
  validate_arch(arch);
  Rng rng(seed);
  MlpParams params;
  params.arch = arch;

  int fan_in = arch.input_dim;
  for (int l = 0; l <= arch.hidden_layers; ++l) {
    const int fan_out =
        l == arch.hidden_layers ? arch.output_dim : arch.hidden_width;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = rng.uniform(-limit, limit);
    params.weights.push_back(std::move(w));
    params.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    if (l < arch.hidden_layers) {
      params.ln_gain.push_back(Eigen::VectorXd::Ones(arch.hidden_width));
      params.ln_bias.push_back(Eigen::VectorXd::Zero(arch.hidden_width));
    }
    fan_in = fan_out;
  }
  params.input_mean = Eigen::VectorXd::Zero(arch.input_dim);
  params.input_std = Eigen::VectorXd::Ones(arch.input_dim);
  return params;
}

Eigen::MatrixXd forward(const MlpParams& params,
                        const Eigen::MatrixXd& inputs) {
  return forward_impl(params, inputs, nullptr);
}

Eigen::VectorXd forward_one(const MlpParams& params,
                            const Eigen::VectorXd& input) {
  return forward(params, input.transpose()).row(0);
}

Eigen::VectorXd map_output(const Eigen::VectorXd& raw, Problem problem) {
  if (problem == Problem::Pendulum) return raw;
  return map_spacecraft(raw.transpose(), nullptr, nullptr).row(0);
}

std::pair<double, Gradients> loss_and_grad(const MlpParams& params,
                                           const dataset::Batch& batch,
                                           Problem problem) {
  const Eigen::Index n = batch.inputs.rows();
  if (n == 0) throw EmptySplit("empty batch");
  const int layers = params.arch.hidden_layers;

  ForwardCache cache;
  const Eigen::MatrixXd raw = forward_impl(params, batch.inputs, &cache);

  const double scale = 1.0 / static_cast<double>(n * batch.targets.cols());
  Eigen::MatrixXd dy;  // d loss / d raw, sample per row
  double loss = 0.0;
  if (problem == Problem::Pendulum) {
    const Eigen::MatrixXd err = raw - batch.targets;
    loss = scale * err.squaredNorm();
    dy = 2.0 * scale * err;
  } else {
    Eigen::MatrixXd mapped = map_spacecraft(raw, nullptr, nullptr);
    const Eigen::MatrixXd err = mapped - batch.targets;
    loss = scale * err.squaredNorm();
    const Eigen::MatrixXd dp = 2.0 * scale * err;
    map_spacecraft(raw, &dp, &dy);
  }

  Gradients grads = zero_gradients(params.arch);

  // Head: tanh then linear.
  Eigen::MatrixXd delta =
      (dy.transpose().array() * (1.0 - cache.y.array().square())).matrix();
  grads.weights[layers] = delta * cache.layer_inputs[layers].transpose();
  grads.biases[layers] = delta.rowwise().sum();
  Eigen::MatrixXd dx = params.weights[layers].transpose() * delta;

  for (int l = layers - 1; l >= 0; --l) {
    // Softplus.
    const Eigen::MatrixXd dg =
        (dx.array() *
         cache.pre_act[l].unaryExpr([](double v) { return sigmoid(v); })
             .array())
            .matrix();
    grads.ln_gain[l] = (dg.array() * cache.zhat[l].array()).rowwise().sum();
    grads.ln_bias[l] = dg.rowwise().sum();

    // Layer norm: dz = inv_std * (dzhat - mean(dzhat)
    //                             - zhat * mean(dzhat .* zhat)).
    Eigen::MatrixXd dzhat =
        (dg.array().colwise() * params.ln_gain[l].array()).matrix();
    const RowArray mean1 = dzhat.array().colwise().mean();
    const RowArray mean2 =
        (dzhat.array() * cache.zhat[l].array()).colwise().mean();
    Eigen::MatrixXd dz = ((dzhat.array().rowwise() - mean1) -
                          (cache.zhat[l].array().rowwise() * mean2))
                             .matrix();
    dz.array().rowwise() *= cache.inv_std[l];

    grads.weights[l] = dz * cache.layer_inputs[l].transpose();
    grads.biases[l] = dz.rowwise().sum();
    if (l > 0) dx = params.weights[l].transpose() * dz;
  }
  return {loss, std::move(grads)};
}

AdamState make_adam_state(const Architecture& arch) {
  AdamState state;
  state.m = zero_gradients(arch);
  state.v = zero_gradients(arch);
  return state;
}

namespace {

void adam_update(Eigen::Ref<Eigen::MatrixXd> param,
                 Eigen::Ref<Eigen::MatrixXd> m, Eigen::Ref<Eigen::MatrixXd> v,
                 const Eigen::Ref<const Eigen::MatrixXd>& g, double lr_t,
                 double bias1, double bias2) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  m = kBeta1 * m + (1.0 - kBeta1) * g;
  v = (kBeta2 * v.array() + (1.0 - kBeta2) * g.array().square()).matrix();
  param.array() -=
      lr_t * (m.array() / bias1) / ((v.array() / bias2).sqrt() + kEps);
}

}  // namespace

void adam_step(AdamState& state, MlpParams& params, const Gradients& grads,
               const TrainConfig& cfg) {
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double lr_t = cfg.lr / (1.0 + cfg.decay * t);
  const double bias1 = 1.0 - std::pow(0.9, t);
  const double bias2 = 1.0 - std::pow(0.999, t);

  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    adam_update(params.weights[l], state.m.weights[l], state.v.weights[l],
                grads.weights[l], lr_t, bias1, bias2);
    adam_update(params.biases[l], state.m.biases[l], state.v.biases[l],
                grads.biases[l], lr_t, bias1, bias2);
  }
  for (std::size_t l = 0; l < params.ln_gain.size(); ++l) {
    adam_update(params.ln_gain[l], state.m.ln_gain[l], state.v.ln_gain[l],
                grads.ln_gain[l], lr_t, bias1, bias2);
    adam_update(params.ln_bias[l], state.m.ln_bias[l], state.v.ln_bias[l],
                grads.ln_bias[l], lr_t, bias1, bias2);
  }
}

namespace {

double mse_loss(const MlpParams& params, const Eigen::MatrixXd& inputs,
                const Eigen::MatrixXd& targets, Problem problem) {
  const Eigen::MatrixXd raw = forward(params, inputs);
  const Eigen::MatrixXd mapped = problem == Problem::Pendulum
                                     ? raw
                                     : map_spacecraft(raw, nullptr, nullptr);
  return (mapped - targets).squaredNorm() /
         static_cast<double>(targets.rows() * targets.cols());
}

}  // namespace

TrainResult train(const dataset::Dataset& ds, const Architecture& arch,
                  const TrainConfig& cfg) {
  validate_arch(arch);
  if (arch.input_dim != ds.input_size() || arch.output_dim != ds.control_size())
    throw SchemaMismatch("architecture does not fit the dataset layout");

  const int train_count = dataset::split_count(ds, dataset::Split::Train);
  const int val_count = dataset::split_count(ds, dataset::Split::Validation);
  if (train_count == 0) throw EmptySplit("training split is empty");
  if (val_count == 0) throw EmptySplit("validation split is empty");

  TrainResult result;
  result.params = init(arch, derive_seed(cfg.seed, 0));

  // Standardize the state components with training-split statistics; the
  // alpha column passes through untouched.
  const int n_state = ds.state_size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(arch.input_dim);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(arch.input_dim);
  for (Eigen::Index r = 0; r < ds.rows.rows(); ++r) {
    if (ds.rows(r, ds.split_column()) != 0.0) continue;
    mean.head(n_state) += ds.rows.row(r).head(n_state).transpose();
  }
  mean /= static_cast<double>(train_count);
  for (Eigen::Index r = 0; r < ds.rows.rows(); ++r) {
    if (ds.rows(r, ds.split_column()) != 0.0) continue;
    const Eigen::VectorXd dev =
        ds.rows.row(r).head(n_state).transpose() - mean.head(n_state);
    var.head(n_state) += dev.cwiseProduct(dev);
  }
  var /= static_cast<double>(train_count);
  result.params.input_mean = mean;
  const Eigen::ArrayXd sd = var.array().sqrt();
  result.params.input_std = (sd < 1e-12).select(1.0, sd).matrix();

  const dataset::Batch val = dataset::minibatch(
      ds, val_count, dataset::Split::Validation,
      derive_seed(cfg.seed, 0x76616cULL));  // stream clear of epoch indices

  AdamState adam = make_adam_state(arch);
  const int batch_size = std::min(cfg.batch, train_count);
  result.history.reserve(cfg.epochs);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const dataset::Batch batch = dataset::minibatch(
        ds, batch_size, dataset::Split::Train, derive_seed(cfg.seed, epoch));
    auto [loss, grads] = loss_and_grad(result.params, batch, ds.problem);
    adam_step(adam, result.params, grads, cfg);
    const double val_loss =
        mse_loss(result.params, val.inputs, val.targets, ds.problem);
    result.history.push_back(EpochStats{epoch, loss, val_loss});
  }
  return result;
}

void save_weights(const MlpParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  out.write(kWeightsMagic, sizeof(kWeightsMagic));
  io::write_u32le(out, static_cast<std::uint32_t>(params.arch.input_dim));
  io::write_u32le(out, static_cast<std::uint32_t>(params.arch.hidden_width));
  io::write_u32le(out, static_cast<std::uint32_t>(params.arch.hidden_layers));
  io::write_u32le(out, static_cast<std::uint32_t>(params.arch.output_dim));
  for (Eigen::Index i = 0; i < params.input_mean.size(); ++i)
    io::write_f64le(out, params.input_mean[i]);
  for (Eigen::Index i = 0; i < params.input_std.size(); ++i)
    io::write_f64le(out, params.input_std[i]);
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < params.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < params.weights[l].cols(); ++c)
        io::write_f64le(out, params.weights[l](r, c));
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i)
      io::write_f64le(out, params.biases[l][i]);
    if (l < params.ln_gain.size()) {
      for (Eigen::Index i = 0; i < params.ln_gain[l].size(); ++i)
        io::write_f64le(out, params.ln_gain[l][i]);
      for (Eigen::Index i = 0; i < params.ln_bias[l].size(); ++i)
        io::write_f64le(out, params.ln_bias[l][i]);
    }
  }
  if (!out) throw IOFailure("write failed: " + path);
}

MlpParams load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOFailure("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kWeightsMagic, sizeof(magic)) != 0)
    throw SchemaMismatch("not a homopt weights file: " + path);

  Architecture arch;
  arch.input_dim = static_cast<int>(io::read_u32le(in));
  arch.hidden_width = static_cast<int>(io::read_u32le(in));
  arch.hidden_layers = static_cast<int>(io::read_u32le(in));
  arch.output_dim = static_cast<int>(io::read_u32le(in));
  validate_arch(arch);

  MlpParams params = init(arch, 0);
  for (Eigen::Index i = 0; i < params.input_mean.size(); ++i)
    params.input_mean[i] = io::read_f64le(in);
  for (Eigen::Index i = 0; i < params.input_std.size(); ++i)
    params.input_std[i] = io::read_f64le(in);
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < params.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < params.weights[l].cols(); ++c)
        params.weights[l](r, c) = io::read_f64le(in);
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i)
      params.biases[l][i] = io::read_f64le(in);
    if (l < params.ln_gain.size()) {
      for (Eigen::Index i = 0; i < params.ln_gain[l].size(); ++i)
        params.ln_gain[l][i] = io::read_f64le(in);
      for (Eigen::Index i = 0; i < params.ln_bias[l].size(); ++i)
        params.ln_bias[l][i] = io::read_f64le(in);
    }
  }
  return params;
}

MlpParams load_weights(const std::string& path, const Architecture& expected) {
  MlpParams params = load_weights(path);
  if (!(params.arch == expected))
    throw SchemaMismatch("weights architecture " + arch_label(params.arch) +
                         " does not match expected " + arch_label(expected));
  return params;
}

void save_history(const std::vector<EpochStats>& history,
                  const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IOFailure("cannot open for writing: " + path);
  out << "epoch,train_mse,val_mse\n";
  for (const auto& row : history)
    out << row.epoch << ',' << io::format_double(row.train_mse) << ','
        << io::format_double(row.val_mse) << '\n';
  if (!out) throw IOFailure("write failed: " + path);
}

}  // namespace homopt::mlp
