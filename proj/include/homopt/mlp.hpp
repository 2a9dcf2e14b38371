#pragma once

// Objective-conditioned imitation policy: a plain MLP taking [state, alpha]
// and emitting raw outputs in (-1, 1)^k through a tanh head. Hidden layers
// are linear -> layer norm (learnable affine) -> softplus. Gradients are
// hand-written reverse mode; the optimizer is Adam with inverse-time
// learning-rate decay. Everything runs in double on the CPU so training is
// bit-reproducible for a fixed seed.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "homopt/dataset.hpp"
#include "homopt/problem.hpp"

namespace homopt::mlp {

struct Architecture {
  int input_dim = 0;
  int hidden_width = 0;
  int hidden_layers = 0;
  int output_dim = 0;
};

bool operator==(const Architecture& a, const Architecture& b);

// "100x4" style label used in gap-table column headers.
std::string arch_label(const Architecture& arch);

struct MlpParams {
  Architecture arch;
  std::vector<Eigen::MatrixXd> weights;  // hidden layers then the head
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::VectorXd> ln_gain;  // one per hidden layer
  std::vector<Eigen::VectorXd> ln_bias;
  // Input standardization baked into the policy so saved weights stay
  // self-contained; identity until train() fills the training-split stats.
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_std;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::VectorXd> ln_gain;
  std::vector<Eigen::VectorXd> ln_bias;
};

// Xavier-uniform weights, zero biases, unit layer-norm gain.
MlpParams init(const Architecture& arch, std::uint64_t seed);

// Batched forward pass; one sample per input row, raw tanh outputs.
Eigen::MatrixXd forward(const MlpParams& params,
                        const Eigen::MatrixXd& inputs);
Eigen::VectorXd forward_one(const MlpParams& params,
                            const Eigen::VectorXd& input);

// Raw tanh outputs to a physical control. Pendulum: identity scalar.
// Spacecraft: throttle u = (raw1+1)/2, azimuth phi = (raw2+1) pi/2,
// polar theta = (raw3+1) pi, returned as the thrust vector u * uhat.
Eigen::VectorXd map_output(const Eigen::VectorXd& raw, Problem problem);

// Mean squared error between mapped controls and targets, averaged over
// every target component, with the full parameter gradient.
std::pair<double, Gradients> loss_and_grad(const MlpParams& params,
                                           const dataset::Batch& batch,
                                           Problem problem);

struct TrainConfig {
  int epochs = 10000;
  int batch = 20000;
  double lr = 1e-3;
  double decay = 1e-5;        // lr_t = lr / (1 + decay t)
  double val_fraction = 0.1;  // applied when the dataset is built
  std::uint64_t seed = 0;
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::int64_t t = 0;
};

AdamState make_adam_state(const Architecture& arch);
void adam_step(AdamState& state, MlpParams& params, const Gradients& grads,
               const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  MlpParams params;
  std::vector<EpochStats> history;
};

// One minibatch Adam step per epoch; train loss is the batch loss at the
// pre-step parameters, validation loss covers the whole validation split.
TrainResult train(const dataset::Dataset& ds, const Architecture& arch,
                  const TrainConfig& cfg);

void save_weights(const MlpParams& params, const std::string& path);
MlpParams load_weights(const std::string& path);
MlpParams load_weights(const std::string& path, const Architecture& expected);

void save_history(const std::vector<EpochStats>& history,
                  const std::string& path);

}  // namespace homopt::mlp
