#pragma once

#include "podnn/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace podnn::nn {

/// Per-feature affine standardization x -> (x - shift) / scale.
struct FeatureScaling {
    Vector shift;
    Vector scale;  // strictly positive

    static FeatureScaling identity(int n);
};

/// Dense feedforward network with leaky-ReLU hidden activations and a linear
/// output layer. Inputs are standardized before the first layer and outputs
/// de-standardized after the last one.
struct MlpModel {
    std::vector<int> layer_dims;        // [M_I, H, ..., M_O]
    std::vector<Matrix> weights;        // weights[i]: layer_dims[i+1] x layer_dims[i]
    std::vector<Vector> biases;
    double leaky_slope = 0.01;
    FeatureScaling input_norm;
    FeatureScaling output_norm;

    int n_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    double l2_weight = 1e-5;
    int max_epochs = 5000;
    int patience = 50;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct TrainReport {
    int epochs_run = 0;
    std::vector<double> train_loss_history;
    std::vector<double> val_loss_history;
    int best_epoch = -1;  // 0-based index into the histories
};

/// Samples stored as columns.
struct Dataset {
    Matrix inputs;   // M_I x N
    Matrix targets;  // M_O x N
};

/// All weights and biases i.i.d. standard normal from a seeded generator.
MlpModel init_gaussian(const std::vector<int>& layer_dims, double leaky_slope, std::uint64_t seed);

Vector forward(const MlpModel& model, const Vector& x);
Matrix forward_batch(const MlpModel& model, const Matrix& inputs);

/// Mean over the batch of the per-sample output-mean squared error, plus
/// l2_weight times the squared Frobenius norms of the weight matrices.
double loss(const MlpModel& model, const Matrix& inputs, const Matrix& targets, double l2_weight);

struct Gradient {
    std::vector<Matrix> d_weights;
    std::vector<Vector> d_biases;
};

/// Reverse-mode gradient of loss(); the leaky-ReLU subgradient at zero is the
/// slope. Optionally reports the loss of the same forward pass.
Gradient gradient(const MlpModel& model, const Matrix& inputs, const Matrix& targets, double l2_weight,
                  double* loss_out = nullptr);

struct AdamState {
    std::vector<Matrix> m_weights, v_weights;
    std::vector<Vector> m_biases, v_biases;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam_state(const MlpModel& model);
void adam_step(AdamState& state, MlpModel& model, const Gradient& grad, double learning_rate);

/// Mini-batch Adam with a seeded shuffle per epoch and early stopping on a
/// held-out validation split; returns the best-validation-epoch parameters.
std::pair<MlpModel, TrainReport> train(MlpModel model, const Dataset& dataset, const TrainConfig& config);

}  // namespace podnn::nn
