#include "podnn/nn.hpp"

#include "podnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace podnn::nn {

namespace {

void validate_dims(const std::vector<int>& dims) {
    if (dims.size() < 2) throw std::invalid_argument("MlpModel: need input and output layers");
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("MlpModel: layer widths must be positive");
    }
}

void check_model(const MlpModel& model) {
    validate_dims(model.layer_dims);
    if (!(model.leaky_slope > 0.0 && model.leaky_slope < 1.0)) {
        throw std::invalid_argument("MlpModel: leaky slope must lie in (0, 1)");
    }
    if ((model.input_norm.scale.array() <= 0.0).any() || (model.output_norm.scale.array() <= 0.0).any()) {
        throw std::invalid_argument("MlpModel: normalization scales must be positive");
    }
}

Matrix leaky(const Matrix& z, double slope) {
    return z.array().max(slope * z.array()).matrix();
}

Matrix leaky_derivative(const Matrix& z, double slope) {
    // subgradient at zero fixed to the slope
    return (z.array() > 0.0).select(Matrix::Ones(z.rows(), z.cols()), Matrix::Constant(z.rows(), z.cols(), slope));
}

struct ForwardPass {
    std::vector<Matrix> pre_acts;   // z_i per layer
    std::vector<Matrix> acts;       // inputs of each layer, acts[0] = standardized input
    Matrix outputs;                 // de-standardized outputs
};

ForwardPass run_forward(const MlpModel& model, const Matrix& inputs) {
    if (inputs.rows() != model.input_dim()) {
        throw std::invalid_argument("forward: input dimension does not match the model");
    }
    if (!inputs.allFinite()) throw std::invalid_argument("forward: non-finite input");

    ForwardPass pass;
    const int n_layers = model.n_layers();
    pass.acts.reserve(n_layers);
    pass.pre_acts.reserve(n_layers);

    Matrix a = ((inputs.colwise() - model.input_norm.shift).array().colwise() / model.input_norm.scale.array())
                   .matrix();
    for (int i = 0; i < n_layers; ++i) {
        pass.acts.push_back(a);
        Matrix z = (model.weights[i] * a).colwise() + model.biases[i];
        if (i + 1 < n_layers) {
            a = leaky(z, model.leaky_slope);
        } else {
            a = z;
        }
        pass.pre_acts.push_back(std::move(z));
    }
    pass.outputs =
        ((a.array().colwise() * model.output_norm.scale.array()).colwise() + model.output_norm.shift.array())
            .matrix();
    return pass;
}

double weight_norm_sq(const MlpModel& model) {
    double total = 0.0;
    for (const Matrix& w : model.weights) total += w.squaredNorm();
    return total;
}

}  // namespace

FeatureScaling FeatureScaling::identity(int n) {
    return FeatureScaling{Vector::Zero(n), Vector::Ones(n)};
}

MlpModel init_gaussian(const std::vector<int>& layer_dims, double leaky_slope, std::uint64_t seed) {
    validate_dims(layer_dims);
    MlpModel model;
    model.layer_dims = layer_dims;
    model.leaky_slope = leaky_slope;
    model.input_norm = FeatureScaling::identity(layer_dims.front());
    model.output_norm = FeatureScaling::identity(layer_dims.back());

    rng::Engine eng(seed);
    rng::NormalSampler normal(eng);
    for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
        Matrix w(layer_dims[i + 1], layer_dims[i]);
        for (Index r = 0; r < w.rows(); ++r) {
            for (Index c = 0; c < w.cols(); ++c) w(r, c) = normal();
        }
        Vector b(layer_dims[i + 1]);
        for (Index r = 0; r < b.size(); ++r) b[r] = normal();
        model.weights.push_back(std::move(w));
        model.biases.push_back(std::move(b));
    }
    check_model(model);
    return model;
}

Vector forward(const MlpModel& model, const Vector& x) {
    return forward_batch(model, x).col(0);
}

Matrix forward_batch(const MlpModel& model, const Matrix& inputs) {
    check_model(model);
    return run_forward(model, inputs).outputs;
}

double loss(const MlpModel& model, const Matrix& inputs, const Matrix& targets, double l2_weight) {
    check_model(model);
    if (inputs.cols() == 0) throw std::invalid_argument("loss: empty batch");
    if (targets.rows() != model.output_dim() || targets.cols() != inputs.cols()) {
        throw std::invalid_argument("loss: target dimensions do not match");
    }
    const Matrix diff = run_forward(model, inputs).outputs - targets;
    const double mse = diff.squaredNorm() / static_cast<double>(diff.size());
    return mse + l2_weight * weight_norm_sq(model);
}

Gradient gradient(const MlpModel& model, const Matrix& inputs, const Matrix& targets, double l2_weight,
                  double* loss_out) {
    check_model(model);
    if (inputs.cols() == 0) throw std::invalid_argument("gradient: empty batch");
    if (targets.rows() != model.output_dim() || targets.cols() != inputs.cols()) {
        throw std::invalid_argument("gradient: target dimensions do not match");
    }

    const ForwardPass pass = run_forward(model, inputs);
    const int n_layers = model.n_layers();
    const Matrix diff = pass.outputs - targets;
    if (loss_out != nullptr) {
        *loss_out = diff.squaredNorm() / static_cast<double>(diff.size()) + l2_weight * weight_norm_sq(model);
    }

    Gradient grad;
    grad.d_weights.resize(n_layers);
    grad.d_biases.resize(n_layers);

    // d loss / d raw_output, then through the fixed output scaling
    Matrix dz = (diff * (2.0 / static_cast<double>(diff.size()))).array().colwise() *
                model.output_norm.scale.array();
    for (int i = n_layers - 1; i >= 0; --i) {
        grad.d_weights[i] = dz * pass.acts[i].transpose() + 2.0 * l2_weight * model.weights[i];
        grad.d_biases[i] = dz.rowwise().sum();
        if (i > 0) {
            dz = (model.weights[i].transpose() * dz).cwiseProduct(
                leaky_derivative(pass.pre_acts[i - 1], model.leaky_slope));
        }
    }
    return grad;
}

AdamState make_adam_state(const MlpModel& model) {
    AdamState state;
    for (int i = 0; i < model.n_layers(); ++i) {
        state.m_weights.push_back(Matrix::Zero(model.weights[i].rows(), model.weights[i].cols()));
        state.v_weights.push_back(Matrix::Zero(model.weights[i].rows(), model.weights[i].cols()));
        state.m_biases.push_back(Vector::Zero(model.biases[i].size()));
        state.v_biases.push_back(Vector::Zero(model.biases[i].size()));
    }
    return state;
}

void adam_step(AdamState& state, MlpModel& model, const Gradient& grad, double learning_rate) {
    if (state.m_weights.size() != model.weights.size()) {
        throw std::invalid_argument("adam_step: state does not match the model");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        state.m_weights[i] = state.beta1 * state.m_weights[i] + (1.0 - state.beta1) * grad.d_weights[i];
        state.v_weights[i] =
            state.beta2 * state.v_weights[i] + (1.0 - state.beta2) * grad.d_weights[i].array().square().matrix();
        const Matrix m_hat = state.m_weights[i] / bc1;
        const Matrix v_hat = state.v_weights[i] / bc2;
        model.weights[i] -=
            (learning_rate * m_hat.array() / (v_hat.array().sqrt() + state.epsilon)).matrix();

        state.m_biases[i] = state.beta1 * state.m_biases[i] + (1.0 - state.beta1) * grad.d_biases[i];
        state.v_biases[i] =
            state.beta2 * state.v_biases[i] + (1.0 - state.beta2) * grad.d_biases[i].array().square().matrix();
        const Vector mb_hat = state.m_biases[i] / bc1;
        const Vector vb_hat = state.v_biases[i] / bc2;
        model.biases[i] -=
            (learning_rate * mb_hat.array() / (vb_hat.array().sqrt() + state.epsilon)).matrix();
    }
}

std::pair<MlpModel, TrainReport> train(MlpModel model, const Dataset& dataset, const TrainConfig& config) {
    check_model(model);
    const Index n = dataset.inputs.cols();
    if (dataset.targets.cols() != n) throw std::invalid_argument("train: inputs and targets disagree on size");
    if (dataset.inputs.rows() != model.input_dim() || dataset.targets.rows() != model.output_dim()) {
        throw std::invalid_argument("train: dataset dimensions do not match the model");
    }
    if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
        throw std::invalid_argument("train: validation_fraction must lie in (0, 1)");
    }
    if (config.batch_size < 1 || config.max_epochs < 1 || config.patience < 0) {
        throw std::invalid_argument("train: invalid training configuration");
    }
    if (n < 2) throw std::invalid_argument("train: dataset too small to split");

    rng::Engine eng(config.seed);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng::shuffle(order, eng);

    Index n_val = static_cast<Index>(std::lround(config.validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<Index>(n_val, 1, n - 1);
    const Index n_train = n - n_val;

    Matrix val_x(dataset.inputs.rows(), n_val), val_y(dataset.targets.rows(), n_val);
    Matrix train_x(dataset.inputs.rows(), n_train), train_y(dataset.targets.rows(), n_train);
    for (Index i = 0; i < n_val; ++i) {
        val_x.col(i) = dataset.inputs.col(order[i]);
        val_y.col(i) = dataset.targets.col(order[i]);
    }
    for (Index i = 0; i < n_train; ++i) {
        train_x.col(i) = dataset.inputs.col(order[n_val + i]);
        train_y.col(i) = dataset.targets.col(order[n_val + i]);
    }

    // standardization statistics from the training split only
    const auto standardize = [](const Matrix& data) {
        FeatureScaling s;
        s.shift = data.rowwise().mean();
        const Vector var = (data.colwise() - s.shift).array().square().rowwise().mean();
        s.scale = var.array().sqrt().matrix();
        for (Index i = 0; i < s.scale.size(); ++i) {
            if (s.scale[i] <= 1e-12) s.scale[i] = 1.0;  // constant feature
        }
        return s;
    };
    model.input_norm = standardize(train_x);
    model.output_norm = standardize(train_y);

    AdamState adam = make_adam_state(model);
    TrainReport report;
    MlpModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_without_improvement = 0;

    std::vector<int> batch_order(static_cast<std::size_t>(n_train));
    std::iota(batch_order.begin(), batch_order.end(), 0);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        rng::shuffle(batch_order, eng);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (Index start = 0; start < n_train; start += config.batch_size) {
            const Index size = std::min<Index>(config.batch_size, n_train - start);
            Matrix bx(train_x.rows(), size), by(train_y.rows(), size);
            for (Index j = 0; j < size; ++j) {
                bx.col(j) = train_x.col(batch_order[start + j]);
                by.col(j) = train_y.col(batch_order[start + j]);
            }
            double batch_loss = 0.0;
            const Gradient grad = gradient(model, bx, by, config.l2_weight, &batch_loss);
            adam_step(adam, model, grad, config.learning_rate);
            epoch_loss += batch_loss;
            ++n_batches;
        }
        report.train_loss_history.push_back(epoch_loss / n_batches);

        const double val_loss = loss(model, val_x, val_y, 0.0);
        report.val_loss_history.push_back(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            best.weights = model.weights;
            best.biases = model.biases;
            report.best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
        }
        if (epochs_without_improvement > config.patience) break;
    }

    report.epochs_run = static_cast<int>(report.val_loss_history.size());
    best.input_norm = model.input_norm;
    best.output_norm = model.output_norm;
    return {std::move(best), std::move(report)};
}

}  // namespace podnn::nn
