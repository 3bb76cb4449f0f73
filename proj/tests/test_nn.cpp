#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "podnn/nn.hpp"
#include "podnn/rng.hpp"

#include <algorithm>
#include <cmath>

using namespace podnn;
using namespace podnn::nn;

namespace {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
    rng::Engine eng(seed);
    rng::NormalSampler normal(eng);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) m(r, c) = normal();
    }
    return m;
}

// flattened parameter access used by the finite-difference checks
std::vector<double*> parameter_slots(MlpModel& model) {
    std::vector<double*> slots;
    for (auto& w : model.weights) {
        for (Index i = 0; i < w.size(); ++i) slots.push_back(w.data() + i);
    }
    for (auto& b : model.biases) {
        for (Index i = 0; i < b.size(); ++i) slots.push_back(b.data() + i);
    }
    return slots;
}

std::vector<double> flatten(const Gradient& grad) {
    std::vector<double> flat;
    for (const auto& w : grad.d_weights) {
        for (Index i = 0; i < w.size(); ++i) flat.push_back(*(w.data() + i));
    }
    for (const auto& b : grad.d_biases) {
        for (Index i = 0; i < b.size(); ++i) flat.push_back(*(b.data() + i));
    }
    return flat;
}

}  // namespace

TEST_CASE("gaussian initialization: shapes, determinism, statistics") {
    const MlpModel a = init_gaussian({2, 3, 1}, 0.01, 42);
    CHECK(a.weights.size() == 2);
    CHECK(a.weights[0].rows() == 3);
    CHECK(a.weights[0].cols() == 2);
    CHECK(a.weights[1].rows() == 1);
    CHECK(a.weights[1].cols() == 3);
    CHECK(a.biases[0].size() == 3);
    CHECK(a.biases[1].size() == 1);

    const MlpModel b = init_gaussian({2, 3, 1}, 0.01, 42);
    for (int i = 0; i < 2; ++i) {
        CHECK(a.weights[i] == b.weights[i]);
        CHECK(a.biases[i] == b.biases[i]);
    }

    const MlpModel big = init_gaussian({100, 500, 500}, 0.01, 7);
    double sum = 0.0, sum_sq = 0.0;
    long count = 0;
    for (const auto& w : big.weights) {
        sum += w.sum();
        sum_sq += w.squaredNorm();
        count += w.size();
    }
    const double mean = sum / count;
    const double stddev = std::sqrt(sum_sq / count - mean * mean);
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(stddev - 1.0) < 0.02);

    CHECK_THROWS_AS(init_gaussian({3}, 0.01, 0), std::invalid_argument);
    CHECK_THROWS_AS(init_gaussian({3, 0, 1}, 0.01, 0), std::invalid_argument);
}

TEST_CASE("forward propagation composes affine maps and leaky ReLU") {
    // leaky ReLU itself
    MlpModel id = init_gaussian({1, 1}, 0.01, 0);
    id.weights[0](0, 0) = 1.0;
    id.biases[0][0] = 0.0;
    CHECK(forward(id, Vector::Constant(1, 2.0))[0] == 2.0);  // linear output layer

    // zero weights: output equals the de-standardized final bias
    MlpModel zero = init_gaussian({3, 4, 2}, 0.01, 1);
    for (auto& w : zero.weights) w.setZero();
    zero.biases[1] << 0.25, -1.5;
    zero.output_norm.shift << 1.0, 2.0;
    zero.output_norm.scale << 2.0, 4.0;
    const Vector out = forward(zero, Vector::Zero(3));
    CHECK(out[0] == doctest::Approx(0.25 * 2.0 + 1.0));
    CHECK(out[1] == doctest::Approx(-1.5 * 4.0 + 2.0));

    // hand-composed 1-1-1 net: w1=1, b1=-1, w2=1, b2=0, x=0.5
    MlpModel tiny = init_gaussian({1, 1, 1}, 0.01, 2);
    tiny.weights[0](0, 0) = 1.0;
    tiny.biases[0][0] = -1.0;
    tiny.weights[1](0, 0) = 1.0;
    tiny.biases[1][0] = 0.0;
    const double y = forward(tiny, Vector::Constant(1, 0.5))[0];
    CHECK(y == doctest::Approx(-0.005).epsilon(1e-12));  // leaky(−0.5) = −0.5 · 0.01

    // leaky values through a pass-through net
    MlpModel gate = tiny;
    gate.biases[0][0] = 0.0;
    CHECK(forward(gate, Vector::Constant(1, 2.0))[0] == doctest::Approx(2.0));
    CHECK(forward(gate, Vector::Constant(1, -2.0))[0] == doctest::Approx(-0.02));

    CHECK_THROWS_AS(forward(tiny, Vector::Zero(2)), std::invalid_argument);
    Vector bad = Vector::Constant(1, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(forward(tiny, bad), std::invalid_argument);
}

TEST_CASE("loss values") {
    MlpModel model = init_gaussian({2, 3, 1}, 0.01, 3);
    const Matrix x = random_matrix(2, 6, 4);
    const Matrix perfect = forward_batch(model, x);
    CHECK(loss(model, x, perfect, 0.0) == doctest::Approx(0.0));

    // single sample, scalar output, error 2
    const Matrix x1 = x.col(0);
    Matrix target = forward_batch(model, x1);
    target.array() += 2.0;
    CHECK(loss(model, x1, target, 0.0) == doctest::Approx(4.0).epsilon(1e-12));

    double frob = 0.0;
    for (const auto& w : model.weights) frob += w.squaredNorm();
    CHECK(loss(model, x, perfect, 1.0) == doctest::Approx(frob).epsilon(1e-12));

    CHECK_THROWS_AS(loss(model, Matrix(2, 0), Matrix(1, 0), 0.0), std::invalid_argument);
}

// smallest |pre-activation| over all hidden units and batch columns
static double min_abs_preact(const MlpModel& model, const Matrix& x) {
    Matrix a = x;
    double smallest = std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < model.n_layers(); ++i) {
        const Matrix z = (model.weights[i] * a).colwise() + model.biases[i];
        smallest = std::min(smallest, z.cwiseAbs().minCoeff());
        a = z.array().max(model.leaky_slope * z.array()).matrix();
    }
    return smallest;
}

TEST_CASE("backprop matches central finite differences") {
    const std::vector<int> dims = {3, 4, 4, 4, 2};
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        MlpModel model = init_gaussian(dims, 0.01, 500 + trial);
        // moderate weight scale keeps the loss O(1), which the 1e-6 central
        // difference needs to stay above double-precision cancellation
        for (auto& w : model.weights) w *= 0.3;
        for (auto& b : model.biases) b *= 0.3;
        // keep pre-activations away from the kink so the central difference
        // stays inside one affine piece
        Matrix x = random_matrix(3, 5, 900 + trial);
        for (std::uint64_t retry = 1; min_abs_preact(model, x) <= 1e-3 && retry < 100; ++retry) {
            x = random_matrix(3, 5, 900 + trial + 20 * retry);
        }
        const Matrix y = random_matrix(2, 5, 1300 + trial);
        const double l2 = (trial % 2 == 0) ? 0.0 : 1e-3;

        const Gradient grad = gradient(model, x, y, l2);
        const std::vector<double> analytic = flatten(grad);
        const std::vector<double*> slots = parameter_slots(model);
        REQUIRE(analytic.size() == slots.size());

        const double h = 1e-6;
        for (std::size_t i = 0; i < slots.size(); i += 7) {  // sample every 7th parameter
            const double saved = *slots[i];
            *slots[i] = saved + h;
            const double up = loss(model, x, y, l2);
            *slots[i] = saved - h;
            const double down = loss(model, x, y, l2);
            *slots[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double rel = std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("gradient is zero at a perfect fit and linear in the regularizer") {
    MlpModel model = init_gaussian({2, 5, 2}, 0.01, 31);
    const Matrix x = random_matrix(2, 8, 32);
    const Matrix y = forward_batch(model, x);
    const Gradient grad = gradient(model, x, y, 0.0);
    for (const auto& w : grad.d_weights) CHECK(w.cwiseAbs().maxCoeff() < 1e-12);
    for (const auto& b : grad.d_biases) CHECK(b.cwiseAbs().maxCoeff() < 1e-12);

    const double l2 = 0.37;
    const Gradient reg = gradient(model, x, y, l2);
    for (int i = 0; i < model.n_layers(); ++i) {
        CHECK((reg.d_weights[i] - 2.0 * l2 * model.weights[i]).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(reg.d_biases[i].cwiseAbs().maxCoeff() < 1e-12);  // biases are not regularized
    }
}

TEST_CASE("adam first step and invariances") {
    MlpModel model = init_gaussian({1, 1}, 0.01, 40);
    model.weights[0](0, 0) = 1.0;
    model.biases[0][0] = 0.0;
    AdamState state = make_adam_state(model);

    Gradient g;
    g.d_weights.push_back(Matrix::Constant(1, 1, 1.0));
    g.d_biases.push_back(Vector::Zero(1));
    adam_step(state, model, g, 0.1);
    CHECK(model.weights[0](0, 0) == doctest::Approx(1.0 - 0.0999999990).epsilon(1e-9));
    CHECK(model.biases[0][0] == 0.0);  // zero gradient leaves parameters alone

    // first-step magnitude is the learning rate regardless of gradient scale
    MlpModel huge = init_gaussian({1, 1}, 0.01, 41);
    huge.weights[0](0, 0) = 5.0;
    AdamState s2 = make_adam_state(huge);
    Gradient g2;
    g2.d_weights.push_back(Matrix::Constant(1, 1, 1e6));
    g2.d_biases.push_back(Vector::Zero(1));
    adam_step(s2, huge, g2, 0.1);
    CHECK(huge.weights[0](0, 0) == doctest::Approx(5.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("forward is affine within a fixed activation pattern") {
    const MlpModel model = init_gaussian({3, 6, 6, 2}, 0.01, 55);
    rng::Engine eng(56);
    rng::NormalSampler normal(eng);
    for (int trial = 0; trial < 10; ++trial) {
        Vector x(3), d(3);
        for (int i = 0; i < 3; ++i) {
            x[i] = normal();
            d[i] = normal();
        }
        const double t = 1e-5;  // small enough to keep the pattern fixed
        const Vector f0 = forward(model, x);
        const Vector f1 = forward(model, x + t * d);
        const Vector f2 = forward(model, x + 2.0 * t * d);
        const double scale = std::max(1.0, f0.cwiseAbs().maxCoeff());
        CHECK(((f0 - 2.0 * f1 + f2).cwiseAbs().maxCoeff()) < 1e-10 * scale);
    }
}

TEST_CASE("training fits a linear map and stops deterministically") {
    const int n = 200;
    const Matrix x = random_matrix(2, n, 60);
    Matrix a(1, 2);
    a << 1.5, -0.75;
    const Matrix y = a * x + Matrix::Constant(1, n, 0.3);

    TrainConfig config;
    config.learning_rate = 3e-3;
    config.batch_size = 32;
    config.l2_weight = 0.0;
    config.max_epochs = 20000;
    config.patience = 20000;  // long pre-fit plateaus; patience tested separately
    config.validation_fraction = 0.2;
    config.seed = 61;

    const MlpModel model = init_gaussian({2, 16, 16, 16, 1}, 0.01, 62);
    const auto [fitted, report] = train(model, {x, y}, config);
    REQUIRE(report.epochs_run >= 1);
    CHECK(report.val_loss_history.size() == static_cast<std::size_t>(report.epochs_run));
    CHECK(report.train_loss_history.size() == static_cast<std::size_t>(report.epochs_run));
    CHECK(*std::min_element(report.val_loss_history.begin(), report.val_loss_history.end()) < 1e-3);
    CHECK(report.best_epoch >= 0);
    CHECK(report.val_loss_history[report.best_epoch] ==
          *std::min_element(report.val_loss_history.begin(), report.val_loss_history.end()));

    // identical run: bit-identical histories
    const auto [fitted2, report2] = train(model, {x, y}, config);
    REQUIRE(report2.epochs_run == report.epochs_run);
    for (int e = 0; e < report.epochs_run; ++e) {
        CHECK(report.val_loss_history[e] == report2.val_loss_history[e]);
        CHECK(report.train_loss_history[e] == report2.train_loss_history[e]);
    }
    for (int i = 0; i < fitted.n_layers(); ++i) {
        CHECK(fitted.weights[i] == fitted2.weights[i]);
    }

    // returned parameters reproduce the minimal recorded validation loss
    rng::Engine eng(config.seed);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng::shuffle(order, eng);
    const int n_val = static_cast<int>(std::lround(config.validation_fraction * n));
    Matrix vx(2, n_val), vy(1, n_val);
    for (int i = 0; i < n_val; ++i) {
        vx.col(i) = x.col(order[i]);
        vy.col(i) = y.col(order[i]);
    }
    CHECK(loss(fitted, vx, vy, 0.0) ==
          *std::min_element(report.val_loss_history.begin(), report.val_loss_history.end()));

    // outputs on training inputs stay within a sane multiple of the target range
    const Matrix pred = forward_batch(fitted, x);
    CHECK(pred.allFinite());
    CHECK(pred.cwiseAbs().maxCoeff() < 10.0 * std::max(1.0, y.cwiseAbs().maxCoeff()));
}

TEST_CASE("patience zero stops at the first non-improving epoch") {
    const Matrix x = random_matrix(2, 40, 70);
    const Matrix y = random_matrix(1, 40, 71);  // noise: validation loss soon stalls
    TrainConfig config;
    config.learning_rate = 0.05;
    config.batch_size = 8;
    config.max_epochs = 500;
    config.patience = 0;
    config.validation_fraction = 0.25;
    config.seed = 72;
    const auto [model, report] = train(init_gaussian({2, 8, 1}, 0.01, 73), {x, y}, config);
    REQUIRE(report.epochs_run < 500);
    // every epoch before the last one improved on its predecessors
    double best = std::numeric_limits<double>::infinity();
    for (int e = 0; e + 1 < report.epochs_run; ++e) {
        CHECK(report.val_loss_history[e] < best);
        best = std::min(best, report.val_loss_history[e]);
    }
    CHECK(report.val_loss_history.back() >= best);
}

TEST_CASE("train rejects undersized datasets") {
    TrainConfig config;
    config.seed = 1;
    const MlpModel model = init_gaussian({2, 4, 1}, 0.01, 2);
    CHECK_THROWS_AS(train(model, {Matrix(2, 1), Matrix(1, 1)}, config), std::invalid_argument);
}
