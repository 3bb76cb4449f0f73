// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. The heavy desk-scale block (criteria 5-7, 9) runs once and its
// artifacts are shared; set PODNN_ACCEPT_JOBS to control its worker count.

#include "podnn/artifacts_io.hpp"
#include "podnn/pipeline.hpp"
#include "podnn/rng.hpp"
#include "support/fem_oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

using namespace podnn;
using nlohmann::json;

namespace {

struct CriterionResult {
    int id = 0;
    bool pass = false;
    std::string detail;
};

std::vector<CriterionResult> g_results;

void record(int id, bool pass, const std::string& detail) {
    g_results.push_back({id, pass, detail});
    std::fprintf(stderr, "  [criterion %d] %s\n", id, pass ? "ok" : "FAILED");
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v;
    return out.str();
}

int env_jobs() {
    if (const char* env = std::getenv("PODNN_ACCEPT_JOBS")) return std::max(1, std::atoi(env));
    return 4;
}

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
    rng::Engine eng(seed);
    rng::NormalSampler normal(eng);
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c) {
        for (Index r = 0; r < rows; ++r) m(r, c) = normal();
    }
    return m;
}

config::RunConfig mini_config() {
    config::RunConfig c = config::parse_config(json::object());
    c.n_elements = 32;
    c.n_t = 10;
    c.n_p = 12;
    c.n_test = 3;
    c.sample_seed = 91;
    c.pod_n_rb = 6;
    c.hidden_width = 12;
    c.train.batch_size = 8;
    c.train.learning_rate = 3e-3;
    c.train.max_epochs = 300;
    c.train.patience = 300;
    c.train.validation_fraction = 0.2;
    c.train.seed = 17;
    return c;
}

// pinned desk-scale reproduction configuration (criteria 5-7, 9)
config::RunConfig desk_config() {
    config::RunConfig c = config::parse_config(json::object());
    c.n_elements = 64;
    c.n_t = 30;
    c.n_p = 300;
    c.n_test = 20;
    c.sample_seed = 71;
    c.pod_n_rb = 20;
    c.hidden_width = 100;
    c.train.learning_rate = 3e-3;
    c.train.batch_size = 32;
    c.train.l2_weight = 1e-5;
    c.train.max_epochs = 8000;
    c.train.patience = 8000;
    c.train.validation_fraction = 0.1;
    c.train.seed = 202;
    return c;
}

// ---- criterion 1: projection-error identity ---------------------------------

bool pod_identity_holds(const pod::SnapshotSet& snapshots, std::vector<int> truncations, double* worst) {
    const int rank = static_cast<int>(std::min(snapshots.matrix.rows(), snapshots.matrix.cols()));
    truncations.push_back(rank);
    const pod::PodBasis full = pod::compute_pod(snapshots, pod::Truncation::by_rank(rank));
    const double total = full.eigenvalues.sum();
    bool ok = true;
    for (int k : truncations) {
        if (k > rank) continue;
        const pod::PodBasis basis = pod::truncate(full, k);
        const double gap = std::abs(pod::projection_error(snapshots, basis) - pod::tail_energy(basis));
        *worst = std::max(*worst, gap / total);
        ok = ok && gap <= 1e-8 * total;
    }
    return ok;
}

void criterion_pod_identity(const pod::SnapshotSet& desk, const pod::SnapshotSet& mini) {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool ok = pod_identity_holds(desk, {1, 5, 10}, &worst);
    ok = pod_identity_holds(mini, {1, 5, 10}, &worst) && ok;
    pod::SnapshotSet synthetic;
    synthetic.matrix = random_matrix(20, 60, 404);
    ok = pod_identity_holds(synthetic, {1, 5, 10}, &worst) && ok;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record(1, ok && secs < 60.0,
           "POD projection-error identity on 3 snapshot sets, truncations {1,5,10,rank}: worst relative gap " +
               fmt(worst) + " (budget 1e-8), " + fmt(secs) + " s");
}

// ---- criterion 2: gradient oracle -------------------------------------------

// smallest |pre-activation| over all hidden units and batch columns
double min_abs_preact(const nn::MlpModel& model, const Matrix& x) {
    Matrix a = ((x.colwise() - model.input_norm.shift).array().colwise() / model.input_norm.scale.array()).matrix();
    double smallest = std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < model.n_layers(); ++i) {
        const Matrix z = (model.weights[i] * a).colwise() + model.biases[i];
        smallest = std::min(smallest, z.cwiseAbs().minCoeff());
        a = z.array().max(model.leaky_slope * z.array()).matrix();
    }
    return smallest;
}

void criterion_gradient_oracle() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<int> dims = {3, 4, 4, 4, 2};
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        nn::MlpModel model = nn::init_gaussian(dims, 0.01, 7000 + trial);
        // moderate weight scale keeps the loss O(1), which the 1e-6 central
        // difference needs to stay above double-precision cancellation
        for (auto& w : model.weights) w *= 0.3;
        for (auto& b : model.biases) b *= 0.3;
        // keep pre-activations away from the kink so the central difference
        // stays inside one affine piece
        Matrix x = random_matrix(3, 6, 8000 + trial);
        for (std::uint64_t retry = 1; min_abs_preact(model, x) <= 1e-3 && retry < 100; ++retry) {
            x = random_matrix(3, 6, 8000 + trial + 20 * retry);
        }
        const Matrix y = random_matrix(2, 6, 9000 + trial);
        const double l2 = (trial % 2 == 0) ? 0.0 : 1e-3;
        const nn::Gradient grad = nn::gradient(model, x, y, l2);

        std::vector<double> analytic;
        std::vector<double*> slots;
        for (int i = 0; i < model.n_layers(); ++i) {
            for (Index k = 0; k < model.weights[i].size(); ++k) {
                analytic.push_back(*(grad.d_weights[i].data() + k));
                slots.push_back(model.weights[i].data() + k);
            }
            for (Index k = 0; k < model.biases[i].size(); ++k) {
                analytic.push_back(*(grad.d_biases[i].data() + k));
                slots.push_back(model.biases[i].data() + k);
            }
        }
        const double h = 1e-6;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const double saved = *slots[i];
            *slots[i] = saved + h;
            const double up = nn::loss(model, x, y, l2);
            *slots[i] = saved - h;
            const double down = nn::loss(model, x, y, l2);
            *slots[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            worst = std::max(worst,
                             std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-3}));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record(2, worst < 1e-5 && secs < 60.0,
           "backprop vs central differences over 20 random nets/batches: max relative deviation " + fmt(worst) +
               " (budget 1e-5), " + fmt(secs) + " s");
}

// ---- criterion 3: SQP correctness --------------------------------------------

void criterion_sqp() {
    const auto start = std::chrono::steady_clock::now();
    const config::RunConfig c = desk_config();
    const auto mesh = fem::build_mesh(c.n_elements, 0.0, 1.0);
    const auto ops = fem::make_operators(mesh);
    std::string detail;
    bool ok = true;

    {  // (a) zero problem
        sampling::ParameterSample zero;
        zero.values = Vector(3);
        zero.values << 0.0, 0.2, 0.1;  // h = 0 gives all-zero data
        ocp::ControlProblem pb = pipeline::make_problem(c, zero, mesh);
        const ocp::SqpResult r = ocp::sqp_solve(pb, mesh, ops, c.sqp_tol, c.sqp_max_iter, c.sqp_abs_tol);
        const bool zero_ok = r.report.converged && r.report.n_iterations == 1 &&
                             r.iterate.state_y.dofs.cwiseAbs().maxCoeff() < 1e-12 &&
                             r.control.dofs.cwiseAbs().maxCoeff() < 1e-12;
        detail += "(a) zero data: " + std::to_string(r.report.n_iterations) + " iteration; ";
        ok = ok && zero_ok;
    }

    sampling::ParameterSample mu;
    mu.values = Vector(3);
    mu.values << 0.75, 0.2, 0.05;
    const ocp::ControlProblem pb = pipeline::make_problem(c, mu, mesh);
    const ocp::SqpResult r = ocp::sqp_solve(pb, mesh, ops, c.sqp_tol, c.sqp_max_iter, c.sqp_abs_tol);
    ok = ok && r.report.converged;

    {  // (b) stationarity of the recovered control and objective decrease
        double gap_sq = 0.0, p_sq = 0.0;
        for (int t = 0; t < pb.n_t; ++t) {
            const Vector gap = pb.beta * r.control.block(t) -
                               (pb.control_mask_b.array() * r.iterate.adjoint_p.block(t).array()).matrix();
            gap_sq += gap.squaredNorm();
            p_sq += r.iterate.adjoint_p.block(t).squaredNorm();
        }
        const double rel_gap = std::sqrt(gap_sq) / std::sqrt(p_sq);
        const fem::SpaceTimeField zero_u(mesh.n_interior(), pb.n_t, pb.dt());
        const double j_star = ocp::objective(r.iterate.state_y, r.control, pb, ops);
        const double j_unc = ocp::objective(ocp::forward_solve(pb, zero_u, mesh, ops), zero_u, pb, ops);
        detail += "(b) |beta u - b p|/|p| = " + fmt(rel_gap) + ", J* = " + fmt(j_star) +
                  " <= J_unc = " + fmt(j_unc) + "; ";
        ok = ok && rel_gap < 1e-6 && j_star <= j_unc;
    }

    {  // (c) all-at-once state vs sequential forward solve
        const fem::SpaceTimeField y_seq = ocp::forward_solve(pb, r.control, mesh, ops);
        fem::SpaceTimeField diff = y_seq;
        diff.dofs -= r.iterate.state_y.dofs;
        const double rel = fem::l2_norm(diff, ops) / fem::l2_norm(y_seq, ops);
        detail += "(c) state cross-check relative gap " + fmt(rel);
        ok = ok && rel <= 1e-6;
    }

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record(3, ok && secs < 300.0, detail + ", " + fmt(secs) + " s");
}

// ---- criterion 4: FEM assembly oracle ----------------------------------------

void criterion_fem_oracle() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool closed_ok = true;
    for (int n : {4, 16, 64}) {
        const fem::Mesh1D mesh = fem::build_mesh(n, 0.0, 1.0);
        const Vector w = random_matrix(mesh.n_interior(), 1, 300 + n).col(0);
        const auto gap = [&](const SparseMatrix& produced, testing::Form form) {
            return (Matrix(produced) - testing::oracle_matrix(mesh, w, form)).cwiseAbs().maxCoeff();
        };
        worst = std::max({worst, gap(fem::assemble_advection_linearized(mesh, w), testing::Form::Advection),
                          gap(fem::assemble_adjoint_advection(mesh, w), testing::Form::AdjointAdvection),
                          gap(fem::assemble_reaction(mesh, w), testing::Form::Reaction),
                          gap(fem::assemble_mass(mesh), testing::Form::Mass),
                          gap(fem::assemble_stiffness(mesh), testing::Form::Stiffness)});

        // closed forms for mass and stiffness
        const double dx = mesh.dx();
        const Matrix m = Matrix(fem::assemble_mass(mesh));
        const Matrix k = Matrix(fem::assemble_stiffness(mesh));
        for (int i = 0; i < mesh.n_interior(); ++i) {
            closed_ok = closed_ok && std::abs(m(i, i) - 2.0 * dx / 3.0) < 1e-12 &&
                        std::abs(k(i, i) - 2.0 / dx) < 1e-9;
            if (i + 1 < mesh.n_interior()) {
                closed_ok = closed_ok && std::abs(m(i, i + 1) - dx / 6.0) < 1e-12 &&
                            std::abs(k(i, i + 1) + 1.0 / dx) < 1e-9;
            }
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record(4, worst < 1e-12 && closed_ok && secs < 10.0,
           "assembly vs 3-point Gauss oracle on random coefficients: max entry gap " + fmt(worst) +
               " (budget 1e-12); closed forms " + (closed_ok ? "match" : "MISMATCH") + ", " + fmt(secs) + " s");
}

// ---- criteria 5-7 and 9: desk-scale reproduction ------------------------------

struct DeskRun {
    pipeline::OfflineArtifacts shared;
    std::vector<pipeline::HighFidelitySolution> reference;
    std::vector<pipeline::EvalRecord> records_main;   // n_rb = 20, H = 100
    pipeline::EvalSummary summary_main;
    pipeline::EvalSummary summary_small;              // n_rb = 2, H = 20
};

DeskRun run_desk_block(int jobs) {
    DeskRun run;
    config::RunConfig c = desk_config();
    run.shared.config = c;
    run.shared.config_fingerprint = config::fingerprint(c);
    run.shared.mesh = fem::build_mesh(c.n_elements, 0.0, 1.0);
    run.shared.ops = fem::make_operators(run.shared.mesh);
    run.shared.samples = pipeline::generate_samples(c);
    std::fprintf(stderr, "  [desk] solving %zu training samples on %d jobs...\n", run.shared.samples.train.size(),
                 jobs);
    run.shared.bundle =
        pipeline::solve_training_controls(c, run.shared.samples.train, run.shared.mesh, run.shared.ops, jobs);

    const int max_rank = static_cast<int>(
        std::min(run.shared.bundle.snapshots.matrix.rows(), run.shared.bundle.snapshots.matrix.cols()));
    const pod::PodBasis full = pod::compute_pod(run.shared.bundle.snapshots, pod::Truncation::by_rank(max_rank));
    run.reference = pipeline::solve_reference(c, run.shared.samples.test, run.shared.mesh, run.shared.ops, jobs);

    // main grid point (n_rb = 20, H = 100)
    {
        run.shared.basis = pod::truncate(full, 20);
        const nn::Dataset dataset = pipeline::build_dataset(run.shared.bundle, run.shared.basis, c.n_t);
        std::fprintf(stderr, "  [desk] training H=100 surrogate (%d epochs)...\n", c.train.max_epochs);
        auto [model, report] = nn::train(
            nn::init_gaussian({3, 100, 100, 100, static_cast<int>(dataset.targets.rows())}, c.leaky_slope,
                              c.train.seed),
            dataset, c.train);
        run.shared.model = std::move(model);
        run.shared.train_report = std::move(report);
        auto [records, summary] = pipeline::evaluate_against(run.reference, run.shared);
        run.records_main = std::move(records);
        run.summary_main = summary;
    }

    // small grid point (n_rb = 2, H = 20)
    {
        pipeline::OfflineArtifacts small = run.shared;
        small.basis = pod::truncate(full, 2);
        small.config.pod_n_rb = 2;
        small.config.hidden_width = 20;
        const nn::Dataset dataset = pipeline::build_dataset(small.bundle, small.basis, c.n_t);
        std::fprintf(stderr, "  [desk] training H=20 surrogate...\n");
        auto [model, report] = nn::train(
            nn::init_gaussian({3, 20, 20, 20, static_cast<int>(dataset.targets.rows())}, c.leaky_slope,
                              c.train.seed),
            dataset, small.config.train);
        small.model = std::move(model);
        run.summary_small = pipeline::evaluate_against(run.reference, small).second;
    }
    return run;
}

void criteria_desk(const DeskRun& run, double block_seconds) {
    const auto& main = run.summary_main;
    const auto& small = run.summary_small;

    const bool c5 = main.median_E <= 0.15 && main.median_E <= small.median_E && block_seconds < 3600.0;
    record(5, c5,
           "desk-scale trend: median E " + fmt(main.median_E) + " (ceiling 0.15) at (n_rb=20,H=100) vs " +
               fmt(small.median_E) + " at (n_rb=2,H=20); " + std::to_string(main.n_evaluated) +
               " held-out samples, block " + fmt(block_seconds / 60.0) + " min");

    const bool c6 = main.max_discrepancy <= 0.25 && main.median_discrepancy <= 0.12;
    record(6, c6,
           "objective discrepancy: max " + fmt(main.max_discrepancy) + " (ceiling 0.25), median " +
               fmt(main.median_discrepancy) + " (ceiling 0.12)");

    // timing separation plus the zero-solve instrumentation of the online path
    const auto before = instrumentation::linear_solve_count();
    const fem::SpaceTimeField u = pipeline::online_infer(run.shared, run.shared.samples.test.front());
    const bool solver_free = instrumentation::linear_solve_count() == before && u.dofs.allFinite();
    const bool c7 = main.speedup >= 100.0 && solver_free;
    record(7, c7,
           "timing separation: median t_hf " + fmt(main.median_t_highfidelity) + " s vs t_online " +
               fmt(main.median_t_online) + " s, speedup " + fmt(main.speedup) + "x (floor 100); online path " +
               (solver_free ? "performs zero linear solves" : "TOUCHED the linear solver"));
}

void criterion_triangle(const DeskRun& run) {
    bool ok = true;
    double worst_margin = 0.0;
    int checked = 0;
    for (std::size_t i = 0; i < run.records_main.size(); ++i) {
        const auto& record_i = run.records_main[i];
        if (!record_i.hf_converged) continue;
        const double u_norm = fem::l2_norm(run.reference[i].control, run.shared.ops);
        const double lhs = record_i.rel_error_E * u_norm;
        const double rhs = record_i.eps_rb + record_i.eps_nn + 1e-10;
        worst_margin = std::max(worst_margin, lhs - rhs);
        ok = ok && lhs <= rhs;
        ++checked;
    }
    record(9, ok && checked > 0,
           "per-sample error split: E*|u| <= eps_rb + eps_nn + 1e-10 on " + std::to_string(checked) +
               " held-out samples (worst violation " + fmt(worst_margin) + ")");
}

// ---- criterion 8: determinism -------------------------------------------------

void criterion_determinism(int jobs) {
    const auto start = std::chrono::steady_clock::now();
    const config::RunConfig c = mini_config();
    const pipeline::OfflineArtifacts a = pipeline::offline_run(c, jobs);
    const pipeline::OfflineArtifacts b = pipeline::offline_run(c, std::max(1, jobs - 1));

    bool eig_ok = a.basis.eigenvalues.size() == b.basis.eigenvalues.size();
    double eig_gap = 0.0;
    if (eig_ok) eig_gap = (a.basis.eigenvalues - b.basis.eigenvalues).cwiseAbs().maxCoeff();
    eig_ok = eig_ok && eig_gap <= 1e-12;

    const auto tmp = std::filesystem::temp_directory_path();
    const std::string path_a = (tmp / "podnn_accept_model_a.podnn").string();
    const std::string path_b = (tmp / "podnn_accept_model_b.podnn").string();
    io::write_model(path_a, a.config_fingerprint, a.model, a.train_report);
    io::write_model(path_b, b.config_fingerprint, b.model, b.train_report);
    const auto bytes = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    const bool bytes_ok = bytes(path_a) == bytes(path_b);
    std::filesystem::remove(path_a);
    std::filesystem::remove(path_b);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record(8, eig_ok && bytes_ok,
           std::string("two offline runs with identical config/seeds: eigenvalue gap ") + fmt(eig_gap) +
               " (budget 1e-12), persisted model bytes " + (bytes_ok ? "identical" : "DIFFER") + ", " + fmt(secs) +
               " s");
}

}  // namespace

int main() {
    const int jobs = env_jobs();
    std::fprintf(stderr, "acceptance suite starting (%d jobs)\n", jobs);

    criterion_gradient_oracle();
    criterion_fem_oracle();
    criterion_sqp();

    // mini artifacts feed the snapshot-identity and determinism checks
    const pipeline::OfflineArtifacts mini = pipeline::offline_run(mini_config(), jobs);
    criterion_determinism(jobs);

    const auto desk_start = std::chrono::steady_clock::now();
    const DeskRun desk = run_desk_block(jobs);
    const double desk_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - desk_start).count();

    criterion_pod_identity(desk.shared.bundle.snapshots, mini.bundle.snapshots);
    criteria_desk(desk, desk_seconds);
    criterion_triangle(desk);

    std::sort(g_results.begin(), g_results.end(),
              [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
    bool all_pass = true;
    for (const auto& r : g_results) {
        std::printf("criterion %d: %s - %s\n", r.id, r.pass ? "PASS" : "FAIL", r.detail.c_str());
        all_pass = all_pass && r.pass;
    }
    std::printf(all_pass ? "acceptance: all %zu criteria passed\n" : "acceptance: FAILURES present\n",
                g_results.size());
    return all_pass ? 0 : 1;
}
