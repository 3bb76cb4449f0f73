#include "podnn/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace podnn::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

pod::Truncation truncation_of(const RunConfig& config) {
    return config.pod_use_energy ? pod::Truncation::by_energy(config.pod_energy_tol)
                                 : pod::Truncation::by_rank(config.pod_n_rb);
}

std::vector<int> network_dims(const RunConfig& config, int hidden_width, int output_dim) {
    std::vector<int> dims;
    dims.push_back(config.box.size());
    for (int i = 0; i < config.hidden_layers; ++i) dims.push_back(hidden_width);
    dims.push_back(output_dim);
    return dims;
}

double timed_online_median(const pod::PodBasis& basis, const nn::MlpModel& model, const Vector& mu, int n_t,
                           double dt) {
    std::vector<double> reps;
    for (int r = 0; r < 5; ++r) {
        const auto start = Clock::now();
        const SpaceTimeField u = online_infer(basis, model, mu, n_t, dt);
        reps.push_back(std::chrono::duration<double>(Clock::now() - start).count());
        (void)u;
    }
    return median(std::move(reps));
}

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int w = 0; w < jobs; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

ocp::ControlProblem make_problem(const RunConfig& config, const ParameterSample& sample, const Mesh1D& mesh) {
    if (sample.values.size() != 3) throw std::invalid_argument("make_problem: expected (h, omega, epsilon)");
    const double h = sample.values[0];
    const double omega = sample.values[1];
    const double epsilon = sample.values[2];

    ocp::ControlProblem problem;
    problem.epsilon = epsilon;
    problem.beta = config.beta;
    problem.t_final = config.t_final;
    problem.n_t = config.n_t;
    problem.y0 = fem::interpolate(mesh, [&](double x) { return (x >= omega && x <= 1.0 - omega) ? h : 0.0; });
    problem.y_desired = fem::replicate(problem.y0, config.n_t, problem.dt());
    problem.forcing = fem::replicate(Vector::Constant(mesh.n_interior(), config.forcing_constant), config.n_t,
                                     problem.dt());
    problem.control_mask_b = Vector::Ones(mesh.n_interior());
    return problem;
}

SampleSets generate_samples(const RunConfig& config) {
    const int total = config.n_p + config.n_test;
    const auto all = sampling::latin_hypercube(config.box, total, config.sample_seed, config.midpoint_strata);
    const double fraction = static_cast<double>(config.n_p) / total;
    auto [train, test] = sampling::split(all, fraction, config.sample_seed + 1);
    return SampleSets{std::move(train), std::move(test)};
}

SnapshotBundle solve_training_controls(const RunConfig& config, const std::vector<ParameterSample>& train,
                                       const Mesh1D& mesh, const FemOperators& ops, int jobs) {
    const int n = static_cast<int>(train.size());
    if (n == 0) throw std::invalid_argument("solve_training_controls: empty training set");

    std::vector<SpaceTimeField> controls(n);
    std::vector<ocp::SqpReport> reports(n);
    parallel_for(n, jobs, [&](int i) {
        const ocp::ControlProblem problem = make_problem(config, train[i], mesh);
        ocp::SqpResult result = ocp::sqp_solve(problem, mesh, ops, config.sqp_tol, config.sqp_max_iter,
                                               config.sqp_abs_tol);
        reports[i] = std::move(result.report);
        controls[i] = std::move(result.control);
    });

    SnapshotBundle bundle;
    bundle.reports = std::move(reports);
    int n_ok = 0;
    for (int i = 0; i < n; ++i) {
        if (bundle.reports[i].converged) {
            ++n_ok;
        } else {
            bundle.failed_sample_ids.push_back(train[i].sample_id);
        }
    }
    const int n_failed = n - n_ok;
    if (n_failed > 0.05 * n) {
        throw SolverError("solve_training_controls: " + std::to_string(n_failed) + " of " + std::to_string(n) +
                          " solves failed (over the 5% budget)");
    }

    const int ni = mesh.n_interior();
    bundle.snapshots.matrix.resize(ni, static_cast<Index>(n_ok) * config.n_t);
    Index col = 0;
    for (int i = 0; i < n; ++i) {
        if (!bundle.reports[i].converged) continue;
        bundle.solved_samples.push_back(train[i]);
        for (int t = 0; t < config.n_t; ++t) {
            bundle.snapshots.matrix.col(col) = controls[i].block(t);
            bundle.snapshots.provenance.push_back({train[i].sample_id, t});
            ++col;
        }
    }
    return bundle;
}

nn::Dataset build_dataset(const SnapshotBundle& bundle, const pod::PodBasis& basis, int n_t) {
    const int n = static_cast<int>(bundle.solved_samples.size());
    if (n == 0) throw std::invalid_argument("build_dataset: no successful solves");
    const int p = static_cast<int>(bundle.solved_samples.front().values.size());

    nn::Dataset dataset;
    dataset.inputs.resize(p, n);
    dataset.targets.resize(static_cast<Index>(basis.n_rb) * n_t, n);
    const int ni = static_cast<int>(bundle.snapshots.matrix.rows());
    for (int i = 0; i < n; ++i) {
        dataset.inputs.col(i) = bundle.solved_samples[i].values;
        SpaceTimeField control(ni, n_t, 1.0);  // dt is irrelevant for the projection
        for (int t = 0; t < n_t; ++t) {
            control.block(t) = bundle.snapshots.matrix.col(static_cast<Index>(i) * n_t + t);
        }
        dataset.targets.col(i) = pod::project(basis, control);
    }
    return dataset;
}

OfflineArtifacts offline_run(const RunConfig& config, int jobs) {
    OfflineArtifacts artifacts;
    artifacts.config = config;
    artifacts.config_fingerprint = config::fingerprint(config);
    artifacts.mesh = fem::build_mesh(config.n_elements, 0.0, 1.0);
    artifacts.ops = fem::make_operators(artifacts.mesh);
    artifacts.samples = generate_samples(config);
    artifacts.bundle =
        solve_training_controls(config, artifacts.samples.train, artifacts.mesh, artifacts.ops, jobs);

    const SparseMatrix* weight = config.pod_mass_weighted ? &artifacts.ops.mass : nullptr;
    artifacts.basis = pod::compute_pod(artifacts.bundle.snapshots, truncation_of(config), weight);

    const nn::Dataset dataset = build_dataset(artifacts.bundle, artifacts.basis, config.n_t);
    const int output_dim = static_cast<int>(dataset.targets.rows());
    nn::MlpModel init = nn::init_gaussian(network_dims(config, config.hidden_width, output_dim), config.leaky_slope,
                                          config.train.seed);
    auto [model, report] = nn::train(std::move(init), dataset, config.train);
    artifacts.model = std::move(model);
    artifacts.train_report = std::move(report);
    return artifacts;
}

SpaceTimeField online_infer(const pod::PodBasis& basis, const nn::MlpModel& model, const Vector& mu, int n_t,
                            double dt) {
    const Vector coefficients = nn::forward(model, mu);
    return pod::lift(basis, coefficients, n_t, dt);
}

SpaceTimeField online_infer(const OfflineArtifacts& artifacts, const ParameterSample& mu) {
    return online_infer(artifacts.basis, artifacts.model, mu.values, artifacts.config.n_t,
                        artifacts.config.t_final / artifacts.config.n_t);
}

std::pair<SpaceTimeField, SpaceTimeField> online_with_state(const OfflineArtifacts& artifacts,
                                                            const ParameterSample& mu, const Mesh1D& mesh,
                                                            const FemOperators& ops) {
    SpaceTimeField control = online_infer(artifacts, mu);
    const ocp::ControlProblem problem = make_problem(artifacts.config, mu, mesh);
    SpaceTimeField state = ocp::forward_solve(problem, control, mesh, ops);
    return {std::move(control), std::move(state)};
}

std::vector<HighFidelitySolution> solve_reference(const RunConfig& config, const std::vector<ParameterSample>& samples,
                                                  const Mesh1D& mesh, const FemOperators& ops, int jobs) {
    std::vector<HighFidelitySolution> out(samples.size());
    parallel_for(static_cast<int>(samples.size()), jobs, [&](int i) {
        const ocp::ControlProblem problem = make_problem(config, samples[i], mesh);
        const auto start = Clock::now();
        ocp::SqpResult result = ocp::sqp_solve(problem, mesh, ops, config.sqp_tol, config.sqp_max_iter,
                                               config.sqp_abs_tol);
        out[i].solve_seconds = std::chrono::duration<double>(Clock::now() - start).count();
        out[i].sample = samples[i];
        out[i].converged = result.report.converged;
        out[i].control = std::move(result.control);
        out[i].state = std::move(result.iterate.state_y);
        if (out[i].converged) {
            out[i].objective_value = ocp::objective(out[i].state, out[i].control, problem, ops);
        }
    });
    return out;
}

std::pair<std::vector<EvalRecord>, EvalSummary> evaluate_against(const std::vector<HighFidelitySolution>& reference,
                                                                 const OfflineArtifacts& artifacts) {
    if (reference.empty()) throw std::invalid_argument("evaluate_against: empty test set");
    const Mesh1D& mesh = artifacts.mesh;
    const FemOperators& ops = artifacts.ops;
    const int n_t = artifacts.config.n_t;
    const double dt = artifacts.config.t_final / n_t;

    std::vector<EvalRecord> records;
    std::vector<double> all_E, all_disc, all_rb, all_nn, all_online, all_hf;
    int n_failed = 0;

    for (const auto& hf : reference) {
        EvalRecord record;
        record.sample = hf.sample;
        record.hf_converged = hf.converged;
        record.t_highfidelity_seconds = hf.solve_seconds;
        if (!hf.converged) {
            ++n_failed;
            records.push_back(std::move(record));
            continue;
        }

        record.t_online_seconds =
            timed_online_median(artifacts.basis, artifacts.model, hf.sample.values, n_t, dt);
        const SpaceTimeField u_nn = online_infer(artifacts, hf.sample);

        SpaceTimeField diff = u_nn;
        diff.dofs -= hf.control.dofs;
        const double u_norm = fem::l2_norm(hf.control, ops);
        record.rel_error_E = fem::l2_norm(diff, ops) / u_norm;

        const SpaceTimeField projected =
            pod::lift(artifacts.basis, pod::project(artifacts.basis, hf.control), n_t, dt);
        SpaceTimeField rb_gap = hf.control;
        rb_gap.dofs -= projected.dofs;
        record.eps_rb = fem::l2_norm(rb_gap, ops);
        SpaceTimeField nn_gap = projected;
        nn_gap.dofs -= u_nn.dofs;
        record.eps_nn = fem::l2_norm(nn_gap, ops);

        const ocp::ControlProblem problem = make_problem(artifacts.config, hf.sample, mesh);
        const SpaceTimeField y_nn = ocp::forward_solve(problem, u_nn, mesh, ops);
        const double j_nn = ocp::objective(y_nn, u_nn, problem, ops);
        record.objective_discrepancy = std::abs(j_nn - hf.objective_value) / std::abs(hf.objective_value);

        all_E.push_back(record.rel_error_E);
        all_disc.push_back(record.objective_discrepancy);
        all_rb.push_back(record.eps_rb);
        all_nn.push_back(record.eps_nn);
        all_online.push_back(record.t_online_seconds);
        all_hf.push_back(record.t_highfidelity_seconds);
        records.push_back(std::move(record));
    }

    EvalSummary summary;
    summary.n_evaluated = static_cast<int>(all_E.size());
    summary.n_failed = n_failed;
    if (!all_E.empty()) {
        summary.median_E = median(all_E);
        summary.max_E = *std::max_element(all_E.begin(), all_E.end());
        summary.median_discrepancy = median(all_disc);
        summary.max_discrepancy = *std::max_element(all_disc.begin(), all_disc.end());
        summary.median_eps_rb = median(all_rb);
        summary.median_eps_nn = median(all_nn);
        summary.median_t_online = median(all_online);
        summary.median_t_highfidelity = median(all_hf);
        if (summary.median_t_online > 0.0) {
            summary.speedup = summary.median_t_highfidelity / summary.median_t_online;
        }
    }
    return {std::move(records), summary};
}

std::pair<std::vector<EvalRecord>, EvalSummary> evaluate(const OfflineArtifacts& artifacts,
                                                         const std::vector<ParameterSample>& test_samples,
                                                         const Mesh1D& mesh, const FemOperators& ops, int jobs) {
    const auto reference = solve_reference(artifacts.config, test_samples, mesh, ops, jobs);
    return evaluate_against(reference, artifacts);
}

std::vector<SweepRow> sweep(const RunConfig& config, const std::vector<int>& n_rb_list,
                            const std::vector<int>& width_list, int jobs) {
    if (n_rb_list.empty() || width_list.empty()) throw std::invalid_argument("sweep: empty grid");

    OfflineArtifacts shared;
    shared.config = config;
    shared.config_fingerprint = config::fingerprint(config);
    shared.mesh = fem::build_mesh(config.n_elements, 0.0, 1.0);
    shared.ops = fem::make_operators(shared.mesh);
    shared.samples = generate_samples(config);
    shared.bundle = solve_training_controls(config, shared.samples.train, shared.mesh, shared.ops, jobs);

    const int max_rank = static_cast<int>(
        std::min(shared.bundle.snapshots.matrix.rows(), shared.bundle.snapshots.matrix.cols()));
    const SparseMatrix* weight = config.pod_mass_weighted ? &shared.ops.mass : nullptr;
    const pod::PodBasis full = pod::compute_pod(shared.bundle.snapshots, pod::Truncation::by_rank(max_rank), weight);

    const auto reference = solve_reference(config, shared.samples.test, shared.mesh, shared.ops, jobs);

    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < n_rb_list.size(); ++i) {
        const int n_rb = std::min(n_rb_list[i], max_rank);
        shared.basis = pod::truncate(full, n_rb);
        const nn::Dataset dataset = build_dataset(shared.bundle, shared.basis, config.n_t);
        for (std::size_t j = 0; j < width_list.size(); ++j) {
            RunConfig row_config = config;
            row_config.pod_use_energy = false;
            row_config.pod_n_rb = n_rb;
            row_config.hidden_width = width_list[j];
            // distinct deterministic seed per grid point
            row_config.train.seed = config.train.seed + 1000 * i + j;
            nn::MlpModel init =
                nn::init_gaussian(network_dims(row_config, width_list[j], static_cast<int>(dataset.targets.rows())),
                                  config.leaky_slope, row_config.train.seed);
            auto [model, report] = nn::train(std::move(init), dataset, row_config.train);
            shared.model = std::move(model);
            shared.train_report = std::move(report);
            shared.config = row_config;

            SweepRow row;
            row.n_rb = n_rb;
            row.hidden_width = width_list[j];
            row.summary = evaluate_against(reference, shared).second;
            rows.push_back(row);
        }
    }
    return rows;
}

void write_eval_csv(const std::string& path, const std::vector<EvalRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_eval_csv: cannot open " + path);
    out << "sample_id,h,omega,epsilon,E,obj_discrepancy,t_online,t_hf\n";
    out.precision(17);
    for (const auto& r : records) {
        if (!r.hf_converged) continue;
        out << r.sample.sample_id << ',' << r.sample.values[0] << ',' << r.sample.values[1] << ','
            << r.sample.values[2] << ',' << r.rel_error_E << ',' << r.objective_discrepancy << ','
            << r.t_online_seconds << ',' << r.t_highfidelity_seconds << '\n';
    }
    if (!out) throw std::runtime_error("write_eval_csv: write failed");
}

}  // namespace podnn::pipeline
