#pragma once

#include "podnn/config.hpp"
#include "podnn/nn.hpp"
#include "podnn/ocp.hpp"
#include "podnn/pod.hpp"
#include "podnn/sampling.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace podnn::pipeline {

using config::RunConfig;
using fem::FemOperators;
using fem::Mesh1D;
using fem::SpaceTimeField;
using sampling::ParameterSample;

/// Runs fn(0..n-1) on a worker pool; results must be written to
/// position-indexed slots so the outcome is independent of scheduling.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// Instantiates the tracking problem for one parameter point: step initial
/// state of height h on [omega, 1-omega], desired state frozen at the initial
/// condition, constant forcing, and the control active on the whole domain.
ocp::ControlProblem make_problem(const RunConfig& config, const ParameterSample& sample, const Mesh1D& mesh);

struct SampleSets {
    std::vector<ParameterSample> train;
    std::vector<ParameterSample> test;
};

/// One Latin Hypercube draw over n_p + n_test points, deterministically split.
SampleSets generate_samples(const RunConfig& config);

struct SnapshotBundle {
    pod::SnapshotSet snapshots;                  // N_delta x (n_ok * n_t)
    std::vector<ParameterSample> solved_samples; // successful training samples, in order
    std::vector<ocp::SqpReport> reports;         // one per training sample
    std::vector<int> failed_sample_ids;
};

/// Solves every training sample and column-splits the controls into spatial
/// snapshots. Failed solves are excluded; more than 5% of them is an error.
SnapshotBundle solve_training_controls(const RunConfig& config, const std::vector<ParameterSample>& train,
                                       const Mesh1D& mesh, const FemOperators& ops, int jobs);

/// Training pairs: inputs are the raw parameter vectors, targets the
/// blockwise-reduced space-time controls.
nn::Dataset build_dataset(const SnapshotBundle& bundle, const pod::PodBasis& basis, int n_t);

struct OfflineArtifacts {
    RunConfig config;
    std::string config_fingerprint;
    Mesh1D mesh;
    FemOperators ops;
    SampleSets samples;
    SnapshotBundle bundle;
    pod::PodBasis basis;
    nn::MlpModel model;
    nn::TrainReport train_report;
};

/// Offline stage: sample, solve, compress, train.
OfflineArtifacts offline_run(const RunConfig& config, int jobs);

/// Online stage steps 1-2: one forward propagation plus the blockwise lift.
/// No solver calls.
SpaceTimeField online_infer(const pod::PodBasis& basis, const nn::MlpModel& model, const Vector& mu, int n_t,
                            double dt);
SpaceTimeField online_infer(const OfflineArtifacts& artifacts, const ParameterSample& mu);

/// Online stage step 3: also forward-solve the state under the inferred control.
std::pair<SpaceTimeField, SpaceTimeField> online_with_state(const OfflineArtifacts& artifacts,
                                                            const ParameterSample& mu, const Mesh1D& mesh,
                                                            const FemOperators& ops);

struct HighFidelitySolution {
    ParameterSample sample;
    SpaceTimeField control;
    SpaceTimeField state;
    double objective_value = 0.0;
    double solve_seconds = 0.0;
    bool converged = false;
};

/// Reference SQP solves of a sample list (timed, parallel over samples).
std::vector<HighFidelitySolution> solve_reference(const RunConfig& config, const std::vector<ParameterSample>& samples,
                                                  const Mesh1D& mesh, const FemOperators& ops, int jobs);

struct EvalRecord {
    ParameterSample sample;
    double rel_error_E = 0.0;
    double objective_discrepancy = 0.0;
    double eps_rb = 0.0;   // ||u - lift(project(u))|| in the space-time norm
    double eps_nn = 0.0;   // ||lift(project(u)) - u_nn||
    double t_online_seconds = 0.0;
    double t_highfidelity_seconds = 0.0;
    bool hf_converged = true;
};

struct EvalSummary {
    int n_evaluated = 0;
    int n_failed = 0;
    double median_E = 0.0;
    double max_E = 0.0;
    double median_discrepancy = 0.0;
    double max_discrepancy = 0.0;
    double median_eps_rb = 0.0;
    double median_eps_nn = 0.0;
    double median_t_online = 0.0;
    double median_t_highfidelity = 0.0;
    double speedup = 0.0;  // median_t_highfidelity / median_t_online
};

/// Error and timing metrics against precomputed reference solutions.
std::pair<std::vector<EvalRecord>, EvalSummary> evaluate_against(const std::vector<HighFidelitySolution>& reference,
                                                                 const OfflineArtifacts& artifacts);

/// Full held-out evaluation: reference solves plus online inference per sample.
std::pair<std::vector<EvalRecord>, EvalSummary> evaluate(const OfflineArtifacts& artifacts,
                                                         const std::vector<ParameterSample>& test_samples,
                                                         const Mesh1D& mesh, const FemOperators& ops, int jobs);

struct SweepRow {
    int n_rb = 0;
    int hidden_width = 0;
    EvalSummary summary;
};

/// Trains one surrogate per (n_rb, H) pair from a shared snapshot set and
/// evaluates each against the same reference solutions.
std::vector<SweepRow> sweep(const RunConfig& config, const std::vector<int>& n_rb_list,
                            const std::vector<int>& width_list, int jobs);

void write_eval_csv(const std::string& path, const std::vector<EvalRecord>& records);

double median(std::vector<double> values);

}  // namespace podnn::pipeline
