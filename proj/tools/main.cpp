// Command-line front end: offline pipeline stages, online inference, and
// benchmark/sweep reporting over persistent artifact containers.

#include "podnn/config.hpp"
#include "podnn/artifacts_io.hpp"
#include "podnn/container.hpp"
#include "podnn/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

using namespace podnn;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProvenance = 3;
constexpr int kExitSolver = 4;

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

struct Context {
    config::RunConfig config;
    std::string fingerprint;
    std::string out_dir;
    int jobs = 1;

    std::string path(const std::string& name) const { return out_dir + "/" + name; }
};

Context make_context(const CliOptions& options) {
    Context ctx;
    ctx.config = options.config_path.empty() ? config::RunConfig() : config::load_config(options.config_path);
    if (options.seed) {
        // one master switch: sampling stream and training stream stay distinct
        ctx.config.sample_seed = *options.seed;
        ctx.config.train.seed = *options.seed + 1;
    }
    ctx.out_dir = options.out_dir;
    if (ctx.out_dir.empty()) ctx.out_dir = ctx.config.out_dir;
    if (ctx.out_dir.empty()) {
        if (const char* env = std::getenv("PODNN_OUT_DIR")) ctx.out_dir = env;
    }
    if (ctx.out_dir.empty()) ctx.out_dir = "out";
    std::filesystem::create_directories(ctx.out_dir);
    ctx.fingerprint = config::fingerprint(ctx.config);
    ctx.jobs = std::max(1, options.jobs);
    return ctx;
}

pipeline::OfflineArtifacts load_online_artifacts(const Context& ctx) {
    pipeline::OfflineArtifacts artifacts;
    artifacts.config = ctx.config;
    artifacts.config_fingerprint = ctx.fingerprint;
    artifacts.mesh = fem::build_mesh(ctx.config.n_elements, 0.0, 1.0);
    artifacts.ops = fem::make_operators(artifacts.mesh);
    std::string basis_snapshot_hash;
    artifacts.basis = io::read_basis(ctx.path("basis.podnn"), ctx.fingerprint, &basis_snapshot_hash);
    artifacts.model = io::read_model(ctx.path("model.podnn"), ctx.fingerprint);
    if (artifacts.model.output_dim() != artifacts.basis.n_rb * ctx.config.n_t) {
        throw FingerprintMismatch("model output dimension does not match basis.n_rb * n_t");
    }
    return artifacts;
}

// ---- subcommands -----------------------------------------------------------------

int cmd_sample(const Context& ctx) {
    const pipeline::SampleSets sets = pipeline::generate_samples(ctx.config);
    io::write_samples(ctx.path("samples.podnn"), ctx.config, ctx.fingerprint, sets);
    std::cout << "samples: " << sets.train.size() << " training, " << sets.test.size() << " held-out -> "
              << ctx.path("samples.podnn") << "\n";
    return kExitOk;
}

int cmd_snapshot(const Context& ctx) {
    const pipeline::SampleSets sets = io::read_samples(ctx.path("samples.podnn"), ctx.fingerprint);
    const auto mesh = fem::build_mesh(ctx.config.n_elements, 0.0, 1.0);
    const auto ops = fem::make_operators(mesh);
    const auto bundle = pipeline::solve_training_controls(ctx.config, sets.train, mesh, ops, ctx.jobs);
    io::write_snapshots(ctx.path("snapshots.podnn"), ctx.config, ctx.fingerprint, bundle);
    std::cout << "snapshots: " << bundle.snapshots.matrix.cols() << " columns from " << bundle.solved_samples.size()
              << " solves (" << bundle.failed_sample_ids.size() << " failed) -> " << ctx.path("snapshots.podnn")
              << "\n";
    return kExitOk;
}

int cmd_pod(const Context& ctx) {
    std::string hash;
    const auto bundle = io::read_snapshots(ctx.path("snapshots.podnn"), ctx.fingerprint, &hash);
    const auto truncation = ctx.config.pod_use_energy ? pod::Truncation::by_energy(ctx.config.pod_energy_tol)
                                                      : pod::Truncation::by_rank(ctx.config.pod_n_rb);
    const SparseMatrix mass = fem::assemble_mass(fem::build_mesh(ctx.config.n_elements, 0.0, 1.0));
    const pod::PodBasis basis =
        pod::compute_pod(bundle.snapshots, truncation, ctx.config.pod_mass_weighted ? &mass : nullptr);
    io::write_basis(ctx.path("basis.podnn"), ctx.fingerprint, basis, hash, ctx.config.pod_mass_weighted);
    const double total = basis.eigenvalues.sum();
    std::cout << "basis: n_rb=" << basis.n_rb << ", retained energy "
              << (total > 0.0 ? 1.0 - pod::tail_energy(basis) / total : 1.0) << " -> " << ctx.path("basis.podnn")
              << "\n";
    return kExitOk;
}

int cmd_train(const Context& ctx) {
    std::string snapshot_hash;
    const auto bundle = io::read_snapshots(ctx.path("snapshots.podnn"), ctx.fingerprint, &snapshot_hash);
    std::string basis_snapshot_hash;
    const auto basis = io::read_basis(ctx.path("basis.podnn"), ctx.fingerprint, &basis_snapshot_hash);
    if (basis_snapshot_hash != snapshot_hash) {
        throw FingerprintMismatch("basis was computed from a different snapshot set");
    }
    const nn::Dataset dataset = pipeline::build_dataset(bundle, basis, ctx.config.n_t);

    std::vector<int> dims;
    dims.push_back(ctx.config.box.size());
    for (int i = 0; i < ctx.config.hidden_layers; ++i) dims.push_back(ctx.config.hidden_width);
    dims.push_back(static_cast<int>(dataset.targets.rows()));
    nn::MlpModel init = nn::init_gaussian(dims, ctx.config.leaky_slope, ctx.config.train.seed);
    const auto [model, report] = nn::train(std::move(init), dataset, ctx.config.train);
    io::write_model(ctx.path("model.podnn"), ctx.fingerprint, model, report);
    std::cout << "model: layers";
    for (int d : model.layer_dims) std::cout << " " << d;
    std::cout << ", best validation MSE " << report.val_loss_history[report.best_epoch] << " at epoch "
              << report.best_epoch << "/" << report.epochs_run << " -> " << ctx.path("model.podnn") << "\n";
    return kExitOk;
}

int cmd_infer(const Context& ctx, const std::vector<double>& mu_values) {
    const auto artifacts = load_online_artifacts(ctx);
    sampling::ParameterSample mu;
    mu.values = Eigen::Map<const Vector>(mu_values.data(), static_cast<Index>(mu_values.size()));
    mu.sample_id = -1;
    if (mu.values.size() != ctx.config.box.size()) {
        throw ConfigError("infer: expected " + std::to_string(ctx.config.box.size()) + " parameter values");
    }
    if (!ctx.config.box.contains(mu.values)) {
        std::cout << "warning: parameters lie outside the training box (extrapolation)\n";
    }

    std::vector<double> times;
    fem::SpaceTimeField control;
    for (int rep = 0; rep < 5; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        control = pipeline::online_infer(artifacts, mu);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }

    Matrix table(ctx.config.n_t, control.n_space());
    for (int t = 0; t < ctx.config.n_t; ++t) table.row(t) = control.block(t).transpose();
    io::Container c;
    c.arrays["control"] = io::from_matrix(table);
    c.meta = {{"stage", "control"},
              {"config_fingerprint", ctx.fingerprint},
              {"mu", mu_values},
              {"layout", "rows are time steps t_1..t_Nt, columns interior nodes"},
              {"extrapolation", !ctx.config.box.contains(mu.values)}};
    io::write_container(ctx.path("infer_control.podnn"), c);
    std::cout << "online inference: " << pipeline::median(times) * 1e3 << " ms (median of 5) -> "
              << ctx.path("infer_control.podnn") << "\n";
    return kExitOk;
}

int cmd_bench(const Context& ctx) {
    const auto artifacts = load_online_artifacts(ctx);
    const pipeline::SampleSets sets = io::read_samples(ctx.path("samples.podnn"), ctx.fingerprint);
    if (sets.test.empty()) throw ConfigError("bench: the samples container has no held-out samples");

    const auto [records, summary] = pipeline::evaluate(artifacts, sets.test, artifacts.mesh, artifacts.ops, ctx.jobs);
    pipeline::write_eval_csv(ctx.path("eval.csv"), records);

    Matrix table(summary.n_evaluated, 8);
    int row = 0;
    for (const auto& r : records) {
        if (!r.hf_converged) continue;
        table.row(row) << static_cast<double>(r.sample.sample_id), r.sample.values[0], r.sample.values[1],
            r.sample.values[2], r.rel_error_E, r.objective_discrepancy, r.t_online_seconds, r.t_highfidelity_seconds;
        ++row;
    }
    io::Container c;
    c.arrays["records"] = io::from_matrix(table);
    c.meta = {{"stage", "eval"},
              {"config_fingerprint", ctx.fingerprint},
              {"columns", "sample_id,h,omega,epsilon,E,obj_discrepancy,t_online,t_hf"},
              {"summary",
               {{"n_evaluated", summary.n_evaluated},
                {"n_failed", summary.n_failed},
                {"median_E", summary.median_E},
                {"max_E", summary.max_E},
                {"median_obj_discrepancy", summary.median_discrepancy},
                {"max_obj_discrepancy", summary.max_discrepancy},
                {"median_eps_rb", summary.median_eps_rb},
                {"median_eps_nn", summary.median_eps_nn},
                {"median_t_online_s", summary.median_t_online},
                {"median_t_hf_s", summary.median_t_highfidelity},
                {"speedup", summary.speedup}}}};
    io::write_container(ctx.path("eval.podnn"), c);

    std::cout << "bench summary over " << summary.n_evaluated << " held-out samples (" << summary.n_failed
              << " failed solves excluded)\n"
              << "  median E                  " << summary.median_E << "\n"
              << "  max E                     " << summary.max_E << "\n"
              << "  median obj discrepancy    " << summary.median_discrepancy << "\n"
              << "  max obj discrepancy       " << summary.max_discrepancy << "\n"
              << "  median eps_rb / eps_nn    " << summary.median_eps_rb << " / " << summary.median_eps_nn << "\n"
              << "  median t_hf / t_online    " << summary.median_t_highfidelity << " s / " << summary.median_t_online
              << " s\n"
              << "  speedup                   " << summary.speedup << "x\n"
              << "  table -> " << ctx.path("eval.csv") << "\n";
    return kExitOk;
}

int cmd_sweep(const Context& ctx, std::vector<int> n_rb_list, std::vector<int> width_list) {
    if (n_rb_list.empty()) n_rb_list = {5, 10, 20};
    if (width_list.empty()) width_list = {20, 50, 100, 200};
    const auto rows = pipeline::sweep(ctx.config, n_rb_list, width_list, ctx.jobs);

    std::ofstream csv(ctx.path("sweep.csv"), std::ios::trunc);
    csv << "n_rb,H,median_E,max_E,median_obj_discrepancy,max_obj_discrepancy,median_eps_rb,median_eps_nn,speedup\n";
    csv.precision(17);
    std::cout << "n_rb    H    median_E    max_E    median_disc\n";
    for (const auto& row : rows) {
        csv << row.n_rb << ',' << row.hidden_width << ',' << row.summary.median_E << ',' << row.summary.max_E << ','
            << row.summary.median_discrepancy << ',' << row.summary.max_discrepancy << ','
            << row.summary.median_eps_rb << ',' << row.summary.median_eps_nn << ',' << row.summary.speedup << '\n';
        std::printf("%4d  %4d  %10.4g  %8.4g  %10.4g\n", row.n_rb, row.hidden_width, row.summary.median_E,
                    row.summary.max_E, row.summary.median_discrepancy);
    }
    std::cout << "table -> " << ctx.path("sweep.csv") << "\n";
    return kExitOk;
}

int cmd_check(const Context& ctx, const std::vector<std::string>& files) {
    for (const std::string& file : files) {
        io::Container c;
        try {
            c = io::read_container(file);
        } catch (const std::exception& e) {
            throw FingerprintMismatch(std::string("check: ") + e.what());
        }
        const std::string stage = c.meta.value("stage", "?");
        std::cout << file << ": stage=" << stage << ", records=" << c.arrays.size();

        if (stage == "samples") {
            const Matrix values = io::to_matrix(c.arrays.at("values"));
            const sampling::ParameterBox& box = ctx.config.box;
            const int n = static_cast<int>(values.rows());
            for (int d = 0; d < box.size(); ++d) {
                const auto& dim = box.dims[d];
                std::vector<int> counts(n, 0);
                for (int i = 0; i < n; ++i) {
                    const double lo = dim.log_scale ? std::log(dim.lower) : dim.lower;
                    const double hi = dim.log_scale ? std::log(dim.upper) : dim.upper;
                    const double v = dim.log_scale ? std::log(values(i, d)) : values(i, d);
                    const int stratum = static_cast<int>(std::floor((v - lo) / (hi - lo) * n));
                    counts[std::clamp(stratum, 0, n - 1)] += 1;
                }
                for (int count : counts) {
                    if (count != 1) throw FingerprintMismatch("check: stratification violated in " + dim.name);
                }
            }
            std::cout << ", stratification ok";
        } else if (stage == "snapshots") {
            const std::string stored = c.meta.value("snapshot_hash", "");
            if (stored != io::data_hash(c.arrays.at("snapshot_matrix"))) {
                throw FingerprintMismatch("check: snapshot hash mismatch in " + file);
            }
            std::cout << ", hash ok";
        } else if (stage == "basis") {
            const Matrix modes = io::to_matrix(c.arrays.at("modes"));
            if (!c.meta.value("mass_weighted", false)) {
                const Matrix gram = modes.transpose() * modes;
                if ((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10) {
                    throw FingerprintMismatch("check: basis is not orthonormal in " + file);
                }
            }
            const Vector eig = io::to_vector(c.arrays.at("eigenvalues"));
            for (Index i = 1; i < eig.size(); ++i) {
                if (eig[i] > eig[i - 1] + 1e-12) {
                    throw FingerprintMismatch("check: eigenvalues are not sorted in " + file);
                }
            }
            std::cout << ", orthonormal";
        } else if (stage == "model") {
            const auto dims = c.meta.value("layer_dims", std::vector<int>{});
            for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
                const auto& w = c.arrays.at("w" + std::to_string(i));
                const std::vector<std::uint64_t> expected = {static_cast<std::uint64_t>(dims[i + 1]),
                                                             static_cast<std::uint64_t>(dims[i])};
                if (w.shape != expected) {
                    throw FingerprintMismatch("check: weight shape mismatch in " + file);
                }
            }
            std::cout << ", shapes ok";
        }
        const std::string stored_fp = c.meta.value("config_fingerprint", "");
        std::cout << (stored_fp == ctx.fingerprint ? ", fingerprint matches config" : ", fingerprint DIFFERS")
                  << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline/online surrogate pipeline for a tracking-type Burgers control problem"};
    app.require_subcommand(1);

    CliOptions options;
    app.add_option("--config", options.config_path, "JSON configuration file");
    app.add_option("--seed", options.seed, "override the sampling/training seeds");
    app.add_option("--jobs", options.jobs, "worker threads for solver-heavy stages")->default_val(1);
    app.add_option("--out", options.out_dir, "output directory (default: config, then $PODNN_OUT_DIR, then ./out)");

    auto* sample = app.add_subcommand("sample", "draw the parameter samples");
    auto* snapshot = app.add_subcommand("snapshot", "solve the training controls");
    auto* podc = app.add_subcommand("pod", "compute the reduced basis");
    auto* trainc = app.add_subcommand("train", "fit the coefficient network");
    auto* infer = app.add_subcommand("infer", "evaluate the surrogate at one parameter point");
    std::vector<double> mu_values;
    infer->add_option("--mu", mu_values, "parameter values h,omega,epsilon")->required()->delimiter(',');
    auto* bench = app.add_subcommand("bench", "evaluate against held-out high-fidelity solves");
    auto* sweepc = app.add_subcommand("sweep", "train and evaluate over an (n_rb, H) grid");
    std::vector<int> n_rb_list, width_list;
    sweepc->add_option("--n-rb-list", n_rb_list, "basis sizes")->delimiter(',');
    sweepc->add_option("--h-list", width_list, "hidden widths")->delimiter(',');
    auto* check = app.add_subcommand("check", "validate artifact containers");
    std::vector<std::string> check_files;
    check->add_option("files", check_files, "containers to validate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        const Context ctx = make_context(options);
        if (sample->parsed()) return cmd_sample(ctx);
        if (snapshot->parsed()) return cmd_snapshot(ctx);
        if (podc->parsed()) return cmd_pod(ctx);
        if (trainc->parsed()) return cmd_train(ctx);
        if (infer->parsed()) return cmd_infer(ctx, mu_values);
        if (bench->parsed()) return cmd_bench(ctx);
        if (sweepc->parsed()) return cmd_sweep(ctx, n_rb_list, width_list);
        if (check->parsed()) return cmd_check(ctx, check_files);
        return kExitConfig;
    } catch (const podnn::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const podnn::FingerprintMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvenance;
    } catch (const podnn::SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
