#include "podnn/artifacts_io.hpp"

#include "podnn/config.hpp"

namespace podnn::io {

namespace {

using nlohmann::json;

Container read_stage(const std::string& path, const std::string& stage, const std::string& expected_fingerprint) {
    Container container = read_container(path);
    if (container.meta.value("stage", "") != stage) {
        throw FingerprintMismatch(path + " is not a '" + stage + "' container");
    }
    const std::string stored = container.meta.value("config_fingerprint", "");
    if (stored != expected_fingerprint) {
        throw FingerprintMismatch(path + " was produced under fingerprint " + stored +
                                  " but the current config has " + expected_fingerprint);
    }
    return container;
}

}  // namespace

void write_samples(const std::string& path, const config::RunConfig& config, const std::string& fingerprint,
                   const pipeline::SampleSets& sets) {
    const int total = static_cast<int>(sets.train.size() + sets.test.size());
    const int p = config.box.size();
    Matrix values(total, p);
    Vector ids(total), mask(total);
    int row = 0;
    for (const auto* group : {&sets.train, &sets.test}) {
        for (const auto& s : *group) {
            values.row(row) = s.values.transpose();
            ids[row] = s.sample_id;
            mask[row] = (group == &sets.train) ? 1.0 : 0.0;
            ++row;
        }
    }
    Container c;
    c.arrays["values"] = from_matrix(values);
    c.arrays["sample_ids"] = from_vector(ids);
    c.arrays["train_mask"] = from_vector(mask);
    c.meta = {{"stage", "samples"},
              {"config_fingerprint", fingerprint},
              {"n_p", config.n_p},
              {"n_test", config.n_test},
              {"seed", config.sample_seed},
              {"box", config::to_json(config)["box"]}};
    write_container(path, c);
}

pipeline::SampleSets read_samples(const std::string& path, const std::string& expected_fingerprint) {
    const Container c = read_stage(path, "samples", expected_fingerprint);
    const Matrix values = to_matrix(c.arrays.at("values"));
    const Vector ids = to_vector(c.arrays.at("sample_ids"));
    const Vector mask = to_vector(c.arrays.at("train_mask"));
    pipeline::SampleSets sets;
    for (Index i = 0; i < values.rows(); ++i) {
        sampling::ParameterSample s;
        s.values = values.row(i).transpose();
        s.sample_id = static_cast<int>(ids[i]);
        (mask[i] > 0.5 ? sets.train : sets.test).push_back(std::move(s));
    }
    return sets;
}

void write_snapshots(const std::string& path, const config::RunConfig& config, const std::string& fingerprint,
                     const pipeline::SnapshotBundle& bundle) {
    const int n_ok = static_cast<int>(bundle.solved_samples.size());
    Matrix mu(n_ok, config.box.size());
    Vector solved_ids(n_ok);
    for (int i = 0; i < n_ok; ++i) {
        mu.row(i) = bundle.solved_samples[i].values.transpose();
        solved_ids[i] = bundle.solved_samples[i].sample_id;
    }
    const Index n_s = bundle.snapshots.matrix.cols();
    Vector prov_id(n_s), prov_t(n_s);
    for (Index j = 0; j < n_s; ++j) {
        prov_id[j] = bundle.snapshots.provenance[j].sample_id;
        prov_t[j] = bundle.snapshots.provenance[j].time_index;
    }

    Container c;
    c.arrays["snapshot_matrix"] = from_matrix(bundle.snapshots.matrix);
    c.arrays["provenance_sample_id"] = from_vector(prov_id);
    c.arrays["provenance_time_index"] = from_vector(prov_t);
    c.arrays["solved_mu"] = from_matrix(mu);
    c.arrays["solved_sample_ids"] = from_vector(solved_ids);

    json reports = json::array();
    for (const auto& r : bundle.reports) {
        reports.push_back({{"iterations", r.n_iterations}, {"converged", r.converged}});
    }
    c.meta = {{"stage", "snapshots"},
              {"config_fingerprint", fingerprint},
              {"n_t", config.n_t},
              {"n_elements", config.n_elements},
              {"failed_sample_ids", bundle.failed_sample_ids},
              {"solver_reports", reports},
              {"snapshot_hash", data_hash(c.arrays["snapshot_matrix"])}};
    write_container(path, c);
}

pipeline::SnapshotBundle read_snapshots(const std::string& path, const std::string& expected_fingerprint,
                                        std::string* snapshot_hash) {
    const Container c = read_stage(path, "snapshots", expected_fingerprint);
    pipeline::SnapshotBundle bundle;
    bundle.snapshots.matrix = to_matrix(c.arrays.at("snapshot_matrix"));
    const Vector prov_id = to_vector(c.arrays.at("provenance_sample_id"));
    const Vector prov_t = to_vector(c.arrays.at("provenance_time_index"));
    for (Index j = 0; j < prov_id.size(); ++j) {
        bundle.snapshots.provenance.push_back({static_cast<int>(prov_id[j]), static_cast<int>(prov_t[j])});
    }
    const Matrix mu = to_matrix(c.arrays.at("solved_mu"));
    const Vector ids = to_vector(c.arrays.at("solved_sample_ids"));
    for (Index i = 0; i < mu.rows(); ++i) {
        sampling::ParameterSample s;
        s.values = mu.row(i).transpose();
        s.sample_id = static_cast<int>(ids[i]);
        bundle.solved_samples.push_back(std::move(s));
    }
    bundle.failed_sample_ids = c.meta.value("failed_sample_ids", std::vector<int>{});
    if (snapshot_hash) *snapshot_hash = c.meta.value("snapshot_hash", "");
    return bundle;
}

void write_basis(const std::string& path, const std::string& fingerprint, const pod::PodBasis& basis,
                 const std::string& snapshot_hash, bool mass_weighted) {
    Container c;
    c.arrays["modes"] = from_matrix(basis.modes);
    c.arrays["proj_rows"] = from_matrix(basis.proj_rows);
    c.arrays["eigenvalues"] = from_vector(basis.eigenvalues);
    c.meta = {{"stage", "basis"},
              {"config_fingerprint", fingerprint},
              {"n_rb", basis.n_rb},
              {"snapshot_hash", snapshot_hash},
              {"mass_weighted", mass_weighted},
              {"basis_hash", data_hash(c.arrays["modes"])}};
    write_container(path, c);
}

pod::PodBasis read_basis(const std::string& path, const std::string& expected_fingerprint,
                         std::string* snapshot_hash) {
    const Container c = read_stage(path, "basis", expected_fingerprint);
    pod::PodBasis basis;
    basis.modes = to_matrix(c.arrays.at("modes"));
    basis.proj_rows = to_matrix(c.arrays.at("proj_rows"));
    basis.eigenvalues = to_vector(c.arrays.at("eigenvalues"));
    basis.n_rb = c.meta.value("n_rb", 0);
    if (snapshot_hash) *snapshot_hash = c.meta.value("snapshot_hash", "");
    return basis;
}

void write_model(const std::string& path, const std::string& fingerprint, const nn::MlpModel& model,
                 const nn::TrainReport& report) {
    Container c;
    for (int i = 0; i < model.n_layers(); ++i) {
        c.arrays["w" + std::to_string(i)] = from_matrix(model.weights[i]);
        c.arrays["b" + std::to_string(i)] = from_vector(model.biases[i]);
    }
    c.arrays["input_shift"] = from_vector(model.input_norm.shift);
    c.arrays["input_scale"] = from_vector(model.input_norm.scale);
    c.arrays["output_shift"] = from_vector(model.output_norm.shift);
    c.arrays["output_scale"] = from_vector(model.output_norm.scale);
    c.arrays["train_loss"] = from_vector(
        Eigen::Map<const Vector>(report.train_loss_history.data(), report.train_loss_history.size()));
    c.arrays["val_loss"] =
        from_vector(Eigen::Map<const Vector>(report.val_loss_history.data(), report.val_loss_history.size()));
    c.meta = {{"stage", "model"},
              {"config_fingerprint", fingerprint},
              {"layer_dims", model.layer_dims},
              {"leaky_slope", model.leaky_slope},
              {"best_epoch", report.best_epoch},
              {"epochs_run", report.epochs_run}};
    write_container(path, c);
}

nn::MlpModel read_model(const std::string& path, const std::string& expected_fingerprint) {
    const Container c = read_stage(path, "model", expected_fingerprint);
    nn::MlpModel model;
    model.layer_dims = c.meta.value("layer_dims", std::vector<int>{});
    model.leaky_slope = c.meta.value("leaky_slope", 0.01);
    for (std::size_t i = 0; i + 1 < model.layer_dims.size(); ++i) {
        model.weights.push_back(to_matrix(c.arrays.at("w" + std::to_string(i))));
        model.biases.push_back(to_vector(c.arrays.at("b" + std::to_string(i))));
    }
    model.input_norm = {to_vector(c.arrays.at("input_shift")), to_vector(c.arrays.at("input_scale"))};
    model.output_norm = {to_vector(c.arrays.at("output_shift")), to_vector(c.arrays.at("output_scale"))};
    return model;
}

}  // namespace podnn::io
