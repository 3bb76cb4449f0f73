#include "podnn/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace podnn::config {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& item : obj.items()) {
        if (!allowed.contains(item.key())) {
            throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
        }
    }
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + key + "'");
    }
}

void read_bounds(const json& obj, const std::string& key, sampling::ParameterBox::Dim& dim) {
    if (!obj.contains(key)) return;
    const json& arr = obj.at(key);
    if (!arr.is_array() || arr.size() != 2 || !arr[0].is_number() || !arr[1].is_number()) {
        throw ConfigError("config: '" + key + "' must be a [lower, upper] pair");
    }
    dim.lower = arr[0].get<double>();
    dim.upper = arr[1].get<double>();
}

void validate(const RunConfig& c) {
    if (c.n_elements < 2) throw ConfigError("config: mesh.n_elements must be at least 2");
    if (!(c.t_final > 0.0)) throw ConfigError("config: time.t_final must be positive");
    if (c.n_t < 2) throw ConfigError("config: time.n_t must be at least 2");
    if (!(c.beta > 0.0)) throw ConfigError("config: physics.beta must be positive");
    if (c.n_p < 1) throw ConfigError("config: sampling.n_p must be at least 1");
    if (c.n_test < 1) throw ConfigError("config: sampling.n_test must be at least 1");
    for (const auto& dim : c.box.dims) {
        if (!(dim.lower < dim.upper)) throw ConfigError("config: box bounds for " + dim.name + " are inverted");
    }
    if (!(c.sqp_tol > 0.0) || !(c.sqp_abs_tol > 0.0)) throw ConfigError("config: sqp tolerances must be positive");
    if (c.sqp_max_iter < 1) throw ConfigError("config: sqp.max_iter must be at least 1");
    if (!c.pod_use_energy && c.pod_n_rb < 1) throw ConfigError("config: pod.n_rb must be at least 1");
    if (c.pod_use_energy && !(c.pod_energy_tol >= 0.0)) throw ConfigError("config: pod.energy_tol must be nonnegative");
    if (c.hidden_layers < 1) throw ConfigError("config: nn.hidden_layers must be at least 1");
    if (c.hidden_width < 1) throw ConfigError("config: nn.hidden_width must be at least 1");
    if (!(c.leaky_slope > 0.0 && c.leaky_slope < 1.0)) throw ConfigError("config: nn.leaky_slope must lie in (0, 1)");
    const auto& t = c.train;
    if (!(t.learning_rate > 0.0) || t.batch_size < 1 || t.l2_weight < 0.0 || t.max_epochs < 1 || t.patience < 0 ||
        !(t.validation_fraction > 0.0 && t.validation_fraction < 1.0)) {
        throw ConfigError("config: invalid nn.train settings");
    }
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace

RunConfig::RunConfig() {
    box.dims = {{"h", 0.5, 1.0, false}, {"omega", 0.1, 0.3, false}, {"epsilon", 0.001, 0.1, false}};
    train.learning_rate = 1e-3;
    train.batch_size = 32;
    train.l2_weight = 1e-5;
    train.max_epochs = 5000;
    train.patience = 500;
    train.validation_fraction = 0.1;
    train.seed = 7;
}

RunConfig parse_config(const json& j) {
    check_keys(j, "config", {"mesh", "time", "physics", "box", "sampling", "sqp", "pod", "nn", "paths"});
    RunConfig c;

    if (j.contains("mesh")) {
        const json& mesh = j.at("mesh");
        check_keys(mesh, "mesh", {"n_elements"});
        c.n_elements = get_or(mesh, "n_elements", c.n_elements);
    }
    if (j.contains("time")) {
        const json& time = j.at("time");
        check_keys(time, "time", {"t_final", "n_t"});
        c.t_final = get_or(time, "t_final", c.t_final);
        c.n_t = get_or(time, "n_t", c.n_t);
    }
    if (j.contains("physics")) {
        const json& physics = j.at("physics");
        check_keys(physics, "physics", {"beta", "forcing"});
        c.beta = get_or(physics, "beta", c.beta);
        c.forcing_constant = get_or(physics, "forcing", c.forcing_constant);
    }
    if (j.contains("box")) {
        const json& box = j.at("box");
        check_keys(box, "box", {"h", "omega", "epsilon", "log_epsilon"});
        read_bounds(box, "h", c.box.dims[0]);
        read_bounds(box, "omega", c.box.dims[1]);
        read_bounds(box, "epsilon", c.box.dims[2]);
        c.box.dims[2].log_scale = get_or(box, "log_epsilon", false);
    }
    if (j.contains("sampling")) {
        const json& sampling = j.at("sampling");
        check_keys(sampling, "sampling", {"n_p", "n_test", "seed", "midpoint_strata"});
        c.n_p = get_or(sampling, "n_p", c.n_p);
        c.n_test = get_or(sampling, "n_test", c.n_test);
        c.sample_seed = get_or<std::uint64_t>(sampling, "seed", c.sample_seed);
        c.midpoint_strata = get_or(sampling, "midpoint_strata", c.midpoint_strata);
    }
    if (j.contains("sqp")) {
        const json& sqp = j.at("sqp");
        check_keys(sqp, "sqp", {"tol", "abs_tol", "max_iter"});
        c.sqp_tol = get_or(sqp, "tol", c.sqp_tol);
        c.sqp_abs_tol = get_or(sqp, "abs_tol", c.sqp_abs_tol);
        c.sqp_max_iter = get_or(sqp, "max_iter", c.sqp_max_iter);
    }
    if (j.contains("pod")) {
        const json& pod = j.at("pod");
        check_keys(pod, "pod", {"n_rb", "energy_tol", "mass_weighted"});
        if (pod.contains("n_rb") && pod.contains("energy_tol")) {
            throw ConfigError("config: pod.n_rb and pod.energy_tol are mutually exclusive");
        }
        if (pod.contains("energy_tol")) {
            c.pod_use_energy = true;
            c.pod_energy_tol = pod.at("energy_tol").get<double>();
        } else if (pod.contains("n_rb")) {
            c.pod_use_energy = false;
            c.pod_n_rb = pod.at("n_rb").get<int>();
        }
        c.pod_mass_weighted = get_or(pod, "mass_weighted", c.pod_mass_weighted);
    }
    if (j.contains("nn")) {
        const json& nn_obj = j.at("nn");
        check_keys(nn_obj, "nn", {"hidden_layers", "hidden_width", "leaky_slope", "train"});
        c.hidden_layers = get_or(nn_obj, "hidden_layers", c.hidden_layers);
        c.hidden_width = get_or(nn_obj, "hidden_width", c.hidden_width);
        c.leaky_slope = get_or(nn_obj, "leaky_slope", c.leaky_slope);
        if (nn_obj.contains("train")) {
            const json& train = nn_obj.at("train");
            check_keys(train, "nn.train", {"learning_rate", "batch_size", "l2_weight", "max_epochs", "patience",
                                           "validation_fraction", "seed"});
            c.train.learning_rate = get_or(train, "learning_rate", c.train.learning_rate);
            c.train.batch_size = get_or(train, "batch_size", c.train.batch_size);
            c.train.l2_weight = get_or(train, "l2_weight", c.train.l2_weight);
            c.train.max_epochs = get_or(train, "max_epochs", c.train.max_epochs);
            c.train.patience = get_or(train, "patience", c.train.patience);
            c.train.validation_fraction = get_or(train, "validation_fraction", c.train.validation_fraction);
            c.train.seed = get_or<std::uint64_t>(train, "seed", c.train.seed);
        }
    }
    if (j.contains("paths")) {
        const json& paths = j.at("paths");
        check_keys(paths, "paths", {"out_dir"});
        c.out_dir = get_or<std::string>(paths, "out_dir", c.out_dir);
    }

    validate(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

nlohmann::json to_json(const RunConfig& c) {
    json j;
    j["mesh"] = {{"n_elements", c.n_elements}};
    j["time"] = {{"t_final", c.t_final}, {"n_t", c.n_t}};
    j["physics"] = {{"beta", c.beta}, {"forcing", c.forcing_constant}};
    j["box"] = {{"h", {c.box.dims[0].lower, c.box.dims[0].upper}},
                {"omega", {c.box.dims[1].lower, c.box.dims[1].upper}},
                {"epsilon", {c.box.dims[2].lower, c.box.dims[2].upper}},
                {"log_epsilon", c.box.dims[2].log_scale}};
    j["sampling"] = {{"n_p", c.n_p},
                     {"n_test", c.n_test},
                     {"seed", c.sample_seed},
                     {"midpoint_strata", c.midpoint_strata}};
    j["sqp"] = {{"tol", c.sqp_tol}, {"abs_tol", c.sqp_abs_tol}, {"max_iter", c.sqp_max_iter}};
    if (c.pod_use_energy) {
        j["pod"] = {{"energy_tol", c.pod_energy_tol}, {"mass_weighted", c.pod_mass_weighted}};
    } else {
        j["pod"] = {{"n_rb", c.pod_n_rb}, {"mass_weighted", c.pod_mass_weighted}};
    }
    j["nn"] = {{"hidden_layers", c.hidden_layers},
               {"hidden_width", c.hidden_width},
               {"leaky_slope", c.leaky_slope},
               {"train",
                {{"learning_rate", c.train.learning_rate},
                 {"batch_size", c.train.batch_size},
                 {"l2_weight", c.train.l2_weight},
                 {"max_epochs", c.train.max_epochs},
                 {"patience", c.train.patience},
                 {"validation_fraction", c.train.validation_fraction},
                 {"seed", c.train.seed}}}};
    j["paths"] = {{"out_dir", c.out_dir}};
    return j;
}

std::string fingerprint(const RunConfig& config) {
    json j = to_json(config);
    j.erase("paths");
    return fnv1a_hex(j.dump());
}

}  // namespace podnn::config
