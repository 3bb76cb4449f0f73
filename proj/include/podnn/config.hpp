#pragma once

#include "podnn/nn.hpp"
#include "podnn/sampling.hpp"
#include "podnn/types.hpp"

#include <json.hpp>

#include <string>

namespace podnn::config {

/// Aggregated run configuration. Every field has a desk-scale default; JSON
/// input is validated strictly (unknown keys are rejected).
struct RunConfig {
    // mesh
    int n_elements = 64;
    // time
    double t_final = 0.5;
    int n_t = 30;
    // physics
    double beta = 1e-2;
    double forcing_constant = 0.0;
    // parameter box (h, omega, epsilon)
    sampling::ParameterBox box;
    // sampling
    int n_p = 40;      // training solves
    int n_test = 10;   // held-out solves
    std::uint64_t sample_seed = 2024;
    bool midpoint_strata = false;
    // sqp
    double sqp_tol = 1e-8;
    double sqp_abs_tol = 1e-10;
    int sqp_max_iter = 20;
    // pod truncation: exactly one of the two is active
    bool pod_use_energy = false;
    int pod_n_rb = 20;
    double pod_energy_tol = 1e-6;
    bool pod_mass_weighted = false;
    // network
    int hidden_layers = 3;
    int hidden_width = 100;
    double leaky_slope = 0.01;
    nn::TrainConfig train;
    // paths (not part of the fingerprint)
    std::string out_dir;

    RunConfig();
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

/// FNV-1a 64 hash of the canonicalized semantic fields (paths excluded),
/// rendered as 16 hex digits.
std::string fingerprint(const RunConfig& config);

}  // namespace podnn::config
