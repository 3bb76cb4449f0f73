#pragma once

#include "podnn/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace podnn::sampling {

struct ParameterBox {
    struct Dim {
        std::string name;
        double lower = 0.0;
        double upper = 1.0;
        bool log_scale = false;  // stratify in log coordinates
    };
    std::vector<Dim> dims;

    int size() const { return static_cast<int>(dims.size()); }
    bool contains(const Vector& values) const;
};

struct ParameterSample {
    Vector values;
    int sample_id = 0;
};

/// Latin Hypercube sample of the box: per dimension, exactly one sample in
/// each of the n_samples equal-width strata. Deterministic per seed. With
/// midpoint_strata the within-stratum placement is the stratum center.
std::vector<ParameterSample> latin_hypercube(const ParameterBox& box, int n_samples, std::uint64_t seed,
                                             bool midpoint_strata = false);

/// Deterministic disjoint and exhaustive split; train gets
/// round(train_fraction * n) samples, clamped to keep both sides non-empty.
std::pair<std::vector<ParameterSample>, std::vector<ParameterSample>> split(
    const std::vector<ParameterSample>& samples, double train_fraction, std::uint64_t seed);

}  // namespace podnn::sampling
