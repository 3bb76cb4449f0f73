#include "podnn/sampling.hpp"

#include "podnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace podnn::sampling {

namespace {

void validate_box(const ParameterBox& box) {
    if (box.dims.empty()) throw std::invalid_argument("ParameterBox: no dimensions");
    for (const auto& dim : box.dims) {
        if (!(dim.lower < dim.upper)) {
            throw std::invalid_argument("ParameterBox: lower bound must be below upper for " + dim.name);
        }
        if (dim.log_scale && !(dim.lower > 0.0)) {
            throw std::invalid_argument("ParameterBox: log-scaled dimension needs positive bounds for " + dim.name);
        }
    }
}

}  // namespace

bool ParameterBox::contains(const Vector& values) const {
    if (values.size() != size()) return false;
    for (int d = 0; d < size(); ++d) {
        if (values[d] < dims[d].lower || values[d] > dims[d].upper) return false;
    }
    return true;
}

std::vector<ParameterSample> latin_hypercube(const ParameterBox& box, int n_samples, std::uint64_t seed,
                                             bool midpoint_strata) {
    validate_box(box);
    if (n_samples < 1) throw std::invalid_argument("latin_hypercube: need at least one sample");

    rng::Engine eng(seed);
    const int p = box.size();
    std::vector<ParameterSample> samples(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        samples[i].sample_id = i;
        samples[i].values.resize(p);
    }

    std::vector<int> strata(n_samples);
    for (int d = 0; d < p; ++d) {
        std::iota(strata.begin(), strata.end(), 0);
        rng::shuffle(strata, eng);
        const auto& dim = box.dims[d];
        const double lo = dim.log_scale ? std::log(dim.lower) : dim.lower;
        const double hi = dim.log_scale ? std::log(dim.upper) : dim.upper;
        const double width = (hi - lo) / n_samples;
        for (int i = 0; i < n_samples; ++i) {
            const double offset = midpoint_strata ? 0.5 : rng::uniform01(eng);
            double value = lo + (strata[i] + offset) * width;
            if (dim.log_scale) value = std::exp(value);
            value = std::clamp(value, dim.lower, dim.upper);
            samples[i].values[d] = value;
        }
    }
    return samples;
}

std::pair<std::vector<ParameterSample>, std::vector<ParameterSample>> split(
    const std::vector<ParameterSample>& samples, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
    }
    const int n = static_cast<int>(samples.size());
    if (n < 2) throw std::invalid_argument("split: need at least two samples");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::Engine eng(seed);
    rng::shuffle(order, eng);

    int n_train = static_cast<int>(std::lround(train_fraction * n));
    n_train = std::clamp(n_train, 1, n - 1);

    std::pair<std::vector<ParameterSample>, std::vector<ParameterSample>> out;
    out.first.reserve(n_train);
    out.second.reserve(n - n_train);
    for (int i = 0; i < n; ++i) {
        (i < n_train ? out.first : out.second).push_back(samples[order[i]]);
    }
    // deterministic presentation order regardless of the shuffle
    const auto by_id = [](const ParameterSample& a, const ParameterSample& b) { return a.sample_id < b.sample_id; };
    std::sort(out.first.begin(), out.first.end(), by_id);
    std::sort(out.second.begin(), out.second.end(), by_id);
    return out;
}

}  // namespace podnn::sampling
