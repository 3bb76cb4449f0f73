#pragma once

#include "podnn/fem.hpp"
#include "podnn/types.hpp"

#include <vector>

namespace podnn::pod {

using fem::SpaceTimeField;

/// Columns are per-time-instance spatial snapshots; provenance records which
/// parameter sample and time index produced each column.
struct SnapshotSet {
    struct Source {
        int sample_id = 0;
        int time_index = 0;
    };
    Matrix matrix;  // N_delta x N_s
    std::vector<Source> provenance;
};

/// Orthonormal reduced basis from the snapshot correlation eigenproblem,
/// realized as a thin SVD. eigenvalues holds the full spectrum sigma_i^2.
struct PodBasis {
    Matrix modes;      // N_delta x n_rb, orthonormal columns
    Matrix proj_rows;  // n_rb x N_delta row map used by project()
    Vector eigenvalues;
    int n_rb = 0;
};

struct Truncation {
    static Truncation by_rank(int n_rb);
    static Truncation by_energy(double tail_fraction);

    bool use_energy = false;
    int n_rb = 0;
    double energy_tol = 0.0;
};

/// When mass is given, modes are orthonormal in the induced inner product
/// instead of the Euclidean one (non-default variant).
PodBasis compute_pod(const SnapshotSet& snapshots, const Truncation& truncation,
                     const SparseMatrix* mass = nullptr);

/// Keeps the leading n_rb modes of an existing basis.
PodBasis truncate(const PodBasis& basis, int n_rb);

/// Blockwise per-time-step reduction: coefficients are stacked time-major
/// with n_rb values per step.
Vector project(const PodBasis& basis, const SpaceTimeField& field);

/// Inverse-direction transform of project.
SpaceTimeField lift(const PodBasis& basis, const Vector& coeffs, int n_t, double dt);

/// Direct snapshot projection residual sum_i ||u_i - W W^T u_i||^2.
double projection_error(const SnapshotSet& snapshots, const PodBasis& basis);

/// Sum of the eigenvalues of the modes left out of the basis.
double tail_energy(const PodBasis& basis);

}  // namespace podnn::pod
