#include "podnn/pod.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>

namespace podnn::pod {

namespace {

// Deterministic orientation: the largest-magnitude entry of each mode is
// positive (first such entry on ties).
void fix_signs(Matrix& modes) {
    for (Index j = 0; j < modes.cols(); ++j) {
        Index at = 0;
        modes.col(j).cwiseAbs().maxCoeff(&at);
        if (modes(at, j) < 0.0) modes.col(j) = -modes.col(j);
    }
}

int resolve_n_rb(const Truncation& truncation, const Vector& eigenvalues) {
    const int max_rank = static_cast<int>(eigenvalues.size());
    if (!truncation.use_energy) {
        if (truncation.n_rb < 0) throw std::invalid_argument("compute_pod: n_rb must be nonnegative");
        return std::min(truncation.n_rb, max_rank);
    }
    const double total = eigenvalues.sum();
    double tail = total;
    int k = 0;
    while (k < max_rank && tail > truncation.energy_tol * total) {
        tail -= eigenvalues[k];
        ++k;
    }
    return k;
}

}  // namespace

Truncation Truncation::by_rank(int n_rb) {
    Truncation t;
    t.use_energy = false;
    t.n_rb = n_rb;
    return t;
}

Truncation Truncation::by_energy(double tail_fraction) {
    if (!(tail_fraction >= 0.0)) throw std::invalid_argument("Truncation: tail fraction must be nonnegative");
    Truncation t;
    t.use_energy = true;
    t.energy_tol = tail_fraction;
    return t;
}

PodBasis compute_pod(const SnapshotSet& snapshots, const Truncation& truncation, const SparseMatrix* mass) {
    const Matrix& s = snapshots.matrix;
    if (s.size() == 0) throw std::invalid_argument("compute_pod: empty snapshot matrix");
    if (!s.allFinite()) throw std::invalid_argument("compute_pod: snapshot matrix contains non-finite entries");
    if (s.norm() == 0.0) throw std::invalid_argument("compute_pod: all-zero snapshot matrix");
    if (!snapshots.provenance.empty() && static_cast<Index>(snapshots.provenance.size()) != s.cols()) {
        throw std::invalid_argument("compute_pod: provenance length does not match snapshot count");
    }

    PodBasis basis;
    if (mass == nullptr) {
        Eigen::BDCSVD<Matrix> svd(s, Eigen::ComputeThinU);
        basis.eigenvalues = svd.singularValues().array().square();
        basis.n_rb = resolve_n_rb(truncation, basis.eigenvalues);
        basis.modes = svd.matrixU().leftCols(basis.n_rb);
        fix_signs(basis.modes);
        basis.proj_rows = basis.modes.transpose();
        return basis;
    }

    // weighted variant: factor M = L L^T, run the SVD on L^T S, and map back.
    // Natural ordering keeps the factor unpermuted.
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> llt(*mass);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("compute_pod: weighting matrix is not SPD");
    const SparseMatrix l = llt.matrixL();
    const Matrix weighted = (l.transpose() * s).eval();
    Eigen::BDCSVD<Matrix> svd(weighted, Eigen::ComputeThinU);
    basis.eigenvalues = svd.singularValues().array().square();
    basis.n_rb = resolve_n_rb(truncation, basis.eigenvalues);
    Matrix u = svd.matrixU().leftCols(basis.n_rb);
    basis.modes = l.transpose().template triangularView<Eigen::Upper>().solve(u);
    fix_signs(basis.modes);
    basis.proj_rows = (basis.modes.transpose() * (*mass)).eval();
    return basis;
}

PodBasis truncate(const PodBasis& basis, int n_rb) {
    if (n_rb < 0 || n_rb > basis.n_rb) {
        throw std::invalid_argument("truncate: requested size exceeds the stored basis");
    }
    PodBasis out;
    out.modes = basis.modes.leftCols(n_rb);
    out.proj_rows = basis.proj_rows.topRows(n_rb);
    out.eigenvalues = basis.eigenvalues;
    out.n_rb = n_rb;
    return out;
}

Vector project(const PodBasis& basis, const SpaceTimeField& field) {
    if (field.n_space() != basis.modes.rows()) {
        throw std::invalid_argument("project: field does not match basis dimension");
    }
    Vector coeffs(static_cast<Index>(basis.n_rb) * field.n_t);
    for (int t = 0; t < field.n_t; ++t) {
        coeffs.segment(static_cast<Index>(t) * basis.n_rb, basis.n_rb) = basis.proj_rows * field.block(t);
    }
    return coeffs;
}

SpaceTimeField lift(const PodBasis& basis, const Vector& coeffs, int n_t, double dt) {
    if (n_t < 1 || coeffs.size() != static_cast<Index>(basis.n_rb) * n_t) {
        throw std::invalid_argument("lift: coefficient length does not match n_rb * n_t");
    }
    SpaceTimeField field(static_cast<int>(basis.modes.rows()), n_t, dt);
    for (int t = 0; t < n_t; ++t) {
        field.block(t) = basis.modes * coeffs.segment(static_cast<Index>(t) * basis.n_rb, basis.n_rb);
    }
    return field;
}

double projection_error(const SnapshotSet& snapshots, const PodBasis& basis) {
    const Matrix& s = snapshots.matrix;
    if (s.rows() != basis.modes.rows()) {
        throw std::invalid_argument("projection_error: snapshot rows do not match basis dimension");
    }
    double total = 0.0;
    for (Index j = 0; j < s.cols(); ++j) {
        const Vector residual = s.col(j) - basis.modes * (basis.proj_rows * s.col(j));
        total += residual.squaredNorm();
    }
    return total;
}

double tail_energy(const PodBasis& basis) {
    return basis.eigenvalues.tail(basis.eigenvalues.size() - basis.n_rb).sum();
}

}  // namespace podnn::pod
