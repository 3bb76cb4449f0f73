#pragma once

#include "podnn/mesh.hpp"
#include "podnn/types.hpp"

namespace podnn::fem {

/// Field over the full space-time cylinder, stored time-major: all interior
/// spatial DOFs of the first time step, then the second, and so on.
struct SpaceTimeField {
    Vector dofs;
    int n_t = 0;
    double dt = 0.0;

    SpaceTimeField() = default;
    SpaceTimeField(int n_space, int n_t_, double dt_)
        : dofs(Vector::Zero(static_cast<Index>(n_space) * n_t_)), n_t(n_t_), dt(dt_) {}

    int n_space() const { return n_t > 0 ? static_cast<int>(dofs.size()) / n_t : 0; }
    double t_final() const { return dt * n_t; }

    /// Spatial block of time step t (0-based; t = 0 is the first computed step).
    Eigen::VectorBlock<Vector> block(int t) {
        return dofs.segment(static_cast<Index>(t) * n_space(), n_space());
    }
    Eigen::VectorBlock<const Vector> block(int t) const {
        return dofs.segment(static_cast<Index>(t) * n_space(), n_space());
    }
};

/// Replicates a spatial field over all time steps.
SpaceTimeField replicate(const SpatialField& spatial, int n_t, double dt);

struct FemOperators {
    SparseMatrix mass;       // tridiagonal, SPD
    SparseMatrix stiffness;  // Dirichlet-eliminated Laplacian, SPD
};

/// L2 inner-product matrix of the interior hat functions.
SparseMatrix assemble_mass(const Mesh1D& mesh);

/// Unscaled Laplacian; the diffusion rate is applied at system-assembly time.
SparseMatrix assemble_stiffness(const Mesh1D& mesh);

/// A(w) with A_ij = \int phi_i d/dx(w phi_j) dx; w is the piecewise-linear
/// function with the given interior nodal values and zero boundary values.
SparseMatrix assemble_advection_linearized(const Mesh1D& mesh, const SpatialField& y_k);

/// B(w) with B_ij = -\int phi_i w dphi_j/dx dx. Globally B(w) = A(w)^T.
SparseMatrix assemble_adjoint_advection(const Mesh1D& mesh, const SpatialField& y_k);

/// R(w) with R_ij = \int phi_i (dw/dx) phi_j dx; dw/dx is piecewise constant.
SparseMatrix assemble_reaction(const Mesh1D& mesh, const SpatialField& w);

/// Weak form of the quadratic advection term: out_i = \int phi_i w dw/dx dx.
Vector convection_vector(const Mesh1D& mesh, const SpatialField& w);

FemOperators make_operators(const Mesh1D& mesh);

/// Discrete space-time L2 norm: sqrt(sum_t dt * u_t^T M u_t).
double l2_norm(const SpaceTimeField& field, const FemOperators& ops);

}  // namespace podnn::fem
