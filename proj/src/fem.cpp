#include "podnn/fem.hpp"
#include "podnn/types.hpp"

#include <atomic>
#include <cmath>
#include <vector>

namespace podnn {

namespace instrumentation {

namespace {
std::atomic<std::uint64_t> g_linear_solves{0};
}

std::uint64_t linear_solve_count() { return g_linear_solves.load(); }
void count_linear_solve() { g_linear_solves.fetch_add(1); }

}  // namespace instrumentation

namespace fem {

namespace {

// 3-point Gauss rule on the reference element [0, 1]; exact through degree 5,
// which covers every integrand produced by linear elements here.
struct GaussRule {
    double xi[3];
    double wt[3];
};

const GaussRule& gauss3() {
    static const GaussRule rule = [] {
        GaussRule r;
        const double off = 0.5 * std::sqrt(0.6);
        r.xi[0] = 0.5 - off;
        r.xi[1] = 0.5;
        r.xi[2] = 0.5 + off;
        r.wt[0] = 5.0 / 18.0;
        r.wt[1] = 8.0 / 18.0;
        r.wt[2] = 5.0 / 18.0;
        return r;
    }();
    return rule;
}

// Nodal value of an interior-DOF field at a global mesh node; boundary nodes
// carry the homogeneous Dirichlet value.
inline double node_value(const Vector& interior, int global_node, int n_elements) {
    if (global_node == 0 || global_node == n_elements) return 0.0;
    return interior[global_node - 1];
}

void check_field(const Mesh1D& mesh, const Vector& w, const char* where) {
    if (w.size() != mesh.n_interior()) {
        throw std::invalid_argument(std::string(where) + ": field length does not match mesh interior size");
    }
}

// Assembles sum over elements of the quadrature of
// kernel(phi_i, dphi_i, phi_j, dphi_j, w, dw) into the interior-node matrix.
template <class Kernel>
SparseMatrix assemble_pairwise(const Mesh1D& mesh, const Vector* w, Kernel&& kernel) {
    const int n = mesh.n_elements;
    const int ni = mesh.n_interior();
    const double h = mesh.dx();
    const GaussRule& rule = gauss3();

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(4 * n));

    for (int e = 0; e < n; ++e) {
        const double wl = w ? node_value(*w, e, n) : 0.0;
        const double wr = w ? node_value(*w, e + 1, n) : 0.0;
        const double dw = (wr - wl) / h;

        double elem[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
        for (int q = 0; q < 3; ++q) {
            const double xi = rule.xi[q];
            const double weight = rule.wt[q] * h;
            const double phi[2] = {1.0 - xi, xi};
            const double dphi[2] = {-1.0 / h, 1.0 / h};
            const double wq = wl * (1.0 - xi) + wr * xi;
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    elem[a][b] += weight * kernel(phi[a], dphi[a], phi[b], dphi[b], wq, dw);
                }
            }
        }

        for (int a = 0; a < 2; ++a) {
            const int gi = e + a;
            if (gi == 0 || gi == n) continue;
            for (int b = 0; b < 2; ++b) {
                const int gj = e + b;
                if (gj == 0 || gj == n) continue;
                triplets.emplace_back(gi - 1, gj - 1, elem[a][b]);
            }
        }
    }

    SparseMatrix out(ni, ni);
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

}  // namespace

SpaceTimeField replicate(const Vector& spatial, int n_t, double dt) {
    SpaceTimeField field(static_cast<int>(spatial.size()), n_t, dt);
    for (int t = 0; t < n_t; ++t) {
        field.block(t) = spatial;
    }
    return field;
}

SparseMatrix assemble_mass(const Mesh1D& mesh) {
    return assemble_pairwise(mesh, nullptr,
                             [](double pi, double, double pj, double, double, double) { return pi * pj; });
}

SparseMatrix assemble_stiffness(const Mesh1D& mesh) {
    return assemble_pairwise(mesh, nullptr,
                             [](double, double dpi, double, double dpj, double, double) { return dpi * dpj; });
}

SparseMatrix assemble_advection_linearized(const Mesh1D& mesh, const Vector& y_k) {
    check_field(mesh, y_k, "assemble_advection_linearized");
    return assemble_pairwise(mesh, &y_k, [](double pi, double, double pj, double dpj, double w, double dw) {
        return pi * (dw * pj + w * dpj);
    });
}

SparseMatrix assemble_adjoint_advection(const Mesh1D& mesh, const Vector& y_k) {
    check_field(mesh, y_k, "assemble_adjoint_advection");
    return assemble_pairwise(mesh, &y_k, [](double pi, double, double, double dpj, double w, double) {
        return -pi * w * dpj;
    });
}

SparseMatrix assemble_reaction(const Mesh1D& mesh, const Vector& w) {
    check_field(mesh, w, "assemble_reaction");
    return assemble_pairwise(mesh, &w, [](double pi, double, double pj, double, double, double dw) {
        return pi * dw * pj;
    });
}

Vector convection_vector(const Mesh1D& mesh, const Vector& w) {
    check_field(mesh, w, "convection_vector");
    const int n = mesh.n_elements;
    const double h = mesh.dx();
    const GaussRule& rule = gauss3();

    Vector out = Vector::Zero(mesh.n_interior());
    for (int e = 0; e < n; ++e) {
        const double wl = node_value(w, e, n);
        const double wr = node_value(w, e + 1, n);
        const double dw = (wr - wl) / h;
        double elem[2] = {0.0, 0.0};
        for (int q = 0; q < 3; ++q) {
            const double xi = rule.xi[q];
            const double weight = rule.wt[q] * h;
            const double wq = wl * (1.0 - xi) + wr * xi;
            elem[0] += weight * (1.0 - xi) * wq * dw;
            elem[1] += weight * xi * wq * dw;
        }
        if (e != 0) out[e - 1] += elem[0];
        if (e + 1 != n) out[e] += elem[1];
    }
    return out;
}

FemOperators make_operators(const Mesh1D& mesh) {
    return FemOperators{assemble_mass(mesh), assemble_stiffness(mesh)};
}

double l2_norm(const SpaceTimeField& field, const FemOperators& ops) {
    if (field.n_space() != ops.mass.rows()) {
        throw std::invalid_argument("l2_norm: field does not match operator dimensions");
    }
    double sum = 0.0;
    for (int t = 0; t < field.n_t; ++t) {
        const auto u_t = field.block(t);
        sum += field.dt * u_t.dot(ops.mass * u_t);
    }
    return std::sqrt(std::max(sum, 0.0));
}

}  // namespace fem
}  // namespace podnn
