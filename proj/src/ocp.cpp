#include "podnn/ocp.hpp"

#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

namespace podnn::ocp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// State-adjoint coupling (1/beta) M diag(b^2): the mask acts nodally, exactly
// matching recover_control followed by the forward control term M (b o u).
SparseMatrix control_coupling(const ControlProblem& problem, const FemOperators& ops) {
    const Vector b2 = problem.control_mask_b.array().square();
    return SparseMatrix((ops.mass * b2.asDiagonal()) / problem.beta);
}

void append_block_triplets(std::vector<Eigen::Triplet<double>>& out, const SparseMatrix& block, Index row0,
                           Index col0, double scale = 1.0) {
    for (int outer = 0; outer < block.outerSize(); ++outer) {
        for (SparseMatrix::InnerIterator it(block, outer); it; ++it) {
            out.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
        }
    }
}

}  // namespace

void validate_problem(const ControlProblem& problem, const Mesh1D& mesh) {
    const int ni = mesh.n_interior();
    if (!(problem.epsilon > 0.0)) throw std::invalid_argument("ControlProblem: epsilon must be positive");
    if (!(problem.beta > 0.0)) throw std::invalid_argument("ControlProblem: beta must be positive");
    if (!(problem.t_final > 0.0)) throw std::invalid_argument("ControlProblem: t_final must be positive");
    if (problem.n_t < 2) throw std::invalid_argument("ControlProblem: need at least 2 time steps");
    if (problem.y0.size() != ni) throw std::invalid_argument("ControlProblem: y0 does not match mesh");
    if (problem.control_mask_b.size() != ni) throw std::invalid_argument("ControlProblem: mask does not match mesh");
    for (const SpaceTimeField* field : {&problem.y_desired, &problem.forcing}) {
        if (field->n_t != problem.n_t || field->n_space() != ni) {
            throw std::invalid_argument("ControlProblem: space-time data does not match mesh and n_t");
        }
    }
}

SaddleSystem assemble_saddle_system(const ControlProblem& problem, const OptimalityIterate& iterate_k,
                                    const Mesh1D& mesh, const FemOperators& ops) {
    validate_problem(problem, mesh);
    const int ni = mesh.n_interior();
    const int nt = problem.n_t;
    if (iterate_k.state_y.n_t != nt || iterate_k.state_y.n_space() != ni || iterate_k.adjoint_p.n_t != nt ||
        iterate_k.adjoint_p.n_space() != ni) {
        throw std::invalid_argument("assemble_saddle_system: iterate does not match problem dimensions");
    }
    if (!iterate_k.state_y.dofs.allFinite() || !iterate_k.adjoint_p.dofs.allFinite()) {
        throw std::invalid_argument("assemble_saddle_system: iterate contains non-finite entries");
    }

    const double dt = problem.dt();
    const SparseMatrix mass_dt = ops.mass / dt;
    const SparseMatrix diffusion = problem.epsilon * ops.stiffness;
    const SparseMatrix coupling = control_coupling(problem, ops);

    const Index n_total = 2 * static_cast<Index>(ni) * nt;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(nt) * 8 * ni);
    Vector rhs = Vector::Zero(n_total);

    const auto y_row = [&](int t) { return static_cast<Index>(t) * ni; };
    const auto p_row = [&](int t) { return static_cast<Index>(nt + t) * ni; };

    for (int t = 0; t < nt; ++t) {
        const Vector y_kt = iterate_k.state_y.block(t);
        const Vector p_kt = iterate_k.adjoint_p.block(t);

        // state row: M dy/dt + eps K y + A(y_k) y - (1/beta) Mb2 p = M f + n(y_k)
        const SparseMatrix state_diag = mass_dt + diffusion + fem::assemble_advection_linearized(mesh, y_kt);
        append_block_triplets(triplets, state_diag, y_row(t), y_row(t));
        append_block_triplets(triplets, coupling, y_row(t), p_row(t), -1.0);
        if (t > 0) {
            append_block_triplets(triplets, mass_dt, y_row(t), y_row(t - 1), -1.0);
        }
        Vector f1 = ops.mass * problem.forcing.block(t) + fem::convection_vector(mesh, y_kt);
        if (t == 0) {
            f1 += mass_dt * problem.y0;
        }
        rhs.segment(y_row(t), ni) = f1;

        // adjoint row: -M dp/dt + eps K p + B(y_k) p + (M - R(p_k)) y = M y_d - R(p_k) y_k
        const SparseMatrix adjoint_diag = mass_dt + diffusion + fem::assemble_adjoint_advection(mesh, y_kt);
        const SparseMatrix reaction = fem::assemble_reaction(mesh, p_kt);
        append_block_triplets(triplets, adjoint_diag, p_row(t), p_row(t));
        append_block_triplets(triplets, ops.mass, p_row(t), y_row(t));
        append_block_triplets(triplets, reaction, p_row(t), y_row(t), -1.0);
        if (t + 1 < nt) {
            append_block_triplets(triplets, mass_dt, p_row(t), p_row(t + 1), -1.0);
        }
        rhs.segment(p_row(t), ni) = ops.mass * problem.y_desired.block(t) - reaction * y_kt;
    }

    SaddleSystem system;
    system.matrix.resize(n_total, n_total);
    system.matrix.setFromTriplets(triplets.begin(), triplets.end());
    system.rhs = std::move(rhs);
    return system;
}

Vector optimality_residual(const ControlProblem& problem, const OptimalityIterate& iterate, const Mesh1D& mesh,
                           const FemOperators& ops) {
    validate_problem(problem, mesh);
    const int ni = mesh.n_interior();
    const int nt = problem.n_t;
    const double dt = problem.dt();
    const SparseMatrix coupling = control_coupling(problem, ops);

    Vector res = Vector::Zero(2 * static_cast<Index>(ni) * nt);
    for (int t = 0; t < nt; ++t) {
        const Vector y_t = iterate.state_y.block(t);
        const Vector p_t = iterate.adjoint_p.block(t);
        const Vector y_prev = (t == 0) ? problem.y0 : Vector(iterate.state_y.block(t - 1));
        const Vector p_next = (t + 1 == nt) ? Vector(Vector::Zero(ni)) : Vector(iterate.adjoint_p.block(t + 1));

        res.segment(static_cast<Index>(t) * ni, ni) =
            ops.mass * ((y_t - y_prev) / dt) + problem.epsilon * (ops.stiffness * y_t) +
            fem::convection_vector(mesh, y_t) - coupling * p_t - ops.mass * problem.forcing.block(t);

        res.segment(static_cast<Index>(nt + t) * ni, ni) =
            ops.mass * ((p_t - p_next) / dt) + problem.epsilon * (ops.stiffness * p_t) +
            fem::assemble_adjoint_advection(mesh, y_t) * p_t + ops.mass * (y_t - problem.y_desired.block(t));
    }
    return res;
}

SqpResult sqp_solve(const ControlProblem& problem, const Mesh1D& mesh, const FemOperators& ops, double tol,
                    int max_iter, double abs_tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("sqp_solve: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("sqp_solve: max_iter must be at least 1");
    validate_problem(problem, mesh);

    const auto start = Clock::now();
    const int ni = mesh.n_interior();
    const int nt = problem.n_t;
    const double dt = problem.dt();

    OptimalityIterate iterate{fem::replicate(problem.y0, nt, dt), SpaceTimeField(ni, nt, dt)};
    const double res0 = optimality_residual(problem, iterate, mesh, ops).norm();
    const double threshold = std::max(tol * res0, abs_tol);

    SqpResult result;
    Eigen::SparseLU<SparseMatrix> lu;
    for (int k = 0; k < max_iter; ++k) {
        const SaddleSystem system = assemble_saddle_system(problem, iterate, mesh, ops);
        lu.compute(system.matrix);
        if (lu.info() != Eigen::Success) {
            throw SolverError("sqp_solve: saddle system factorization failed");
        }
        const Vector z = lu.solve(system.rhs);
        instrumentation::count_linear_solve();
        if (!z.allFinite()) {
            result.report.converged = false;
            result.report.residual_history.push_back(std::numeric_limits<double>::quiet_NaN());
            break;
        }

        iterate.state_y.dofs = z.head(static_cast<Index>(ni) * nt);
        iterate.adjoint_p.dofs = z.tail(static_cast<Index>(ni) * nt);

        const double res = optimality_residual(problem, iterate, mesh, ops).norm();
        result.report.residual_history.push_back(res);
        if (!std::isfinite(res)) {
            result.report.converged = false;
            break;
        }
        if (res < threshold) {
            result.report.converged = true;
            break;
        }
    }

    result.report.n_iterations = static_cast<int>(result.report.residual_history.size());
    result.report.wall_time_seconds = seconds_since(start);
    result.iterate = std::move(iterate);
    result.control = recover_control(result.iterate.adjoint_p, problem);
    return result;
}

SpaceTimeField recover_control(const SpaceTimeField& adjoint_p, const ControlProblem& problem) {
    if (!adjoint_p.dofs.allFinite()) {
        throw std::invalid_argument("recover_control: adjoint contains non-finite entries");
    }
    SpaceTimeField control = adjoint_p;
    for (int t = 0; t < control.n_t; ++t) {
        control.block(t) = (problem.control_mask_b.array() * adjoint_p.block(t).array() / problem.beta).matrix();
    }
    return control;
}

SpaceTimeField forward_solve(const ControlProblem& problem, const SpaceTimeField& control_u, const Mesh1D& mesh,
                             const FemOperators& ops) {
    validate_problem(problem, mesh);
    const int ni = mesh.n_interior();
    const int nt = problem.n_t;
    if (control_u.n_t != nt || control_u.n_space() != ni) {
        throw std::invalid_argument("forward_solve: control does not match problem dimensions");
    }
    const double dt = problem.dt();
    const SparseMatrix mass_dt = ops.mass / dt;
    const SparseMatrix diffusion = problem.epsilon * ops.stiffness;
    constexpr int kMaxNewton = 30;
    constexpr double kStepTol = 1e-10;

    SpaceTimeField state(ni, nt, dt);
    Vector y_prev = problem.y0;
    Eigen::SparseLU<SparseMatrix> lu;
    for (int t = 0; t < nt; ++t) {
        const Vector load =
            ops.mass * (problem.forcing.block(t) +
                        (problem.control_mask_b.array() * control_u.block(t).array()).matrix());
        Vector y = y_prev;
        bool done = false;
        for (int it = 0; it < kMaxNewton; ++it) {
            const Vector residual = mass_dt * (y - y_prev) + diffusion * y + fem::convection_vector(mesh, y) - load;
            if (residual.norm() < kStepTol) {
                done = true;
                break;
            }
            const SparseMatrix jac = mass_dt + diffusion + fem::assemble_advection_linearized(mesh, y);
            lu.compute(jac);
            if (lu.info() != Eigen::Success) {
                throw SolverError("forward_solve: Jacobian factorization failed");
            }
            y -= lu.solve(residual).eval();
            instrumentation::count_linear_solve();
            if (!y.allFinite()) {
                throw SolverError("forward_solve: Newton iterate diverged");
            }
        }
        if (!done) {
            throw SolverError("forward_solve: Newton did not converge within 30 iterations");
        }
        state.block(t) = y;
        y_prev = y;
    }
    return state;
}

double objective(const SpaceTimeField& state_y, const SpaceTimeField& control_u, const ControlProblem& problem,
                 const FemOperators& ops) {
    const int ni = static_cast<int>(ops.mass.rows());
    if (state_y.n_space() != ni || control_u.n_space() != ni || state_y.n_t != problem.n_t ||
        control_u.n_t != problem.n_t) {
        throw std::invalid_argument("objective: field dimensions do not match the problem");
    }
    double tracking = 0.0;
    double energy = 0.0;
    const double dt = problem.dt();
    for (int t = 0; t < problem.n_t; ++t) {
        const Vector diff = state_y.block(t) - problem.y_desired.block(t);
        tracking += dt * diff.dot(ops.mass * diff);
        const Vector u_t = control_u.block(t);
        energy += dt * u_t.dot(ops.mass * u_t);
    }
    return 0.5 * tracking + 0.5 * problem.beta * energy;
}

}  // namespace podnn::ocp
