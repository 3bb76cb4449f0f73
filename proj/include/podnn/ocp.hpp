#pragma once

#include "podnn/fem.hpp"

#include <vector>

namespace podnn::ocp {

using fem::FemOperators;
using fem::Mesh1D;
using fem::SpaceTimeField;

/// Tracking-type optimal control problem for the viscous Burgers equation:
/// minimize 1/2 ||y - y_d||^2 + beta/2 ||u||^2 subject to
/// dy/dt - epsilon y_xx + y y_x = f + b u, zero Dirichlet data, y(0) = y0.
struct ControlProblem {
    double epsilon = 0.0;
    double beta = 0.0;
    double t_final = 0.0;
    int n_t = 0;
    fem::SpatialField y0;       // interior nodal values at t = 0
    SpaceTimeField y_desired;
    SpaceTimeField forcing;
    fem::SpatialField control_mask_b;  // nodal control indicator b

    double dt() const { return t_final / n_t; }
};

struct OptimalityIterate {
    SpaceTimeField state_y;
    SpaceTimeField adjoint_p;
};

struct SqpReport {
    int n_iterations = 0;
    std::vector<double> residual_history;
    bool converged = false;
    double wall_time_seconds = 0.0;
};

struct SaddleSystem {
    SparseMatrix matrix;  // 2 N_delta N_t square
    Vector rhs;
};

struct SqpResult {
    OptimalityIterate iterate;
    SpaceTimeField control;
    SqpReport report;
};

void validate_problem(const ControlProblem& problem, const Mesh1D& mesh);

/// Coupled space-time system of one Newton step, linearized about iterate_k.
/// Unknown ordering is [y_1 ... y_Nt, p_1 ... p_Nt], each block time-major.
SaddleSystem assemble_saddle_system(const ControlProblem& problem, const OptimalityIterate& iterate_k,
                                    const Mesh1D& mesh, const FemOperators& ops);

/// Residual of the nonlinear discrete optimality system at the given iterate,
/// stacked in the same ordering as the saddle system.
Vector optimality_residual(const ControlProblem& problem, const OptimalityIterate& iterate, const Mesh1D& mesh,
                           const FemOperators& ops);

/// Newton/SQP iteration on the discrete optimality system, all time steps
/// coupled. Non-convergence is reported through SqpReport; a singular saddle
/// system is a hard error.
SqpResult sqp_solve(const ControlProblem& problem, const Mesh1D& mesh, const FemOperators& ops, double tol = 1e-8,
                    int max_iter = 20, double abs_tol = 1e-10);

/// u = (b / beta) p, elementwise per time block.
SpaceTimeField recover_control(const SpaceTimeField& adjoint_p, const ControlProblem& problem);

/// Sequential implicit Euler with a per-step Newton solve of the nonlinear
/// state equation driven by the given control.
SpaceTimeField forward_solve(const ControlProblem& problem, const SpaceTimeField& control_u, const Mesh1D& mesh,
                             const FemOperators& ops);

/// Tracking objective in the discrete space-time L2 norm.
double objective(const SpaceTimeField& state_y, const SpaceTimeField& control_u, const ControlProblem& problem,
                 const FemOperators& ops);

}  // namespace podnn::ocp
