#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <stdexcept>

namespace podnn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

/// Malformed configuration file or value (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Artifact was produced under a different configuration (CLI exit code 3).
class FingerprintMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solver breakdown or failure budget exceeded (CLI exit code 4).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace instrumentation {

/// Number of sparse linear solves performed so far in this process.
/// The online inference path must leave this untouched.
std::uint64_t linear_solve_count();
void count_linear_solve();

}  // namespace instrumentation

}  // namespace podnn
