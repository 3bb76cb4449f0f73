#pragma once

#include "podnn/types.hpp"

#include <cmath>
#include <stdexcept>

namespace podnn::fem {

/// Interior-node coefficient vector of a piecewise-linear field with
/// homogeneous Dirichlet boundary values.
using SpatialField = Vector;

/// Uniform 1-D mesh with homogeneous Dirichlet boundaries. Unknowns live on
/// the interior nodes only; both boundary values are identically zero.
struct Mesh1D {
    double left = 0.0;
    double right = 1.0;
    int n_elements = 0;
    Vector node_coords;  // length n_elements + 1, strictly increasing

    int n_interior() const { return n_elements - 1; }
    double dx() const { return (right - left) / n_elements; }
};

Mesh1D build_mesh(int n_elements, double left, double right);

/// Nodal interpolant of f on the interior nodes.
template <class F>
SpatialField interpolate(const Mesh1D& mesh, F&& f) {
    SpatialField values(mesh.n_interior());
    for (int i = 0; i < mesh.n_interior(); ++i) {
        const double v = f(mesh.node_coords[i + 1]);
        if (!std::isfinite(v)) {
            throw std::invalid_argument("interpolate: non-finite value at node");
        }
        values[i] = v;
    }
    return values;
}

}  // namespace podnn::fem
