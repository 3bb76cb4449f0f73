#include "podnn/mesh.hpp"

namespace podnn::fem {

Mesh1D build_mesh(int n_elements, double left, double right) {
    if (n_elements < 2) {
        throw std::invalid_argument("build_mesh: need at least 2 elements");
    }
    if (!(left < right)) {
        throw std::invalid_argument("build_mesh: left boundary must be below right");
    }
    Mesh1D mesh;
    mesh.left = left;
    mesh.right = right;
    mesh.n_elements = n_elements;
    mesh.node_coords = Vector::LinSpaced(n_elements + 1, left, right);
    return mesh;
}

}  // namespace podnn::fem
