#pragma once

#include "podnn/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace podnn::io {

/// Named f64 array, row-major.
struct ArrayRecord {
    std::vector<std::uint64_t> shape;
    std::vector<double> data;

    std::uint64_t element_count() const;
};

/// Persistent artifact container. On disk: magic "PODNN1", a version word,
/// then length-prefixed records (named little-endian f64 arrays plus one JSON
/// metadata record). Records are stored sorted by name, so writes are
/// byte-deterministic. Round trips are bit-exact.
struct Container {
    std::map<std::string, ArrayRecord> arrays;
    nlohmann::json meta = nlohmann::json::object();
};

void write_container(const std::string& path, const Container& container);
Container read_container(const std::string& path);

// Eigen adapters
ArrayRecord from_matrix(const Matrix& m);
ArrayRecord from_vector(const Vector& v);
Matrix to_matrix(const ArrayRecord& record);
Vector to_vector(const ArrayRecord& record);

/// FNV-1a 64 over the little-endian bytes of the array data.
std::string data_hash(const ArrayRecord& record);

}  // namespace podnn::io
