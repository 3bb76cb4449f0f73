#include "podnn/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace podnn::io {

namespace {

constexpr char kMagic[6] = {'P', 'O', 'D', 'N', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

enum class RecordKind : std::uint8_t { Array = 0, Json = 1 };

void write_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(out, b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    write_bytes(out, b, 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

void read_bytes(std::istream& in, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("container: truncated file");
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    read_bytes(in, b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    read_bytes(in, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

void write_name(std::ostream& out, const std::string& name) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    write_bytes(out, name.data(), name.size());
}

}  // namespace

std::uint64_t ArrayRecord::element_count() const {
    std::uint64_t n = 1;
    for (std::uint64_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

void write_container(const std::string& path, const Container& container) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("container: cannot open " + path + " for writing");

    write_bytes(out, kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_u64(out, container.arrays.size() + 1);  // arrays plus the metadata record

    for (const auto& [name, record] : container.arrays) {
        if (record.element_count() != record.data.size()) {
            throw std::runtime_error("container: shape of '" + name + "' does not match its data");
        }
        write_name(out, name);
        out.put(static_cast<char>(RecordKind::Array));
        write_u64(out, record.shape.size());
        for (std::uint64_t d : record.shape) write_u64(out, d);
        for (double v : record.data) write_f64(out, v);
    }

    const std::string meta = container.meta.dump();
    write_name(out, "meta");
    out.put(static_cast<char>(RecordKind::Json));
    write_u64(out, meta.size());
    write_bytes(out, meta.data(), meta.size());

    if (!out) throw std::runtime_error("container: write to " + path + " failed");
}

Container read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("container: cannot open " + path);

    char magic[6];
    read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("container: bad magic in " + path);
    }
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw std::runtime_error("container: unsupported format version in " + path);
    }

    Container container;
    const std::uint64_t n_records = read_u64(in);
    bool saw_meta = false;
    for (std::uint64_t r = 0; r < n_records; ++r) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        read_bytes(in, name.data(), name_len);
        char kind = 0;
        read_bytes(in, &kind, 1);
        if (kind == static_cast<char>(RecordKind::Array)) {
            ArrayRecord record;
            const std::uint64_t ndim = read_u64(in);
            record.shape.resize(ndim);
            for (std::uint64_t d = 0; d < ndim; ++d) record.shape[d] = read_u64(in);
            record.data.resize(record.element_count());
            for (double& v : record.data) v = read_f64(in);
            container.arrays.emplace(std::move(name), std::move(record));
        } else if (kind == static_cast<char>(RecordKind::Json)) {
            const std::uint64_t len = read_u64(in);
            std::string text(len, '\0');
            read_bytes(in, text.data(), len);
            container.meta = nlohmann::json::parse(text);
            saw_meta = true;
        } else {
            throw std::runtime_error("container: unknown record kind in " + path);
        }
    }
    if (!saw_meta) throw std::runtime_error("container: missing metadata record in " + path);
    return container;
}

ArrayRecord from_matrix(const Matrix& m) {
    ArrayRecord record;
    record.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    record.data.resize(static_cast<std::size_t>(m.size()));
    std::size_t at = 0;
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) record.data[at++] = m(r, c);
    }
    return record;
}

ArrayRecord from_vector(const Vector& v) {
    ArrayRecord record;
    record.shape = {static_cast<std::uint64_t>(v.size())};
    record.data.assign(v.data(), v.data() + v.size());
    return record;
}

Matrix to_matrix(const ArrayRecord& record) {
    if (record.shape.size() != 2) throw std::runtime_error("container: expected a rank-2 array");
    Matrix m(static_cast<Index>(record.shape[0]), static_cast<Index>(record.shape[1]));
    std::size_t at = 0;
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = record.data[at++];
    }
    return m;
}

Vector to_vector(const ArrayRecord& record) {
    if (record.shape.size() != 1) throw std::runtime_error("container: expected a rank-1 array");
    return Eigen::Map<const Vector>(record.data.data(), static_cast<Index>(record.shape[0]));
}

std::string data_hash(const ArrayRecord& record) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto mix = [&h](std::uint64_t word) {
        for (int i = 0; i < 8; ++i) {
            h ^= (word >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    for (double v : record.data) mix(std::bit_cast<std::uint64_t>(v));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace podnn::io
