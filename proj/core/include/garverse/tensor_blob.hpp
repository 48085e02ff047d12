#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace garverse {

// Named tensor archive: a small JSON header (entry table plus string
// metadata) followed by raw little-endian payload. Doubles survive a
// save/load round trip bit-exactly.
class TensorBlob {
public:
    void set_meta(const std::string& key, const std::string& value);
    bool has_meta(const std::string& key) const;
    const std::string& meta(const std::string& key) const;

    void put(const std::string& name, const Eigen::MatrixXd& value);
    void put(const std::string& name, const Eigen::MatrixXi& value);
    void put(const std::string& name, const std::vector<std::uint8_t>& value,
             const std::vector<std::int64_t>& shape);

    bool contains(const std::string& name) const;
    std::vector<std::int64_t> shape(const std::string& name) const;
    Eigen::MatrixXd matrix(const std::string& name) const;
    Eigen::MatrixXi int_matrix(const std::string& name) const;
    const std::vector<std::uint8_t>& bytes(const std::string& name) const;

    // Writes to a temporary sibling file and renames into place.
    void save(const std::string& path) const;
    static TensorBlob load(const std::string& path);

private:
    enum class Dtype { F64, I32, U8 };

    struct Entry {
        Dtype dtype;
        std::vector<std::int64_t> shape;
        std::vector<std::uint8_t> data;
    };

    const Entry& entry(const std::string& name) const;

    std::map<std::string, std::string> meta_;
    std::map<std::string, Entry> entries_;
};

} // namespace garverse
