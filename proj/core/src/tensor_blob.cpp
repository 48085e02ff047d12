#include "garverse/tensor_blob.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace garverse {

namespace {

constexpr char kMagic[5] = {'G', 'V', 'T', 'B', '\n'};

static_assert(sizeof(double) == 8, "payload layout assumes 8-byte doubles");

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
    std::int64_t count = 1;
    for (const auto dim : shape) {
        if (dim < 0) {
            throw std::invalid_argument("TensorBlob: negative dimension");
        }
        count *= dim;
    }
    return count;
}

const char* dtype_name(int code) {
    switch (code) {
    case 0: return "f64";
    case 1: return "i32";
    case 2: return "u8";
    default: throw std::logic_error("TensorBlob: unknown dtype");
    }
}

int dtype_code(const std::string& name) {
    if (name == "f64") return 0;
    if (name == "i32") return 1;
    if (name == "u8") return 2;
    throw std::runtime_error("TensorBlob: unsupported dtype '" + name + "'");
}

std::size_t dtype_size(int code) {
    switch (code) {
    case 0: return 8;
    case 1: return 4;
    default: return 1;
    }
}

void append_le_u64(std::string& out, std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(char((value >> (8 * i)) & 0xff));
    }
}

std::uint64_t read_le_u64(const unsigned char* bytes) {
    std::uint64_t value = 0;
    for (int i = 0; i < 8; ++i) {
        value |= std::uint64_t(bytes[i]) << (8 * i);
    }
    return value;
}

} // namespace

void TensorBlob::set_meta(const std::string& key, const std::string& value) {
    meta_[key] = value;
}

bool TensorBlob::has_meta(const std::string& key) const {
    return meta_.count(key) != 0;
}

const std::string& TensorBlob::meta(const std::string& key) const {
    const auto it = meta_.find(key);
    if (it == meta_.end()) {
        throw std::runtime_error("TensorBlob: no metadata key '" + key + "'");
    }
    return it->second;
}

void TensorBlob::put(const std::string& name, const Eigen::MatrixXd& value) {
    Entry entry;
    entry.dtype = Dtype::F64;
    entry.shape = {value.rows(), value.cols()};
    entry.data.resize(std::size_t(value.size()) * 8);
    // Row-major on disk regardless of Eigen's storage order.
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
        for (Eigen::Index c = 0; c < value.cols(); ++c) {
            const double v = value(r, c);
            std::memcpy(entry.data.data() + offset, &v, 8);
            offset += 8;
        }
    }
    entries_[name] = std::move(entry);
}

void TensorBlob::put(const std::string& name, const Eigen::MatrixXi& value) {
    Entry entry;
    entry.dtype = Dtype::I32;
    entry.shape = {value.rows(), value.cols()};
    entry.data.resize(std::size_t(value.size()) * 4);
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
        for (Eigen::Index c = 0; c < value.cols(); ++c) {
            const std::int32_t v = value(r, c);
            std::memcpy(entry.data.data() + offset, &v, 4);
            offset += 4;
        }
    }
    entries_[name] = std::move(entry);
}

void TensorBlob::put(const std::string& name, const std::vector<std::uint8_t>& value,
                     const std::vector<std::int64_t>& shape) {
    if (element_count(shape) != std::int64_t(value.size())) {
        throw std::invalid_argument("TensorBlob: shape does not match byte count for '" +
                                    name + "'");
    }
    Entry entry;
    entry.dtype = Dtype::U8;
    entry.shape = shape;
    entry.data = value;
    entries_[name] = std::move(entry);
}

bool TensorBlob::contains(const std::string& name) const {
    return entries_.count(name) != 0;
}

const TensorBlob::Entry& TensorBlob::entry(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw std::runtime_error("TensorBlob: no tensor named '" + name + "'");
    }
    return it->second;
}

std::vector<std::int64_t> TensorBlob::shape(const std::string& name) const {
    return entry(name).shape;
}

Eigen::MatrixXd TensorBlob::matrix(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.dtype != Dtype::F64 || e.shape.size() != 2) {
        throw std::runtime_error("TensorBlob: '" + name + "' is not an f64 matrix");
    }
    Eigen::MatrixXd value(e.shape[0], e.shape[1]);
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
        for (Eigen::Index c = 0; c < value.cols(); ++c) {
            double v;
            std::memcpy(&v, e.data.data() + offset, 8);
            value(r, c) = v;
            offset += 8;
        }
    }
    return value;
}

Eigen::MatrixXi TensorBlob::int_matrix(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.dtype != Dtype::I32 || e.shape.size() != 2) {
        throw std::runtime_error("TensorBlob: '" + name + "' is not an i32 matrix");
    }
    Eigen::MatrixXi value(e.shape[0], e.shape[1]);
    std::size_t offset = 0;
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
        for (Eigen::Index c = 0; c < value.cols(); ++c) {
            std::int32_t v;
            std::memcpy(&v, e.data.data() + offset, 4);
            value(r, c) = v;
            offset += 4;
        }
    }
    return value;
}

const std::vector<std::uint8_t>& TensorBlob::bytes(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.dtype != Dtype::U8) {
        throw std::runtime_error("TensorBlob: '" + name + "' is not a byte tensor");
    }
    return e.data;
}

void TensorBlob::save(const std::string& path) const {
    nlohmann::json header;
    header["meta"] = meta_;
    header["entries"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, e] : entries_) {
        nlohmann::json item;
        item["name"] = name;
        item["dtype"] = dtype_name(int(e.dtype));
        item["shape"] = e.shape;
        item["offset"] = offset;
        item["bytes"] = e.data.size();
        header["entries"].push_back(std::move(item));
        offset += e.data.size();
    }
    const std::string header_text = header.dump();

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    append_le_u64(out, header_text.size());
    out += header_text;
    for (const auto& [name, e] : entries_) {
        (void)name;
        out.append(reinterpret_cast<const char*>(e.data.data()), e.data.size());
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
        if (!file) {
            throw std::runtime_error(tmp + ": cannot open for writing");
        }
        file.write(out.data(), std::streamsize(out.size()));
        if (!file.good()) {
            throw std::runtime_error(tmp + ": write failed");
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error(path + ": rename from temporary failed");
    }
}

TensorBlob TensorBlob::load(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw std::runtime_error(path + ": cannot open");
    }
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(file)),
                                   std::istreambuf_iterator<char>());
    if (raw.size() < sizeof(kMagic) + 8 ||
        std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error(path + ": not a tensor blob");
    }
    const std::uint64_t header_size = read_le_u64(raw.data() + sizeof(kMagic));
    const std::size_t payload_start = sizeof(kMagic) + 8 + header_size;
    if (payload_start > raw.size()) {
        throw std::runtime_error(path + ": truncated header");
    }
    const nlohmann::json header = nlohmann::json::parse(
        raw.begin() + sizeof(kMagic) + 8, raw.begin() + std::ptrdiff_t(payload_start));

    TensorBlob blob;
    if (header.contains("meta")) {
        blob.meta_ = header.at("meta").get<std::map<std::string, std::string>>();
    }
    for (const auto& item : header.at("entries")) {
        const std::string name = item.at("name").get<std::string>();
        Entry e;
        const int code = dtype_code(item.at("dtype").get<std::string>());
        e.dtype = Dtype(code);
        e.shape = item.at("shape").get<std::vector<std::int64_t>>();
        const std::uint64_t offset = item.at("offset").get<std::uint64_t>();
        const std::uint64_t bytes = item.at("bytes").get<std::uint64_t>();
        if (payload_start + offset + bytes > raw.size()) {
            throw std::runtime_error(path + ": truncated payload for '" + name + "'");
        }
        if (bytes != std::uint64_t(element_count(e.shape)) * dtype_size(code)) {
            throw std::runtime_error(path + ": size mismatch for '" + name + "'");
        }
        e.data.assign(raw.begin() + std::ptrdiff_t(payload_start + offset),
                      raw.begin() + std::ptrdiff_t(payload_start + offset + bytes));
        blob.entries_[name] = std::move(e);
    }
    return blob;
}

} // namespace garverse
