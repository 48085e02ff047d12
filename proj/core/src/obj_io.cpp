#include "garverse/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace garverse {

namespace {

[[noreturn]] void parse_error(const std::string& origin, int line, const std::string& what) {
    throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + what);
}

// OBJ face corners look like "12", "12/3" or "12//7"; only the vertex
// index in front matters here.
int corner_index(const std::string& token, const std::string& origin, int line,
                 int vertex_count) {
    const auto slash = token.find('/');
    const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
    int idx = 0;
    try {
        std::size_t used = 0;
        idx = std::stoi(head, &used);
        if (used != head.size()) throw std::invalid_argument(head);
    } catch (const std::exception&) {
        parse_error(origin, line, "malformed face corner '" + token + "'");
    }
    if (idx < 0) idx = vertex_count + idx + 1; // relative indexing
    if (idx < 1 || idx > vertex_count)
        parse_error(origin, line,
                    "face index " + std::to_string(idx) + " out of range [1," +
                        std::to_string(vertex_count) + "]");
    return idx - 1;
}

Mesh parse_obj(std::istream& in, const std::string& origin) {
    Mesh mesh;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) parse_error(origin, line_no, "malformed vertex record");
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<std::string> corners;
            std::string c;
            while (ls >> c) corners.push_back(c);
            if (corners.size() < 3) parse_error(origin, line_no, "face with fewer than 3 corners");
            if (corners.size() > 3) parse_error(origin, line_no, "non-triangular face");
            Eigen::Vector3i f;
            for (int k = 0; k < 3; ++k)
                f[k] = corner_index(corners[k], origin, line_no, mesh.vertex_count());
            mesh.faces.push_back(f);
        }
        // vt/vn/usemtl/o/g/s and friends are ignored.
    }
    return mesh;
}

} // namespace

Mesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open OBJ file: " + path);
    return parse_obj(in, path);
}

Mesh obj_from_string(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    return parse_obj(in, origin);
}

std::string obj_to_string(const Mesh& mesh) {
    std::string out;
    out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 24);
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f\n", v.x(), v.y(), v.z());
        out += buf;
    }
    for (const auto& f : mesh.faces) {
        std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out += buf;
    }
    return out;
}

void save_obj(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: keep \n verbatim
    if (!out) throw std::runtime_error("cannot open OBJ file for writing: " + path);
    out << obj_to_string(mesh);
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace garverse
