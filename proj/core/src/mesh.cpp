#include "garverse/mesh.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace garverse {

namespace {

inline std::uint64_t edge_key(int a, int b) {
    const std::uint64_t lo = static_cast<std::uint32_t>(std::min(a, b));
    const std::uint64_t hi = static_cast<std::uint32_t>(std::max(a, b));
    return (hi << 32) | lo;
}

} // namespace

Eigen::Vector3d Mesh::bbox_min() const {
    Eigen::Vector3d m = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
    for (const auto& v : vertices) m = m.cwiseMin(v);
    return m;
}

Eigen::Vector3d Mesh::bbox_max() const {
    Eigen::Vector3d m = Eigen::Vector3d::Constant(std::numeric_limits<double>::lowest());
    for (const auto& v : vertices) m = m.cwiseMax(v);
    return m;
}

double Mesh::bbox_diagonal() const {
    if (vertices.empty()) return 0.0;
    return (bbox_max() - bbox_min()).norm();
}

void Mesh::validate() const {
    if (vertices.empty()) throw std::invalid_argument("mesh has no vertices");
    const int n = vertex_count();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& t = faces[f];
        for (int k = 0; k < 3; ++k) {
            if (t[k] < 0 || t[k] >= n)
                throw std::invalid_argument("face " + std::to_string(f) +
                                            " references vertex " + std::to_string(t[k]) +
                                            " outside [0," + std::to_string(n) + ")");
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw std::invalid_argument("face " + std::to_string(f) + " is degenerate");
    }
}

const char* to_string(GarmentCategory c) {
    switch (c) {
    case GarmentCategory::Dress: return "dress";
    case GarmentCategory::Skirt: return "skirt";
    case GarmentCategory::Coat: return "coat";
    case GarmentCategory::Top: return "top";
    case GarmentCategory::Pant: return "pant";
    }
    return "unknown";
}

GarmentCategory category_from_string(const std::string& name) {
    if (name == "dress") return GarmentCategory::Dress;
    if (name == "skirt") return GarmentCategory::Skirt;
    if (name == "coat") return GarmentCategory::Coat;
    if (name == "top") return GarmentCategory::Top;
    if (name == "pant") return GarmentCategory::Pant;
    throw std::invalid_argument("unknown garment category: " + name);
}

std::uint64_t face_hash(const Mesh& mesh) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int byte = 0; byte < 4; ++byte) {
            h ^= (v >> (8 * byte)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& f : mesh.faces) {
        mix(static_cast<std::uint32_t>(f[0]));
        mix(static_cast<std::uint32_t>(f[1]));
        mix(static_cast<std::uint32_t>(f[2]));
    }
    return h;
}

bool TemplateDescriptor::matches(const Mesh& mesh) const {
    return mesh.vertex_count() == vertex_count && garverse::face_hash(mesh) == face_hash;
}

TemplateDescriptor make_descriptor(const Mesh& mesh, GarmentCategory category,
                                   const std::map<std::string, int>& boundary_labels) {
    TemplateDescriptor d;
    d.category = category;
    d.vertex_count = mesh.vertex_count();
    d.face_hash = face_hash(mesh);
    d.boundary_labels = boundary_labels;
    return d;
}

std::string descriptor_to_json(const TemplateDescriptor& descriptor) {
    nlohmann::json doc;
    doc["category"] = to_string(descriptor.category);
    doc["vertex_count"] = descriptor.vertex_count;
    doc["face_hash"] = descriptor.face_hash;
    doc["boundary_labels"] = descriptor.boundary_labels;
    return doc.dump(2) + "\n";
}

TemplateDescriptor descriptor_from_json(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    TemplateDescriptor descriptor;
    descriptor.category = category_from_string(doc.at("category").get<std::string>());
    descriptor.vertex_count = doc.at("vertex_count").get<int>();
    descriptor.face_hash = doc.at("face_hash").get<std::uint64_t>();
    if (doc.contains("boundary_labels")) {
        descriptor.boundary_labels =
            doc.at("boundary_labels").get<std::map<std::string, int>>();
    }
    return descriptor;
}

void save_descriptor(const TemplateDescriptor& descriptor, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out << descriptor_to_json(descriptor);
    if (!out.good()) {
        throw std::runtime_error(path + ": write failed");
    }
}

TemplateDescriptor load_descriptor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return descriptor_from_json(buffer.str());
}

void require_same_topology(const Mesh& a, const Mesh& b, const char* op) {
    if (a.vertex_count() != b.vertex_count() || a.faces != b.faces)
        throw std::invalid_argument(std::string(op) + ": meshes do not share a topology (" +
                                    std::to_string(a.vertex_count()) + "/" +
                                    std::to_string(a.face_count()) + " vs " +
                                    std::to_string(b.vertex_count()) + "/" +
                                    std::to_string(b.face_count()) + ")");
}

std::vector<BoundaryLoop> boundary_loops(const Mesh& mesh) {
    mesh.validate();

    // Count undirected incidences; remember the directed edge of the single
    // incident face so the boundary walk inherits the face orientation.
    std::unordered_map<std::uint64_t, int> incidence;
    std::unordered_map<std::uint64_t, std::pair<int, int>> directed;
    incidence.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k];
            const int b = f[(k + 1) % 3];
            const auto key = edge_key(a, b);
            const int count = ++incidence[key];
            if (count > 2)
                throw std::runtime_error("non-manifold edge (" + std::to_string(a) + "," +
                                         std::to_string(b) + ") with >2 incident faces");
            directed[key] = {a, b};
        }
    }

    // A boundary half-edge runs opposite to its face's directed edge.
    // tail -> sorted heads so the walk is deterministic.
    std::map<int, std::vector<int>> outgoing;
    int boundary_edge_count = 0;
    for (const auto& [key, count] : incidence) {
        if (count != 1) continue;
        const auto [a, b] = directed.at(key);
        outgoing[b].push_back(a);
        ++boundary_edge_count;
    }
    for (auto& [tail, heads] : outgoing) std::sort(heads.begin(), heads.end());

    std::vector<BoundaryLoop> loops;
    int consumed = 0;
    // outgoing is ordered by tail index, so loops come out ordered by their
    // smallest vertex: each walk below starts at the smallest unconsumed tail,
    // which is also the smallest vertex of its loop.
    for (auto& [start, start_heads] : outgoing) {
        while (!start_heads.empty()) {
            BoundaryLoop loop;
            int current = start;
            while (true) {
                loop.vertices.push_back(current);
                auto& heads = outgoing[current];
                if (heads.empty())
                    throw std::runtime_error("boundary chain broke at vertex " +
                                             std::to_string(current));
                const int next = heads.front();
                heads.erase(heads.begin());
                ++consumed;
                if (next == start) break;
                current = next;
            }
            if (loop.vertices.size() < 3)
                throw std::runtime_error("boundary loop with fewer than 3 vertices");
            loops.push_back(std::move(loop));
        }
    }
    if (consumed != boundary_edge_count)
        throw std::runtime_error("boundary edges left unconsumed; boundary is not a "
                                 "disjoint union of closed loops");
    return loops;
}

BoundaryLoop boundary_loop_at(const Mesh& mesh, int seed_vertex) {
    for (auto& loop : boundary_loops(mesh)) {
        if (std::find(loop.vertices.begin(), loop.vertices.end(), seed_vertex) !=
            loop.vertices.end())
            return loop;
    }
    throw std::runtime_error("no boundary loop passes through vertex " +
                             std::to_string(seed_vertex));
}

std::vector<Eigen::Vector3d> face_normals(const Mesh& mesh) {
    std::vector<Eigen::Vector3d> normals(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& t = mesh.faces[f];
        const Eigen::Vector3d n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                                      .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        const double len = n.norm();
        normals[f] = len > 1e-20 ? Eigen::Vector3d(n / len) : Eigen::Vector3d(0, 0, 1);
    }
    return normals;
}

std::vector<Eigen::Vector3d> vertex_normals(const Mesh& mesh) {
    if (mesh.faces.empty()) throw std::invalid_argument("vertex_normals: mesh has no faces");
    std::vector<Eigen::Vector3d> acc(mesh.vertices.size(), Eigen::Vector3d::Zero());
    for (const auto& t : mesh.faces) {
        // Cross product magnitude is twice the face area, so summing raw
        // cross products is the area weighting.
        const Eigen::Vector3d n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                                      .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        acc[t[0]] += n;
        acc[t[1]] += n;
        acc[t[2]] += n;
    }
    for (auto& n : acc) {
        const double len = n.norm();
        n = len > 1e-20 ? Eigen::Vector3d(n / len) : Eigen::Vector3d(0, 0, 1);
    }
    return acc;
}

Mesh close_holes(const Mesh& mesh) {
    const auto loops = boundary_loops(mesh);
    Mesh out = mesh;
    for (const auto& loop : loops) {
        if (loop.size() < 3)
            throw std::runtime_error("close_holes: loop with fewer than 3 vertices");
        Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
        for (int v : loop.vertices) centroid += mesh.vertices[v];
        centroid /= loop.size();
        const int c = out.vertex_count();
        out.vertices.push_back(centroid);
        for (int i = 0; i < loop.size(); ++i) {
            const int a = loop.vertices[i];
            const int b = loop.vertices[(i + 1) % loop.size()];
            // Loop order follows the unpaired half-edge direction, so
            // (a, b, c) opposes the interior face across edge (a, b) and the
            // fill stays consistently oriented.
            out.faces.emplace_back(a, b, c);
        }
    }
    return out;
}

std::vector<std::vector<int>> vertex_adjacency(const Mesh& mesh) {
    std::vector<std::vector<int>> adjacency(mesh.vertices.size());
    for (const auto& [a, b] : undirected_edges(mesh)) {
        adjacency[a].push_back(b);
        adjacency[b].push_back(a);
    }
    for (auto& list : adjacency) std::sort(list.begin(), list.end());
    return adjacency;
}

std::vector<std::pair<int, int>> undirected_edges(const Mesh& mesh) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k];
            const int b = f[(k + 1) % 3];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<Eigen::Vector3d> uniform_laplacian(const Mesh& mesh) {
    const auto adjacency = vertex_adjacency(mesh);
    std::vector<Eigen::Vector3d> lap(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        if (adjacency[i].empty())
            throw std::runtime_error("uniform_laplacian: isolated vertex " + std::to_string(i));
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (int j : adjacency[i]) mean += mesh.vertices[j];
        lap[i] = mean / static_cast<double>(adjacency[i].size()) - mesh.vertices[i];
    }
    return lap;
}

double surface_area(const Mesh& mesh) {
    double area = 0.0;
    for (const auto& t : mesh.faces)
        area += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                          .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]])
                          .norm();
    return area;
}

} // namespace garverse
