#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace garverse {

// Indexed triangle mesh. Positions are in model units (meters); faces are
// CCW when viewed from outside.
struct Mesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<Eigen::Vector3i> faces;

    // Optional per-vertex attribute channels. Empty unless populated by a
    // producer; carried through verbatim, never interpreted by the geometry
    // operators.
    std::map<std::string, std::vector<double>> vertex_tags;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }

    Eigen::Vector3d bbox_min() const;
    Eigen::Vector3d bbox_max() const;
    double bbox_diagonal() const;

    // Throws std::invalid_argument if any face references a vertex out of
    // range, repeats a vertex, or the mesh has no vertices.
    void validate() const;
};

// Ordered cyclic vertex indices along one mesh boundary. Consecutive
// entries share a boundary edge; the last entry connects back to the first.
// Orientation follows the unpaired half-edge direction of the owning mesh,
// and the loop is rotated so its smallest vertex index comes first.
struct BoundaryLoop {
    std::vector<int> vertices;

    int size() const { return static_cast<int>(vertices.size()); }
};

enum class GarmentCategory { Dress, Skirt, Coat, Top, Pant };

const char* to_string(GarmentCategory c);
GarmentCategory category_from_string(const std::string& name);

// Identifies one topology class: every mesh of a category shares a single
// face list, which is what makes vertex-wise arithmetic between corpus
// members legal.
struct TemplateDescriptor {
    GarmentCategory category = GarmentCategory::Skirt;
    int vertex_count = 0;
    std::uint64_t face_hash = 0;
    // Canonical boundary names (e.g. "hem") -> seed vertex of the loop.
    std::map<std::string, int> boundary_labels;

    bool matches(const Mesh& mesh) const;
    bool operator==(const TemplateDescriptor& other) const = default;
};

// FNV-1a over the face index stream; the cheap topology fingerprint used
// by TemplateDescriptor.
std::uint64_t face_hash(const Mesh& mesh);

TemplateDescriptor make_descriptor(const Mesh& mesh, GarmentCategory category,
                                   const std::map<std::string, int>& boundary_labels);

std::string descriptor_to_json(const TemplateDescriptor& descriptor);
TemplateDescriptor descriptor_from_json(const std::string& text);
void save_descriptor(const TemplateDescriptor& descriptor, const std::string& path);
TemplateDescriptor load_descriptor(const std::string& path);

// Throws std::invalid_argument when the two meshes do not share one face
// list. `op` names the caller in the message.
void require_same_topology(const Mesh& a, const Mesh& b, const char* op);

// All maximal closed boundary loops, ordered by smallest contained vertex
// index. Watertight meshes yield an empty list. Throws on a non-manifold
// edge (more than two incident faces).
std::vector<BoundaryLoop> boundary_loops(const Mesh& mesh);

// The loop that contains `seed_vertex`. Throws if no boundary loop passes
// through it.
BoundaryLoop boundary_loop_at(const Mesh& mesh, int seed_vertex);

// Area-weighted per-vertex normals. Vertices whose accumulated normal is
// degenerate (isolated vertices, zero-area stars) fall back to +Z.
std::vector<Eigen::Vector3d> vertex_normals(const Mesh& mesh);

// Per-face unit normals; zero-area faces yield +Z.
std::vector<Eigen::Vector3d> face_normals(const Mesh& mesh);

// Fills every boundary loop with a centroid fan: one new vertex at the
// loop centroid, one triangle per loop edge. The input is left untouched;
// the result has no boundary edges.
Mesh close_holes(const Mesh& mesh);

// Uniform Laplacian L(v) = mean(neighbors of v) - v over edge adjacency.
// Throws on an isolated vertex.
std::vector<Eigen::Vector3d> uniform_laplacian(const Mesh& mesh);

// Vertex adjacency sets from the undirected edge graph, sorted ascending.
std::vector<std::vector<int>> vertex_adjacency(const Mesh& mesh);

// Unique undirected edges (a < b), lexicographically sorted.
std::vector<std::pair<int, int>> undirected_edges(const Mesh& mesh);

double surface_area(const Mesh& mesh);

} // namespace garverse
