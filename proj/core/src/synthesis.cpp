#include "garverse/synthesis.hpp"

#include "garverse/rng.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

namespace garverse {

namespace {

struct TubeSpec {
    double y_top;
    double r_top;
    double y_bot;
    double r_bot;
    const char* top_label;
    const char* bot_label;
};

TubeSpec tube_spec(GarmentCategory category) {
    switch (category) {
    case GarmentCategory::Dress:
        return {1.30, 0.13, 0.35, 0.34, "neck", "hem"};
    case GarmentCategory::Skirt:
        return {0.95, 0.16, 0.45, 0.30, "waist", "hem"};
    case GarmentCategory::Coat:
        return {1.38, 0.15, 0.55, 0.29, "collar", "hem"};
    case GarmentCategory::Top:
        return {1.33, 0.125, 0.88, 0.19, "neck", "waist"};
    case GarmentCategory::Pant:
        return {0.95, 0.17, 0.10, 0.23, "waist", "hem"};
    }
    throw std::invalid_argument("tube_spec: unknown category");
}

// (t, theta) parameterization recovered from a tube-like mesh: t runs 0
// at the top rim to 1 at the bottom, theta around the y axis.
void tube_coordinates(const Mesh& mesh, std::vector<double>* t, std::vector<double>* theta) {
    const double y_max = mesh.bbox_max().y();
    const double y_min = mesh.bbox_min().y();
    const double span = std::max(y_max - y_min, 1e-12);
    t->resize(mesh.vertices.size());
    theta->resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Eigen::Vector3d& v = mesh.vertices[i];
        (*t)[i] = (y_max - v.y()) / span;
        (*theta)[i] = std::atan2(v.z(), v.x());
    }
}

Eigen::Vector3d radial_direction(double theta) {
    return {std::cos(theta), 0.0, std::sin(theta)};
}

} // namespace

GarmentTemplate make_garment_template(GarmentCategory category, int rings, int segments) {
    if (rings < 2 || segments < 3) {
        throw std::invalid_argument("make_garment_template: need rings >= 2, segments >= 3");
    }
    const TubeSpec spec = tube_spec(category);

    GarmentTemplate tmpl;
    Mesh& mesh = tmpl.mesh;
    mesh.vertices.reserve(std::size_t(rings) * std::size_t(segments));
    for (int r = 0; r < rings; ++r) {
        const double t = double(r) / double(rings - 1);
        const double y = spec.y_top + t * (spec.y_bot - spec.y_top);
        // Slight mid-tube bulge keeps the silhouette from being a pure cone.
        const double radius =
            spec.r_top + t * (spec.r_bot - spec.r_top) + 0.02 * std::sin(M_PI * t);
        for (int s = 0; s < segments; ++s) {
            const double theta = 2.0 * M_PI * double(s) / double(segments);
            mesh.vertices.emplace_back(radius * std::cos(theta), y, radius * std::sin(theta));
        }
    }
    for (int r = 0; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            const int a = r * segments + s;
            const int b = r * segments + (s + 1) % segments;
            const int c = (r + 1) * segments + (s + 1) % segments;
            const int d = (r + 1) * segments + s;
            mesh.faces.emplace_back(a, b, c);
            mesh.faces.emplace_back(a, c, d);
        }
    }
    mesh.validate();

    std::map<std::string, int> labels;
    labels[spec.top_label] = 0;
    labels[spec.bot_label] = (rings - 1) * segments;
    tmpl.descriptor = make_descriptor(mesh, category, labels);
    return tmpl;
}

std::vector<Mesh> make_style_corpus(const GarmentTemplate& tmpl, int count,
                                    std::uint64_t seed) {
    if (count < 1) {
        throw std::invalid_argument("make_style_corpus: count must be >= 1");
    }
    std::vector<double> t;
    std::vector<double> theta;
    tube_coordinates(tmpl.mesh, &t, &theta);

    // Twelve fixed smooth displacement fields; every corpus member lives in
    // their span, so the corpus has structural rank <= 12.
    // The explicit return types force evaluation of the Eigen expressions
    // before the radial_direction temporaries go out of scope.
    using Field = std::function<Eigen::Vector3d(double, double)>;
    const std::vector<Field> fields = {
        [](double u, double a) -> Eigen::Vector3d {
            return radial_direction(a) * std::sin(M_PI * u);
        },
        [](double u, double a) -> Eigen::Vector3d {
            return radial_direction(a) * (std::cos(a) * std::sin(M_PI * u));
        },
        [](double, double a) -> Eigen::Vector3d {
            return radial_direction(a) * std::cos(2.0 * a);
        },
        [](double u, double a) -> Eigen::Vector3d {
            return radial_direction(a) * (std::sin(2.0 * a) * (1.0 - u));
        },
        [](double u, double a) -> Eigen::Vector3d { return radial_direction(a) * (u * u); },
        [](double u, double) -> Eigen::Vector3d {
            return {0.0, std::sin(2.0 * M_PI * u), 0.0};
        },
        [](double u, double) -> Eigen::Vector3d { return {u, 0.0, 0.0}; },
        [](double u, double) -> Eigen::Vector3d { return {0.0, 0.0, u}; },
        [](double u, double a) -> Eigen::Vector3d {
            return radial_direction(a) * (std::cos(3.0 * a) * std::sin(2.0 * M_PI * u));
        },
        [](double u, double a) -> Eigen::Vector3d {
            return radial_direction(a) * std::sin(a + 2.0 * M_PI * u);
        },
        [](double u, double a) -> Eigen::Vector3d {
            return {0.0, (1.0 - u) * std::cos(a), 0.0};
        },
        [](double u, double a) -> Eigen::Vector3d {
            return radial_direction(a) * std::sin(3.0 * M_PI * u);
        },
    };
    const double amplitude = 0.015;

    Rng rng(seed);
    std::vector<Mesh> corpus;
    corpus.reserve(std::size_t(count));
    for (int m = 0; m < count; ++m) {
        Eigen::VectorXd z(long(fields.size()));
        for (long j = 0; j < z.size(); ++j) {
            z[j] = rng.uniform(-1.0, 1.0);
        }
        Mesh mesh = tmpl.mesh;
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            Eigen::Vector3d offset = Eigen::Vector3d::Zero();
            for (std::size_t j = 0; j < fields.size(); ++j) {
                offset += z[long(j)] * fields[j](t[i], theta[i]);
            }
            mesh.vertices[i] += amplitude * offset;
        }
        corpus.push_back(std::move(mesh));
    }
    return corpus;
}

std::vector<DetailPair> make_detail_bank(const Mesh& base, int count, std::uint64_t seed) {
    if (count < 1) {
        throw std::invalid_argument("make_detail_bank: count must be >= 1");
    }
    std::vector<double> t;
    std::vector<double> theta;
    tube_coordinates(base, &t, &theta);

    Rng rng(seed);
    std::vector<DetailPair> bank;
    bank.reserve(std::size_t(count));
    for (int k = 0; k < count; ++k) {
        const double angular_waves = double(6 + 2 * int(rng.uniform_index(4))); // 6..12
        const double vertical_waves = double(2 + int(rng.uniform_index(2)));    // 2..3
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double amplitude = rng.uniform(0.004, 0.008);

        DetailPair pair;
        pair.coarse = base;
        pair.fine = base;
        for (std::size_t i = 0; i < base.vertices.size(); ++i) {
            const double ripple = std::sin(angular_waves * theta[i] + phase) *
                                  std::sin(vertical_waves * M_PI * t[i]);
            pair.fine.vertices[i] += amplitude * ripple * radial_direction(theta[i]);
        }
        pair.validate();
        bank.push_back(std::move(pair));
    }
    return bank;
}

std::vector<DeformationPair> make_deform_bank(const Mesh& t_pose, const BodyModel& body,
                                              const Eigen::MatrixXd& garment_weights,
                                              int count, std::uint64_t seed) {
    if (count < 1) {
        throw std::invalid_argument("make_deform_bank: count must be >= 1");
    }
    std::vector<double> t;
    std::vector<double> theta;
    tube_coordinates(t_pose, &t, &theta);

    // Joints that produce believable garment motion without extreme poses:
    // root, spine, hips, shoulders.
    const int posed_joints[] = {0, 3, 1, 2, 16, 17};

    Rng rng(seed);
    std::vector<DeformationPair> bank;
    bank.reserve(std::size_t(count));
    for (int k = 0; k < count; ++k) {
        BodyParams params;
        for (int b = 0; b < kShapeCoeffCount; ++b) {
            params.beta[b] = rng.uniform(-0.8, 0.8);
        }
        for (const int j : posed_joints) {
            Eigen::Vector3d axis = rng.normal3();
            const double norm = axis.norm();
            axis = norm > 1e-12 ? Eigen::Vector3d(axis / norm) : Eigen::Vector3d::UnitY();
            params.theta[std::size_t(j)] = axis * rng.uniform(-0.22, 0.22);
        }

        const double sway_dir = rng.uniform(0.0, 2.0 * M_PI);
        const double sway = rng.uniform(0.02, 0.05);
        const double breathe = rng.uniform(-0.02, 0.02);

        Mesh swung = t_pose;
        for (std::size_t i = 0; i < swung.vertices.size(); ++i) {
            const double envelope = std::sin(M_PI * t[i]);
            swung.vertices[i] += sway * envelope *
                                     Eigen::Vector3d(std::cos(sway_dir), 0.0,
                                                     std::sin(sway_dir)) +
                                 breathe * envelope * radial_direction(theta[i]);
        }

        DeformationPair pair;
        pair.t_pose = t_pose;
        pair.deformed = forward_lbs(swung, body, params, garment_weights);
        pair.params = params;
        pair.validate();
        bank.push_back(std::move(pair));
    }
    return bank;
}

CurveTube boundary_tube(const Mesh& garment, const BoundaryLoop& loop, double radius) {
    if (loop.size() < 3) {
        throw std::invalid_argument("boundary_tube: degenerate loop");
    }
    CurveTube tube;
    tube.radius = radius > 0.0 ? radius : 0.015 * garment.bbox_diagonal();
    tube.points.reserve(loop.vertices.size());
    for (const int v : loop.vertices) {
        tube.points.push_back(garment.vertices[std::size_t(v)]);
    }
    tube.validate();
    return tube;
}

} // namespace garverse
