#include "garverse/lod.hpp"

#include "garverse/rng.hpp"
#include "garverse/skinning.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace garverse {

void DetailPair::validate() const {
    require_same_topology(coarse, fine, "DetailPair");
    const int n = coarse.vertex_count();
    std::vector<double> magnitudes(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        magnitudes[std::size_t(i)] = (fine.vertices[i] - coarse.vertices[i]).norm();
    }
    const std::size_t idx = std::size_t(0.99 * double(n - 1));
    std::nth_element(magnitudes.begin(), magnitudes.begin() + long(idx), magnitudes.end());
    const double p99 = magnitudes[idx];
    const double limit = 0.10 * coarse.bbox_diagonal();
    if (p99 >= limit) {
        throw std::invalid_argument("DetailPair: offsets too large for detail (p99 " +
                                    std::to_string(p99) + " >= " + std::to_string(limit) +
                                    "); treat as deformation instead");
    }
}

void DeformationPair::validate() const {
    require_same_topology(t_pose, deformed, "DeformationPair");
    params.validate();
}

Mesh transfer_detail(const Mesh& base, const DetailPair& pair) {
    pair.validate();
    require_same_topology(base, pair.coarse, "transfer_detail");
    Mesh out = base;
    for (int i = 0; i < out.vertex_count(); ++i) {
        out.vertices[i] += pair.fine.vertices[i] - pair.coarse.vertices[i];
    }
    return out;
}

std::vector<Eigen::Vector3d> deformation_offsets(const DeformationPair& pair,
                                                 const BodyModel& body,
                                                 const Eigen::MatrixXd& garment_weights) {
    pair.validate();
    const Mesh unposed = inverse_lbs(pair.deformed, body, pair.params, garment_weights);
    std::vector<Eigen::Vector3d> offsets(std::size_t(pair.t_pose.vertex_count()));
    for (int i = 0; i < pair.t_pose.vertex_count(); ++i) {
        offsets[std::size_t(i)] = unposed.vertices[i] - pair.t_pose.vertices[i];
    }
    return offsets;
}

Mesh apply_deformation(const Mesh& m_l, const std::vector<Eigen::Vector3d>& offsets,
                       const BodyModel& body, const BodyParams& params,
                       const Eigen::MatrixXd& garment_weights) {
    if (int(offsets.size()) != m_l.vertex_count()) {
        throw std::invalid_argument("apply_deformation: offset count " +
                                    std::to_string(offsets.size()) + " != vertex count " +
                                    std::to_string(m_l.vertex_count()));
    }
    Mesh shifted = m_l;
    for (int i = 0; i < shifted.vertex_count(); ++i) {
        shifted.vertices[i] += offsets[std::size_t(i)];
    }
    return forward_lbs(shifted, body, params, garment_weights);
}

std::string provenance_to_json(const SynthProvenance& record) {
    nlohmann::json j;
    j["alpha"] = std::vector<double>(record.alpha.data(),
                                     record.alpha.data() + record.alpha.size());
    j["detail_index"] = record.detail_index;
    j["deform_index"] = record.deform_index;
    j["seed"] = record.seed;
    return j.dump(2);
}

SynthProvenance provenance_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    SynthProvenance record;
    const auto alpha = j.at("alpha").get<std::vector<double>>();
    record.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), long(alpha.size()));
    record.detail_index = j.at("detail_index").get<int>();
    record.deform_index = j.at("deform_index").get<int>();
    record.seed = j.at("seed").get<std::uint64_t>();
    return record;
}

namespace {

Mesh run_synth_chain(const GarmentBlendshapeModel& style,
                     const std::vector<DetailPair>& detail_bank,
                     const std::vector<DeformationPair>& deform_bank, const BodyModel& body,
                     const SynthProvenance& record) {
    if (record.detail_index < 0 || record.detail_index >= int(detail_bank.size()) ||
        record.deform_index < 0 || record.deform_index >= int(deform_bank.size())) {
        throw std::invalid_argument("synth: bank index out of range");
    }
    const Mesh g_alpha = evaluate(style, record.alpha);
    // Same weight source for Eq. offsets and re-posing: the style mean
    // garment against the mean-shape T-pose body.
    const GarmentWeightMap wmap = garment_weights(style.mean, body);
    const Mesh m_l = transfer_detail(g_alpha, detail_bank[std::size_t(record.detail_index)]);
    const DeformationPair& dpair = deform_bank[std::size_t(record.deform_index)];
    const std::vector<Eigen::Vector3d> offsets = deformation_offsets(dpair, body, wmap.wtilde);
    return apply_deformation(m_l, offsets, body, dpair.params, wmap.wtilde);
}

} // namespace

std::pair<Mesh, SynthProvenance> synth_fine_garment(
    const GarmentBlendshapeModel& style, const std::vector<DetailPair>& detail_bank,
    const std::vector<DeformationPair>& deform_bank, const BodyModel& body,
    std::uint64_t seed) {
    if (detail_bank.empty() || deform_bank.empty()) {
        throw std::invalid_argument("synth_fine_garment: empty bank");
    }
    for (const auto& pair : detail_bank) {
        if (!style.descriptor.matches(pair.coarse) || !style.descriptor.matches(pair.fine)) {
            throw std::invalid_argument("synth_fine_garment: detail pair descriptor mismatch");
        }
    }
    for (const auto& pair : deform_bank) {
        if (!style.descriptor.matches(pair.t_pose) ||
            !style.descriptor.matches(pair.deformed)) {
            throw std::invalid_argument("synth_fine_garment: deform pair descriptor mismatch");
        }
    }
    Rng rng(seed);
    SynthProvenance record;
    record.seed = seed;
    record.alpha = rng.unit_ball(style.component_count());
    record.detail_index = int(rng.uniform_index(detail_bank.size()));
    record.deform_index = int(rng.uniform_index(deform_bank.size()));
    Mesh out = run_synth_chain(style, detail_bank, deform_bank, body, record);
    return {std::move(out), std::move(record)};
}

Mesh replay_fine_garment(const GarmentBlendshapeModel& style,
                         const std::vector<DetailPair>& detail_bank,
                         const std::vector<DeformationPair>& deform_bank, const BodyModel& body,
                         const SynthProvenance& record) {
    if (detail_bank.empty() || deform_bank.empty()) {
        throw std::invalid_argument("replay_fine_garment: empty bank");
    }
    return run_synth_chain(style, detail_bank, deform_bank, body, record);
}

} // namespace garverse
