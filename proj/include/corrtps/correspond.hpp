// correspond.hpp - surface correspondence estimation between structure meshes.
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "corrtps/mesh.hpp"
#include "corrtps/tps.hpp"

namespace corrtps {

struct CorrespondencePair {
    Vec3 source;       // moving patient, mm
    Vec3 target;       // fixed patient, mm
    bool is_null = false;
    std::string structure;
};

struct CorrespondenceSet {
    std::vector<CorrespondencePair> pairs;
    std::string source_structure;
    std::string target_structure;
};

// Rigid + isotropic-scale map x -> scale * R x + translation.
struct SimilarityTransform {
    std::array<std::array<double, 3>, 3> rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    double scale = 1.0;
    Vec3 translation{0, 0, 0};

    Vec3 apply(Vec3 p) const {
        const Vec3 r{rotation[0][0] * p.x + rotation[0][1] * p.y + rotation[0][2] * p.z,
                     rotation[1][0] * p.x + rotation[1][1] * p.y + rotation[1][2] * p.z,
                     rotation[2][0] * p.x + rotation[2][1] * p.y + rotation[2][2] * p.z};
        return scale * r + translation;
    }
};

// PCA alignment of two point clouds: centroids map, principal axes align,
// scale is the RMS-radius ratio. Axis signs are disambiguated by the
// candidate with the smallest sum of squared nearest-neighbour distances.
SimilarityTransform rigid_prealign(const std::vector<Vec3>& source_points,
                                   const std::vector<Vec3>& target_points);

// Deterministic stand-in for a learned correspondence model: rigid prealign,
// then nearest-vertex assignment. A pair is flagged null when its aligned
// distance exceeds null_threshold or the match is not mutual-nearest within
// a factor of 2. Reported coordinates are in the original patient frames.
CorrespondenceSet baseline_match(const TriMesh& source, const TriMesh& target,
                                 double null_threshold);

// Pluggable estimator interface; a learned model can replace the baseline.
class CorrespondenceEstimator {
public:
    virtual ~CorrespondenceEstimator() = default;
    virtual CorrespondenceSet estimate(const TriMesh& source, const TriMesh& target) const = 0;
};

class NearestVertexEstimator final : public CorrespondenceEstimator {
public:
    explicit NearestVertexEstimator(double null_threshold_mm = 20.0)
        : null_threshold_(null_threshold_mm) {}
    CorrespondenceSet estimate(const TriMesh& source, const TriMesh& target) const override {
        return baseline_match(source, target, null_threshold_);
    }

private:
    double null_threshold_;
};

// Concatenates all non-null pairs; source points closer than dedup_tolerance
// to an already-kept point are dropped (first wins, input order).
ControlPointSet gather_control_points(const std::vector<CorrespondenceSet>& sets,
                                      double dedup_tolerance);

// CSV: structure,src_x,src_y,src_z,tgt_x,tgt_y,tgt_z,is_null
void write_correspondences_csv(const std::vector<CorrespondenceSet>& sets,
                               const std::filesystem::path& path);
std::vector<CorrespondenceSet> read_correspondences_csv(const std::filesystem::path& path);

} // namespace corrtps
