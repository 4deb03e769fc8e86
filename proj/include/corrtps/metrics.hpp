// metrics.hpp - surface-distance, overlap and image metrics plus paired testing.
#pragma once

#include <string>
#include <vector>

#include "corrtps/segment.hpp"
#include "corrtps/volume.hpp"

namespace corrtps {

struct StructureDistanceResult {
    std::string structure;
    double mdta = 0.0;       // mm
    double hausdorff = 0.0;  // mm
    double dice = 0.0;
};

struct PairedTestResult {
    double statistic = 0.0;  // Wilcoxon W+ (sum of positive ranks)
    double p_value = 1.0;
    int n_pairs = 0;
    double significant_at = 0.05;
};

struct ImageSimilarity {
    double mse = 0.0;
    double ncc = 0.0;
};

// Centers of foreground voxels with at least one 6-connected background
// neighbour; the volume border counts as background.
std::vector<Vec3> surface_points(const Mask& mask);

// Symmetric mean distance-to-agreement.
double mdta(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Symmetric Hausdorff distance.
double hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// 2|a&b| / (|a|+|b|); both empty -> 1.
double dice(const Mask& a, const Mask& b);

ImageSimilarity image_similarity(const Volume& a, const Volume& b);

// Two-sided test on paired samples. Zero differences are dropped; at least 5
// must remain. Exact enumeration of all sign patterns for n <= 12, normal
// approximation with tie and continuity corrections above.
PairedTestResult wilcoxon_signed_rank(const std::vector<double>& x,
                                      const std::vector<double>& y);

double bonferroni_threshold(double alpha, int m);

} // namespace corrtps
