// refine.hpp - minimal intensity-based B-spline refinement stage.
//
// Free-form deformation on a uniform cubic B-spline lattice, optimised by
// gradient descent on a sum-of-squared-differences loss plus a discrete
// bending penalty. Both images are read through the same cubic B-spline
// smoothing kernel, so identical inputs give an exactly zero residual.
#pragma once

#include <array>
#include <vector>

#include "corrtps/field.hpp"
#include "corrtps/volume.hpp"

namespace corrtps {

struct BsplineGrid {
    Vec3 lattice_origin{};               // position of node (0,0,0), mm
    double spacing = 0.0;                // lattice spacing, mm (all axes)
    Index3 lattice_dims{0, 0, 0};        // node counts
    std::vector<Vec3> coefficients;      // x-fastest over nodes, mm

    std::int64_t node_count() const {
        return static_cast<std::int64_t>(lattice_dims[0]) * lattice_dims[1] * lattice_dims[2];
    }
    std::int64_t node_index(int i, int j, int k) const {
        return static_cast<std::int64_t>(i) +
               static_cast<std::int64_t>(lattice_dims[0]) *
                   (static_cast<std::int64_t>(j) +
                    static_cast<std::int64_t>(lattice_dims[1]) * static_cast<std::int64_t>(k));
    }
};

// Zero-coefficient lattice covering the image domain plus one boundary ring.
BsplineGrid make_covering_lattice(const GridGeometry& geometry, double lattice_spacing);

// Tensor-product cubic B-spline expansion at every voxel center.
DisplacementField bspline_field(const BsplineGrid& grid, const GridGeometry& geometry);

// SSD + bending objective with its analytic gradient (exposed for testing).
class SsdBendingObjective {
public:
    SsdBendingObjective(const Volume& fixed, const Volume& moving, const BsplineGrid& layout,
                        double bending_weight);

    double value(const std::vector<Vec3>& coefficients) const;
    double value_and_gradient(const std::vector<Vec3>& coefficients,
                              std::vector<Vec3>& gradient) const;

private:
    const Volume& fixed_;
    const BsplineGrid layout_;
    double bending_weight_;
    std::vector<double> smoothed_moving_;  // moving seen through the same kernel
    std::array<std::vector<int>, 3> base_;
    std::array<std::vector<std::array<double, 4>>, 3> weights_;

    double data_term(const std::vector<Vec3>& c, std::vector<Vec3>* grad) const;
    double bending_term(const std::vector<Vec3>& c, std::vector<Vec3>* grad) const;
};

// Gradient descent with a halving line search; the accepted objective
// sequence is non-increasing. Returns the dense field of the final lattice.
// `objective_trace`, when given, receives the initial objective followed by
// the value after every accepted step.
DisplacementField bspline_register(const Volume& fixed, const Volume& moving,
                                   double lattice_spacing, double bending_weight,
                                   int max_iters,
                                   std::vector<double>* objective_trace = nullptr);

} // namespace corrtps
