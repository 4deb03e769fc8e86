// refine.cpp
#include "corrtps/refine.hpp"

#include <algorithm>
#include <cmath>

#include "corrtps/parallel.hpp"

namespace corrtps {

namespace {

inline void bspline_weights(double f, double* w) {
    const double f2 = f * f, f3 = f2 * f;
    w[0] = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0;
    w[1] = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
    w[2] = (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
    w[3] = f3 / 6.0;
}

inline void bspline_dweights(double f, double* w) {
    const double f2 = f * f;
    w[0] = -(1.0 - f) * (1.0 - f) / 2.0;
    w[1] = (3.0 * f2 - 4.0 * f) / 2.0;
    w[2] = (-3.0 * f2 + 2.0 * f + 1.0) / 2.0;
    w[3] = f2 / 2.0;
}

// Cubic B-spline quasi-interpolation of a volume at a physical point:
// value and spatial gradient. Out-of-grid taps contribute the zero border.
void sample_smoothed(const Volume& vol, Vec3 p, double* value, Vec3* grad) {
    const auto& g = vol.geometry;
    const Vec3 t = g.point_to_continuous_index(p);
    double wx[4], wy[4], wz[4];
    double dx[4] = {0, 0, 0, 0}, dy[4] = {0, 0, 0, 0}, dz[4] = {0, 0, 0, 0};
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const double fl = std::floor(t[a]);
        base[a] = static_cast<int>(fl) - 1;
        frac[a] = t[a] - fl;
    }
    bspline_weights(frac[0], wx);
    bspline_weights(frac[1], wy);
    bspline_weights(frac[2], wz);
    if (grad) {
        bspline_dweights(frac[0], dx);
        bspline_dweights(frac[1], dy);
        bspline_dweights(frac[2], dz);
    }
    double v = 0.0, gx = 0.0, gy = 0.0, gz = 0.0;
    for (int c = 0; c < 4; ++c) {
        const int k = base[2] + c;
        if (k < 0 || k >= g.dims[2]) continue;
        for (int b = 0; b < 4; ++b) {
            const int j = base[1] + b;
            if (j < 0 || j >= g.dims[1]) continue;
            for (int a = 0; a < 4; ++a) {
                const int i = base[0] + a;
                if (i < 0 || i >= g.dims[0]) continue;
                const double s = vol.at(i, j, k);
                v += wx[a] * wy[b] * wz[c] * s;
                if (grad) {
                    gx += dx[a] * wy[b] * wz[c] * s;
                    gy += wx[a] * dy[b] * wz[c] * s;
                    gz += wx[a] * wy[b] * dz[c] * s;
                }
            }
        }
    }
    *value = v;
    if (grad) *grad = Vec3{gx / g.spacing.x, gy / g.spacing.y, gz / g.spacing.z};
}

} // namespace

BsplineGrid make_covering_lattice(const GridGeometry& geometry, double lattice_spacing) {
    geometry.validate();
    const double min_spacing = std::min({geometry.spacing.x, geometry.spacing.y,
                                         geometry.spacing.z});
    if (!(lattice_spacing >= 4.0 * min_spacing))
        throw ContractError("make_covering_lattice: lattice spacing must be >= 4x voxel spacing");
    BsplineGrid grid;
    grid.spacing = lattice_spacing;
    for (int a = 0; a < 3; ++a) {
        const double extent = (geometry.dims[a] - 1) * geometry.spacing[a];
        const int cells = std::max(1, static_cast<int>(std::ceil(extent / lattice_spacing)));
        grid.lattice_dims[a] = cells + 4;  // one support ring each side
        grid.lattice_origin[a] = geometry.origin[a] - lattice_spacing;
    }
    grid.coefficients.assign(static_cast<std::size_t>(grid.node_count()), Vec3{0, 0, 0});
    return grid;
}

namespace {

// Per-axis base node and basis weights for every voxel index; throws if the
// lattice does not cover the grid.
void locate_voxels(const BsplineGrid& grid, const GridGeometry& geometry,
                   std::array<std::vector<int>, 3>& base,
                   std::array<std::vector<std::array<double, 4>>, 3>& weights) {
    for (int a = 0; a < 3; ++a) {
        base[static_cast<std::size_t>(a)].resize(static_cast<std::size_t>(geometry.dims[a]));
        weights[static_cast<std::size_t>(a)].resize(static_cast<std::size_t>(geometry.dims[a]));
        for (int i = 0; i < geometry.dims[a]; ++i) {
            const double x = geometry.origin[a] + i * geometry.spacing[a];
            const double t = (x - grid.lattice_origin[a]) / grid.spacing;
            const double fl = std::floor(t);
            const int b = static_cast<int>(fl) - 1;
            if (b < 0 || b + 3 >= grid.lattice_dims[a])
                throw ContractError("bspline_field: lattice does not cover the image domain");
            base[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] = b;
            bspline_weights(t - fl, weights[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)].data());
        }
    }
}

Vec3 field_at(const BsplineGrid& grid, const std::vector<Vec3>& coeff,
              const std::array<std::vector<int>, 3>& base,
              const std::array<std::vector<std::array<double, 4>>, 3>& weights,
              int i, int j, int k) {
    const int bi = base[0][static_cast<std::size_t>(i)];
    const int bj = base[1][static_cast<std::size_t>(j)];
    const int bk = base[2][static_cast<std::size_t>(k)];
    const auto& wx = weights[0][static_cast<std::size_t>(i)];
    const auto& wy = weights[1][static_cast<std::size_t>(j)];
    const auto& wz = weights[2][static_cast<std::size_t>(k)];
    Vec3 u{0, 0, 0};
    for (int c = 0; c < 4; ++c) {
        const std::int64_t kk = grid.node_index(bi, bj, bk + c);
        for (int b = 0; b < 4; ++b) {
            const double wyz = wy[static_cast<std::size_t>(b)] * wz[static_cast<std::size_t>(c)];
            const std::int64_t row = kk + grid.lattice_dims[0] * b;
            for (int a = 0; a < 4; ++a)
                u += (wx[static_cast<std::size_t>(a)] * wyz) *
                     coeff[static_cast<std::size_t>(row + a)];
        }
    }
    return u;
}

} // namespace

DisplacementField bspline_field(const BsplineGrid& grid, const GridGeometry& geometry) {
    geometry.validate();
    if (static_cast<std::int64_t>(grid.coefficients.size()) != grid.node_count())
        throw ContractError("bspline_field: coefficient count does not match lattice");
    std::array<std::vector<int>, 3> base;
    std::array<std::vector<std::array<double, 4>>, 3> weights;
    locate_voxels(grid, geometry, base, weights);
    DisplacementField field;
    field.geometry = geometry;
    field.vectors.resize(static_cast<std::size_t>(geometry.voxel_count()));
    parallel_for(geometry.voxel_count(), [&](std::int64_t idx) {
        const Index3 c = geometry.delinearize(idx);
        field.vectors[static_cast<std::size_t>(idx)] =
            field_at(grid, grid.coefficients, base, weights, c[0], c[1], c[2]);
    });
    return field;
}

SsdBendingObjective::SsdBendingObjective(const Volume& fixed, const Volume& moving,
                                         const BsplineGrid& layout, double bending_weight)
    : fixed_(fixed), layout_(layout), bending_weight_(bending_weight) {
    if (fixed.kind != IntensityKind::Normalised || moving.kind != IntensityKind::Normalised)
        throw ContractError("bspline_register: both volumes must be normalised");
    if (!(fixed.geometry == moving.geometry))
        throw ContractError("bspline_register: geometry mismatch");
    locate_voxels(layout_, fixed.geometry, base_, weights_);
    smoothed_moving_.resize(static_cast<std::size_t>(fixed.geometry.voxel_count()));
    parallel_for(fixed.geometry.voxel_count(), [&](std::int64_t idx) {
        const Index3 c = moving.geometry.delinearize(idx);
        double v = 0.0;
        sample_smoothed(moving, moving.geometry.index_to_point(c[0], c[1], c[2]), &v, nullptr);
        smoothed_moving_[static_cast<std::size_t>(idx)] = v;
    });
}

double SsdBendingObjective::data_term(const std::vector<Vec3>& c,
                                      std::vector<Vec3>* grad) const {
    const auto& g = fixed_.geometry;
    const std::int64_t n = g.voxel_count();
    const double inv_n = 1.0 / static_cast<double>(n);
    const std::int64_t nchunks = chunk_count(n);
    std::vector<double> partial(static_cast<std::size_t>(nchunks), 0.0);
    std::vector<std::vector<Vec3>> gpartial;
    if (grad)
        gpartial.assign(static_cast<std::size_t>(nchunks),
                        std::vector<Vec3>(static_cast<std::size_t>(layout_.node_count()),
                                          Vec3{0, 0, 0}));
    parallel_chunks(n, [&](std::int64_t chunk, std::int64_t lo, std::int64_t hi) {
        double sum = 0.0;
        std::vector<Vec3>* gbuf = grad ? &gpartial[static_cast<std::size_t>(chunk)] : nullptr;
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const Index3 v = g.delinearize(idx);
            const Vec3 x = g.index_to_point(v[0], v[1], v[2]);
            const Vec3 u = field_at(layout_, c, base_, weights_, v[0], v[1], v[2]);
            double warped = 0.0;
            Vec3 image_grad{};
            sample_smoothed(fixed_, x + u, &warped, gbuf ? &image_grad : nullptr);
            const double r = warped - smoothed_moving_[static_cast<std::size_t>(idx)];
            sum += r * r;
            if (gbuf) {
                const Vec3 coef = (2.0 * inv_n * r) * image_grad;
                const int bi = base_[0][static_cast<std::size_t>(v[0])];
                const int bj = base_[1][static_cast<std::size_t>(v[1])];
                const int bk = base_[2][static_cast<std::size_t>(v[2])];
                const auto& wx = weights_[0][static_cast<std::size_t>(v[0])];
                const auto& wy = weights_[1][static_cast<std::size_t>(v[1])];
                const auto& wz = weights_[2][static_cast<std::size_t>(v[2])];
                for (int cc = 0; cc < 4; ++cc) {
                    const std::int64_t kk = layout_.node_index(bi, bj, bk + cc);
                    for (int bb = 0; bb < 4; ++bb) {
                        const double wyz = wy[static_cast<std::size_t>(bb)] *
                                           wz[static_cast<std::size_t>(cc)];
                        const std::int64_t row = kk + layout_.lattice_dims[0] * bb;
                        for (int aa = 0; aa < 4; ++aa)
                            (*gbuf)[static_cast<std::size_t>(row + aa)] +=
                                (wx[static_cast<std::size_t>(aa)] * wyz) * coef;
                    }
                }
            }
        }
        partial[static_cast<std::size_t>(chunk)] = sum;
    });
    double total = 0.0;
    for (const double s : partial) total += s;
    if (grad) {
        for (const auto& buf : gpartial)
            for (std::size_t i = 0; i < buf.size(); ++i) (*grad)[i] += buf[i];
    }
    return total * inv_n;
}

double SsdBendingObjective::bending_term(const std::vector<Vec3>& c,
                                         std::vector<Vec3>* grad) const {
    const Index3 d = layout_.lattice_dims;
    const double inv_m = 1.0 / static_cast<double>(layout_.node_count());
    double sum = 0.0;
    auto idx = [&](int i, int j, int k) {
        return static_cast<std::size_t>(layout_.node_index(i, j, k));
    };
    auto add = [&](std::size_t node, Vec3 v) {
        if (grad) (*grad)[node] += v;
    };
    // Pure second differences along each axis.
    static constexpr int axes[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const auto& ax : axes) {
        for (int k = ax[2]; k < d[2] - ax[2]; ++k)
            for (int j = ax[1]; j < d[1] - ax[1]; ++j)
                for (int i = ax[0]; i < d[0] - ax[0]; ++i) {
                    const std::size_t c0 = idx(i - ax[0], j - ax[1], k - ax[2]);
                    const std::size_t c1 = idx(i, j, k);
                    const std::size_t c2 = idx(i + ax[0], j + ax[1], k + ax[2]);
                    const Vec3 dd = c[c0] - 2.0 * c[c1] + c[c2];
                    sum += inv_m * squared_norm(dd);
                    add(c0, (2.0 * inv_m) * dd);
                    add(c1, (-4.0 * inv_m) * dd);
                    add(c2, (2.0 * inv_m) * dd);
                }
    }
    // Mixed differences, doubled (the cross terms of the Hessian norm).
    static constexpr int pairs[3][2][3] = {{{1, 0, 0}, {0, 1, 0}},
                                           {{1, 0, 0}, {0, 0, 1}},
                                           {{0, 1, 0}, {0, 0, 1}}};
    for (const auto& pr : pairs) {
        const int* e1 = pr[0];
        const int* e2 = pr[1];
        for (int k = e1[2] + e2[2]; k < d[2] - e1[2] - e2[2]; ++k)
            for (int j = e1[1] + e2[1]; j < d[1] - e1[1] - e2[1]; ++j)
                for (int i = e1[0] + e2[0]; i < d[0] - e1[0] - e2[0]; ++i) {
                    const std::size_t pp = idx(i + e1[0] + e2[0], j + e1[1] + e2[1], k + e1[2] + e2[2]);
                    const std::size_t pm = idx(i + e1[0] - e2[0], j + e1[1] - e2[1], k + e1[2] - e2[2]);
                    const std::size_t mp = idx(i - e1[0] + e2[0], j - e1[1] + e2[1], k - e1[2] + e2[2]);
                    const std::size_t mm = idx(i - e1[0] - e2[0], j - e1[1] - e2[1], k - e1[2] - e2[2]);
                    const Vec3 dd = 0.25 * (c[pp] - c[pm] - c[mp] + c[mm]);
                    sum += 2.0 * inv_m * squared_norm(dd);
                    const Vec3 gterm = (4.0 * inv_m * 0.25) * dd;
                    add(pp, gterm);
                    add(pm, -1.0 * gterm);
                    add(mp, -1.0 * gterm);
                    add(mm, gterm);
                }
    }
    return sum;
}

double SsdBendingObjective::value(const std::vector<Vec3>& coefficients) const {
    return data_term(coefficients, nullptr) +
           bending_weight_ * bending_term(coefficients, nullptr);
}

double SsdBendingObjective::value_and_gradient(const std::vector<Vec3>& coefficients,
                                               std::vector<Vec3>& gradient) const {
    gradient.assign(static_cast<std::size_t>(layout_.node_count()), Vec3{0, 0, 0});
    const double data = data_term(coefficients, &gradient);
    std::vector<Vec3> bend_grad(gradient.size(), Vec3{0, 0, 0});
    const double bend = bending_term(coefficients, &bend_grad);
    for (std::size_t i = 0; i < gradient.size(); ++i)
        gradient[i] += bending_weight_ * bend_grad[i];
    return data + bending_weight_ * bend;
}

DisplacementField bspline_register(const Volume& fixed, const Volume& moving,
                                   double lattice_spacing, double bending_weight,
                                   int max_iters, std::vector<double>* objective_trace) {
    if (max_iters < 0) throw ContractError("bspline_register: negative iteration count");
    BsplineGrid grid = make_covering_lattice(fixed.geometry, lattice_spacing);
    const SsdBendingObjective objective(fixed, moving, grid, bending_weight);

    std::vector<Vec3> coeff = grid.coefficients;
    std::vector<Vec3> gradient;
    double energy = objective.value(coeff);
    if (objective_trace) objective_trace->push_back(energy);
    double step = -1.0;  // sized from the first gradient

    const double min_spacing = std::min({fixed.geometry.spacing.x, fixed.geometry.spacing.y,
                                         fixed.geometry.spacing.z});
    for (int iter = 0; iter < max_iters; ++iter) {
        const double current = objective.value_and_gradient(coeff, gradient);
        double gmax = 0.0;
        for (const Vec3& g : gradient)
            gmax = std::max({gmax, std::abs(g.x), std::abs(g.y), std::abs(g.z)});
        if (gmax < 1e-14) break;
        if (step < 0.0) step = 0.25 * min_spacing / gmax;

        bool accepted = false;
        std::vector<Vec3> trial(coeff.size());
        for (int halving = 0; halving < 24; ++halving) {
            for (std::size_t i = 0; i < coeff.size(); ++i)
                trial[i] = coeff[i] - step * gradient[i];
            const double e = objective.value(trial);
            if (e < current) {
                coeff.swap(trial);
                energy = e;
                if (objective_trace) objective_trace->push_back(e);
                step *= 1.5;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if (!accepted) break;
    }
    (void)energy;

    grid.coefficients = std::move(coeff);
    return bspline_field(grid, fixed.geometry);
}

} // namespace corrtps
