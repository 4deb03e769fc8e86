// metrics.cpp
#include "corrtps/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "corrtps/kdtree.hpp"

namespace corrtps {

std::vector<Vec3> surface_points(const Mask& mask) {
    mask.validate();
    if (mask.foreground_count() == 0)
        throw DegenerateInputError("surface_points: empty mask");
    const auto& g = mask.geometry;
    std::vector<Vec3> pts;
    for (std::int64_t idx = 0; idx < g.voxel_count(); ++idx) {
        if (mask.bits[static_cast<std::size_t>(idx)] == 0) continue;
        const Index3 c = g.delinearize(idx);
        bool boundary = false;
        static constexpr int offs[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                           {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& o : offs) {
            const int i = c[0] + o[0], j = c[1] + o[1], k = c[2] + o[2];
            if (!g.contains(i, j, k) || !mask.at(i, j, k)) {
                boundary = true;
                break;
            }
        }
        if (boundary) pts.push_back(g.index_to_point(c[0], c[1], c[2]));
    }
    return pts;
}

namespace {

// Directed mean and max nearest-neighbour distances from a to b.
std::pair<double, double> directed_distances(const std::vector<Vec3>& a, const KdTree3& b) {
    double sum = 0.0, worst = 0.0;
    for (const Vec3& p : a) {
        const double d = std::sqrt(b.nearest(p).squared_dist);
        sum += d;
        worst = std::max(worst, d);
    }
    return {sum / static_cast<double>(a.size()), worst};
}

} // namespace

double mdta(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw ContractError("mdta: empty point set");
    const KdTree3 ta(a), tb(b);
    const double ab = directed_distances(a, tb).first;
    const double ba = directed_distances(b, ta).first;
    return (ab + ba) / 2.0;
}

double hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw ContractError("hausdorff: empty point set");
    const KdTree3 ta(a), tb(b);
    return std::max(directed_distances(a, tb).second, directed_distances(b, ta).second);
}

double dice(const Mask& a, const Mask& b) {
    if (!(a.geometry == b.geometry)) throw ContractError("dice: geometry mismatch");
    std::int64_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        na += a.bits[i] != 0;
        nb += b.bits[i] != 0;
        inter += (a.bits[i] != 0 && b.bits[i] != 0);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

ImageSimilarity image_similarity(const Volume& a, const Volume& b) {
    if (!(a.geometry == b.geometry)) throw ContractError("image_similarity: geometry mismatch");
    const std::size_t n = a.values.size();
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sa += a.values[i];
        sb += b.values[i];
    }
    const double ma = sa / static_cast<double>(n), mb = sb / static_cast<double>(n);
    double mse = 0, va = 0, vb = 0, cov = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a.values[i] - ma, db = b.values[i] - mb;
        const double diff = static_cast<double>(a.values[i]) - b.values[i];
        mse += diff * diff;
        va += da * da;
        vb += db * db;
        cov += da * db;
    }
    ImageSimilarity s;
    s.mse = mse / static_cast<double>(n);
    if (va > 0.0 && vb > 0.0) {
        s.ncc = cov / std::sqrt(va * vb);
    } else {
        s.ncc = (va == 0.0 && vb == 0.0 && ma == mb) ? 1.0 : 0.0;
    }
    return s;
}

PairedTestResult wilcoxon_signed_rank(const std::vector<double>& x,
                                      const std::vector<double>& y) {
    if (x.size() != y.size())
        throw ContractError("wilcoxon_signed_rank: samples differ in length");
    std::vector<double> diff;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d != 0.0) diff.push_back(d);
    }
    if (diff.empty())
        throw DegenerateInputError("wilcoxon_signed_rank: all differences are zero");
    const int n = static_cast<int>(diff.size());
    if (n < 5)
        throw DegenerateInputError(
            "wilcoxon_signed_rank: fewer than 5 non-zero differences");

    // Mid-ranks of |d|, doubled so ties stay integral.
    std::vector<int> order(diff.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = std::abs(diff[static_cast<std::size_t>(a)]);
        const double db = std::abs(diff[static_cast<std::size_t>(b)]);
        if (da != db) return da < db;
        return a < b;
    });
    std::vector<std::int64_t> rank2(diff.size());  // 2 * midrank
    std::vector<std::int64_t> tie_sizes;
    for (std::size_t s = 0; s < order.size();) {
        std::size_t e = s;
        const double v = std::abs(diff[static_cast<std::size_t>(order[s])]);
        while (e < order.size() && std::abs(diff[static_cast<std::size_t>(order[e])]) == v) ++e;
        const std::int64_t two_mid = static_cast<std::int64_t>(s + 1) + static_cast<std::int64_t>(e);
        for (std::size_t t = s; t < e; ++t) rank2[static_cast<std::size_t>(order[t])] = two_mid;
        tie_sizes.push_back(static_cast<std::int64_t>(e - s));
        s = e;
    }

    std::int64_t w2 = 0;  // 2 * W+
    for (std::size_t i = 0; i < diff.size(); ++i)
        if (diff[i] > 0.0) w2 += rank2[i];

    PairedTestResult result;
    result.n_pairs = n;
    result.statistic = static_cast<double>(w2) / 2.0;

    if (n <= 12) {
        const std::uint64_t patterns = 1ull << n;
        std::uint64_t le = 0, ge = 0;
        for (std::uint64_t bits = 0; bits < patterns; ++bits) {
            std::int64_t s2 = 0;
            for (int i = 0; i < n; ++i)
                if (bits >> i & 1ull) s2 += rank2[static_cast<std::size_t>(i)];
            le += s2 <= w2;
            ge += s2 >= w2;
        }
        const double tail = static_cast<double>(std::min(le, ge)) / static_cast<double>(patterns);
        result.p_value = std::min(1.0, 2.0 * tail);
    } else {
        const double nn = n;
        const double mean = nn * (nn + 1.0) / 4.0;
        double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
        for (const std::int64_t t : tie_sizes)
            var -= static_cast<double>(t * t * t - t) / 48.0;
        if (!(var > 0.0))
            throw DegenerateInputError("wilcoxon_signed_rank: zero variance (all ties)");
        const double w = static_cast<double>(w2) / 2.0;
        double z = w - mean;
        z -= z > 0.0 ? 0.5 : (z < 0.0 ? -0.5 : 0.0);  // continuity correction
        z /= std::sqrt(var);
        result.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    }
    return result;
}

double bonferroni_threshold(double alpha, int m) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ContractError("bonferroni_threshold: alpha must be in (0,1)");
    if (m < 1) throw ContractError("bonferroni_threshold: m must be >= 1");
    return alpha / static_cast<double>(m);
}

} // namespace corrtps
