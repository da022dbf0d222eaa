#include "pf/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "pf/rng.hpp"

namespace pf {

void PointCloud::validate() const {
    if (positions.empty() || positions.rank() != 2 || positions.dim(1) != 3)
        throw DimensionError("point cloud positions must be [N,3], got " +
                             (positions.empty() ? std::string("empty") : shape_str(positions.shape())));
    if (!positions.all_finite()) throw NumericError("point cloud positions contain non-finite values");
    const int n = positions.dim(0);
    if (!features.empty() && (features.rank() != 2 || features.dim(0) != n))
        throw DimensionError("feature rows " + shape_str(features.shape()) + " do not match " +
                             std::to_string(n) + " points");
    if (!labels.empty() && static_cast<int>(labels.size()) != n)
        throw DimensionError("label count " + std::to_string(labels.size()) + " does not match " +
                             std::to_string(n) + " points");
}

double squared_distance(const Tensor& positions, int i, int j) {
    const double dx = positions.at(i, 0) - positions.at(j, 0);
    const double dy = positions.at(i, 1) - positions.at(j, 1);
    const double dz = positions.at(i, 2) - positions.at(j, 2);
    return dx * dx + dy * dy + dz * dz;
}

std::vector<int> farthest_point_sample(const PointCloud& cloud, int m) {
    cloud.validate();
    const int n = cloud.size();
    if (m < 1 || m > n)
        throw ArgumentError("farthest_point_sample: M=" + std::to_string(m) + " outside [1, " +
                            std::to_string(n) + "]");

    // Permutation-invariant centroid: sum each axis over sorted values.
    double centroid[3];
    {
        std::vector<double> axis(static_cast<size_t>(n));
        for (int a = 0; a < 3; ++a) {
            for (int i = 0; i < n; ++i) axis[static_cast<size_t>(i)] = cloud.positions.at(i, a);
            std::sort(axis.begin(), axis.end());
            double sum = 0.0;
            for (double v : axis) sum += v;
            centroid[a] = sum / n;
        }
    }

    int seed = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        const double dx = cloud.positions.at(i, 0) - centroid[0];
        const double dy = cloud.positions.at(i, 1) - centroid[1];
        const double dz = cloud.positions.at(i, 2) - centroid[2];
        const double d = dx * dx + dy * dy + dz * dz;
        if (d > best) {
            best = d;
            seed = i;
        }
    }

    std::vector<int> selected;
    selected.reserve(static_cast<size_t>(m));
    selected.push_back(seed);
    std::vector<char> chosen(static_cast<size_t>(n), 0);
    chosen[static_cast<size_t>(seed)] = 1;
    std::vector<double> min_d(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) min_d[static_cast<size_t>(i)] = squared_distance(cloud.positions, i, seed);

    while (static_cast<int>(selected.size()) < m) {
        int pick = -1;
        double far = -1.0;
        for (int i = 0; i < n; ++i) {
            if (chosen[static_cast<size_t>(i)]) continue;
            if (min_d[static_cast<size_t>(i)] > far) {
                far = min_d[static_cast<size_t>(i)];
                pick = i;
            }
        }
        selected.push_back(pick);
        chosen[static_cast<size_t>(pick)] = 1;
        for (int i = 0; i < n; ++i)
            min_d[static_cast<size_t>(i)] =
                std::min(min_d[static_cast<size_t>(i)], squared_distance(cloud.positions, i, pick));
    }
    return selected;
}

NeighborhoodIndex knn(const PointCloud& cloud, const std::vector<int>& center_indices, int k) {
    cloud.validate();
    const int n = cloud.size();
    if (k < 1 || k > n)
        throw ArgumentError("knn: K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    for (int c : center_indices)
        if (c < 0 || c >= n)
            throw ArgumentError("knn: center index " + std::to_string(c) + " out of range [0, " +
                                std::to_string(n) + ")");

    NeighborhoodIndex out;
    out.centers = center_indices;
    out.k = k;
    out.neighbors.resize(center_indices.size() * static_cast<size_t>(k));

    std::vector<std::pair<double, int>> cand;
    for (size_t m = 0; m < center_indices.size(); ++m) {
        const int c = center_indices[m];
        cand.clear();
        cand.reserve(static_cast<size_t>(n) - 1);
        for (int i = 0; i < n; ++i) {
            if (i == c) continue;
            cand.emplace_back(squared_distance(cloud.positions, i, c), i);
        }
        // self always occupies slot 0; the rest sort by (distance, index)
        std::partial_sort(cand.begin(), cand.begin() + std::min<size_t>(cand.size(), static_cast<size_t>(k) - 1),
                          cand.end());
        out.neighbors[m * static_cast<size_t>(k)] = c;
        for (int slot = 1; slot < k; ++slot)
            out.neighbors[m * static_cast<size_t>(k) + slot] = cand[static_cast<size_t>(slot) - 1].second;
    }
    return out;
}

PointCloud normalize_unit_cube(const PointCloud& cloud) {
    cloud.validate();
    const int n = cloud.size();
    PointCloud out = cloud;
    double c[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) c[a] += cloud.positions.at(i, a);
    for (double& v : c) v /= n;

    double maxabs = 0.0;
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a)
            maxabs = std::max(maxabs, std::abs(cloud.positions.at(i, a) - c[a]));
    const double scale = maxabs > 0.0 ? 1.0 / maxabs : 1.0;

    for (int i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a)
            out.positions.at(i, a) = (cloud.positions.at(i, a) - c[a]) * scale;
    return out;
}

PointCloud augment(const PointCloud& cloud, std::uint64_t rng_seed) {
    cloud.validate();
    Rng rng(rng_seed);
    const double s = rng.uniform(0.67, 1.5);
    const double tx = rng.uniform(-0.2, 0.2);
    const double ty = rng.uniform(-0.2, 0.2);
    const double tz = rng.uniform(-0.2, 0.2);
    PointCloud out = cloud;
    for (int i = 0; i < cloud.size(); ++i) {
        out.positions.at(i, 0) = cloud.positions.at(i, 0) * s + tx;
        out.positions.at(i, 1) = cloud.positions.at(i, 1) * s + ty;
        out.positions.at(i, 2) = cloud.positions.at(i, 2) * s + tz;
    }
    return out;
}

} // namespace pf
