#pragma once
#include <cstdint>
#include <vector>

#include "pf/tensor.hpp"

namespace pf {

// N points with 3-D positions, optional per-point features / labels and an
// optional whole-cloud class label.
struct PointCloud {
    Tensor positions;            // [N, 3]
    Tensor features;             // [N, C] or empty
    std::vector<int> labels;     // per-point, empty when unlabeled
    int class_label = -1;

    int size() const { return positions.empty() ? 0 : positions.dim(0); }
    void validate() const;
};

// For each of M centers (indices into the source cloud), the K nearest
// source points. Slot 0 is the center itself; distances to the center are
// non-decreasing across the K slots.
struct NeighborhoodIndex {
    std::vector<int> centers;    // M
    std::vector<int> neighbors;  // M * K, row-major
    int k = 0;

    int center_count() const { return static_cast<int>(centers.size()); }
    int neighbor(int m, int slot) const { return neighbors[static_cast<size_t>(m) * k + slot]; }
};

// Greedy farthest point sampling. The first center is the point farthest
// from the centroid; each following center maximizes the minimum squared
// distance to those already selected. Ties break toward the lowest index.
// The centroid is accumulated over value-sorted coordinates so the seed
// choice does not depend on point order.
std::vector<int> farthest_point_sample(const PointCloud& cloud, int m);

// Brute-force K nearest neighbors over the full cloud for each center,
// compared on exact squared distances, ties toward the lower index.
NeighborhoodIndex knn(const PointCloud& cloud, const std::vector<int>& center_indices, int k);

// Translate to zero centroid, then scale uniformly so max |coordinate| is 1
// (scale 1 when all points coincide). Features and labels pass through.
PointCloud normalize_unit_cube(const PointCloud& cloud);

// Train-time augmentation: one uniform rescale in [0.67, 1.5] followed by a
// uniform per-axis translation in [-0.2, 0.2]. Draw order: scale, then the
// three translation components.
PointCloud augment(const PointCloud& cloud, std::uint64_t rng_seed);

double squared_distance(const Tensor& positions, int i, int j);

} // namespace pf
