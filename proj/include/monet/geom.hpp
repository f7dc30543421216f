#pragma once

#include "monet/core.hpp"

#include <cstdint>
#include <vector>

namespace monet::geom {

/// k-nearest-neighbor table. Row i holds the reference indices of the k
/// nearest points to query i, sorted by nondecreasing distance (ties broken
/// by lowest index). `distances` are exact Euclidean distances in meters.
struct NeighborIndex {
    IdxMat indices;   // center_count x k
    Mat distances;    // center_count x k
    int k = 0;

    int center_count() const { return static_cast<int>(indices.rows()); }
};

/// Furthest point sampling: greedy max-min subset selection starting from
/// seed_index. result[0] == seed_index; each following pick maximizes the
/// minimum distance to everything selected so far, ties broken by lowest
/// index. No duplicates.
std::vector<int> fps(const PointCloud& cloud, int m, int seed_index = 0);

/// Exhaustive kNN: per query, the k smallest-distance reference indices.
NeighborIndex knn(const PointCloud& queries, const PointCloud& refs, int k);

/// Voxel-grid accelerated kNN. Returns bit-identical results to knn().
NeighborIndex knn_grid(const PointCloud& queries, const PointCloud& refs, int k);

/// Per (center, neighbor) slot: (dx, dy, dz, ||d||) where d = ref - center.
/// Output has nbr.center_count * nbr.k rows and 4 columns; row i*k+j belongs
/// to neighbor j of center i.
Mat group_geometric_features(const PointCloud& centers, const PointCloud& refs,
                             const NeighborIndex& nbr);

/// Seeded sampling of n points without replacement. Selected indices are
/// returned in ascending order, so n == N reproduces the cloud unchanged.
PointCloud random_downsample(const PointCloud& cloud, int n, std::uint64_t rng_seed);

/// Index form of random_downsample (ascending order, no duplicates).
std::vector<int> random_downsample_indices(int total, int n, std::uint64_t rng_seed);

}  // namespace monet::geom
