#include "monet/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

namespace monet::geom {

namespace {

inline double dist2(const PointCloud& a, int i, const PointCloud& b, int j) {
    const double dx = b(j, 0) - a(i, 0);
    const double dy = b(j, 1) - a(i, 1);
    const double dz = b(j, 2) - a(i, 2);
    return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<int> fps(const PointCloud& cloud, int m, int seed_index) {
    require_cloud(cloud, "fps cloud");
    const int n = static_cast<int>(cloud.rows());
    if (m < 1 || m > n) {
        throw SizeError("fps: m must be in [1, N]");
    }
    if (seed_index < 0 || seed_index >= n) {
        throw InputError("fps: seed_index out of range");
    }

    std::vector<int> picked;
    picked.reserve(m);
    picked.push_back(seed_index);

    // min squared distance from each point to the selected set
    std::vector<double> min_d2(n);
    for (int i = 0; i < n; ++i) {
        min_d2[i] = dist2(cloud, i, cloud, seed_index);
    }

    for (int step = 1; step < m; ++step) {
        int best = -1;
        double best_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        picked.push_back(best);
        min_d2[best] = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d2 = dist2(cloud, i, cloud, best);
            if (d2 < min_d2[i]) {
                min_d2[i] = d2;
            }
        }
    }
    return picked;
}

namespace {

NeighborIndex finalize_neighbors(std::vector<std::vector<std::pair<double, int>>>& rows, int k) {
    NeighborIndex out;
    out.k = k;
    const int n = static_cast<int>(rows.size());
    out.indices.resize(n, k);
    out.distances.resize(n, k);
    for (int i = 0; i < n; ++i) {
        auto& row = rows[i];
        std::partial_sort(row.begin(), row.begin() + k, row.end());
        for (int j = 0; j < k; ++j) {
            out.indices(i, j) = row[j].second;
            out.distances(i, j) = std::sqrt(row[j].first);
        }
    }
    return out;
}

}  // namespace

NeighborIndex knn(const PointCloud& queries, const PointCloud& refs, int k) {
    require_cloud(queries, "knn queries");
    require_cloud(refs, "knn refs");
    const int nq = static_cast<int>(queries.rows());
    const int nr = static_cast<int>(refs.rows());
    if (k < 1 || k > nr) {
        throw SizeError("knn: k must be in [1, refs.N]");
    }

    NeighborIndex out;
    out.k = k;
    out.indices.resize(nq, k);
    out.distances.resize(nq, k);
    std::vector<std::pair<double, int>> row(static_cast<std::size_t>(nr));
    for (int i = 0; i < nq; ++i) {
        for (int j = 0; j < nr; ++j) {
            row[static_cast<std::size_t>(j)] = {dist2(queries, i, refs, j), j};
        }
        std::partial_sort(row.begin(), row.begin() + k, row.end());
        for (int j = 0; j < k; ++j) {
            out.indices(i, j) = row[static_cast<std::size_t>(j)].second;
            out.distances(i, j) = std::sqrt(row[static_cast<std::size_t>(j)].first);
        }
    }
    return out;
}

NeighborIndex knn_grid(const PointCloud& queries, const PointCloud& refs, int k) {
    require_cloud(queries, "knn queries");
    require_cloud(refs, "knn refs");
    const int nq = static_cast<int>(queries.rows());
    const int nr = static_cast<int>(refs.rows());
    if (k < 1 || k > nr) {
        throw SizeError("knn: k must be in [1, refs.N]");
    }

    // Cell edge sized so the average cell holds a handful of points.
    Eigen::RowVector3d lo = refs.colwise().minCoeff();
    Eigen::RowVector3d hi = refs.colwise().maxCoeff();
    const double extent = std::max({hi(0) - lo(0), hi(1) - lo(1), hi(2) - lo(2)});
    double cell = extent / std::max(1.0, std::cbrt(static_cast<double>(nr)));
    if (!(cell > 0.0)) {
        return knn(queries, refs, k);  // degenerate cloud, one cell
    }

    auto cell_of = [&](double x, double lo_c) { return static_cast<int>(std::floor((x - lo_c) / cell)); };
    struct Key {
        int x, y, z;
        bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& c) const {
            std::size_t h = static_cast<std::size_t>(c.x) * 73856093u;
            h ^= static_cast<std::size_t>(c.y) * 19349663u;
            h ^= static_cast<std::size_t>(c.z) * 83492791u;
            return h;
        }
    };
    std::unordered_map<Key, std::vector<int>, KeyHash> grid;
    grid.reserve(static_cast<std::size_t>(nr));
    for (int j = 0; j < nr; ++j) {
        grid[{cell_of(refs(j, 0), lo(0)), cell_of(refs(j, 1), lo(1)), cell_of(refs(j, 2), lo(2))}]
            .push_back(j);
    }

    std::vector<std::vector<std::pair<double, int>>> rows(nq);
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < nq; ++i) {
        cand.clear();
        const Key c{cell_of(queries(i, 0), lo(0)), cell_of(queries(i, 1), lo(1)),
                    cell_of(queries(i, 2), lo(2))};
        // Expand rings until the kth best distance is covered by the ring bound.
        for (int ring = 0;; ++ring) {
            for (int dx = -ring; dx <= ring; ++dx) {
                for (int dy = -ring; dy <= ring; ++dy) {
                    for (int dz = -ring; dz <= ring; ++dz) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) {
                            continue;  // shell only
                        }
                        auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
                        if (it == grid.end()) continue;
                        for (int j : it->second) {
                            cand.emplace_back(dist2(queries, i, refs, j), j);
                        }
                    }
                }
            }
            if (static_cast<int>(cand.size()) >= nr) break;  // every reference seen
            if (static_cast<int>(cand.size()) >= k) {
                std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
                const double kth = cand[k - 1].first;
                // Cells beyond the searched shells are at least ring*cell away.
                const double bound = static_cast<double>(ring) * cell;
                if (kth <= bound * bound) break;
            }
        }
        rows[i] = cand;
    }
    // Candidate rows may hold more than k entries; finalize sorts the best k
    // with the same (distance, index) comparator as the exhaustive path.
    return finalize_neighbors(rows, k);
}

Mat group_geometric_features(const PointCloud& centers, const PointCloud& refs,
                             const NeighborIndex& nbr) {
    require_cloud(centers, "group centers");
    require_cloud(refs, "group refs");
    const int n = nbr.center_count();
    const int k = nbr.k;
    if (n != centers.rows()) {
        throw InputError("group_geometric_features: neighbor table does not match centers");
    }
    Mat out(static_cast<Eigen::Index>(n) * k, 4);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            const int r = nbr.indices(i, j);
            if (r < 0 || r >= refs.rows()) {
                throw InputError("group_geometric_features: neighbor index out of range");
            }
            const double dx = refs(r, 0) - centers(i, 0);
            const double dy = refs(r, 1) - centers(i, 1);
            const double dz = refs(r, 2) - centers(i, 2);
            const Eigen::Index row = static_cast<Eigen::Index>(i) * k + j;
            out(row, 0) = dx;
            out(row, 1) = dy;
            out(row, 2) = dz;
            out(row, 3) = std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    }
    return out;
}

std::vector<int> random_downsample_indices(int total, int n, std::uint64_t rng_seed) {
    if (n < 0 || n > total) {
        throw SizeError("random_downsample: n must be in [0, N]");
    }
    std::vector<int> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(rng_seed);
    // Partial Fisher-Yates, then ascending order so the subset keeps cloud order.
    for (int i = 0; i < n; ++i) {
        std::uniform_int_distribution<int> pick(i, total - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

PointCloud random_downsample(const PointCloud& cloud, int n, std::uint64_t rng_seed) {
    require_cloud(cloud, "random_downsample cloud");
    const auto idx = random_downsample_indices(static_cast<int>(cloud.rows()), n, rng_seed);
    PointCloud out(n, 3);
    for (int i = 0; i < n; ++i) {
        out.row(i) = cloud.row(idx[i]);
    }
    return out;
}

}  // namespace monet::geom
