#include "monet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace monet::metrics {

namespace {

inline double point_dist(const PointCloud& a, Eigen::Index i, const PointCloud& b,
                         Eigen::Index j) {
    const double dx = a(i, 0) - b(j, 0);
    const double dy = a(i, 1) - b(j, 1);
    const double dz = a(i, 2) - b(j, 2);
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

ChamferMatches chamfer_with_matches(const PointCloud& p, const PointCloud& q) {
    require_cloud(p, "chamfer P");
    require_cloud(q, "chamfer Q");
    const Eigen::Index np = p.rows();
    const Eigen::Index nq = q.rows();

    ChamferMatches out;
    out.forward_match.resize(static_cast<std::size_t>(np));
    out.backward_match.assign(static_cast<std::size_t>(nq), 0);
    std::vector<double> back_best(static_cast<std::size_t>(nq),
                                  std::numeric_limits<double>::infinity());

    double fwd_sum = 0.0;
    for (Eigen::Index i = 0; i < np; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (Eigen::Index j = 0; j < nq; ++j) {
            const double d = point_dist(p, i, q, j);
            if (d < best) {
                best = d;
                best_j = static_cast<int>(j);
            }
            if (d < back_best[static_cast<std::size_t>(j)]) {
                back_best[static_cast<std::size_t>(j)] = d;
                out.backward_match[static_cast<std::size_t>(j)] = static_cast<int>(i);
            }
        }
        fwd_sum += best;
        out.forward_match[static_cast<std::size_t>(i)] = best_j;
    }
    const double bwd_sum = std::accumulate(back_best.begin(), back_best.end(), 0.0);
    out.distance = fwd_sum / static_cast<double>(np) + bwd_sum / static_cast<double>(nq);
    return out;
}

double chamfer(const PointCloud& p, const PointCloud& q) {
    return chamfer_with_matches(p, q).distance;
}

std::pair<double, Assignment> emd_exact(const PointCloud& p, const PointCloud& q, int cap) {
    require_cloud(p, "emd P");
    require_cloud(q, "emd Q");
    if (p.rows() != q.rows()) {
        throw InputError("emd_exact: clouds must have equal sizes");
    }
    const int n = static_cast<int>(p.rows());
    if (n > cap) {
        throw CapacityError("emd_exact: N exceeds the exact-solver cap; downsample first");
    }

    Mat cost(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            cost(i, j) = point_dist(p, i, q, j);
        }
    }

    // Shortest augmenting path assignment with dual potentials (1-based
    // helper arrays, column 0 is the virtual root).
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);  // per column: assigned row
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1,
                                 std::numeric_limits<double>::infinity());
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = match[static_cast<std::size_t>(j0)];
            double delta = std::numeric_limits<double>::infinity();
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    Assignment assign;
    assign.mapping.assign(static_cast<std::size_t>(n), -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        const int i = match[static_cast<std::size_t>(j)];
        assign.mapping[static_cast<std::size_t>(i - 1)] = j - 1;
        total += cost(i - 1, j - 1);
    }
    assign.cost = total / static_cast<double>(n);
    return {assign.cost, assign};
}

double emd_bruteforce(const PointCloud& p, const PointCloud& q) {
    require_cloud(p, "emd P");
    require_cloud(q, "emd Q");
    if (p.rows() != q.rows()) {
        throw InputError("emd_bruteforce: clouds must have equal sizes");
    }
    const int n = static_cast<int>(p.rows());
    if (n > 8) {
        throw CapacityError("emd_bruteforce: N must be <= 8");
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            total += point_dist(p, i, q, perm[static_cast<std::size_t>(i)]);
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

}  // namespace monet::metrics
