#pragma once

#include "monet/core.hpp"

#include <vector>

namespace monet::metrics {

/// Optimal bijection between two equal-size clouds: mapping[i] is the target
/// index assigned to prediction i; cost is the mean assigned distance.
struct Assignment {
    std::vector<int> mapping;
    double cost = 0.0;
};

struct ChamferMatches {
    double distance = 0.0;
    std::vector<int> forward_match;   // per p in P: argmin_q ||p - q||
    std::vector<int> backward_match;  // per q in Q: argmin_p ||p - q||
};

/// Symmetric Chamfer distance:
///   (1/|P|) sum_p min_q ||p-q|| + (1/|Q|) sum_q min_p ||p-q||.
/// Equal sizes give the common-N form; unequal sizes use each cloud's own
/// count in its average. Argmin ties break by lowest index.
double chamfer(const PointCloud& p, const PointCloud& q);

/// Chamfer plus the nearest-neighbor correspondences (used by the loss
/// backward, which treats the matches as locally constant).
ChamferMatches chamfer_with_matches(const PointCloud& p, const PointCloud& q);

/// Exact Earth Mover's Distance: minimum over bijections of the mean
/// assigned Euclidean distance, solved by shortest augmenting paths in
/// O(N^3). Requires equal sizes and N <= cap.
std::pair<double, Assignment> emd_exact(const PointCloud& p, const PointCloud& q,
                                        int cap = 1024);

/// Factorial brute-force EMD oracle, N <= 8.
double emd_bruteforce(const PointCloud& p, const PointCloud& q);

}  // namespace monet::metrics
