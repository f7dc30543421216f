#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace monet {

// Row-major throughout: rows are points (or point-neighbor slots), columns
// are coordinate/feature channels.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IdxMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// A point cloud is an N x 3 matrix of (x, y, z) in meters. Row order is
/// significant: indices are stable identities within a frame.
using PointCloud = Mat;

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SizeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Mat& m) {
    return m.allFinite();
}

inline void require_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) {
        throw InputError(std::string(what) + " contains non-finite values");
    }
}

inline void require_cloud(const PointCloud& cloud, const char* what) {
    if (cloud.rows() < 1 || cloud.cols() != 3) {
        throw InputError(std::string(what) + " must be a non-empty N x 3 matrix");
    }
    require_finite(cloud, what);
}

}  // namespace monet
