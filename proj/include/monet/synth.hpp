#pragma once

#include "monet/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace monet::synth {

/// Rigid-motion scene recipe. Each object is a random surface shape moving
/// with constant linear and angular velocity; the background is static.
struct SceneConfig {
    int n_points = 512;
    int n_objects = 2;
    double min_speed = 0.1;   // m/frame
    double max_speed = 0.5;
    double min_spin = 0.0;    // rad/frame
    double max_spin = 0.15;
    double background_fraction = 0.4;
    int frame_count = 10;     // T inputs + T_p targets
    std::uint64_t seed = 0;
    /// Independent per-frame random resampling of a denser base set,
    /// mimicking sensor resampling. Disabled keeps point identities across
    /// frames.
    bool resample = false;
    double half_extent = 6.0;  // scene bounding half-size in meters

    void validate() const;
};

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split s);

struct SequenceSample {
    std::vector<PointCloud> frames;
    /// gt_flow[t] rows align with frames[t]: displacement of that point from
    /// frame t to t+1 under the true rigid motion (frame_count - 1 entries).
    std::vector<Mat> gt_flow;
    Split split = Split::kTrain;
    std::uint64_t seed = 0;
};

SequenceSample make_sequence(const SceneConfig& cfg);

struct SplitCounts {
    int train = 0;
    int val = 0;
    int test = 0;
};

/// Deterministic enumeration with disjoint seeds per split, so no scene is
/// shared between train and test.
std::vector<SequenceSample> dataset(const SplitCounts& counts, const SceneConfig& tmpl);

}  // namespace monet::synth
