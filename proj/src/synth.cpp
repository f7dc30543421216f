#include "monet/synth.hpp"

#include "monet/geom.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <random>

namespace monet::synth {

void SceneConfig::validate() const {
    if (n_points < 1) {
        throw ConfigError("scene config: n_points must be >= 1");
    }
    if (n_objects < 0 || frame_count < 2) {
        throw ConfigError("scene config: need >= 0 objects and >= 2 frames");
    }
    if (background_fraction < 0.0 || background_fraction > 1.0) {
        throw ConfigError("scene config: background fraction must be in [0, 1]");
    }
    if (!(min_speed >= 0.0) || !(max_speed >= min_speed) || !(min_spin >= 0.0) ||
        !(max_spin >= min_spin)) {
        throw ConfigError("scene config: bad velocity ranges");
    }
}

std::string to_string(Split s) {
    switch (s) {
        case Split::kTrain:
            return "train";
        case Split::kVal:
            return "val";
        default:
            return "test";
    }
}

namespace {

using Vec3 = Eigen::Vector3d;

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (v.norm() < 1e-9);
    return v.normalized();
}

// surface samples of a primitive shape, centered at the origin
Mat sample_shape(int shape_kind, int count, double size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Mat pts(count, 3);
    switch (shape_kind % 3) {
        case 0: {  // box surface
            std::uniform_int_distribution<int> face(0, 5);
            for (int i = 0; i < count; ++i) {
                const int f = face(rng);
                double u = unit(rng) * size, v = unit(rng) * size;
                const double w = (f % 2 == 0) ? size : -size;
                if (f / 2 == 0) pts.row(i) << w, u, v;
                if (f / 2 == 1) pts.row(i) << u, w, v;
                if (f / 2 == 2) pts.row(i) << u, v, w;
            }
            break;
        }
        case 1: {  // sphere surface
            for (int i = 0; i < count; ++i) {
                pts.row(i) = (random_unit(rng) * size).transpose();
            }
            break;
        }
        default: {  // planar patch with a random orientation
            const Vec3 a = random_unit(rng);
            Vec3 b = random_unit(rng);
            b = (b - b.dot(a) * a).normalized();
            for (int i = 0; i < count; ++i) {
                pts.row(i) = (unit(rng) * size * a + unit(rng) * size * b).transpose();
            }
            break;
        }
    }
    return pts;
}

struct MovingObject {
    int first_row = 0;
    int count = 0;
    Vec3 centroid = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 spin_axis = Vec3::UnitZ();
    double spin_rate = 0.0;
};

}  // namespace

SequenceSample make_sequence(const SceneConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> speed_dist(cfg.min_speed, cfg.max_speed);
    std::uniform_real_distribution<double> spin_dist(cfg.min_spin, cfg.max_spin);
    std::uniform_real_distribution<double> size_dist(0.4, 1.2);

    // Oversample the base set when per-frame resampling is on, so frames do
    // not all see the same points.
    const int base_count = cfg.resample ? (cfg.n_points + cfg.n_points / 2) : cfg.n_points;
    int n_bg = static_cast<int>(std::lround(cfg.background_fraction * base_count));
    if (cfg.n_objects == 0) n_bg = base_count;
    const int obj_total = base_count - n_bg;

    Mat positions(base_count, 3);
    std::vector<MovingObject> objects;
    int row = 0;
    for (int o = 0; o < cfg.n_objects && obj_total > 0; ++o) {
        MovingObject obj;
        obj.first_row = row;
        obj.count = obj_total / cfg.n_objects + (o < obj_total % cfg.n_objects ? 1 : 0);
        if (obj.count == 0) continue;
        obj.centroid = Vec3(unit(rng), unit(rng), unit(rng)) * (cfg.half_extent * 0.5);
        const double size = size_dist(rng);
        Mat local = sample_shape(o, obj.count, size, rng);
        for (int i = 0; i < obj.count; ++i) {
            positions.row(row + i) = local.row(i) + obj.centroid.transpose();
        }
        obj.velocity = random_unit(rng) * speed_dist(rng);
        obj.spin_axis = random_unit(rng);
        obj.spin_rate = spin_dist(rng);
        objects.push_back(obj);
        row += obj.count;
    }
    for (; row < base_count; ++row) {  // static background
        positions.row(row) = Vec3(unit(rng), unit(rng), unit(rng)).transpose() * cfg.half_extent;
    }

    // Roll the scene forward; each frame stores base positions plus the flow
    // that produced the next ones, so flow-applied-to-frame reconstructs the
    // next frame bit-exactly.
    std::vector<Mat> base_frames;
    std::vector<Mat> base_flows;
    base_frames.push_back(positions);
    for (int t = 0; t + 1 < cfg.frame_count; ++t) {
        Mat flow = Mat::Zero(base_count, 3);
        for (auto& obj : objects) {
            if (obj.spin_rate == 0.0) {
                // pure translation: keep the displacement exact
                for (int i = 0; i < obj.count; ++i) {
                    flow.row(obj.first_row + i) = obj.velocity.transpose();
                }
            } else {
                const Eigen::Matrix3d rot =
                    Eigen::AngleAxisd(obj.spin_rate, obj.spin_axis).toRotationMatrix();
                for (int i = 0; i < obj.count; ++i) {
                    const Vec3 p = positions.row(obj.first_row + i).transpose();
                    const Vec3 moved = rot * (p - obj.centroid) + obj.centroid + obj.velocity;
                    flow.row(obj.first_row + i) = (moved - p).transpose();
                }
            }
            obj.centroid += obj.velocity;
        }
        positions += flow;
        base_flows.push_back(flow);
        base_frames.push_back(positions);
    }

    SequenceSample sample;
    sample.seed = cfg.seed;
    if (!cfg.resample) {
        sample.frames = std::move(base_frames);
        sample.gt_flow = std::move(base_flows);
        return sample;
    }

    for (int t = 0; t < cfg.frame_count; ++t) {
        const std::uint64_t frame_seed =
            cfg.seed ^ (0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(t) * 0x100000001b3ull);
        const auto idx =
            geom::random_downsample_indices(base_count, cfg.n_points, frame_seed);
        Mat frame(cfg.n_points, 3);
        Mat flow(cfg.n_points, 3);
        for (int i = 0; i < cfg.n_points; ++i) {
            frame.row(i) = base_frames[static_cast<std::size_t>(t)].row(idx[static_cast<std::size_t>(i)]);
            if (t + 1 < cfg.frame_count) {
                flow.row(i) = base_flows[static_cast<std::size_t>(t)].row(idx[static_cast<std::size_t>(i)]);
            }
        }
        sample.frames.push_back(std::move(frame));
        if (t + 1 < cfg.frame_count) {
            sample.gt_flow.push_back(std::move(flow));
        }
    }
    return sample;
}

std::vector<SequenceSample> dataset(const SplitCounts& counts, const SceneConfig& tmpl) {
    if (counts.train < 0 || counts.val < 0 || counts.test < 0) {
        throw ConfigError("dataset: split counts must be >= 0");
    }
    std::vector<SequenceSample> out;
    const auto emit = [&](Split split, int count, std::uint64_t offset) {
        for (int i = 0; i < count; ++i) {
            SceneConfig cfg = tmpl;
            cfg.seed = tmpl.seed + offset + static_cast<std::uint64_t>(i);
            SequenceSample s = make_sequence(cfg);
            s.split = split;
            out.push_back(std::move(s));
        }
    };
    // widely separated seed blocks keep the splits disjoint
    emit(Split::kTrain, counts.train, 0x01000000ull);
    emit(Split::kVal, counts.val, 0x02000000ull);
    emit(Split::kTest, counts.test, 0x03000000ull);
    return out;
}

}  // namespace monet::synth
