#pragma once

#include "monet/core.hpp"
#include "monet/model.hpp"
#include "monet/params.hpp"
#include "monet/synth.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace monet::train {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update over every tensor in the store; moments
/// persist in the store. Throws InputError naming the offending tensor when
/// a gradient is non-finite.
void adam_step(nn::ParamStore& params, const AdamHyper& hyper);

/// Mean Chamfer distance over the predicted frames.
double sequence_loss(const std::vector<PointCloud>& pred,
                     const std::vector<PointCloud>& target);

struct TrainConfig {
    AdamHyper adam;
    int iterations = 1000;
    int t_in = 5;
    int t_pred = 5;
    std::uint64_t seed = 0;
    int checkpoint_every = 200;
    double clip_norm = 5.0;
    bool clip = true;
    /// Empty disables checkpoint/curve files.
    std::string out_dir;

    void validate() const;
};

struct TrainResult {
    std::vector<double> losses;  // one entry per completed iteration
    bool diverged = false;
    int iterations_run = 0;
};

/// Full-sequence training: autoregressive prediction of t_pred frames,
/// Chamfer loss, backward through the unrolled pipeline, Adam step.
/// Deterministic given the seed. On divergence stops with the last finite
/// parameters retained in the model.
TrainResult train(MoNet& model, const TrainConfig& cfg,
                  const std::vector<synth::SequenceSample>& data,
                  const std::function<void(int, double)>& on_iteration = {});

/// One training step on one sample; returns the loss. Exposed for tests.
double train_step(MoNet& model, const std::vector<PointCloud>& frames, int t_in, int t_pred,
                  const AdamHyper& hyper, double clip_norm);

// ---- non-learned baselines ---------------------------------------------

/// Every predicted frame equals the last input frame.
std::vector<PointCloud> baseline_copy_last(const std::vector<PointCloud>& frames, int t_p);

/// Per-point flow from the last two frames (displacement to the nearest
/// neighbor in frame T-1), extrapolated linearly.
std::vector<PointCloud> baseline_constant_flow(const std::vector<PointCloud>& frames, int t_p);

// ---- evaluation -----------------------------------------------------------

struct EvalMethod {
    std::string name;
    std::function<std::vector<PointCloud>(const std::vector<PointCloud>&, int)> predict;
};

struct EvalRow {
    std::string method;
    int frame = 0;        // 1-based future-frame index
    double cd = 0.0;
    double emd = 0.0;
    double ms_per_prediction = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
};

/// Per-future-frame CD and EMD means over the test set. EMD runs on seeded
/// random downsamples of at most emd_cap points.
EvalReport evaluate(const std::vector<EvalMethod>& methods,
                    const std::vector<synth::SequenceSample>& test_set, int t_in, int t_p,
                    int emd_cap = 256, std::uint64_t emd_seed = 0);

}  // namespace monet::train
