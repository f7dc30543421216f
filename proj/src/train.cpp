#include "monet/train.hpp"

#include "monet/geom.hpp"
#include "monet/metrics.hpp"
#include "monet/tape.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>

namespace monet::train {

void adam_step(nn::ParamStore& params, const AdamHyper& hyper) {
    if (!(hyper.lr >= 0.0) || hyper.beta1 <= 0.0 || hyper.beta1 >= 1.0 || hyper.beta2 <= 0.0 ||
        hyper.beta2 >= 1.0) {
        throw ConfigError("adam: bad hyperparameters");
    }
    for (auto& [name, e] : params) {
        if (!e.grad.allFinite()) {
            throw InputError("adam: non-finite gradient in tensor '" + name + "'");
        }
    }
    params.adam_step_count += 1;
    const double t = static_cast<double>(params.adam_step_count);
    const double corr1 = 1.0 - std::pow(hyper.beta1, t);
    const double corr2 = 1.0 - std::pow(hyper.beta2, t);
    for (auto& [name, e] : params) {
        e.adam_m = hyper.beta1 * e.adam_m + (1.0 - hyper.beta1) * e.grad;
        e.adam_v = hyper.beta2 * e.adam_v.array().matrix() +
                   (1.0 - hyper.beta2) * e.grad.array().square().matrix();
        const auto m_hat = e.adam_m.array() / corr1;
        const auto v_hat = e.adam_v.array() / corr2;
        e.value.array() -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
}

double sequence_loss(const std::vector<PointCloud>& pred,
                     const std::vector<PointCloud>& target) {
    if (pred.empty() || pred.size() != target.size()) {
        throw InputError("sequence_loss: prediction/target counts differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        acc += metrics::chamfer(pred[i], target[i]);
    }
    return acc / static_cast<double>(pred.size());
}

void TrainConfig::validate() const {
    if (iterations < 0 || t_in < 2 || t_pred < 1) {
        throw ConfigError("train config: iterations >= 0, t_in >= 2, t_pred >= 1 required");
    }
}

double train_step(MoNet& model, const std::vector<PointCloud>& frames, int t_in, int t_pred,
                  const AdamHyper& hyper, double clip_norm) {
    if (static_cast<int>(frames.size()) < t_in + t_pred) {
        throw InputError("train_step: sample is shorter than t_in + t_pred");
    }
    nn::Tape tape;
    MoNet::Ctx ctx{tape, true};

    double loss_value = std::numeric_limits<double>::quiet_NaN();
    nn::Var loss;
    try {
        std::vector<nn::Var> inputs;
        for (int t = 0; t < t_in; ++t) {
            inputs.push_back(tape.constant(frames[static_cast<std::size_t>(t)]));
        }
        const auto preds = model.predict_on_tape(ctx, inputs, t_pred);
        std::vector<nn::Var> frame_losses;
        for (int j = 0; j < t_pred; ++j) {
            if (!tape.val(preds[static_cast<std::size_t>(j)]).allFinite()) {
                return loss_value;  // diverged; params untouched
            }
            frame_losses.push_back(tape.chamfer(preds[static_cast<std::size_t>(j)],
                                                frames[static_cast<std::size_t>(t_in + j)]));
        }
        loss = tape.mean_of(frame_losses);
        loss_value = tape.val(loss)(0, 0);
    } catch (const InputError&) {
        // non-finite intermediates tripping the geometry validation; the
        // inputs themselves were validated by train()
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(loss_value)) {
        return loss_value;
    }

    model.params().zero_grads();
    tape.backward(loss);
    tape.accumulate_param_grads();
    if (clip_norm > 0.0) {
        model.params().clip_grad_norm(clip_norm);
    }
    adam_step(model.params(), hyper);
    return loss_value;
}

TrainResult train(MoNet& model, const TrainConfig& cfg,
                  const std::vector<synth::SequenceSample>& data,
                  const std::function<void(int, double)>& on_iteration) {
    cfg.validate();
    if (data.empty()) {
        throw InputError("train: dataset is empty");
    }
    for (const auto& s : data) {
        if (static_cast<int>(s.frames.size()) < cfg.t_in + cfg.t_pred) {
            throw InputError("train: sample shorter than t_in + t_pred");
        }
        for (const auto& f : s.frames) {
            require_finite(f, "train frame");
        }
    }
    const bool write_files = !cfg.out_dir.empty();
    if (write_files) {
        std::filesystem::create_directories(cfg.out_dir);
    }
    const std::string ckpt_path =
        write_files ? cfg.out_dir + "/model.ckpt" : std::string();

    TrainResult result;
    for (int it = 0; it < cfg.iterations; ++it) {
        const auto& sample = data[static_cast<std::size_t>(it) % data.size()];
        const double loss = train_step(model, sample.frames, cfg.t_in, cfg.t_pred, cfg.adam,
                                       cfg.clip ? cfg.clip_norm : 0.0);
        if (!std::isfinite(loss)) {
            result.diverged = true;
            break;
        }
        result.losses.push_back(loss);
        result.iterations_run = it + 1;
        if (on_iteration) {
            on_iteration(it, loss);
        }
        if (write_files && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
            model.params().save(ckpt_path, true);
        }
    }
    if (write_files) {
        model.params().save(ckpt_path, true);  // final (or last good on divergence)
    }
    return result;
}

std::vector<PointCloud> baseline_copy_last(const std::vector<PointCloud>& frames, int t_p) {
    if (frames.empty()) {
        throw InputError("baseline_copy_last: needs at least one frame");
    }
    return std::vector<PointCloud>(static_cast<std::size_t>(t_p), frames.back());
}

std::vector<PointCloud> baseline_constant_flow(const std::vector<PointCloud>& frames, int t_p) {
    if (frames.size() < 2) {
        throw InputError("baseline_constant_flow: needs at least two frames");
    }
    const PointCloud& prev = frames[frames.size() - 2];
    const PointCloud& last = frames.back();
    const auto nbr = geom::knn(last, prev, 1);
    Mat flow(last.rows(), 3);
    for (Eigen::Index i = 0; i < last.rows(); ++i) {
        flow.row(i) = last.row(i) - prev.row(nbr.indices(static_cast<int>(i), 0));
    }
    std::vector<PointCloud> out;
    PointCloud cur = last;
    for (int j = 0; j < t_p; ++j) {
        cur = cur + flow;
        out.push_back(cur);
    }
    return out;
}

EvalReport evaluate(const std::vector<EvalMethod>& methods,
                    const std::vector<synth::SequenceSample>& test_set, int t_in, int t_p,
                    int emd_cap, std::uint64_t emd_seed) {
    EvalReport report;
    for (const auto& method : methods) {
        std::vector<double> cd_sum(static_cast<std::size_t>(t_p), 0.0);
        std::vector<double> emd_sum(static_cast<std::size_t>(t_p), 0.0);
        double ms_total = 0.0;
        for (const auto& sample : test_set) {
            std::vector<PointCloud> inputs(sample.frames.begin(),
                                           sample.frames.begin() + t_in);
            const auto start = std::chrono::steady_clock::now();
            const auto preds = method.predict(inputs, t_p);
            ms_total += std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
            for (int j = 0; j < t_p; ++j) {
                const PointCloud& truth = sample.frames[static_cast<std::size_t>(t_in + j)];
                const PointCloud& pred = preds[static_cast<std::size_t>(j)];
                cd_sum[static_cast<std::size_t>(j)] += metrics::chamfer(pred, truth);

                const int n = static_cast<int>(std::min<Eigen::Index>(
                    {static_cast<Eigen::Index>(emd_cap), pred.rows(), truth.rows()}));
                // one seed for both sides, so identical clouds keep EMD = 0
                const std::uint64_t ds_seed = emd_seed + static_cast<std::uint64_t>(j);
                const PointCloud pred_ds = geom::random_downsample(pred, n, ds_seed);
                const PointCloud truth_ds = geom::random_downsample(truth, n, ds_seed);
                emd_sum[static_cast<std::size_t>(j)] +=
                    metrics::emd_exact(pred_ds, truth_ds).first;
            }
        }
        const double denom = static_cast<double>(test_set.size());
        for (int j = 0; j < t_p; ++j) {
            EvalRow row;
            row.method = method.name;
            row.frame = j + 1;
            row.cd = cd_sum[static_cast<std::size_t>(j)] / denom;
            row.emd = emd_sum[static_cast<std::size_t>(j)] / denom;
            row.ms_per_prediction = ms_total / denom;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

}  // namespace monet::train
