// Command-line front end: dataset generation, training, prediction and
// evaluation over PCSQ sequence files.

#include "monet/geom.hpp"
#include "monet/io.hpp"
#include "monet/metrics.hpp"
#include "monet/model.hpp"
#include "monet/synth.hpp"
#include "monet/train.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace monet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitMismatch = 3;

struct ManifestRow {
    std::string file;
    std::string split;
    std::uint64_t seed = 0;
    int frames = 0;
    int points = 0;
};

std::vector<ManifestRow> read_manifest(const std::string& dir) {
    std::ifstream in(dir + "/manifest.txt");
    if (!in) {
        throw ConfigError("cannot open manifest: " + dir + "/manifest.txt");
    }
    std::vector<ManifestRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ManifestRow row;
        ss >> row.file >> row.split >> row.seed >> row.frames >> row.points;
        if (!ss) {
            throw ConfigError("bad manifest line: " + line);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_gen_data(const std::string& out_dir, std::uint64_t seed, int frames, int points,
                 int objects, const std::string& split_counts, double velocity, double spin,
                 double background, bool resample) {
    fs::create_directories(out_dir);

    synth::SplitCounts counts;
    if (std::sscanf(split_counts.c_str(), "%d,%d,%d", &counts.train, &counts.val,
                    &counts.test) != 3) {
        throw ConfigError("--split-counts wants train,val,test");
    }

    synth::SceneConfig cfg;
    cfg.n_points = points;
    cfg.n_objects = objects;
    cfg.frame_count = frames;
    cfg.seed = seed;
    cfg.max_speed = velocity;
    cfg.min_speed = velocity * 0.25;
    cfg.max_spin = spin;
    cfg.background_fraction = background;
    cfg.resample = resample;

    const auto samples = synth::dataset(counts, cfg);
    std::ofstream manifest(out_dir + "/manifest.txt");
    manifest << "# file split seed frames points\n";
    std::map<std::string, int> counters;
    for (const auto& s : samples) {
        const std::string split = synth::to_string(s.split);
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%03d.pcsq", split.c_str(), counters[split]++);
        io::write_pcsq(out_dir + "/" + name, s.frames);
        manifest << name << " " << split << " " << s.seed << " " << s.frames.size() << " "
                 << s.frames.front().rows() << "\n";
    }
    std::cout << "wrote " << samples.size() << " sequences to " << out_dir << "\n";
    return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& variant,
              const std::string& ablation, int iters, double lr, std::uint64_t seed,
              const std::string& out_dir, const std::string& config_path,
              const std::string& resume_path, int t_in, int t_pred, int checkpoint_every) {
    ModelConfig cfg =
        config_path.empty() ? ModelConfig::desk_default() : io::read_model_config(config_path);
    cfg.variant = variant_from_string(variant);
    cfg.ablation = ablation_from_string(ablation);

    std::vector<synth::SequenceSample> data;
    for (const auto& row : read_manifest(data_dir)) {
        if (row.split != "train") continue;
        synth::SequenceSample s;
        s.frames = io::read_pcsq(data_dir + "/" + row.file);
        s.seed = row.seed;
        data.push_back(std::move(s));
    }
    if (data.empty()) {
        throw ConfigError("no train sequences in " + data_dir);
    }
    cfg.validate(static_cast<int>(data.front().frames.front().rows()));

    MoNet model(cfg);
    model.init_params(seed);
    if (!resume_path.empty()) {
        nn::ParamStore resumed = nn::ParamStore::load(resume_path);
        model.load_params(resumed);
        // carry the optimizer state over so the curve continues smoothly
        for (auto& [name, e] : model.params()) {
            if (resumed.has(name)) {
                e.adam_m = resumed.entry(name).adam_m;
                e.adam_v = resumed.entry(name).adam_v;
            }
        }
        model.params().adam_step_count = resumed.adam_step_count;
    }

    train::TrainConfig tc;
    tc.adam.lr = lr;
    tc.iterations = iters;
    tc.t_in = t_in;
    tc.t_pred = t_pred;
    tc.seed = seed;
    tc.checkpoint_every = checkpoint_every;
    tc.out_dir = out_dir;

    fs::create_directories(out_dir);
    io::write_model_config(out_dir + "/model.cfg", cfg);

    const auto result = train::train(model, tc, data, [](int it, double loss) {
        if (it % 50 == 0) {
            std::cout << "iter " << it << " loss " << loss << "\n";
        }
    });
    io::write_loss_csv(out_dir + "/loss.csv", result.losses);
    if (result.diverged) {
        std::cerr << "training diverged; last good checkpoint retained\n";
        return kExitDiverged;
    }
    std::cout << "finished " << result.iterations_run << " iterations\n";
    return kExitOk;
}

int cmd_predict(const std::string& model_dir, const std::string& input_path, int horizon,
                const std::string& out_path) {
    const ModelConfig cfg = io::read_model_config(model_dir + "/model.cfg");
    MoNet model(cfg);
    model.load_params(nn::ParamStore::load(model_dir + "/model.ckpt"));

    const auto frames = io::read_pcsq(input_path);
    try {
        cfg.validate(static_cast<int>(frames.front().rows()));
    } catch (const ConfigError& e) {
        std::cerr << "input does not fit the model: " << e.what() << "\n";
        return kExitMismatch;
    }
    if (frames.size() < 2) {
        std::cerr << "input needs at least two frames\n";
        return kExitMismatch;
    }
    const auto preds = model.predict_sequence(frames, horizon);
    io::write_pcsq(out_path, preds);
    std::cout << "wrote " << preds.size() << " predicted frames to " << out_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path, int emd_cap,
             std::uint64_t seed, const std::string& out_path) {
    const auto pred = io::read_pcsq(pred_path);
    const auto truth = io::read_pcsq(truth_path);
    if (pred.size() != truth.size()) {
        std::cerr << "frame count mismatch: " << pred.size() << " vs " << truth.size() << "\n";
        return kExitMismatch;
    }
    std::vector<io::FrameMetrics> rows;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        io::FrameMetrics row;
        row.frame = static_cast<int>(t) + 1;
        row.cd = metrics::chamfer(pred[t], truth[t]);
        const int n = static_cast<int>(std::min<Eigen::Index>(
            {static_cast<Eigen::Index>(emd_cap), pred[t].rows(), truth[t].rows()}));
        const std::uint64_t ds_seed = seed + static_cast<std::uint64_t>(t);
        const PointCloud p = geom::random_downsample(pred[t], n, ds_seed);
        const PointCloud q = geom::random_downsample(truth[t], n, ds_seed);
        row.emd = metrics::emd_exact(p, q).first;
        rows.push_back(row);
    }
    io::write_frame_metrics_csv(out_path, rows);
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
    return kExitOk;
}

int cmd_to_csv(const std::string& input_path, const std::string& out_path) {
    io::write_pcsq_as_csv(out_path, io::read_pcsq(input_path));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"motion-based point cloud sequence prediction"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate synthetic rigid-motion sequences");
    std::string gen_out = "data";
    std::uint64_t gen_seed = 0;
    int gen_frames = 10, gen_points = 512, gen_objects = 2;
    std::string gen_splits = "8,2,4";
    double gen_velocity = 0.5, gen_spin = 0.1, gen_background = 0.4;
    bool gen_resample = false;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--seed", gen_seed, "base RNG seed");
    gen->add_option("--frames", gen_frames, "frames per sequence");
    gen->add_option("--points", gen_points, "points per frame");
    gen->add_option("--objects", gen_objects, "moving objects per scene");
    gen->add_option("--split-counts", gen_splits, "train,val,test sequence counts");
    gen->add_option("--velocity", gen_velocity, "max object speed (m/frame)");
    gen->add_option("--spin", gen_spin, "max angular velocity (rad/frame)");
    gen->add_option("--background", gen_background, "background point fraction");
    gen->add_flag("--resample", gen_resample, "independent per-frame resampling");

    // train
    auto* tr = app.add_subcommand("train", "train a model on generated data");
    std::string tr_data = "data", tr_variant = "gru", tr_ablation = "full", tr_out = "run";
    std::string tr_config, tr_resume;
    int tr_iters = 1000, tr_tin = 5, tr_tpred = 5, tr_ckpt_every = 200;
    double tr_lr = 1e-3;
    std::uint64_t tr_seed = 0;
    tr->add_option("--data", tr_data, "dataset directory (with manifest.txt)");
    tr->add_option("--variant", tr_variant, "recurrent cell: lstm|gru");
    tr->add_option("--ablation", tr_ablation, "full|no-motion|no-content");
    tr->add_option("--iters", tr_iters, "training iterations");
    tr->add_option("--lr", tr_lr, "Adam learning rate");
    tr->add_option("--seed", tr_seed, "init seed");
    tr->add_option("--out", tr_out, "run directory for checkpoint/config/curve");
    tr->add_option("--config", tr_config, "model config file (defaults to desk-scale)");
    tr->add_option("--resume", tr_resume, "checkpoint to continue from");
    tr->add_option("--t-in", tr_tin, "input frames per sample");
    tr->add_option("--t-pred", tr_tpred, "predicted frames per sample");
    tr->add_option("--checkpoint-every", tr_ckpt_every, "checkpoint cadence (iterations)");

    // predict
    auto* pr = app.add_subcommand("predict", "predict future frames for a PCSQ file");
    std::string pr_model = "run", pr_input, pr_out = "pred.pcsq";
    int pr_horizon = 5;
    pr->add_option("--model", pr_model, "run directory (model.ckpt + model.cfg)");
    pr->add_option("--input", pr_input, "input PCSQ file")->required();
    pr->add_option("--horizon", pr_horizon, "number of frames to predict");
    pr->add_option("--out", pr_out, "output PCSQ file");

    // eval
    auto* ev = app.add_subcommand("eval", "per-frame CD/EMD between two PCSQ files");
    std::string ev_pred, ev_truth, ev_out = "metrics.csv";
    int ev_cap = 256;
    std::uint64_t ev_seed = 0;
    ev->add_option("--pred", ev_pred, "predicted PCSQ")->required();
    ev->add_option("--truth", ev_truth, "ground-truth PCSQ")->required();
    ev->add_option("--emd-cap", ev_cap, "points per frame for the exact EMD solver");
    ev->add_option("--seed", ev_seed, "downsampling seed");
    ev->add_option("--out", ev_out, "output CSV");

    // to-csv
    auto* tc = app.add_subcommand("to-csv", "dump a PCSQ file as CSV");
    std::string tc_input, tc_out = "dump.csv";
    tc->add_option("--input", tc_input, "input PCSQ file")->required();
    tc->add_option("--out", tc_out, "output CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            return cmd_gen_data(gen_out, gen_seed, gen_frames, gen_points, gen_objects,
                                gen_splits, gen_velocity, gen_spin, gen_background,
                                gen_resample);
        }
        if (tr->parsed()) {
            return cmd_train(tr_data, tr_variant, tr_ablation, tr_iters, tr_lr, tr_seed, tr_out,
                             tr_config, tr_resume, tr_tin, tr_tpred, tr_ckpt_every);
        }
        if (pr->parsed()) {
            return cmd_predict(pr_model, pr_input, pr_horizon, pr_out);
        }
        if (ev->parsed()) {
            return cmd_eval(ev_pred, ev_truth, ev_cap, ev_seed, ev_out);
        }
        if (tc->parsed()) {
            return cmd_to_csv(tc_input, tc_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
