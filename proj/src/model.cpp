#include "monet/model.hpp"

#include <algorithm>

namespace monet {

using nn::MlpSpec;
using nn::Tape;
using nn::Var;

std::string to_string(Variant v) {
    return v == Variant::kLstm ? "lstm" : "gru";
}

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::kNoMotion:
            return "no-motion";
        case Ablation::kNoContent:
            return "no-content";
        default:
            return "full";
    }
}

Variant variant_from_string(const std::string& s) {
    if (s == "lstm") return Variant::kLstm;
    if (s == "gru") return Variant::kGru;
    throw ConfigError("unknown variant: " + s);
}

Ablation ablation_from_string(const std::string& s) {
    if (s == "full") return Ablation::kFull;
    if (s == "no-motion" || s == "no_motion") return Ablation::kNoMotion;
    if (s == "no-content" || s == "no_content") return Ablation::kNoContent;
    throw ConfigError("unknown ablation: " + s);
}

ModelConfig ModelConfig::desk_default() {
    ModelConfig cfg;
    cfg.layers = {{256, 8, 32, 32, 32}, {128, 8, 64, 64, 64}, {64, 8, 128, 128, 128}};
    return cfg;
}

ModelConfig ModelConfig::toy(const std::vector<int>& points, const std::vector<int>& widths,
                             int k, Variant variant, Ablation ablation) {
    if (points.size() != widths.size()) {
        throw ConfigError("toy config: points/widths size mismatch");
    }
    ModelConfig cfg;
    for (std::size_t i = 0; i < points.size(); ++i) {
        cfg.layers.push_back({points[i], k, widths[i], widths[i], widths[i]});
    }
    cfg.variant = variant;
    cfg.ablation = ablation;
    return cfg;
}

void ModelConfig::validate(int input_points) const {
    if (layers.empty()) {
        throw ConfigError("model needs at least one layer");
    }
    int prev = input_points;  // -1 checks structure only
    for (const auto& l : layers) {
        if (l.n_points < 1 || (prev >= 0 && l.n_points > prev)) {
            throw ConfigError("layer point counts must be nonincreasing and fit the input");
        }
        if (l.k < 1 || (prev >= 0 && l.k > prev)) {
            throw ConfigError("layer k exceeds the previous layer's point count");
        }
        if (l.d_e < 1 || l.d_m < 1 || l.d_s < 1) {
            throw ConfigError("feature widths must be >= 1");
        }
        prev = l.n_points;
    }
}

namespace {

std::vector<int> flat_indices(const geom::NeighborIndex& nbr) {
    std::vector<int> out(static_cast<std::size_t>(nbr.center_count()) *
                         static_cast<std::size_t>(nbr.k));
    for (int i = 0; i < nbr.center_count(); ++i) {
        for (int j = 0; j < nbr.k; ++j) {
            out[static_cast<std::size_t>(i) * nbr.k + j] = nbr.indices(i, j);
        }
    }
    return out;
}

// index map that repeats each center row across its k neighbor slots
std::vector<int> center_repeat(int n, int k) {
    std::vector<int> out(static_cast<std::size_t>(n) * k);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            out[static_cast<std::size_t>(i) * k + j] = i;
        }
    }
    return out;
}

}  // namespace

MoNet::MoNet(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate(-1);
    create_params();
}

int MoNet::gate_input_width(int layer) const {
    const auto& l = cfg_.layers[static_cast<std::size_t>(layer)];
    return 4 + l.d_s + l.d_m + l.d_e;
}

void MoNet::create_params() {
    const std::uint64_t seed = 0;  // re-drawn by init_params; shapes matter here
    for (int i = 0; i < cfg_.num_layers(); ++i) {
        const auto& l = cfg_.layers[static_cast<std::size_t>(i)];
        const int d_e_prev = i == 0 ? 0 : cfg_.layers[static_cast<std::size_t>(i) - 1].d_e;
        const std::string li = ".l" + std::to_string(i);

        nn::create_mlp_params(params_, "content" + li, 4 + d_e_prev,
                              MlpSpec::two_layer(l.d_e, l.d_e), seed);
        nn::create_mlp_params(params_, "motion" + li, 4 + 2 * l.d_e,
                              MlpSpec::two_layer(l.d_m, l.d_m), seed);
        nn::create_mlp_params(params_, "align" + li, 4 + l.d_m, MlpSpec::two_layer(l.d_m, 1),
                              seed);

        const int gate_in = gate_input_width(i);
        if (cfg_.variant == Variant::kLstm) {
            for (const char* gate : {"input", "forget", "output", "cand"}) {
                nn::create_mlp_params(params_, "rnn" + li + "." + gate, gate_in,
                                      MlpSpec::two_layer(l.d_s, l.d_s), seed);
            }
            nn::create_mlp_params(params_, "rnn" + li + ".cellpool", 4 + l.d_s,
                                  MlpSpec::two_layer(l.d_s, l.d_s), seed);
        } else {
            for (const char* gate : {"update", "reset"}) {
                nn::create_mlp_params(params_, "rnn" + li + "." + gate, gate_in,
                                      MlpSpec::two_layer(l.d_s, l.d_s), seed);
            }
            nn::create_mlp_params(params_, "rnn" + li + ".hpool", 4 + l.d_s,
                                  MlpSpec::two_layer(l.d_s, l.d_s), seed);
            nn::create_mlp_params(params_, "rnn" + li + ".cand", l.d_s + l.d_m + l.d_e,
                                  MlpSpec::two_layer(l.d_s, l.d_s), seed);
        }
    }

    // coarse-to-fine decoder
    const int top = cfg_.num_layers() - 1;
    int width = cfg_.layers[static_cast<std::size_t>(top)].d_s;
    for (int l = top - 1; l >= 0; --l) {
        const int d_s = cfg_.layers[static_cast<std::size_t>(l)].d_s;
        nn::create_mlp_params(params_, "dec.fp" + std::to_string(l), width + d_s,
                              MlpSpec::two_layer(d_s, d_s), seed);
        width = d_s;
    }
    nn::create_mlp_params(params_, "dec.fp_full", width, MlpSpec::two_layer(width, width), seed);
    nn::create_mlp_params(params_, "dec.head", width, MlpSpec::two_layer(width, 3), seed);
}

void MoNet::init_params(std::uint64_t seed) {
    for (auto& [name, entry] : params_) {
        if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".w") == 0) {
            nn::glorot_init(params_, name, seed);
        } else {
            entry.value.setZero();
        }
        entry.grad.setZero();
        entry.adam_m.setZero();
        entry.adam_v.setZero();
    }
    params_.adam_step_count = 0;
}

void MoNet::load_params(const nn::ParamStore& source) {
    for (auto& [name, entry] : params_) {
        if (!source.has(name)) {
            throw ConfigError("checkpoint is missing parameter '" + name + "'");
        }
        const Mat& v = source.value(name);
        if (v.rows() != entry.value.rows() || v.cols() != entry.value.cols()) {
            throw ConfigError("checkpoint shape mismatch for '" + name + "'");
        }
        entry.value = v;
    }
}

Var MoNet::zeros(Tape& tape, Eigen::Index rows, Eigen::Index cols) const {
    return tape.constant(Mat::Zero(rows, cols));
}

// ---------------------------------------------------------------------------
// content encoder
// ---------------------------------------------------------------------------

MoNet::EncodedLayers MoNet::content_encode(Ctx ctx, Var points) {
    EncodedLayers out;
    Var x_prev = points;
    Var e_prev;  // layer-1 input features are width-0 (initialized to nothing)
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        const auto& lc = cfg_.layers[static_cast<std::size_t>(l)];
        const Mat& prev_pts = ctx.tape.val(x_prev);
        if (lc.n_points > prev_pts.rows()) {
            throw ConfigError("content encoder: layer wants more points than available");
        }

        const auto sample = geom::fps(prev_pts, lc.n_points, 0);
        Var x_l = ctx.tape.gather_rows(x_prev, sample);
        const auto nbr = geom::knn(ctx.tape.val(x_l), prev_pts, lc.k);

        Var geo = ctx.tape.relative_geometry(x_l, x_prev, nbr);
        Var fmap = geo;
        if (e_prev.valid()) {
            Var neighbor_feats = ctx.tape.gather_rows(e_prev, flat_indices(nbr));
            fmap = ctx.tape.concat_cols({geo, neighbor_feats});
        }
        Var encoded = nn::shared_mlp_forward(ctx.tape, params_,
                                             "content.l" + std::to_string(l),
                                             MlpSpec::two_layer(lc.d_e, lc.d_e), fmap,
                                             ctx.trainable);
        Var e_l = ctx.tape.maxpool_rows(encoded, lc.k);

        out.coords.push_back(x_l);
        out.feats.push_back(e_l);
        x_prev = x_l;
        e_prev = e_l;
    }
    return out;
}

// ---------------------------------------------------------------------------
// motion encoder
// ---------------------------------------------------------------------------

Var MoNet::motion_encode(Ctx ctx, int layer, Var x_t, Var e_t, Var x_t1, Var e_t1) {
    const auto& lc = cfg_.layers[static_cast<std::size_t>(layer)];
    const int n = static_cast<int>(ctx.tape.val(x_t).rows());
    const auto nbr = geom::knn(ctx.tape.val(x_t), ctx.tape.val(x_t1), lc.k);

    Var geo = ctx.tape.relative_geometry(x_t, x_t1, nbr);
    Var next_feats = ctx.tape.gather_rows(e_t1, flat_indices(nbr));
    Var center_feats = ctx.tape.gather_rows(e_t, center_repeat(n, lc.k));
    Var fmap = ctx.tape.concat_cols({geo, next_feats, center_feats});
    Var encoded = nn::shared_mlp_forward(ctx.tape, params_,
                                         "motion.l" + std::to_string(layer),
                                         MlpSpec::two_layer(lc.d_m, lc.d_m), fmap, ctx.trainable);
    return ctx.tape.maxpool_rows(encoded, lc.k);
}

// ---------------------------------------------------------------------------
// MotionRNN
// ---------------------------------------------------------------------------

MoNet::StateVars MoNet::rnn_step(Ctx ctx, int layer, Var x_t, Var e_t, Var m_t,
                                 const StateVars* prev) {
    const auto& lc = cfg_.layers[static_cast<std::size_t>(layer)];
    const int n = static_cast<int>(ctx.tape.val(x_t).rows());
    auto& store = params_;
    const std::string li = "rnn.l" + std::to_string(layer);

    // First step: zero states sitting on the current frame's coordinates, so
    // the gathered geometry stays relative.
    Var prev_coords = prev ? prev->coords : x_t;
    Var prev_hidden = prev ? prev->hidden : zeros(ctx.tape, n, lc.d_s);

    const auto nbr = geom::knn(ctx.tape.val(x_t), ctx.tape.val(prev_coords), lc.k);
    const auto flat = flat_indices(nbr);
    const auto centers = center_repeat(n, lc.k);

    Var geo = ctx.tape.relative_geometry(x_t, prev_coords, nbr);
    Var h_bar = ctx.tape.gather_rows(prev_hidden, flat);
    Var m_rep = ctx.tape.gather_rows(m_t, centers);
    Var e_rep = ctx.tape.gather_rows(e_t, centers);
    Var gate_in = ctx.tape.concat_cols({geo, h_bar, m_rep, e_rep});

    const MlpSpec gate_spec = MlpSpec::two_layer(lc.d_s, lc.d_s);
    auto pooled_gate = [&](const char* name, Var input) {
        Var z = nn::shared_mlp_forward(ctx.tape, store, li + "." + name, gate_spec, input,
                                       ctx.trainable);
        return ctx.tape.maxpool_rows(z, lc.k);
    };

    StateVars out;
    out.coords = x_t;
    if (cfg_.variant == Variant::kLstm) {
        Var prev_cell = prev ? prev->cell : zeros(ctx.tape, n, lc.d_s);
        Var c_bar = ctx.tape.gather_rows(prev_cell, flat);

        Var gate_i = ctx.tape.sigmoid(pooled_gate("input", gate_in));
        Var gate_f = ctx.tape.sigmoid(pooled_gate("forget", gate_in));
        Var gate_o = ctx.tape.sigmoid(pooled_gate("output", gate_in));
        Var cand = ctx.tape.tanh_act(pooled_gate("cand", gate_in));
        Var pooled_c = pooled_gate("cellpool", ctx.tape.concat_cols({geo, c_bar}));

        Var cell = ctx.tape.add(ctx.tape.hadamard(gate_f, pooled_c),
                                ctx.tape.hadamard(gate_i, cand));
        out.cell = cell;
        out.hidden = ctx.tape.hadamard(gate_o, ctx.tape.tanh_act(cell));
    } else {
        Var gate_z = ctx.tape.sigmoid(pooled_gate("update", gate_in));
        Var gate_r = ctx.tape.sigmoid(pooled_gate("reset", gate_in));
        Var pooled_h = pooled_gate("hpool", ctx.tape.concat_cols({geo, h_bar}));

        // candidate MLP runs per point, not per cluster
        Var cand_in = ctx.tape.concat_cols({ctx.tape.hadamard(gate_r, pooled_h), m_t, e_t});
        Var cand = ctx.tape.tanh_act(nn::shared_mlp_forward(
            ctx.tape, store, li + ".cand", MlpSpec::two_layer(lc.d_s, lc.d_s), cand_in,
            ctx.trainable));

        out.hidden = ctx.tape.add(ctx.tape.hadamard(gate_z, pooled_h),
                                  ctx.tape.hadamard(ctx.tape.one_minus(gate_z), cand));
    }
    return out;
}

// ---------------------------------------------------------------------------
// motion align
// ---------------------------------------------------------------------------

Var MoNet::motion_align(Ctx ctx, int layer, Var x_t, Var x_prev, Var m_prev) {
    const auto& lc = cfg_.layers[static_cast<std::size_t>(layer)];
    const auto nbr = geom::knn(ctx.tape.val(x_t), ctx.tape.val(x_prev), lc.k);
    const auto flat = flat_indices(nbr);

    Var geo = ctx.tape.relative_geometry(x_t, x_prev, nbr);
    Var m_bar = ctx.tape.gather_rows(m_prev, flat);
    Var fmap = ctx.tape.concat_cols({geo, m_bar});
    Var logits = nn::shared_mlp_forward(ctx.tape, params_,
                                        "align.l" + std::to_string(layer),
                                        MlpSpec::two_layer(lc.d_m, 1), fmap, ctx.trainable);
    Var weights = ctx.tape.softmax_rows(logits, lc.k);
    return ctx.tape.weighted_sum_rows(weights, m_bar, lc.k);
}

// ---------------------------------------------------------------------------
// cells
// ---------------------------------------------------------------------------

MoNet::CellVars MoNet::mecell(Ctx ctx, Var frame_t, Var frame_t1,
                              const std::vector<StateVars>* prev) {
    EncodedLayers enc_t = content_encode(ctx, frame_t);
    EncodedLayers enc_t1 = content_encode(ctx, frame_t1);

    CellVars out;
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        const auto& lc = cfg_.layers[static_cast<std::size_t>(l)];
        const int n = static_cast<int>(ctx.tape.val(enc_t.coords[l]).rows());

        Var motion = cfg_.ablation == Ablation::kNoMotion
                         ? zeros(ctx.tape, n, lc.d_m)
                         : motion_encode(ctx, l, enc_t.coords[l], enc_t.feats[l],
                                         enc_t1.coords[l], enc_t1.feats[l]);
        Var content = cfg_.ablation == Ablation::kNoContent ? zeros(ctx.tape, n, lc.d_e)
                                                            : enc_t.feats[l];
        const StateVars* prev_l = prev ? &(*prev)[static_cast<std::size_t>(l)] : nullptr;
        out.state.push_back(rnn_step(ctx, l, enc_t.coords[l], content, motion, prev_l));
    }
    out.frame_t = std::move(enc_t);
    return out;
}

MoNet::CellVars MoNet::micell(Ctx ctx, Var frame_tm1, Var frame_t,
                              const std::vector<StateVars>* prev) {
    EncodedLayers enc_tm1 = content_encode(ctx, frame_tm1);
    EncodedLayers enc_t = content_encode(ctx, frame_t);

    CellVars out;
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        const auto& lc = cfg_.layers[static_cast<std::size_t>(l)];
        const int n = static_cast<int>(ctx.tape.val(enc_t.coords[l]).rows());

        Var motion;
        if (cfg_.ablation == Ablation::kNoMotion) {
            motion = zeros(ctx.tape, n, lc.d_m);
        } else {
            // motion of frame t-1 estimated from the (t-1, t) pair, then
            // transported onto frame t's coordinates
            Var m_prev = motion_encode(ctx, l, enc_tm1.coords[l], enc_tm1.feats[l],
                                       enc_t.coords[l], enc_t.feats[l]);
            motion = motion_align(ctx, l, enc_t.coords[l], enc_tm1.coords[l], m_prev);
        }
        Var content = cfg_.ablation == Ablation::kNoContent ? zeros(ctx.tape, n, lc.d_e)
                                                            : enc_t.feats[l];
        const StateVars* prev_l = prev ? &(*prev)[static_cast<std::size_t>(l)] : nullptr;
        out.state.push_back(rnn_step(ctx, l, enc_t.coords[l], content, motion, prev_l));
    }
    out.frame_t = std::move(enc_t);
    return out;
}

// ---------------------------------------------------------------------------
// decoder
// ---------------------------------------------------------------------------

Var MoNet::decode_scene_flow(Ctx ctx, const std::vector<StateVars>& state, Var full_points) {
    auto& store = params_;
    const int top = cfg_.num_layers() - 1;

    Var feats = state[static_cast<std::size_t>(top)].hidden;
    for (int l = top - 1; l >= 0; --l) {
        const int d_s = cfg_.layers[static_cast<std::size_t>(l)].d_s;
        feats = nn::feature_propagation(ctx.tape, store, "dec.fp" + std::to_string(l),
                                        MlpSpec::two_layer(d_s, d_s),
                                        state[static_cast<std::size_t>(l)].coords,
                                        state[static_cast<std::size_t>(l) + 1].coords, feats,
                                        state[static_cast<std::size_t>(l)].hidden, ctx.trainable);
    }
    const int w = cfg_.layers.front().d_s;
    feats = nn::feature_propagation(ctx.tape, store, "dec.fp_full", MlpSpec::two_layer(w, w),
                                    full_points, state.front().coords, feats, Var{},
                                    ctx.trainable);
    return nn::shared_mlp_forward(ctx.tape, store, "dec.head", MlpSpec::two_layer(w, 3), feats,
                                  ctx.trainable);
}

// ---------------------------------------------------------------------------
// sequence prediction
// ---------------------------------------------------------------------------

std::vector<Var> MoNet::predict_on_tape(Ctx ctx, const std::vector<Var>& frames, int t_p) {
    if (frames.size() < 2) {
        throw InputError("predict: needs at least two input frames");
    }
    if (t_p < 1) {
        throw InputError("predict: horizon must be >= 1");
    }

    std::vector<StateVars> state;
    const std::vector<StateVars>* prev = nullptr;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        CellVars cell = mecell(ctx, frames[t], frames[t + 1], prev);
        state = std::move(cell.state);
        prev = &state;
    }

    std::vector<Var> predictions;
    Var before_last = frames[frames.size() - 2];
    Var last = frames.back();
    for (int j = 0; j < t_p; ++j) {
        CellVars cell = micell(ctx, before_last, last, prev);
        state = std::move(cell.state);
        prev = &state;
        Var flow = decode_scene_flow(ctx, state, last);
        Var next = ctx.tape.add(last, flow);
        predictions.push_back(next);
        before_last = last;
        last = next;
    }
    return predictions;
}

// ---------------------------------------------------------------------------
// plain-value wrappers
// ---------------------------------------------------------------------------

std::vector<MoNet::StateVars> MoNet::to_state_vars(Tape& tape, const ModelState& state) const {
    std::vector<StateVars> out;
    for (const auto& s : state) {
        StateVars v;
        v.coords = tape.constant(s.coords);
        v.hidden = tape.constant(s.hidden);
        if (s.cell.size() != 0) v.cell = tape.constant(s.cell);
        out.push_back(v);
    }
    return out;
}

ModelState MoNet::to_model_state(const Tape& tape, const std::vector<StateVars>& state) const {
    ModelState out;
    for (const auto& s : state) {
        LayerState l;
        l.coords = tape.val(s.coords);
        l.hidden = tape.val(s.hidden);
        if (s.cell.valid()) l.cell = tape.val(s.cell);
        out.push_back(std::move(l));
    }
    return out;
}

std::pair<PointCloud, Mat> MoNet::content_encoder_layer(const PointCloud& x_prev,
                                                        const Mat& e_prev, int layer) {
    // Single-layer slice of the encoder, with the incoming features given
    // explicitly (empty for the first layer).
    Tape tape;
    const auto& lc = cfg_.layers[static_cast<std::size_t>(layer)];
    if (lc.n_points > x_prev.rows()) {
        throw ConfigError("content encoder: layer wants more points than available");
    }
    Var x_prev_v = tape.constant(x_prev);
    const auto sample = geom::fps(x_prev, lc.n_points, 0);
    Var x_l = tape.gather_rows(x_prev_v, sample);
    const auto nbr = geom::knn(tape.val(x_l), x_prev, lc.k);
    Var fmap = tape.relative_geometry(x_l, x_prev_v, nbr);
    if (e_prev.size() != 0) {
        Var feats = tape.gather_rows(tape.constant(e_prev), flat_indices(nbr));
        fmap = tape.concat_cols({fmap, feats});
    }
    Var enc = nn::shared_mlp_forward(tape, params_,
                                     "content.l" + std::to_string(layer),
                                     MlpSpec::two_layer(lc.d_e, lc.d_e), fmap, false);
    Var e_l = tape.maxpool_rows(enc, lc.k);
    return {tape.val(x_l), tape.val(e_l)};
}

Mat MoNet::motion_encoder(const PointCloud& x_t, const Mat& e_t, const PointCloud& x_t1,
                          const Mat& e_t1, int layer) {
    Tape tape;
    Ctx ctx{tape, false};
    Var m = motion_encode(ctx, layer, tape.constant(x_t), tape.constant(e_t),
                          tape.constant(x_t1), tape.constant(e_t1));
    return tape.val(m);
}

LayerState MoNet::motion_lstm_step(const PointCloud& x_t, const Mat& e_t, const Mat& m_t,
                                   const LayerState* prev, int layer) {
    if (cfg_.variant != Variant::kLstm) {
        throw ConfigError("motion_lstm_step: model is configured as GRU");
    }
    Tape tape;
    Ctx ctx{tape, false};
    StateVars prev_v;
    if (prev) {
        prev_v.coords = tape.constant(prev->coords);
        prev_v.hidden = tape.constant(prev->hidden);
        prev_v.cell = tape.constant(prev->cell);
    }
    StateVars s = rnn_step(ctx, layer, tape.constant(x_t), tape.constant(e_t),
                           tape.constant(m_t), prev ? &prev_v : nullptr);
    LayerState out;
    out.coords = tape.val(s.coords);
    out.hidden = tape.val(s.hidden);
    out.cell = tape.val(s.cell);
    return out;
}

LayerState MoNet::motion_gru_step(const PointCloud& x_t, const Mat& e_t, const Mat& m_t,
                                  const LayerState* prev, int layer) {
    if (cfg_.variant != Variant::kGru) {
        throw ConfigError("motion_gru_step: model is configured as LSTM");
    }
    Tape tape;
    Ctx ctx{tape, false};
    StateVars prev_v;
    if (prev) {
        prev_v.coords = tape.constant(prev->coords);
        prev_v.hidden = tape.constant(prev->hidden);
    }
    StateVars s = rnn_step(ctx, layer, tape.constant(x_t), tape.constant(e_t),
                           tape.constant(m_t), prev ? &prev_v : nullptr);
    LayerState out;
    out.coords = tape.val(s.coords);
    out.hidden = tape.val(s.hidden);
    return out;
}

Mat MoNet::motion_align_values(const PointCloud& x_t, const PointCloud& x_prev,
                               const Mat& m_prev, int layer) {
    Tape tape;
    Ctx ctx{tape, false};
    Var m = motion_align(ctx, layer, tape.constant(x_t), tape.constant(x_prev),
                         tape.constant(m_prev));
    return tape.val(m);
}

MoNet::CellOutput MoNet::mecell_forward(const PointCloud& frame_t, const PointCloud& frame_t1,
                                        const ModelState* prev) {
    Tape tape;
    Ctx ctx{tape, false};
    auto prev_v = prev ? to_state_vars(tape, *prev) : std::vector<StateVars>{};
    CellVars cell = mecell(ctx, tape.constant(frame_t), tape.constant(frame_t1),
                           prev ? &prev_v : nullptr);
    CellOutput out;
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        out.coords.push_back(tape.val(cell.frame_t.coords[static_cast<std::size_t>(l)]));
        out.feats.push_back(tape.val(cell.frame_t.feats[static_cast<std::size_t>(l)]));
    }
    out.state = to_model_state(tape, cell.state);
    return out;
}

MoNet::CellOutput MoNet::micell_forward(const PointCloud& frame_tm1, const PointCloud& frame_t,
                                        const ModelState* prev) {
    Tape tape;
    Ctx ctx{tape, false};
    auto prev_v = prev ? to_state_vars(tape, *prev) : std::vector<StateVars>{};
    CellVars cell = micell(ctx, tape.constant(frame_tm1), tape.constant(frame_t),
                           prev ? &prev_v : nullptr);
    CellOutput out;
    for (int l = 0; l < cfg_.num_layers(); ++l) {
        out.coords.push_back(tape.val(cell.frame_t.coords[static_cast<std::size_t>(l)]));
        out.feats.push_back(tape.val(cell.frame_t.feats[static_cast<std::size_t>(l)]));
    }
    out.state = to_model_state(tape, cell.state);
    return out;
}

Mat MoNet::decode_scene_flow_values(const ModelState& state, const PointCloud& p_t) {
    Tape tape;
    Ctx ctx{tape, false};
    auto state_v = to_state_vars(tape, state);
    Var flow = decode_scene_flow(ctx, state_v, tape.constant(p_t));
    return tape.val(flow);
}

std::vector<PointCloud> MoNet::predict_sequence(const std::vector<PointCloud>& frames,
                                                int t_p) {
    if (frames.size() < 2) {
        throw InputError("predict_sequence: needs at least two input frames");
    }
    const Eigen::Index n = frames.front().rows();
    for (const auto& f : frames) {
        require_cloud(f, "predict_sequence frame");
        if (f.rows() != n) {
            throw InputError("predict_sequence: frames must share one point count");
        }
    }
    cfg_.validate(static_cast<int>(n));

    Tape tape;
    Ctx ctx{tape, false};
    std::vector<Var> frame_vars;
    frame_vars.reserve(frames.size());
    for (const auto& f : frames) {
        frame_vars.push_back(tape.constant(f));
    }
    const auto preds = predict_on_tape(ctx, frame_vars, t_p);
    std::vector<PointCloud> out;
    out.reserve(preds.size());
    for (Var p : preds) {
        out.push_back(tape.val(p));
    }
    return out;
}

}  // namespace monet
