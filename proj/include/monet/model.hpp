#pragma once

#include "monet/core.hpp"
#include "monet/geom.hpp"
#include "monet/nn.hpp"
#include "monet/params.hpp"
#include "monet/tape.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace monet {

enum class Variant { kLstm, kGru };
enum class Ablation { kFull, kNoMotion, kNoContent };

std::string to_string(Variant v);
std::string to_string(Ablation a);
Variant variant_from_string(const std::string& s);
Ablation ablation_from_string(const std::string& s);

/// Per-layer sizes: points kept, neighbors per cluster, and the content /
/// motion / state feature widths.
struct LayerConfig {
    int n_points = 0;
    int k = 8;
    int d_e = 0;
    int d_m = 0;
    int d_s = 0;
};

struct ModelConfig {
    std::vector<LayerConfig> layers;
    Variant variant = Variant::kGru;
    Ablation ablation = Ablation::kFull;

    /// 3-layer desk-scale default for 512-point inputs:
    /// 256/128/64 points, widths 32/64/128, k = 8.
    static ModelConfig desk_default();
    /// Small configuration for tests: `widths` apply per layer to
    /// d_e = d_m = d_s.
    static ModelConfig toy(const std::vector<int>& points, const std::vector<int>& widths,
                           int k, Variant variant = Variant::kGru,
                           Ablation ablation = Ablation::kFull);

    int num_layers() const { return static_cast<int>(layers.size()); }
    void validate(int input_points) const;
};

/// Recurrent state of one layer: hidden rows (and cell rows for the LSTM)
/// aligned one-to-one with that layer's sampled coordinates.
struct LayerState {
    PointCloud coords;
    Mat hidden;
    Mat cell;  // empty for the GRU variant
};
using ModelState = std::vector<LayerState>;

/// Motion-based point cloud prediction network. Owns the parameter store;
/// all forward passes are recorded on a caller-provided tape so training can
/// backpropagate through the full unrolled sequence, including predicted
/// coordinates that re-enter later steps.
class MoNet {
  public:
    explicit MoNet(ModelConfig cfg);

    void init_params(std::uint64_t seed);
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    /// Copies values from `source`, validating that names and shapes match
    /// this architecture exactly.
    void load_params(const nn::ParamStore& source);

    // ---- tape-level pipeline ------------------------------------------
    struct Ctx {
        nn::Tape& tape;
        bool trainable = false;
    };
    struct EncodedLayers {
        std::vector<nn::Var> coords;  // X^l per layer
        std::vector<nn::Var> feats;   // E^l per layer
    };
    struct StateVars {
        nn::Var coords;
        nn::Var hidden;
        nn::Var cell;  // invalid for GRU
    };
    struct CellVars {
        EncodedLayers frame_t;  // encodings of the cell's current frame
        std::vector<StateVars> state;
    };

    EncodedLayers content_encode(Ctx ctx, nn::Var points);
    nn::Var motion_encode(Ctx ctx, int layer, nn::Var x_t, nn::Var e_t, nn::Var x_t1,
                          nn::Var e_t1);
    StateVars rnn_step(Ctx ctx, int layer, nn::Var x_t, nn::Var e_t, nn::Var m_t,
                       const StateVars* prev);
    nn::Var motion_align(Ctx ctx, int layer, nn::Var x_t, nn::Var x_prev, nn::Var m_prev);
    CellVars mecell(Ctx ctx, nn::Var frame_t, nn::Var frame_t1,
                    const std::vector<StateVars>* prev);
    CellVars micell(Ctx ctx, nn::Var frame_tm1, nn::Var frame_t,
                    const std::vector<StateVars>* prev);
    nn::Var decode_scene_flow(Ctx ctx, const std::vector<StateVars>& state,
                              nn::Var full_points);
    /// Embedding cells over consecutive pairs, then autoregressive inference
    /// cells; returns the T_p predicted frames.
    std::vector<nn::Var> predict_on_tape(Ctx ctx, const std::vector<nn::Var>& frames,
                                         int t_p);

    // ---- plain-value surfaces (inference and tests) -------------------
    struct CellOutput {
        std::vector<PointCloud> coords;
        std::vector<Mat> feats;
        ModelState state;
    };

    std::pair<PointCloud, Mat> content_encoder_layer(const PointCloud& x_prev, const Mat& e_prev,
                                                     int layer);
    Mat motion_encoder(const PointCloud& x_t, const Mat& e_t, const PointCloud& x_t1,
                       const Mat& e_t1, int layer);
    LayerState motion_lstm_step(const PointCloud& x_t, const Mat& e_t, const Mat& m_t,
                                const LayerState* prev, int layer);
    LayerState motion_gru_step(const PointCloud& x_t, const Mat& e_t, const Mat& m_t,
                               const LayerState* prev, int layer);
    Mat motion_align_values(const PointCloud& x_t, const PointCloud& x_prev, const Mat& m_prev,
                            int layer);
    CellOutput mecell_forward(const PointCloud& frame_t, const PointCloud& frame_t1,
                              const ModelState* prev);
    CellOutput micell_forward(const PointCloud& frame_tm1, const PointCloud& frame_t,
                              const ModelState* prev);
    Mat decode_scene_flow_values(const ModelState& state, const PointCloud& p_t);
    std::vector<PointCloud> predict_sequence(const std::vector<PointCloud>& frames, int t_p);

  private:
    void create_params();
    std::vector<StateVars> to_state_vars(nn::Tape& tape, const ModelState& state) const;
    ModelState to_model_state(const nn::Tape& tape, const std::vector<StateVars>& state) const;
    nn::Var zeros(nn::Tape& tape, Eigen::Index rows, Eigen::Index cols) const;
    int gate_input_width(int layer) const;

    ModelConfig cfg_;
    nn::ParamStore params_;
};

}  // namespace monet
