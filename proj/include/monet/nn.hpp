#pragma once

#include "monet/core.hpp"
#include "monet/geom.hpp"
#include "monet/params.hpp"
#include "monet/tape.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace monet::nn {

enum class Activation { kRelu, kSigmoid, kTanh, kNone };

/// Widths of the layers of a point-shared MLP plus the activation applied
/// after each layer; the final layer may override it.
struct MlpSpec {
    std::vector<int> widths;
    Activation activation = Activation::kRelu;
    Activation final_activation = Activation::kNone;

    /// Two-layer MLP with a relu hidden layer of width `hidden` and a linear
    /// output of width `out` — the workhorse shape used by every gate.
    static MlpSpec two_layer(int hidden, int out) { return MlpSpec{{hidden, out}}; }
};

/// Registers `prefix.<i>.w` / `prefix.<i>.b` for every layer of `spec`
/// (Glorot weights, zero biases).
void create_mlp_params(ParamStore& params, const std::string& prefix, int in_dim,
                       const MlpSpec& spec, std::uint64_t seed);

/// Applies the MLP row-independently: rows may be points or point-neighbor
/// slots, so an N x k x c feature map is passed as (N*k) x c. Weight sharing
/// across rows is structural.
Var shared_mlp_forward(Tape& tape, ParamStore& params, const std::string& prefix,
                       const MlpSpec& spec, Var input, bool trainable = true);

Var apply_activation(Tape& tape, Var x, Activation act);

/// Interpolates features from a sparse onto a dense cloud using the 3
/// nearest sparse points with inverse-distance weights (fewer when
/// sparse.N < 3), concatenates optional skip features aligned with the dense
/// cloud, then applies a shared MLP.
Var feature_propagation(Tape& tape, ParamStore& params, const std::string& prefix,
                        const MlpSpec& spec, Var dense_coords, Var sparse_coords,
                        Var sparse_feats, Var skip_feats /* invalid() to omit */,
                        bool trainable = true);

/// Interpolation half of feature_propagation (no skip, no MLP).
Var interpolate_to_dense(Tape& tape, Var dense_coords, Var sparse_coords, Var sparse_feats);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    int worst_index = -1;
};

/// Central-difference check of d(loss)/d(theta) for every scalar in
/// `params`. `loss_fn(params, want_grads)` must return the loss and, when
/// want_grads is set, accumulate analytic gradients into the store (on top
/// of zeroed slots). Differences below 1e-8 count as exact to keep unused
/// parameters from dividing by noise.
GradCheckResult grad_check(const std::function<double(ParamStore&, bool)>& loss_fn,
                           ParamStore& params, double eps = 1e-5);

}  // namespace monet::nn
