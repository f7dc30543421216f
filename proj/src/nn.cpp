#include "monet/nn.hpp"

#include <cmath>

namespace monet::nn {

void create_mlp_params(ParamStore& params, const std::string& prefix, int in_dim,
                       const MlpSpec& spec, std::uint64_t seed) {
    if (spec.widths.empty()) {
        throw ConfigError("MlpSpec: needs at least one layer");
    }
    int in = in_dim;
    for (std::size_t i = 0; i < spec.widths.size(); ++i) {
        const int out = spec.widths[i];
        if (out < 1 || in < 1) {
            throw ConfigError("MlpSpec: widths must be >= 1");
        }
        const std::string base = prefix + "." + std::to_string(i);
        params.create(base + ".w", in, out);
        glorot_init(params, base + ".w", seed);
        params.create(base + ".b", 1, out);
        in = out;
    }
}

Var apply_activation(Tape& tape, Var x, Activation act) {
    switch (act) {
        case Activation::kRelu:
            return tape.relu(x);
        case Activation::kSigmoid:
            return tape.sigmoid(x);
        case Activation::kTanh:
            return tape.tanh_act(x);
        case Activation::kNone:
            return x;
    }
    return x;
}

Var shared_mlp_forward(Tape& tape, ParamStore& params, const std::string& prefix,
                       const MlpSpec& spec, Var input, bool trainable) {
    Var h = input;
    for (std::size_t i = 0; i < spec.widths.size(); ++i) {
        const std::string base = prefix + "." + std::to_string(i);
        Var w = trainable ? tape.param(params, base + ".w")
                          : tape.constant(params.value(base + ".w"));
        Var b = trainable ? tape.param(params, base + ".b")
                          : tape.constant(params.value(base + ".b"));
        if (tape.val(h).cols() != tape.val(w).rows()) {
            throw ConfigError("shared_mlp_forward: input width does not match " + base);
        }
        h = tape.add_bias(tape.matmul(h, w), b);
        const bool last = (i + 1 == spec.widths.size());
        h = apply_activation(tape, h, last ? spec.final_activation : spec.activation);
    }
    return h;
}

Var interpolate_to_dense(Tape& tape, Var dense_coords, Var sparse_coords, Var sparse_feats) {
    const Mat& dense = tape.val(dense_coords);
    const Mat& sparse = tape.val(sparse_coords);
    const int k = std::min<int>(3, static_cast<int>(sparse.rows()));
    const auto nbr = geom::knn(dense, sparse, k);

    Var weights = tape.inverse_distance_weights(dense_coords, sparse_coords, nbr);
    std::vector<int> flat(static_cast<std::size_t>(nbr.indices.rows()) *
                          static_cast<std::size_t>(k));
    for (int i = 0; i < nbr.indices.rows(); ++i) {
        for (int j = 0; j < k; ++j) {
            flat[static_cast<std::size_t>(i) * k + j] = nbr.indices(i, j);
        }
    }
    Var gathered = tape.gather_rows(sparse_feats, std::move(flat));
    return tape.weighted_sum_rows(weights, gathered, k);
}

Var feature_propagation(Tape& tape, ParamStore& params, const std::string& prefix,
                        const MlpSpec& spec, Var dense_coords, Var sparse_coords,
                        Var sparse_feats, Var skip_feats, bool trainable) {
    Var interp = interpolate_to_dense(tape, dense_coords, sparse_coords, sparse_feats);
    Var fused = skip_feats.valid() ? tape.concat_cols({interp, skip_feats}) : interp;
    return shared_mlp_forward(tape, params, prefix, spec, fused, trainable);
}

GradCheckResult grad_check(const std::function<double(ParamStore&, bool)>& loss_fn,
                           ParamStore& params, double eps) {
    params.zero_grads();
    const double base = loss_fn(params, true);
    if (!std::isfinite(base)) {
        throw InputError("grad_check: loss is not finite");
    }

    // Snapshot analytic gradients before the finite-difference sweep clobbers
    // anything.
    std::vector<std::pair<std::string, Mat>> analytic;
    for (auto& [name, e] : params) {
        analytic.emplace_back(name, e.grad);
    }

    GradCheckResult result;
    for (auto& [name, grad_snapshot] : analytic) {
        Mat& value = params.value(name);
        for (Eigen::Index r = 0; r < value.rows(); ++r) {
            for (Eigen::Index c = 0; c < value.cols(); ++c) {
                const double saved = value(r, c);
                value(r, c) = saved + eps;
                const double up = loss_fn(params, false);
                value(r, c) = saved - eps;
                const double down = loss_fn(params, false);
                value(r, c) = saved;
                if (!std::isfinite(up) || !std::isfinite(down)) {
                    throw InputError("grad_check: perturbed loss is not finite");
                }
                const double numeric = (up - down) / (2.0 * eps);
                const double exact = grad_snapshot(r, c);
                const double diff = std::abs(exact - numeric);
                const double rel =
                    diff <= 1e-8 ? 0.0 : diff / std::max(std::abs(exact), std::abs(numeric));
                if (rel > result.max_rel_error) {
                    result.max_rel_error = rel;
                    result.worst_param = name;
                    result.worst_index = static_cast<int>(r * value.cols() + c);
                }
            }
        }
    }
    return result;
}

}  // namespace monet::nn
