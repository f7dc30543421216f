#pragma once

#include "monet/core.hpp"
#include "monet/geom.hpp"
#include "monet/params.hpp"

#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace monet::nn {

class Tape;

/// Handle to a tensor recorded on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over 2D tensors. Every operation records what its
/// backward pass needs at forward time; backward() replays the records in
/// reverse. Cluster-shaped tensors (N x k x c) are stored as (N*k) x c with
/// the group size k passed to the pooling/softmax/weighted-sum ops.
///
/// Single-threaded per instance. One tape per forward/backward pass; reuse
/// via reset().
class Tape {
  public:
    // ---- leaves ------------------------------------------------------
    Var constant(Mat value);                 // never receives gradient
    Var leaf(Mat value);                     // gradient-tracked input
    Var param(ParamStore& store, const std::string& name);  // tracked, flushed by accumulate_param_grads

    const Mat& val(Var v) const;
    /// Gradient accumulated for v by the last backward(); zeros if untouched.
    Mat grad_of(Var v) const;

    // ---- elementwise / linear algebra --------------------------------
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double s);
    Var one_minus(Var a);                    // 1 - a
    Var matmul(Var x, Var w);                // (R x c) * (c x c')
    Var add_bias(Var x, Var b);              // b is 1 x c, broadcast over rows
    Var relu(Var x);
    Var sigmoid(Var x);
    Var tanh_act(Var x);
    Var concat_cols(const std::vector<Var>& parts);

    // ---- gather / group reductions ------------------------------------
    Var gather_rows(Var x, std::vector<int> idx);
    /// (N*k) x c -> N x c channelwise max over each k-row block. Gradient
    /// routes to the argmax element, lowest neighbor index on ties.
    Var maxpool_rows(Var x, int k);
    /// (N*k) x 1 -> (N*k) x 1 softmax within each k-row block
    /// (max-subtracted).
    Var softmax_rows(Var x, int k);
    /// weights (N*k) x 1 with features (N*k) x d -> N x d per-block weighted
    /// sum.
    Var weighted_sum_rows(Var weights, Var feats, int k);

    // ---- geometry-aware ops -------------------------------------------
    /// (dx, dy, dz, ||d||) per neighbor slot; differentiable in both point
    /// sets. Zero-distance slots get zero norm-channel gradient.
    Var relative_geometry(Var centers, Var refs, const geom::NeighborIndex& nbr);
    /// Inverse-distance interpolation weights w_j = (1/d_j) / sum(1/d_m) per
    /// block; an exact-distance match collapses to one-hot. (N*k) x 1.
    Var inverse_distance_weights(Var dense, Var sparse, const geom::NeighborIndex& nbr);
    /// Symmetric Chamfer distance of pred against a fixed target (1 x 1).
    /// Nearest-neighbor correspondences are treated as locally constant.
    Var chamfer(Var pred, const Mat& target);

    // ---- reductions ----------------------------------------------------
    Var sum(Var x);                          // 1 x 1
    Var dot_const(Var x, const Mat& weights);  // sum(x .* weights), 1 x 1
    Var mean_of(const std::vector<Var>& scalars);

    // ---- driver --------------------------------------------------------
    /// Seeds d(loss)/d(loss) = 1 and sweeps the records in reverse.
    void backward(Var scalar_loss);
    /// Adds the gradients of every param() leaf into its store slot.
    void accumulate_param_grads();
    void reset();

    std::size_t node_count() const { return slots_.size(); }

  private:
    struct Slot {
        Mat value;
        Mat grad;  // empty until touched
        bool track = false;
        std::function<void()> back;  // empty for leaves
    };

    int push(Mat value, bool track, std::function<void()> back = {});
    Mat& grad_buf(int id);
    bool tracked(Var v) const { return slots_[static_cast<std::size_t>(v.id)].track; }

    // deque: references returned by val() stay valid while ops are appended
    std::deque<Slot> slots_;
    struct ParamRef {
        ParamStore* store;
        std::string name;
        int id;
    };
    std::vector<ParamRef> param_refs_;
};

}  // namespace monet::nn
