#include "monet/tape.hpp"

#include "monet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace monet::nn {

int Tape::push(Mat value, bool track, std::function<void()> back) {
    Slot s;
    s.value = std::move(value);
    s.track = track;
    s.back = std::move(back);
    slots_.push_back(std::move(s));
    return static_cast<int>(slots_.size()) - 1;
}

const Mat& Tape::val(Var v) const {
    return slots_[static_cast<std::size_t>(v.id)].value;
}

Mat& Tape::grad_buf(int id) {
    Slot& s = slots_[static_cast<std::size_t>(id)];
    if (s.grad.size() == 0) {
        s.grad = Mat::Zero(s.value.rows(), s.value.cols());
    }
    return s.grad;
}

Mat Tape::grad_of(Var v) const {
    const Slot& s = slots_[static_cast<std::size_t>(v.id)];
    if (s.grad.size() == 0) {
        return Mat::Zero(s.value.rows(), s.value.cols());
    }
    return s.grad;
}

Var Tape::constant(Mat value) {
    return {push(std::move(value), false)};
}

Var Tape::leaf(Mat value) {
    return {push(std::move(value), true)};
}

Var Tape::param(ParamStore& store, const std::string& name) {
    const int id = push(store.value(name), true);
    param_refs_.push_back({&store, name, id});
    return {id};
}

void Tape::accumulate_param_grads() {
    for (const auto& ref : param_refs_) {
        const Slot& s = slots_[static_cast<std::size_t>(ref.id)];
        if (s.grad.size() != 0) {
            ref.store->grad(ref.name) += s.grad;
        }
    }
}

void Tape::reset() {
    slots_.clear();
    param_refs_.clear();
}

// --------------------------------------------------------------------------
// elementwise / linear algebra
// --------------------------------------------------------------------------

Var Tape::add(Var a, Var b) {
    Mat out = val(a) + val(b);
    const bool track = tracked(a) || tracked(b);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, a, b, id]() {
            const Mat& g = slots_[id].grad;
            if (tracked(a)) grad_buf(a.id) += g;
            if (tracked(b)) grad_buf(b.id) += g;
        };
    }
    return {id};
}

Var Tape::sub(Var a, Var b) {
    Mat out = val(a) - val(b);
    const bool track = tracked(a) || tracked(b);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, a, b, id]() {
            const Mat& g = slots_[id].grad;
            if (tracked(a)) grad_buf(a.id) += g;
            if (tracked(b)) grad_buf(b.id) -= g;
        };
    }
    return {id};
}

Var Tape::hadamard(Var a, Var b) {
    Mat out = val(a).cwiseProduct(val(b));
    const bool track = tracked(a) || tracked(b);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, a, b, id]() {
            const Mat& g = slots_[id].grad;
            if (tracked(a)) grad_buf(a.id) += g.cwiseProduct(val(b));
            if (tracked(b)) grad_buf(b.id) += g.cwiseProduct(val(a));
        };
    }
    return {id};
}

Var Tape::scale(Var a, double s) {
    Mat out = val(a) * s;
    const bool track = tracked(a);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, a, s, id]() {
            grad_buf(a.id) += slots_[id].grad * s;
        };
    }
    return {id};
}

Var Tape::one_minus(Var a) {
    Mat out = (1.0 - val(a).array()).matrix();
    const bool track = tracked(a);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, a, id]() {
            grad_buf(a.id) -= slots_[id].grad;
        };
    }
    return {id};
}

Var Tape::matmul(Var x, Var w) {
    if (val(x).cols() != val(w).rows()) {
        throw ConfigError("matmul: inner dimensions disagree");
    }
    Mat out = val(x) * val(w);
    const bool track = tracked(x) || tracked(w);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, x, w, id]() {
            const Mat& g = slots_[id].grad;
            if (tracked(x)) grad_buf(x.id) += g * val(w).transpose();
            if (tracked(w)) grad_buf(w.id) += val(x).transpose() * g;
        };
    }
    return {id};
}

Var Tape::add_bias(Var x, Var b) {
    if (val(b).rows() != 1 || val(b).cols() != val(x).cols()) {
        throw ConfigError("add_bias: bias must be 1 x cols(x)");
    }
    Mat out = val(x).rowwise() + val(b).row(0);
    const bool track = tracked(x) || tracked(b);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, x, b, id]() {
            const Mat& g = slots_[id].grad;
            if (tracked(x)) grad_buf(x.id) += g;
            if (tracked(b)) grad_buf(b.id).row(0) += g.colwise().sum();
        };
    }
    return {id};
}

Var Tape::relu(Var x) {
    Mat out = val(x).cwiseMax(0.0);
    const bool track = tracked(x);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, x, id]() {
            const Mat& g = slots_[id].grad;
            Mat mask = (val(x).array() > 0.0).cast<double>().matrix();
            grad_buf(x.id) += g.cwiseProduct(mask);
        };
    }
    return {id};
}

Var Tape::sigmoid(Var x) {
    Mat out = (1.0 / (1.0 + (-val(x).array()).exp())).matrix();
    const bool track = tracked(x);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, x, id]() {
            const Mat& g = slots_[id].grad;
            const Mat& y = slots_[id].value;
            grad_buf(x.id) += g.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
        };
    }
    return {id};
}

Var Tape::tanh_act(Var x) {
    Mat out = val(x).array().tanh().matrix();
    const bool track = tracked(x);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, x, id]() {
            const Mat& g = slots_[id].grad;
            const Mat& y = slots_[id].value;
            grad_buf(x.id) += g.cwiseProduct((1.0 - y.array().square()).matrix());
        };
    }
    return {id};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw ConfigError("concat_cols: no inputs");
    }
    const Eigen::Index rows = val(parts[0]).rows();
    Eigen::Index cols = 0;
    bool track = false;
    for (Var p : parts) {
        if (val(p).rows() != rows) {
            throw ConfigError("concat_cols: row counts disagree");
        }
        cols += val(p).cols();
        track = track || tracked(p);
    }
    Mat out(rows, cols);
    Eigen::Index off = 0;
    for (Var p : parts) {
        out.middleCols(off, val(p).cols()) = val(p);
        off += val(p).cols();
    }
    int id = push(std::move(out), track);
    if (track) {
        std::vector<Var> ps = parts;
        slots_[id].back = [this, ps, id]() {
            const Mat& g = slots_[id].grad;
            Eigen::Index off2 = 0;
            for (Var p : ps) {
                const Eigen::Index c = val(p).cols();
                if (tracked(p)) grad_buf(p.id) += g.middleCols(off2, c);
                off2 += c;
            }
        };
    }
    return {id};
}

// --------------------------------------------------------------------------
// gather / group reductions
// --------------------------------------------------------------------------

Var Tape::gather_rows(Var x, std::vector<int> idx) {
    const Mat& src = val(x);
    Mat out(static_cast<Eigen::Index>(idx.size()), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= src.rows()) {
            throw InputError("gather_rows: index out of range");
        }
        out.row(static_cast<Eigen::Index>(i)) = src.row(idx[i]);
    }
    const bool track = tracked(x);
    int id = push(std::move(out), track);
    if (track) {
        auto indices = std::move(idx);
        slots_[id].back = [this, x, indices, id]() {
            const Mat& g = slots_[id].grad;
            Mat& gx = grad_buf(x.id);
            for (std::size_t i = 0; i < indices.size(); ++i) {
                gx.row(indices[i]) += g.row(static_cast<Eigen::Index>(i));
            }
        };
    }
    return {id};
}

Var Tape::maxpool_rows(Var x, int k) {
    const Mat& in = val(x);
    if (k < 1 || in.rows() % k != 0) {
        throw ConfigError("maxpool_rows: rows not divisible by k");
    }
    const Eigen::Index n = in.rows() / k;
    const Eigen::Index c = in.cols();
    Mat out(n, c);
    IdxMat arg(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index ch = 0; ch < c; ++ch) {
            double best = in(i * k, ch);
            int best_j = 0;
            for (int j = 1; j < k; ++j) {
                const double v = in(i * k + j, ch);
                if (v > best) {  // strict: ties keep the lowest neighbor index
                    best = v;
                    best_j = j;
                }
            }
            out(i, ch) = best;
            arg(i, ch) = best_j;
        }
    }
    const bool track = tracked(x);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, x, arg, k, id]() {
            const Mat& g = slots_[id].grad;
            Mat& gx = grad_buf(x.id);
            for (Eigen::Index i = 0; i < g.rows(); ++i) {
                for (Eigen::Index ch = 0; ch < g.cols(); ++ch) {
                    gx(i * k + arg(i, ch), ch) += g(i, ch);
                }
            }
        };
    }
    return {id};
}

Var Tape::softmax_rows(Var x, int k) {
    const Mat& in = val(x);
    if (in.cols() != 1 || k < 1 || in.rows() % k != 0) {
        throw ConfigError("softmax_rows: expects (N*k) x 1 input");
    }
    const Eigen::Index n = in.rows() / k;
    Mat out(in.rows(), 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mx = in(i * k, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, in(i * k + j, 0));
        double denom = 0.0;
        for (int j = 0; j < k; ++j) {
            const double e = std::exp(in(i * k + j, 0) - mx);
            out(i * k + j, 0) = e;
            denom += e;
        }
        for (int j = 0; j < k; ++j) out(i * k + j, 0) /= denom;
    }
    const bool track = tracked(x);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, x, k, n, id]() {
            const Mat& g = slots_[id].grad;
            const Mat& y = slots_[id].value;
            Mat& gx = grad_buf(x.id);
            for (Eigen::Index i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int j = 0; j < k; ++j) dot += g(i * k + j, 0) * y(i * k + j, 0);
                for (int j = 0; j < k; ++j) {
                    gx(i * k + j, 0) += y(i * k + j, 0) * (g(i * k + j, 0) - dot);
                }
            }
        };
    }
    return {id};
}

Var Tape::weighted_sum_rows(Var weights, Var feats, int k) {
    const Mat& w = val(weights);
    const Mat& f = val(feats);
    if (w.cols() != 1 || w.rows() != f.rows() || k < 1 || f.rows() % k != 0) {
        throw ConfigError("weighted_sum_rows: shape mismatch");
    }
    const Eigen::Index n = f.rows() / k;
    Mat out = Mat::Zero(n, f.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            out.row(i) += w(i * k + j, 0) * f.row(i * k + j);
        }
    }
    const bool track = tracked(weights) || tracked(feats);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, weights, feats, k, n, id]() {
            const Mat& g = slots_[id].grad;
            const Mat& wv = val(weights);
            const Mat& fv = val(feats);
            if (tracked(weights)) {
                Mat& gw = grad_buf(weights.id);
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (int j = 0; j < k; ++j) {
                        gw(i * k + j, 0) += g.row(i).dot(fv.row(i * k + j));
                    }
                }
            }
            if (tracked(feats)) {
                Mat& gf = grad_buf(feats.id);
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (int j = 0; j < k; ++j) {
                        gf.row(i * k + j) += wv(i * k + j, 0) * g.row(i);
                    }
                }
            }
        };
    }
    return {id};
}

// --------------------------------------------------------------------------
// geometry-aware ops
// --------------------------------------------------------------------------

Var Tape::relative_geometry(Var centers, Var refs, const geom::NeighborIndex& nbr) {
    const Mat& c = val(centers);
    const Mat& r = val(refs);
    const int n = nbr.center_count();
    const int k = nbr.k;
    if (c.rows() != n || c.cols() != 3 || r.cols() != 3) {
        throw ConfigError("relative_geometry: shape mismatch");
    }
    Mat out(static_cast<Eigen::Index>(n) * k, 4);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            const int rj = nbr.indices(i, j);
            const Eigen::Index row = static_cast<Eigen::Index>(i) * k + j;
            const double dx = r(rj, 0) - c(i, 0);
            const double dy = r(rj, 1) - c(i, 1);
            const double dz = r(rj, 2) - c(i, 2);
            out(row, 0) = dx;
            out(row, 1) = dy;
            out(row, 2) = dz;
            out(row, 3) = std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    }
    const bool track = tracked(centers) || tracked(refs);
    int id = push(std::move(out), track);
    if (track) {
        IdxMat indices = nbr.indices;
        slots_[id].back = [this, centers, refs, indices, k, n, id]() {
            const Mat& g = slots_[id].grad;
            const Mat& y = slots_[id].value;
            const bool tc = tracked(centers);
            const bool tr = tracked(refs);
            Mat* gc = tc ? &grad_buf(centers.id) : nullptr;
            Mat* gr = tr ? &grad_buf(refs.id) : nullptr;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < k; ++j) {
                    const Eigen::Index row = static_cast<Eigen::Index>(i) * k + j;
                    const int rj = indices(i, j);
                    Eigen::RowVector3d gd(g(row, 0), g(row, 1), g(row, 2));
                    const double norm = y(row, 3);
                    if (norm > 0.0 && g(row, 3) != 0.0) {
                        // d||d||/d(ref - center) = unit vector
                        gd += (g(row, 3) / norm) * Eigen::RowVector3d(y(row, 0), y(row, 1), y(row, 2));
                    }
                    if (tr) gr->row(rj) += gd;
                    if (tc) gc->row(i) -= gd;
                }
            }
        };
    }
    return {id};
}

Var Tape::inverse_distance_weights(Var dense, Var sparse, const geom::NeighborIndex& nbr) {
    const Mat& d = val(dense);
    const Mat& s = val(sparse);
    const int n = nbr.center_count();
    const int k = nbr.k;
    if (d.rows() != n) {
        throw ConfigError("inverse_distance_weights: neighbor table does not match dense cloud");
    }
    if (k > 64) {
        throw ConfigError("inverse_distance_weights: k > 64 unsupported");
    }
    constexpr double kExactTol = 1e-12;

    Mat out(static_cast<Eigen::Index>(n) * k, 1);
    std::vector<char> exact(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        double dist[64];
        int arg_exact = -1;
        for (int j = 0; j < k; ++j) {
            const int rj = nbr.indices(i, j);
            const double dx = d(i, 0) - s(rj, 0);
            const double dy = d(i, 1) - s(rj, 1);
            const double dz = d(i, 2) - s(rj, 2);
            dist[j] = std::sqrt(dx * dx + dy * dy + dz * dz);
            if (arg_exact < 0 && dist[j] <= kExactTol) arg_exact = j;
        }
        if (arg_exact >= 0) {
            exact[static_cast<std::size_t>(i)] = 1;
            for (int j = 0; j < k; ++j) {
                out(static_cast<Eigen::Index>(i) * k + j, 0) = (j == arg_exact) ? 1.0 : 0.0;
            }
        } else {
            double denom = 0.0;
            for (int j = 0; j < k; ++j) denom += 1.0 / dist[j];
            for (int j = 0; j < k; ++j) {
                out(static_cast<Eigen::Index>(i) * k + j, 0) = (1.0 / dist[j]) / denom;
            }
        }
    }
    const bool track = tracked(dense) || tracked(sparse);
    int id = push(std::move(out), track);
    if (track) {
        IdxMat indices = nbr.indices;
        slots_[id].back = [this, dense, sparse, indices, k, n, exact, id]() {
            const Mat& g = slots_[id].grad;
            const Mat& w = slots_[id].value;
            const Mat& dv = val(dense);
            const Mat& sv = val(sparse);
            const bool td = tracked(dense);
            const bool ts = tracked(sparse);
            Mat* gd = td ? &grad_buf(dense.id) : nullptr;
            Mat* gs = ts ? &grad_buf(sparse.id) : nullptr;
            for (int i = 0; i < n; ++i) {
                // One-hot blocks come from a structurally coincident point;
                // the weights are locally constant there.
                if (exact[static_cast<std::size_t>(i)]) continue;
                double rinv[64], dist[64];
                double denom = 0.0;
                double gw_dot = 0.0;
                for (int j = 0; j < k; ++j) {
                    const int rj = indices(i, j);
                    const double dx = dv(i, 0) - sv(rj, 0);
                    const double dy = dv(i, 1) - sv(rj, 1);
                    const double dz = dv(i, 2) - sv(rj, 2);
                    dist[j] = std::sqrt(dx * dx + dy * dy + dz * dz);
                    rinv[j] = 1.0 / dist[j];
                    denom += rinv[j];
                    gw_dot += g(static_cast<Eigen::Index>(i) * k + j, 0) *
                              w(static_cast<Eigen::Index>(i) * k + j, 0);
                }
                for (int j = 0; j < k; ++j) {
                    const Eigen::Index row = static_cast<Eigen::Index>(i) * k + j;
                    // dL/dd_j = -(1/d_j^2)/denom * (g_j - sum_m g_m w_m)
                    const double dl_dd =
                        -(rinv[j] * rinv[j]) / denom * (g(row, 0) - gw_dot);
                    if (dl_dd == 0.0) continue;
                    const int rj = indices(i, j);
                    Eigen::RowVector3d unit(dv(i, 0) - sv(rj, 0), dv(i, 1) - sv(rj, 1),
                                            dv(i, 2) - sv(rj, 2));
                    unit *= rinv[j];
                    if (td) gd->row(i) += dl_dd * unit;
                    if (ts) gs->row(rj) -= dl_dd * unit;
                }
            }
        };
    }
    return {id};
}

Var Tape::chamfer(Var pred, const Mat& target) {
    const auto res = metrics::chamfer_with_matches(val(pred), target);
    Mat out(1, 1);
    out(0, 0) = res.distance;
    const bool track = tracked(pred);
    int id = push(std::move(out), track);
    if (track) {
        auto fwd = res.forward_match;   // per prediction: nearest target index
        auto bwd = res.backward_match;  // per target: nearest prediction index
        slots_[id].back = [this, pred, target, fwd, bwd, id]() {
            const double g = slots_[id].grad(0, 0);
            if (g == 0.0) return;
            const Mat& p = val(pred);
            Mat& gp = grad_buf(pred.id);
            const double inv_np = 1.0 / static_cast<double>(p.rows());
            const double inv_nq = 1.0 / static_cast<double>(target.rows());
            for (Eigen::Index i = 0; i < p.rows(); ++i) {
                Eigen::RowVector3d diff = p.row(i) - target.row(fwd[static_cast<std::size_t>(i)]);
                const double norm = diff.norm();
                if (norm > 0.0) gp.row(i) += g * inv_np * (diff / norm);
            }
            for (Eigen::Index j = 0; j < target.rows(); ++j) {
                const Eigen::Index i = bwd[static_cast<std::size_t>(j)];
                Eigen::RowVector3d diff = p.row(i) - target.row(j);
                const double norm = diff.norm();
                if (norm > 0.0) gp.row(i) += g * inv_nq * (diff / norm);
            }
        };
    }
    return {id};
}

// --------------------------------------------------------------------------
// reductions
// --------------------------------------------------------------------------

Var Tape::sum(Var x) {
    Mat out(1, 1);
    out(0, 0) = val(x).sum();
    const bool track = tracked(x);
    int id = push(std::move(out), track);
    if (track) {
        slots_[id].back = [this, x, id]() {
            grad_buf(x.id).array() += slots_[id].grad(0, 0);
        };
    }
    return {id};
}

Var Tape::dot_const(Var x, const Mat& weights) {
    if (weights.rows() != val(x).rows() || weights.cols() != val(x).cols()) {
        throw ConfigError("dot_const: shape mismatch");
    }
    Mat out(1, 1);
    out(0, 0) = val(x).cwiseProduct(weights).sum();
    const bool track = tracked(x);
    int id = push(std::move(out), track);
    if (track) {
        Mat w = weights;
        slots_[id].back = [this, x, w, id]() {
            grad_buf(x.id) += slots_[id].grad(0, 0) * w;
        };
    }
    return {id};
}

Var Tape::mean_of(const std::vector<Var>& scalars) {
    if (scalars.empty()) {
        throw ConfigError("mean_of: no inputs");
    }
    Mat out(1, 1);
    double acc = 0.0;
    bool track = false;
    for (Var s : scalars) {
        acc += val(s)(0, 0);
        track = track || tracked(s);
    }
    out(0, 0) = acc / static_cast<double>(scalars.size());
    int id = push(std::move(out), track);
    if (track) {
        std::vector<Var> ss = scalars;
        slots_[id].back = [this, ss, id]() {
            const double g = slots_[id].grad(0, 0) / static_cast<double>(ss.size());
            for (Var s : ss) {
                if (tracked(s)) grad_buf(s.id)(0, 0) += g;
            }
        };
    }
    return {id};
}

void Tape::backward(Var scalar_loss) {
    const Slot& loss = slots_[static_cast<std::size_t>(scalar_loss.id)];
    if (loss.value.rows() != 1 || loss.value.cols() != 1) {
        throw ConfigError("backward: loss must be 1 x 1");
    }
    grad_buf(scalar_loss.id)(0, 0) += 1.0;
    for (int i = scalar_loss.id; i >= 0; --i) {
        Slot& s = slots_[static_cast<std::size_t>(i)];
        if (s.grad.size() != 0 && s.back) {
            s.back();
        }
    }
}

}  // namespace monet::nn
