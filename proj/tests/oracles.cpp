#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracles {

using monet::nn::Activation;
using monet::nn::MlpSpec;
using monet::nn::ParamStore;

std::vector<int> fps_bruteforce(const PointCloud& cloud, int m, int seed_index) {
    const int n = static_cast<int>(cloud.rows());
    std::vector<int> picked{seed_index};
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    used[static_cast<std::size_t>(seed_index)] = true;
    while (static_cast<int>(picked.size()) < m) {
        int best = -1;
        double best_min = -1.0;
        for (int i = 0; i < n; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            double min_d = 1e300;
            for (int s : picked) {
                double d2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double d = cloud(i, c) - cloud(s, c);
                    d2 += d * d;
                }
                min_d = std::min(min_d, d2);
            }
            if (min_d > best_min) {
                best_min = min_d;
                best = i;
            }
        }
        picked.push_back(best);
        used[static_cast<std::size_t>(best)] = true;
    }
    return picked;
}

std::vector<KnnRow> knn_oracle(const PointCloud& queries, const PointCloud& refs, int k) {
    std::vector<KnnRow> rows;
    for (int i = 0; i < queries.rows(); ++i) {
        std::vector<std::pair<double, int>> all;
        for (int j = 0; j < refs.rows(); ++j) {
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double d = queries(i, c) - refs(j, c);
                d2 += d * d;
            }
            all.emplace_back(d2, j);
        }
        std::sort(all.begin(), all.end());
        KnnRow row;
        for (int j = 0; j < k; ++j) {
            row.idx.push_back(all[static_cast<std::size_t>(j)].second);
            row.dist.push_back(std::sqrt(all[static_cast<std::size_t>(j)].first));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

double activate(double x, Activation a) {
    switch (a) {
        case Activation::kRelu:
            return x > 0.0 ? x : 0.0;
        case Activation::kSigmoid:
            return 1.0 / (1.0 + std::exp(-x));
        case Activation::kTanh:
            return std::tanh(x);
        case Activation::kNone:
            return x;
    }
    return x;
}

}  // namespace

std::vector<double> scalar_mlp(const std::vector<double>& input, const ParamStore& params,
                               const std::string& prefix, const MlpSpec& spec) {
    std::vector<double> h = input;
    for (std::size_t layer = 0; layer < spec.widths.size(); ++layer) {
        const std::string base = prefix + "." + std::to_string(layer);
        const Mat& w = params.value(base + ".w");
        const Mat& b = params.value(base + ".b");
        std::vector<double> next(static_cast<std::size_t>(w.cols()));
        for (int o = 0; o < w.cols(); ++o) {
            double acc = b(0, o);
            for (int i = 0; i < w.rows(); ++i) {
                acc += h[static_cast<std::size_t>(i)] * w(i, o);
            }
            const bool last = (layer + 1 == spec.widths.size());
            next[static_cast<std::size_t>(o)] =
                activate(acc, last ? spec.final_activation : spec.activation);
        }
        h = std::move(next);
    }
    return h;
}

Mat interpolate_oracle(const PointCloud& dense, const PointCloud& sparse, const Mat& feats) {
    const int k = std::min<int>(3, static_cast<int>(sparse.rows()));
    const auto nbr = knn_oracle(dense, sparse, k);
    Mat out = Mat::Zero(dense.rows(), feats.cols());
    for (int i = 0; i < dense.rows(); ++i) {
        const auto& row = nbr[static_cast<std::size_t>(i)];
        int exact = -1;
        for (int j = 0; j < k; ++j) {
            if (row.dist[static_cast<std::size_t>(j)] <= 1e-12) {
                exact = j;
                break;
            }
        }
        if (exact >= 0) {
            out.row(i) = feats.row(row.idx[static_cast<std::size_t>(exact)]);
            continue;
        }
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += 1.0 / row.dist[static_cast<std::size_t>(j)];
        for (int j = 0; j < k; ++j) {
            const double w = (1.0 / row.dist[static_cast<std::size_t>(j)]) / denom;
            out.row(i) += w * feats.row(row.idx[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

namespace {

// per-center cluster rows: geometric features plus gathered/broadcast
// features, evaluated through a pooled gate MLP
struct ClusterContext {
    std::vector<KnnRow> nbr;
    int k;
};

std::vector<double> cluster_row(const PointCloud& x_t, const PointCloud& x_prev, int i, int j,
                                const KnnRow& row) {
    const int r = row.idx[static_cast<std::size_t>(j)];
    const double dx = x_prev(r, 0) - x_t(i, 0);
    const double dy = x_prev(r, 1) - x_t(i, 1);
    const double dz = x_prev(r, 2) - x_t(i, 2);
    return {dx, dy, dz, std::sqrt(dx * dx + dy * dy + dz * dz)};
}

void append_row(std::vector<double>& v, const Mat& m, int row) {
    for (int c = 0; c < m.cols(); ++c) v.push_back(m(row, c));
}

std::vector<double> pooled_gate(const PointCloud& x_t, const PointCloud& x_prev,
                                const ClusterContext& ctx, int i, const Mat* gathered,
                                const std::vector<const Mat*>& center_feats,
                                const ParamStore& params, const std::string& prefix, int width) {
    std::vector<double> pooled(static_cast<std::size_t>(width),
                               -std::numeric_limits<double>::infinity());
    const auto& row = ctx.nbr[static_cast<std::size_t>(i)];
    for (int j = 0; j < ctx.k; ++j) {
        std::vector<double> in = cluster_row(x_t, x_prev, i, j, row);
        if (gathered) append_row(in, *gathered, row.idx[static_cast<std::size_t>(j)]);
        for (const Mat* f : center_feats) append_row(in, *f, i);
        const auto out = scalar_mlp(in, params, prefix, MlpSpec::two_layer(width, width));
        for (int c = 0; c < width; ++c) {
            pooled[static_cast<std::size_t>(c)] =
                std::max(pooled[static_cast<std::size_t>(c)], out[static_cast<std::size_t>(c)]);
        }
    }
    return pooled;
}

}  // namespace

Mat lstm_step_oracle(const PointCloud& x_t, const Mat& e_t, const Mat& m_t,
                     const PointCloud& x_prev, const Mat& h_prev, const Mat& c_prev, int k,
                     const ParamStore& params, int layer, Mat* cell_out) {
    const int n = static_cast<int>(x_t.rows());
    const int d_s = static_cast<int>(h_prev.cols());
    const std::string li = "rnn.l" + std::to_string(layer);
    ClusterContext ctx{knn_oracle(x_t, x_prev, k), k};

    Mat hidden(n, d_s);
    Mat cell(n, d_s);
    for (int i = 0; i < n; ++i) {
        std::vector<const Mat*> me{&m_t, &e_t};
        const auto gi = pooled_gate(x_t, x_prev, ctx, i, &h_prev, me, params, li + ".input", d_s);
        const auto gf = pooled_gate(x_t, x_prev, ctx, i, &h_prev, me, params, li + ".forget", d_s);
        const auto go = pooled_gate(x_t, x_prev, ctx, i, &h_prev, me, params, li + ".output", d_s);
        const auto gc = pooled_gate(x_t, x_prev, ctx, i, &h_prev, me, params, li + ".cand", d_s);
        const auto chat =
            pooled_gate(x_t, x_prev, ctx, i, &c_prev, {}, params, li + ".cellpool", d_s);
        for (int c = 0; c < d_s; ++c) {
            const double s_i = 1.0 / (1.0 + std::exp(-gi[static_cast<std::size_t>(c)]));
            const double s_f = 1.0 / (1.0 + std::exp(-gf[static_cast<std::size_t>(c)]));
            const double s_o = 1.0 / (1.0 + std::exp(-go[static_cast<std::size_t>(c)]));
            const double cand = std::tanh(gc[static_cast<std::size_t>(c)]);
            const double new_c = s_f * chat[static_cast<std::size_t>(c)] + s_i * cand;
            cell(i, c) = new_c;
            hidden(i, c) = s_o * std::tanh(new_c);
        }
    }
    if (cell_out) *cell_out = cell;
    return hidden;
}

Mat gru_step_oracle(const PointCloud& x_t, const Mat& e_t, const Mat& m_t,
                    const PointCloud& x_prev, const Mat& h_prev, int k,
                    const ParamStore& params, int layer) {
    const int n = static_cast<int>(x_t.rows());
    const int d_s = static_cast<int>(h_prev.cols());
    const std::string li = "rnn.l" + std::to_string(layer);
    ClusterContext ctx{knn_oracle(x_t, x_prev, k), k};

    Mat hidden(n, d_s);
    for (int i = 0; i < n; ++i) {
        std::vector<const Mat*> me{&m_t, &e_t};
        const auto gz = pooled_gate(x_t, x_prev, ctx, i, &h_prev, me, params, li + ".update", d_s);
        const auto gr = pooled_gate(x_t, x_prev, ctx, i, &h_prev, me, params, li + ".reset", d_s);
        const auto hhat = pooled_gate(x_t, x_prev, ctx, i, &h_prev, {}, params, li + ".hpool", d_s);

        std::vector<double> cand_in;
        for (int c = 0; c < d_s; ++c) {
            const double r = 1.0 / (1.0 + std::exp(-gr[static_cast<std::size_t>(c)]));
            cand_in.push_back(r * hhat[static_cast<std::size_t>(c)]);
        }
        append_row(cand_in, m_t, i);
        append_row(cand_in, e_t, i);
        const auto cand_pre =
            scalar_mlp(cand_in, params, li + ".cand", MlpSpec::two_layer(d_s, d_s));
        for (int c = 0; c < d_s; ++c) {
            const double z = 1.0 / (1.0 + std::exp(-gz[static_cast<std::size_t>(c)]));
            const double cand = std::tanh(cand_pre[static_cast<std::size_t>(c)]);
            hidden(i, c) = z * hhat[static_cast<std::size_t>(c)] + (1.0 - z) * cand;
        }
    }
    return hidden;
}

Mat random_matrix(int rows, int cols, std::uint64_t seed, double scale) {
    Mat m(rows, cols);
    std::uint64_t s = seed * 2654435761u + 1;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            // xorshift64*
            s ^= s >> 12;
            s ^= s << 25;
            s ^= s >> 27;
            const std::uint64_t bits = s * 0x2545F4914F6CDD1Dull;
            m(r, c) = (static_cast<double>(bits >> 11) / 9007199254740992.0 * 2.0 - 1.0) * scale;
        }
    }
    return m;
}

PointCloud random_cloud(int n, std::uint64_t seed, double extent) {
    return random_matrix(n, 3, seed, extent);
}

TranslationSample separated_translation(int n_points, int frames, std::uint64_t seed,
                                        const Eigen::RowVector3d& velocity) {
    PointCloud cloud(n_points, 3);
    int placed = 0;
    std::uint64_t attempt = 0;
    const double min_sep = 4.0 * velocity.norm();
    while (placed < n_points) {
        const PointCloud candidate = random_cloud(1, seed * 1000 + (++attempt), 8.0);
        bool ok = true;
        for (int i = 0; i < placed && ok; ++i) {
            ok = (cloud.row(i) - candidate.row(0)).norm() >= min_sep;
        }
        if (ok) cloud.row(placed++) = candidate.row(0);
    }
    TranslationSample sample;
    sample.velocity = velocity;
    for (int t = 0; t < frames; ++t) {
        sample.frames.push_back(cloud);
        cloud = cloud.rowwise() + velocity;
    }
    return sample;
}

void randomize_params(monet::nn::ParamStore& params, std::uint64_t seed, double scale) {
    std::uint64_t i = 0;
    for (auto& [name, e] : params) {
        e.value = random_matrix(static_cast<int>(e.value.rows()),
                                static_cast<int>(e.value.cols()), seed * 7919 + (++i), scale);
    }
}

}  // namespace oracles
