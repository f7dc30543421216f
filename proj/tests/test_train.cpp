#include "monet/train.hpp"

#include "monet/metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace monet;
using oracles::random_cloud;
using oracles::random_matrix;

namespace {

std::vector<synth::SequenceSample> translation_scene(int n_points, int frames,
                                                     std::uint64_t seed, double speed) {
    synth::SceneConfig cfg;
    cfg.n_points = n_points;
    cfg.n_objects = 1;
    cfg.background_fraction = 0.0;
    cfg.frame_count = frames;
    cfg.min_speed = cfg.max_speed = speed;
    cfg.min_spin = cfg.max_spin = 0.0;
    cfg.seed = seed;
    return {synth::make_sequence(cfg)};
}

// wraps the shared separated-translation helper as a SequenceSample
synth::SequenceSample separated_translation_sample(int n_points, int frames, std::uint64_t seed,
                                                   const Eigen::RowVector3d& v) {
    const auto base = oracles::separated_translation(n_points, frames, seed, v);
    synth::SequenceSample sample;
    sample.seed = seed;
    sample.frames = base.frames;
    for (int t = 0; t + 1 < frames; ++t) {
        Mat flow(n_points, 3);
        flow.rowwise() = v;
        sample.gt_flow.push_back(flow);
    }
    return sample;
}

}  // namespace

TEST_CASE("sequence loss cases") {
    const auto p = random_cloud(8, 1);
    const auto q = random_cloud(8, 2);
    CHECK(train::sequence_loss({p}, {p}) == 0.0);
    CHECK(train::sequence_loss({p}, {q}) == doctest::Approx(metrics::chamfer(p, q)));
    // two frames average their Chamfer distances
    const double both = train::sequence_loss({p, q}, {q, q});
    CHECK(both == doctest::Approx(0.5 * metrics::chamfer(p, q)));

    // frames with CD exactly 0.5 and 1.5 average to 1.0
    PointCloud o(1, 3), d1(1, 3), d2(1, 3);
    o << 0, 0, 0;
    d1 << 0.25, 0, 0;  // chamfer = 2 * 0.25
    d2 << 0.75, 0, 0;  // chamfer = 2 * 0.75
    CHECK(train::sequence_loss({o, o}, {d1, d2}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(train::sequence_loss({p}, {p, q}), InputError);
}

TEST_CASE("adam first step moves each parameter by about lr") {
    nn::ParamStore params;
    params.create("w", 2, 2) = random_matrix(2, 2, 3);
    params.grad("w") << 0.5, -2.0, 10.0, -0.001;
    Mat before = params.value("w");
    train::AdamHyper hyper;
    train::adam_step(params, hyper);
    const Mat delta = params.value("w") - before;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            // bias-corrected first step: lr * g / (|g| + eps')
            CHECK(std::abs(std::abs(delta(r, c)) - hyper.lr) < hyper.lr * 1e-2);
            CHECK(std::signbit(delta(r, c)) == !std::signbit(params.grad("w")(r, c)));
        }
    }
}

TEST_CASE("adam with zero gradients leaves parameters in place") {
    nn::ParamStore params;
    params.create("w", 3, 3) = random_matrix(3, 3, 4);
    const Mat before = params.value("w");
    train::adam_step(params, train::AdamHyper{});
    CHECK((params.value("w") - before).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("adam matches a hand-stepped quadratic") {
    // minimize f(w) = 0.5 w^2 starting at w=1, so grad = w
    nn::ParamStore params;
    params.create("w", 1, 1)(0, 0) = 1.0;
    train::AdamHyper h;
    h.lr = 0.1;

    double m = 0.0, v = 0.0, w_ref = 1.0;
    for (int t = 1; t <= 2; ++t) {
        const double g = w_ref;
        m = h.beta1 * m + (1 - h.beta1) * g;
        v = h.beta2 * v + (1 - h.beta2) * g * g;
        const double m_hat = m / (1 - std::pow(h.beta1, t));
        const double v_hat = v / (1 - std::pow(h.beta2, t));
        w_ref -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);

        params.grad("w")(0, 0) = params.value("w")(0, 0);
        train::adam_step(params, h);
    }
    CHECK(params.value("w")(0, 0) == doctest::Approx(w_ref).epsilon(1e-12));
}

TEST_CASE("adam aborts on non-finite gradients naming the tensor") {
    nn::ParamStore params;
    params.create("stuck", 1, 1);
    params.grad("stuck")(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        train::adam_step(params, train::AdamHyper{});
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("stuck") != std::string::npos);
    }
}

TEST_CASE("baseline copy-last is exact on static scenes and degrades on moving ones") {
    synth::SceneConfig cfg;
    cfg.n_points = 48;
    cfg.n_objects = 0;
    cfg.frame_count = 6;
    cfg.seed = 5;
    const auto still = synth::make_sequence(cfg);
    std::vector<PointCloud> inputs(still.frames.begin(), still.frames.begin() + 3);
    const auto preds = train::baseline_copy_last(inputs, 3);
    for (int j = 0; j < 3; ++j) {
        CHECK(metrics::chamfer(preds[static_cast<std::size_t>(j)],
                               still.frames[static_cast<std::size_t>(3 + j)]) == 0.0);
    }

    const auto moving = translation_scene(48, 6, 6, 0.4)[0];
    std::vector<PointCloud> m_in(moving.frames.begin(), moving.frames.begin() + 3);
    const auto m_pred = train::baseline_copy_last(m_in, 3);
    double last_cd = -1.0;
    for (int j = 0; j < 3; ++j) {
        const double cd = metrics::chamfer(m_pred[static_cast<std::size_t>(j)],
                                           moving.frames[static_cast<std::size_t>(3 + j)]);
        CHECK(cd > last_cd);
        last_cd = cd;
    }
}

TEST_CASE("baseline constant-flow is exact on pure translation without resampling") {
    const auto sample = separated_translation_sample(48, 6, 7, {0.22, -0.1, 0.05});
    std::vector<PointCloud> inputs(sample.frames.begin(), sample.frames.begin() + 3);
    const auto preds = train::baseline_constant_flow(inputs, 3);
    for (int j = 0; j < 3; ++j) {
        CHECK(metrics::chamfer(preds[static_cast<std::size_t>(j)],
                               sample.frames[static_cast<std::size_t>(3 + j)]) <= 1e-9);
    }

    // static scene: zero flow
    synth::SceneConfig cfg;
    cfg.n_points = 32;
    cfg.n_objects = 0;
    cfg.frame_count = 4;
    cfg.seed = 8;
    const auto still = synth::make_sequence(cfg);
    std::vector<PointCloud> s_in(still.frames.begin(), still.frames.begin() + 2);
    const auto s_pred = train::baseline_constant_flow(s_in, 2);
    CHECK((s_pred[0].array() == still.frames[1].array()).all());
}

TEST_CASE("baseline constant-flow degrades on rotating objects") {
    synth::SceneConfig cfg;
    cfg.n_points = 64;
    cfg.n_objects = 1;
    cfg.background_fraction = 0.0;
    cfg.frame_count = 7;
    cfg.min_speed = cfg.max_speed = 0.0;
    cfg.min_spin = cfg.max_spin = 0.3;
    cfg.seed = 9;
    const auto sample = synth::make_sequence(cfg);
    std::vector<PointCloud> inputs(sample.frames.begin(), sample.frames.begin() + 3);
    const auto preds = train::baseline_constant_flow(inputs, 4);
    const double cd_first = metrics::chamfer(preds[0], sample.frames[3]);
    const double cd_last = metrics::chamfer(preds[3], sample.frames[6]);
    CHECK(cd_first > 0.0);
    CHECK(cd_last > cd_first);
}

TEST_CASE("lr = 0 leaves parameters and losses constant") {
    MoNet model(ModelConfig::toy({8, 4}, {4, 4}, 3));
    model.init_params(11);
    const auto data = translation_scene(16, 5, 12, 0.2);

    train::TrainConfig tc;
    tc.adam.lr = 0.0;
    tc.iterations = 4;
    tc.t_in = 3;
    tc.t_pred = 2;
    const auto result = train::train(model, tc, data);
    REQUIRE(result.losses.size() == 4);
    for (double l : result.losses) {
        CHECK(l == result.losses[0]);
    }
}

TEST_CASE("training twice with the same seed gives identical loss curves") {
    const auto data = translation_scene(16, 5, 13, 0.2);
    train::TrainConfig tc;
    tc.iterations = 6;
    tc.t_in = 3;
    tc.t_pred = 2;

    std::vector<double> first, second;
    for (auto* sink : {&first, &second}) {
        MoNet model(ModelConfig::toy({8, 4}, {4, 4}, 3));
        model.init_params(14);
        const auto result = train::train(model, tc, data);
        *sink = result.losses;
    }
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i] == second[i]);
    }
}

TEST_CASE("overfitting one static scene drives the loss down") {
    // static scene is learnable by predicting zero flow
    synth::SceneConfig cfg;
    cfg.n_points = 24;
    cfg.n_objects = 0;
    cfg.frame_count = 4;
    cfg.seed = 15;
    const std::vector<synth::SequenceSample> data{synth::make_sequence(cfg)};

    MoNet model(ModelConfig::toy({12, 6}, {4, 4}, 3));
    model.init_params(16);

    train::TrainConfig tc;
    tc.iterations = 1200;
    tc.t_in = 2;
    tc.t_pred = 2;
    tc.adam.lr = 2e-3;
    const auto result = train::train(model, tc, data);
    REQUIRE(!result.diverged);
    REQUIRE(result.losses.size() == 1200);

    const double initial = result.losses.front();
    const double final_loss = result.losses.back();
    CHECK(final_loss < 1e-3 * initial);

    // smoothed with window 10, the first 100 iterations never move up by
    // more than the noise floor around the converged loss
    const double floor_slack = 1e-3 * initial;
    for (int i = 0; i + 10 < 100; ++i) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < 10; ++j) {
            a += result.losses[static_cast<std::size_t>(i + j)] / 10.0;
            b += result.losses[static_cast<std::size_t>(i + j + 1)] / 10.0;
        }
        CHECK(b <= a + floor_slack);
    }
}

TEST_CASE("evaluate reports per-frame metrics for every method") {
    const std::vector<synth::SequenceSample> data{
        separated_translation_sample(32, 6, 17, {0.25, 0.1, -0.08})};
    std::vector<train::EvalMethod> methods{
        {"copy_last", [](const std::vector<PointCloud>& f, int t) {
             return train::baseline_copy_last(f, t);
         }},
        {"constant_flow", [](const std::vector<PointCloud>& f, int t) {
             return train::baseline_constant_flow(f, t);
         }},
    };
    const auto report = train::evaluate(methods, data, 3, 3, 16, 1);
    REQUIRE(report.rows.size() == 6);
    for (int j = 0; j < 3; ++j) {
        CHECK(report.rows[static_cast<std::size_t>(j)].method == "copy_last");
        CHECK(report.rows[static_cast<std::size_t>(j)].frame == j + 1);
        CHECK(std::isfinite(report.rows[static_cast<std::size_t>(j)].cd));
        CHECK(std::isfinite(report.rows[static_cast<std::size_t>(j)].emd));
    }
    // exact extrapolation scores zero on both metrics
    for (int j = 3; j < 6; ++j) {
        CHECK(report.rows[static_cast<std::size_t>(j)].method == "constant_flow");
        CHECK(report.rows[static_cast<std::size_t>(j)].cd <= 1e-9);
        CHECK(report.rows[static_cast<std::size_t>(j)].emd <= 1e-9);
    }
}

TEST_CASE("divergence aborts training before applying a bad update") {
    MoNet model(ModelConfig::toy({8, 4}, {4, 4}, 3));
    model.init_params(18);
    // a blown-up decoder weight drives the predicted coordinates non-finite
    model.params().value("dec.head.1.w").setConstant(1e308);
    const Mat poisoned = model.params().value("dec.head.1.w");
    const auto data = translation_scene(16, 5, 19, 0.2);

    train::TrainConfig tc;
    tc.iterations = 3;
    tc.t_in = 3;
    tc.t_pred = 2;
    const auto result = train::train(model, tc, data);
    CHECK(result.diverged);
    CHECK(result.iterations_run == 0);
    // no Adam step ran, so every parameter kept its pre-iteration value
    CHECK((model.params().value("dec.head.1.w").array() == poisoned.array()).all());
}
