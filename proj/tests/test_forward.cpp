#include "latim/errors.hpp"
#include "latim/forward.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace latim;
using dmat = matrix<double>;
using dvec = vector<double>;

namespace {

mamba1_params<double> m1_params(index_t n, index_t e, index_t r, double decay, double b, double c) {
    mamba1_params<double> p;
    p.decay = tensor3<double>(n, e, r);
    p.input_scale = tensor3<double>(n, e, r);
    p.readout = dmat::Constant(n, r, c);
    p.delta = dmat::Ones(n, e);
    for (auto& v : p.decay.flat()) v = decay;
    for (auto& v : p.input_scale.flat()) v = b;
    return p;
}

mamba2_params<double> m2_params(index_t n, index_t h, index_t r, double decay, double b, double c) {
    mamba2_params<double> p;
    p.decay = dmat::Constant(n, h, decay);
    p.input_scale = tensor3<double>(n, h, r);
    p.readout = tensor3<double>(n, h, r);
    p.delta = dmat::Ones(n, h);
    for (auto& v : p.input_scale.flat()) v = b;
    for (auto& v : p.readout.flat()) v = c;
    return p;
}

double max_abs(const dmat& a, const dmat& b) { return (a - b).cwiseAbs().maxCoeff(); }

dmat random_matrix(oracle::fixture_rng& g, index_t r, index_t c) {
    dmat m(r, c);
    for (index_t i = 0; i < r; ++i)
        for (index_t j = 0; j < c; ++j) m(i, j) = g.normal();
    return m;
}

} // namespace

TEST_CASE("causal conv") {
    SUBCASE("unit kernel of width one is the identity") {
        const dmat x = (dmat(3, 2) << 1, 2, 3, 4, 5, 6).finished();
        CHECK(causal_conv<double>(x, dmat::Ones(1, 2), dvec::Zero(2)) == x);
    }
    SUBCASE("only the last tap sees a single token") {
        const dmat x = dmat::Constant(1, 1, 5.0);
        const dmat k = (dmat(3, 1) << 1, 2, 3).finished();
        CHECK(causal_conv<double>(x, k, dvec::Zero(1))(0, 0) == doctest::Approx(15.0));
    }
    SUBCASE("bias shifts every output by a constant") {
        oracle::fixture_rng g(1);
        const dmat x = random_matrix(g, 6, 3), k = random_matrix(g, 4, 3);
        const dvec bias = dvec::Constant(3, 0.75);
        const dmat diff = causal_conv<double>(x, k, bias) - causal_conv<double>(x, k, dvec::Zero(3));
        CHECK((diff.array() - 0.75).abs().maxCoeff() < 1e-14);
    }
    SUBCASE("matches direct summation") {
        oracle::fixture_rng g(2);
        const dmat x = random_matrix(g, 7, 2), k = random_matrix(g, 3, 2);
        const dmat out = causal_conv<double>(x, k, dvec::Zero(2));
        for (index_t j = 0; j < 7; ++j)
            for (index_t e = 0; e < 2; ++e) {
                double ref = 0;
                for (index_t s = 0; s <= j; ++s)
                    if (j - s < 3) ref += k(2 - (j - s), e) * x(s, e);
                CHECK(out(j, e) == doctest::Approx(ref).epsilon(1e-12));
            }
    }
}

TEST_CASE("selective scans") {
    const dmat phi = (dmat(2, 1) << 1, 2).finished();
    SUBCASE("mamba1 hand unrolled") {
        const auto out = mamba1_scan<double>(phi, m1_params(2, 1, 1, 0.5, 1, 1), dvec::Zero(1));
        CHECK(out(0, 0) == doctest::Approx(1.0));
        CHECK(out(1, 0) == doctest::Approx(2.5));
    }
    SUBCASE("mamba2 with one head matches the same numbers") {
        const auto out = mamba2_scan<double>(phi, m2_params(2, 1, 1, 0.5, 1, 1), dvec::Zero(1));
        CHECK(out(0, 0) == doctest::Approx(1.0));
        CHECK(out(1, 0) == doctest::Approx(2.5));
    }
    SUBCASE("no input injection gives zero") {
        oracle::fixture_rng g(3);
        const dmat x = random_matrix(g, 5, 3);
        CHECK(mamba1_scan<double>(x, m1_params(5, 3, 2, 0.9, 0, 1), dvec::Zero(3)).isZero());
    }
    SUBCASE("skip only path") {
        oracle::fixture_rng g(4);
        const dmat x = random_matrix(g, 5, 3);
        const dvec d = (dvec(3) << 0.5, -1, 2).finished();
        const dmat out = mamba2_scan<double>(x, m2_params(5, 3, 2, 0.9, 0, 1), d);
        CHECK(max_abs(out, x * d.asDiagonal()) < 1e-15);
    }
    SUBCASE("zero decay is memoryless") {
        const dmat x = (dmat(3, 1) << 1, -2, 4).finished();
        const dmat out = mamba2_scan<double>(x, m2_params(3, 1, 2, 0.0, 1.5, 2), dvec::Zero(1));
        for (index_t i = 0; i < 3; ++i) CHECK(out(i, 0) == doctest::Approx(x(i, 0) * 1.5 * 2 * 2));
    }
    SUBCASE("unit decay accumulates linearly") {
        const dmat x = dmat::Constant(6, 1, 2.0);
        const dmat out = mamba2_scan<double>(x, m2_params(6, 1, 1, 1.0, 0.5, 3), dvec::Zero(1));
        for (index_t i = 0; i < 6; ++i) CHECK(out(i, 0) == doctest::Approx(3.0 * (i + 1)));
    }
    SUBCASE("non-finite parameters name the step and channel") {
        auto p = m1_params(3, 2, 1, 0.5, 1, 1);
        p.decay(1, 1, 0) = std::nan("");
        try {
            mamba1_scan<double>(dmat::Ones(3, 2), p, dvec::Zero(2));
            FAIL("expected numeric_error");
        } catch (const numeric_error& e) {
            const std::string what = e.what();
            CHECK(what.find("step 1") != std::string::npos);
            CHECK(what.find("channel 1") != std::string::npos);
        }
    }
}

TEST_CASE("mamba2 with one channel per head reproduces mamba1") {
    oracle::fixture_rng g(5);
    const index_t n = 9, e = 4, r = 3;
    mamba2_params<double> p2;
    p2.decay.resize(n, e);
    p2.input_scale = tensor3<double>(n, e, r);
    p2.readout = tensor3<double>(n, e, r);
    mamba1_params<double> p1;
    p1.decay = tensor3<double>(n, e, r);
    p1.input_scale = tensor3<double>(n, e, r);
    p1.readout.resize(n, r);
    for (index_t i = 0; i < n; ++i) {
        for (index_t s = 0; s < r; ++s) p1.readout(i, s) = g.normal();
        for (index_t h = 0; h < e; ++h) {
            p2.decay(i, h) = g.uniform();
            for (index_t s = 0; s < r; ++s) {
                const double b = g.normal();
                p2.input_scale(i, h, s) = p1.input_scale(i, h, s) = b;
                p2.readout(i, h, s) = p1.readout(i, s);
                p1.decay(i, h, s) = p2.decay(i, h);
            }
        }
    }
    const dmat x = random_matrix(g, n, e);
    const dvec d = dvec::LinSpaced(e, -1, 1);
    CHECK(max_abs(mamba1_scan<double>(x, p1, d), mamba2_scan<double>(x, p2, d)) < 1e-13);
}

TEST_CASE("scan is linear in its input") {
    oracle::fixture_rng g(6);
    const auto c = model_config::with_defaults(variant::mamba1, 1, 8, 4, 4, 1, 16);
    const auto w = generate_random_model(c, 6);
    const dmat xn = random_matrix(g, 10, c.model_dim);
    const auto trace = block_forward<double>(xn, w.layers[0], c);
    const dmat a = random_matrix(g, 10, c.inner_dim), b = random_matrix(g, 10, c.inner_dim);
    const auto& d = w.layers[0].d_skip;
    const dmat lhs = ssm_scan<double>(2.0 * a - 3.0 * b, trace.ssm, d);
    const dmat rhs = 2.0 * ssm_scan<double>(a, trace.ssm, d) - 3.0 * ssm_scan<double>(b, trace.ssm, d);
    CHECK(max_abs(lhs, rhs) < 1e-10);
}

TEST_CASE("discretized decays lie in (0, 1]") {
    for (auto v : {variant::mamba1, variant::mamba2}) {
        const auto c = model_config::with_defaults(v, 2, 8, 4, 4, v == variant::mamba2 ? 2 : 1, 16);
        const auto w = generate_random_model(c, 9);
        const auto fwd = model_forward<double>(std::vector<int>{1, 5, 2, 9, 3}, w, c);
        for (const auto& t : fwd.traces) {
            std::visit(
                [](const auto& p) {
                    if constexpr (std::is_same_v<std::decay_t<decltype(p)>, mamba1_params<double>>) {
                        for (double x : p.decay.flat()) CHECK((x > 0 && x <= 1));
                    } else {
                        CHECK((p.decay.array() > 0).all());
                        CHECK((p.decay.array() <= 1).all());
                    }
                    CHECK((p.delta.array() > 0).all());
                },
                t.ssm);
        }
    }
}

TEST_CASE("group norm with one channel per group is a sign") {
    const dmat u = (dmat(1, 3) << 2.0, -0.5, 0.0).finished();
    matrix<double> sd;
    const dmat out = group_norm<double>(u, 3, dvec::Ones(3), dvec::Zero(3), &sd);
    CHECK(out.isZero());
    CHECK(sd(0, 0) == doctest::Approx(std::sqrt(1e-5)));

    const dmat u2 = (dmat(1, 4) << 1, 3, -2, 6).finished();
    const dmat out2 = group_norm<double>(u2, 2, dvec::Ones(4), dvec::Zero(4));
    CHECK(out2(0, 0) == doctest::Approx(-1.0 / std::sqrt(1 + 1e-5)).epsilon(1e-12));
    CHECK(out2(0, 3) == doctest::Approx(4.0 / std::sqrt(16 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("zero gate annihilates the block") {
    for (auto v : {variant::mamba1, variant::mamba2}) {
        auto c = model_config::with_defaults(v, 1, 8, 4, 4, v == variant::mamba2 ? 2 : 1, 16);
        auto w = generate_random_model(c, 2);
        w.layers[0].in_z.setZero();
        if (v == variant::mamba2) w.layers[0].gn_beta.setZero();
        oracle::fixture_rng g(7);
        const auto t = block_forward<double>(random_matrix(g, 5, 8), w.layers[0], c);
        CHECK(t.y_block.cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("scalar block by hand") {
    auto c = model_config::with_defaults(variant::mamba1, 1, 1, 1, 1, 1, 2);
    c.inner_dim = 1;
    c.dt_rank = 1;
    auto w = zero_model<double>(c);
    auto& l = w.layers[0];
    l.norm.setOnes();
    l.in_x(0, 0) = 0.5;
    l.in_z(0, 0) = 2.0;
    l.conv_weight(0, 0) = 1.5;
    l.conv_bias[0] = 0.1;
    l.dt_down(0, 0) = 1;
    l.dt_up(0, 0) = 1;
    l.dt_bias[0] = 0.2;
    l.x_proj_b(0, 0) = 0.7;
    l.x_proj_c(0, 0) = -0.3;
    l.a_log(0, 0) = 0;
    l.d_skip[0] = 0.4;
    l.out_proj(0, 0) = 1.25;
    const dmat xn = dmat::Constant(1, 1, 0.8);
    const auto t = block_forward<double>(xn, l, c);
    const double psi = 1.5 * 0.5 * 0.8 + 0.1;
    const double phi = psi / (1 + std::exp(-psi));
    const double dt = std::log1p(std::exp(phi + 0.2));
    const double ups = dt * (0.7 * phi) * phi * (-0.3 * phi) + 0.4 * phi;
    const double gate = 1.6 / (1 + std::exp(-1.6));
    CHECK(t.y_block(0, 0) == doctest::Approx(ups * gate * 1.25).epsilon(1e-13));
}

TEST_CASE("model forward") {
    SUBCASE("empty stack is the normed embedding read out") {
        auto c = model_config::with_defaults(variant::mamba1, 0, 8, 4, 4, 1, 16);
        const auto w = generate_random_model(c, 1);
        const std::vector<int> tokens{3, 1, 4};
        const auto fwd = model_forward<double>(tokens, w, c);
        const auto ref = oracle::forward(tokens, w, c);
        CHECK(max_abs(fwd.logits, ref.logits) < 1e-12);
        CHECK(fwd.traces.empty());
    }
    SUBCASE("matches the loop reference") {
        for (auto v : {variant::mamba1, variant::mamba2})
            for (auto s : {activation_strategy::silu, activation_strategy::relu, activation_strategy::identity}) {
                auto c = model_config::with_defaults(v, 3, 8, 4, 3, v == variant::mamba2 ? 4 : 1, 16);
                c.strategy = s;
                c.tied_head = v == variant::mamba1;
                const auto w = generate_random_model(c, 21);
                const std::vector<int> tokens{0, 7, 7, 2, 15, 3, 9};
                const auto fwd = model_forward<double>(tokens, w, c);
                const auto ref = oracle::forward(tokens, w, c);
                CHECK(max_abs(fwd.logits, ref.logits) < 1e-10);
                for (std::size_t l = 0; l < fwd.traces.size(); ++l)
                    CHECK(max_abs(fwd.traces[l].y_block, ref.blocks[l].y) < 1e-10);
            }
    }
    SUBCASE("causality on shared prefixes") {
        for (auto v : {variant::mamba1, variant::mamba2}) {
            const auto c = model_config::with_defaults(v, 2, 8, 4, 4, v == variant::mamba2 ? 2 : 1, 16);
            const auto w = generate_random_model(c, 4);
            const auto a = model_forward<double>(std::vector<int>{1, 2, 3, 4, 5, 6}, w, c);
            const auto b = model_forward<double>(std::vector<int>{1, 2, 3, 9, 0}, w, c);
            CHECK(max_abs(a.logits.topRows(3), b.logits.topRows(3)) == 0.0);
            CHECK(a.logits.allFinite());
        }
    }
    SUBCASE("out of range token") {
        const auto c = model_config::with_defaults(variant::mamba1, 1, 8, 4, 4, 1, 16);
        const auto w = generate_random_model(c, 4);
        CHECK_THROWS_AS(model_forward<double>(std::vector<int>{1, 16}, w, c), data_error);
        CHECK_THROWS_AS(model_forward<double>(std::vector<int>{-1}, w, c), data_error);
    }
    SUBCASE("f32 tracks f64") {
        const auto c = model_config::with_defaults(variant::mamba2, 2, 16, 4, 4, 4, 32);
        const auto w = generate_random_model(c, 4);
        const std::vector<int> tokens{5, 1, 3, 3, 30, 2};
        const auto a = model_forward<double>(tokens, w, c);
        const auto b = model_forward<float>(tokens, w.cast<float>(), c);
        CHECK(max_abs(a.logits, b.logits.cast<double>()) < 1e-3);
    }
}
