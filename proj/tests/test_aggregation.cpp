#include "latim/aggregation.hpp"
#include "latim/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace latim;
using dmat = matrix<double>;

namespace {

contribution_tensor<double> tensor_from(const oracle::grid3& g) {
    contribution_tensor<double> t;
    const auto n = static_cast<index_t>(g.size());
    const auto d = n ? static_cast<index_t>(g[0][0].size()) : 0;
    t.t = tensor3<double>(n, n, d);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < n; ++j)
            for (index_t q = 0; q < d; ++q) t.t(i, j, q) = g[i][j][q];
    return t;
}

oracle::grid3 random_causal(oracle::fixture_rng& g, index_t n, index_t d) {
    auto out = oracle::make_grid(n, n, d);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j <= i; ++j)
            for (index_t q = 0; q < d; ++q) out[i][j][q] = g.normal();
    return out;
}

dmat random_matrix(oracle::fixture_rng& g, index_t r, index_t c) {
    dmat m(r, c);
    for (index_t i = 0; i < r; ++i)
        for (index_t j = 0; j < c; ++j) m(i, j) = g.normal();
    return m;
}

double max_abs(const dmat& a, const dmat& b) { return (a - b).cwiseAbs().maxCoeff(); }

// P^(l) and the running products written out with explicit loops.
struct stream_oracle {
    std::vector<dmat> p, r;
};

stream_oracle residual_oracle(const std::vector<oracle::grid3>& ts, const std::vector<dmat>& xs) {
    stream_oracle s;
    const auto n = xs.front().rows();
    s.r.push_back(dmat::Identity(n, n));
    for (std::size_t l = 0; l < ts.size(); ++l) {
        auto comps = ts[l];
        dmat y = dmat::Zero(n, xs[l].cols());
        for (index_t i = 0; i < n; ++i) {
            for (index_t q = 0; q < y.cols(); ++q) comps[i][i][q] += xs[l](i, q);
            for (index_t j = 0; j <= i; ++j)
                for (index_t q = 0; q < y.cols(); ++q) y(i, q) += comps[i][j][q];
        }
        dmat p = oracle::alti(comps, y);
        for (index_t i = 0; i < n; ++i)
            if (p.row(i).sum() == 0) p(i, i) = 1;
        dmat r = dmat::Zero(n, n);
        for (index_t i = 0; i < n; ++i)
            for (index_t j = 0; j < n; ++j)
                for (index_t k = 0; k < n; ++k) r(i, j) += p(i, k) * s.r.back()(k, j);
        s.p.push_back(p);
        s.r.push_back(r);
    }
    return s;
}

dmat alti_logit_oracle(const std::vector<oracle::grid3>& ts, const stream_oracle& s, const dmat& u,
                       const std::vector<int>& targets) {
    const auto n = static_cast<index_t>(targets.size());
    dmat c = dmat::Zero(n, n);
    for (std::size_t l = 0; l < ts.size(); ++l)
        for (index_t i = 0; i < n; ++i)
            for (index_t j = 0; j < n; ++j)
                for (index_t k = 0; k <= i; ++k) {
                    double delta = 0;
                    for (index_t q = 0; q < u.cols(); ++q) delta += ts[l][i][k][q] * u(targets[i], q);
                    c(i, j) += delta * s.r[l](k, j);
                }
    return c;
}

} // namespace

TEST_CASE("lp aggregation") {
    auto g = oracle::make_grid(2, 2, 2);
    g[1][0] = {3, 4};
    g[1][1] = {-1, 0.5};
    const auto t = tensor_from(g);
    const auto l2 = aggregate_lp(t, lp_order::l2);
    CHECK(l2.c(1, 0) == doctest::Approx(5.0));
    CHECK(l2.c(0, 0) == 0.0);
    CHECK(l2.c(0, 1) == 0.0);
    CHECK(aggregate_lp(t, lp_order::l1).c(1, 0) == doctest::Approx(7.0));
    CHECK(aggregate_lp(t, lp_order::linf).c(1, 1) == doctest::Approx(1.0));

    oracle::fixture_rng rng(1);
    const auto r = random_causal(rng, 6, 5);
    const auto a = aggregate_lp(tensor_from(r), lp_order::l1);
    auto scaled = r;
    for (auto& row : scaled)
        for (auto& v : row)
            for (auto& x : v) x *= 2.5;
    const auto b = aggregate_lp(tensor_from(scaled), lp_order::l2);
    const auto b0 = aggregate_lp(tensor_from(r), lp_order::l2);
    for (index_t i = 0; i < 6; ++i) {
        for (index_t j = 0; j <= i; ++j) {
            double ref = 0;
            for (double x : r[i][j]) ref += std::abs(x);
            CHECK(a.c(i, j) == doctest::Approx(ref).epsilon(1e-14));
            CHECK(b.c(i, j) == doctest::Approx(2.5 * b0.c(i, j)).epsilon(1e-14));
        }
        index_t am = 0, bm = 0;
        b.c.row(i).maxCoeff(&am);
        b0.c.row(i).maxCoeff(&bm);
        CHECK(am == bm);
    }
}

TEST_CASE("alti") {
    SUBCASE("sole contributor") {
        oracle::fixture_rng rng(2);
        auto g = oracle::make_grid(4, 4, 3);
        for (index_t i = 0; i < 4; ++i)
            for (auto& x : g[i][i]) x = rng.normal();
        const auto a = aggregate_alti(tensor_from(g));
        CHECK(max_abs(a.c, dmat::Identity(4, 4)) < 1e-15);
    }
    SUBCASE("two equal contributors") {
        auto g = oracle::make_grid(2, 2, 1);
        g[1][0] = {0.5};
        g[1][1] = {0.5};
        g[0][0] = {1};
        const auto a = aggregate_alti(tensor_from(g));
        CHECK(a.c(1, 0) == doctest::Approx(0.5));
        CHECK(a.c(1, 1) == doctest::Approx(0.5));
    }
    SUBCASE("large opposing contribution is clipped") {
        auto g = oracle::make_grid(2, 2, 2);
        g[0][0] = {1, 0};
        g[1][0] = {3, -3};
        g[1][1] = {-1, 0.5};
        const auto a = aggregate_alti(tensor_from(g));
        // ||y - t_11||_1 = 6 exceeds ||y||_1 = 4.5.
        CHECK(a.c(1, 1) == 0.0);
        CHECK(a.c(1, 0) == doctest::Approx(1.0));
    }
    SUBCASE("degenerate rows are zero and flagged") {
        auto g = oracle::make_grid(3, 3, 2);
        g[0][0] = {1, 1};
        g[2][1] = {1, 0};
        g[2][2] = {-1, 0};
        const auto a = aggregate_alti(tensor_from(g));
        CHECK(a.degenerate_rows == std::vector<bool>{false, true, true});
        CHECK(a.c.row(1).isZero());
        CHECK(a.c.row(2).isZero());
    }
    SUBCASE("random invariants and oracle") {
        oracle::fixture_rng rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            const auto g = random_causal(rng, 8, 4);
            const auto a = aggregate_alti(tensor_from(g));
            dmat y = dmat::Zero(8, 4);
            for (index_t i = 0; i < 8; ++i)
                for (index_t j = 0; j <= i; ++j)
                    for (index_t q = 0; q < 4; ++q) y(i, q) += g[i][j][q];
            CHECK(max_abs(a.c, oracle::alti(g, y)) < 1e-13);
            CHECK((a.c.array() >= 0).all());
            CHECK((a.c.array() <= 1).all());
            for (index_t i = 0; i < 8; ++i)
                if (!a.degenerate_rows[i]) CHECK(a.c.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));

            auto scaled = g;
            for (auto& row : scaled)
                for (auto& v : row)
                    for (auto& x : v) x *= 3.0;
            CHECK(max_abs(aggregate_alti(tensor_from(scaled)).c, a.c) < 1e-13);
        }
    }
}

TEST_CASE("residual stream") {
    oracle::fixture_rng rng(4);
    const index_t n = 6, d = 3;
    SUBCASE("zero contributions leave the identity") {
        const auto t = tensor_from(oracle::make_grid(n, n, d));
        const std::vector<contribution_tensor<double>> ts{t};
        const std::vector<dmat> xs{random_matrix(rng, n, d)};
        const auto rs = build_residual_stream<double>(ts, xs);
        CHECK(rs.p[0] == dmat::Identity(n, n));
        CHECK(rs.r[1] == dmat::Identity(n, n));
    }
    SUBCASE("one layer product equals P and two layer rows sum to one") {
        const std::vector<oracle::grid3> gs{random_causal(rng, n, d), random_causal(rng, n, d)};
        const std::vector<contribution_tensor<double>> ts{tensor_from(gs[0]), tensor_from(gs[1])};
        const std::vector<dmat> xs{random_matrix(rng, n, d), random_matrix(rng, n, d)};
        const auto rs = build_residual_stream<double>(ts, xs);
        CHECK(rs.r.size() == 3);
        CHECK(max_abs(rs.r[1], rs.p[0]) == 0.0);
        const auto ref = residual_oracle(gs, xs);
        for (int l = 0; l < 2; ++l) CHECK(max_abs(rs.p[l], ref.p[l]) < 1e-13);
        CHECK(max_abs(rs.r[2], ref.r[2]) < 1e-13);
        for (index_t i = 0; i < n; ++i) CHECK(rs.r[2].row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("alti-logit") {
    oracle::fixture_rng rng(5);
    const index_t n = 7, d = 4, v = 9;
    const dmat u = random_matrix(rng, v, d);
    std::vector<int> targets(n);
    for (auto& t : targets) t = rng.below(static_cast<int>(v));

    SUBCASE("one layer collapses to the logit deltas") {
        const std::vector<oracle::grid3> gs{random_causal(rng, n, d)};
        const std::vector<contribution_tensor<double>> ts{tensor_from(gs[0])};
        const std::vector<dmat> xs{random_matrix(rng, n, d)};
        const auto rs = build_residual_stream<double>(ts, xs);
        const auto c = aggregate_alti_logit<double>(ts, rs, u, targets);
        CHECK(max_abs(c.c, logit_deltas(ts[0], u, targets)) < 1e-14);
        CHECK(c.layer == aggregated_layer);
    }
    SUBCASE("two layers match the entry-wise oracle and scale with U") {
        const std::vector<oracle::grid3> gs{random_causal(rng, n, d), random_causal(rng, n, d)};
        const std::vector<contribution_tensor<double>> ts{tensor_from(gs[0]), tensor_from(gs[1])};
        const std::vector<dmat> xs{random_matrix(rng, n, d), random_matrix(rng, n, d)};
        const auto rs = build_residual_stream<double>(ts, xs);
        const auto c = aggregate_alti_logit<double>(ts, rs, u, targets);
        const auto ref = alti_logit_oracle(gs, residual_oracle(gs, xs), u, targets);
        CHECK(max_abs(c.c, ref) < 1e-10);
        const dmat u2 = 2.0 * u;
        CHECK(max_abs(aggregate_alti_logit<double>(ts, rs, u2, targets).c, 2.0 * c.c) < 1e-12);

        dmat u0 = u;
        u0.row(targets[3]).setZero();
        const auto z = aggregate_alti_logit<double>(ts, rs, u0, targets);
        CHECK(z.c.row(3).isZero());
    }
    SUBCASE("identity mixing reduces to the sum of deltas") {
        const std::vector<oracle::grid3> gs{random_causal(rng, n, d), random_causal(rng, n, d)};
        const std::vector<contribution_tensor<double>> ts{tensor_from(gs[0]), tensor_from(gs[1])};
        residual_stream rs;
        rs.r.assign(3, dmat::Identity(n, n));
        const auto c = aggregate_alti_logit<double>(ts, rs, u, targets);
        CHECK(max_abs(c.c, logit_deltas(ts[0], u, targets) + logit_deltas(ts[1], u, targets)) < 1e-13);
    }
    SUBCASE("missing output embedding") {
        const std::vector<contribution_tensor<double>> ts{tensor_from(random_causal(rng, n, d))};
        residual_stream rs;
        rs.r.assign(2, dmat::Identity(n, n));
        CHECK_THROWS_AS(aggregate_alti_logit<double>(ts, rs, dmat(), targets), data_error);
    }
}

TEST_CASE("method names") {
    for (const char* s : {"lp:1", "lp:2", "lp:inf", "alti", "alti-logit", "mamba-attention"})
        CHECK(to_string(parse_method(s)) == s);
    CHECK_THROWS_AS(parse_method("gradient"), config_error);
}
