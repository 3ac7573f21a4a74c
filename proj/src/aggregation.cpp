#include "latim/aggregation.hpp"
#include "latim/errors.hpp"

#include <string>

namespace latim {

namespace {

template <class T>
void require_square(const contribution_tensor<T>& t) {
    if (t.t.dim0() != t.t.dim1()) throw data_error("contribution tensor is not N x N x D");
}

// ALTI row over explicit component vectors; returns true when the row is degenerate.
bool alti_row(const Eigen::Matrix<double, 1, Eigen::Dynamic>& y, const matrix<double>& components,
              Eigen::Ref<Eigen::Matrix<double, 1, Eigen::Dynamic>> out) {
    const double y_norm = y.lpNorm<1>();
    double total = 0;
    for (index_t j = 0; j < components.rows(); ++j) {
        const double raw = std::max(0.0, y_norm - (y - components.row(j)).lpNorm<1>());
        out[j] = raw;
        total += raw;
    }
    if (total > 0) {
        out /= total;
        return false;
    }
    out.setZero();
    return true;
}

} // namespace

template <class T>
attribution_matrix aggregate_lp(const contribution_tensor<T>& t, lp_order order) {
    require_square(t);
    attribution_matrix a;
    a.tag = method{method_kind::lp, order};
    a.layer = t.layer;
    const index_t n = t.steps();
    a.c = matrix<double>::Zero(n, n);
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j <= i; ++j) {
            const auto v = t.t.fiber(i, j).template cast<double>();
            switch (order) {
            case lp_order::l1: a.c(i, j) = v.template lpNorm<1>(); break;
            case lp_order::l2: a.c(i, j) = v.norm(); break;
            case lp_order::linf: a.c(i, j) = v.size() ? v.cwiseAbs().maxCoeff() : 0.0; break;
            }
        }
    }
    return a;
}

template <class T>
attribution_matrix aggregate_alti(const contribution_tensor<T>& t, const matrix<T>& y) {
    require_square(t);
    const index_t n = t.steps(), d = t.t.dim2();
    if (y.rows() != n || y.cols() != d) throw data_error("aggregate_alti: output shape mismatch");
    attribution_matrix a;
    a.tag = method{method_kind::alti, lp_order::l2};
    a.layer = t.layer;
    a.c = matrix<double>::Zero(n, n);
    a.degenerate_rows.assign(static_cast<std::size_t>(n), false);
    for (index_t i = 0; i < n; ++i) {
        matrix<double> comps(i + 1, d);
        for (index_t j = 0; j <= i; ++j) comps.row(j) = t.t.fiber(i, j).template cast<double>();
        const Eigen::Matrix<double, 1, Eigen::Dynamic> yi = y.row(i).template cast<double>();
        a.degenerate_rows[static_cast<std::size_t>(i)] = alti_row(yi, comps, a.c.row(i).head(i + 1));
    }
    return a;
}

template <class T>
attribution_matrix aggregate_alti(const contribution_tensor<T>& t) {
    return aggregate_alti(t, t.reconstructed());
}

template <class T>
residual_stream build_residual_stream(std::span<const contribution_tensor<T>> contributions,
                                      std::span<const matrix<T>> layer_inputs) {
    if (contributions.size() != layer_inputs.size())
        throw data_error("build_residual_stream: need one layer input per contribution tensor");
    residual_stream rs;
    const index_t n = contributions.empty() ? (layer_inputs.empty() ? 0 : layer_inputs[0].rows())
                                            : contributions[0].steps();
    rs.r.push_back(matrix<double>::Identity(n, n));
    for (std::size_t l = 0; l < contributions.size(); ++l) {
        const auto& t = contributions[l];
        const auto& x = layer_inputs[l];
        require_square(t);
        if (t.steps() != n || x.rows() != n || x.cols() != t.t.dim2())
            throw data_error("build_residual_stream: layer " + std::to_string(l) + " shape mismatch");
        const index_t d = t.t.dim2();
        matrix<double> p = matrix<double>::Zero(n, n);
        for (index_t i = 0; i < n; ++i) {
            matrix<double> comps(i + 1, d);
            for (index_t j = 0; j <= i; ++j) comps.row(j) = t.t.fiber(i, j).template cast<double>();
            comps.row(i) += x.row(i).template cast<double>();
            const Eigen::Matrix<double, 1, Eigen::Dynamic> target = comps.colwise().sum();
            if (alti_row(target, comps, p.row(i).head(i + 1))) p(i, i) = 1.0;
        }
        rs.r.push_back(p * rs.r.back());
        rs.p.push_back(std::move(p));
    }
    return rs;
}

template <class T>
matrix<double> logit_deltas(const contribution_tensor<T>& t, const matrix<T>& u, std::span<const int> targets) {
    require_square(t);
    const index_t n = t.steps();
    if (u.size() == 0) throw data_error("alti-logit: missing output embedding");
    if (u.cols() != t.t.dim2()) throw data_error("alti-logit: output embedding width mismatch");
    if (static_cast<index_t>(targets.size()) != n) throw data_error("alti-logit: need one target id per position");
    matrix<double> delta = matrix<double>::Zero(n, n);
    for (index_t i = 0; i < n; ++i) {
        const int w = targets[static_cast<std::size_t>(i)];
        if (w < 0 || w >= u.rows()) throw data_error("alti-logit: target id " + std::to_string(w) + " out of range");
        const auto ui = u.row(w).template cast<double>();
        for (index_t j = 0; j <= i; ++j) delta(i, j) = t.t.fiber(i, j).template cast<double>().dot(ui);
    }
    return delta;
}

template <class T>
attribution_matrix aggregate_alti_logit(std::span<const contribution_tensor<T>> contributions,
                                        const residual_stream& residual, const matrix<T>& u,
                                        std::span<const int> targets) {
    if (residual.r.size() < contributions.size() + 1)
        throw data_error("aggregate_alti_logit: residual stream shorter than the layer stack");
    if (u.size() == 0) throw data_error("alti-logit: missing output embedding");
    const index_t n = static_cast<index_t>(targets.size());
    attribution_matrix a;
    a.tag = method{method_kind::alti_logit, lp_order::l2};
    a.layer = aggregated_layer;
    a.c = matrix<double>::Zero(n, n);
    for (std::size_t l = 0; l < contributions.size(); ++l)
        a.c += logit_deltas(contributions[l], u, targets) * residual.r[l];
    return a;
}

#define LATIM_INSTANTIATE(T)                                                                                     \
    template attribution_matrix aggregate_lp<T>(const contribution_tensor<T>&, lp_order);                        \
    template attribution_matrix aggregate_alti<T>(const contribution_tensor<T>&, const matrix<T>&);              \
    template attribution_matrix aggregate_alti<T>(const contribution_tensor<T>&);                                \
    template residual_stream build_residual_stream<T>(std::span<const contribution_tensor<T>>,                   \
                                                      std::span<const matrix<T>>);                               \
    template matrix<double> logit_deltas<T>(const contribution_tensor<T>&, const matrix<T>&, std::span<const int>); \
    template attribution_matrix aggregate_alti_logit<T>(std::span<const contribution_tensor<T>>,                 \
                                                        const residual_stream&, const matrix<T>&,                \
                                                        std::span<const int>);

LATIM_INSTANTIATE(float)
LATIM_INSTANTIATE(double)

} // namespace latim
