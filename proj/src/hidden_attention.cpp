#include "latim/hidden_attention.hpp"
#include "latim/errors.hpp"
#include "latim/parallel.hpp"

#include <cstdlib>
#include <string>

namespace latim {

index_t stream_threshold_from_env() {
    if (const char* env = std::getenv("LATIM_STREAM_THRESHOLD")) {
        try {
            const long long v = std::stoll(env);
            if (v >= 1) return static_cast<index_t>(v);
        } catch (const std::exception&) {
        }
    }
    return default_stream_threshold;
}

template <class T>
hidden_attention<T>::hidden_attention(ssm_params<T> params, index_t channels, int layer, index_t stream_threshold)
    : params_(std::move(params)), channels_(channels), layer_(layer) {
    steps_ = std::visit([](const auto& p) { return p.delta.rows(); }, params_);
    dense_ = steps_ <= stream_threshold;
    if (!dense_) return;
    m_ = tensor3<T>(steps_, steps_, channels_);
    parallel_for(static_cast<std::size_t>(steps_), [&](std::size_t k) {
        const auto i = static_cast<index_t>(k);
        matrix<T> r;
        compute_row(i, r);
        for (index_t j = 0; j <= i; ++j) m_.fiber(i, j) = r.row(j);
    });
}

template <class T>
void hidden_attention<T>::compute_row(index_t i, matrix<T>& out) const {
    out.setZero(i + 1, channels_);
    if (const auto* p1 = std::get_if<mamba1_params<T>>(&params_)) {
        const index_t r = p1->readout.cols();
        // cum(e, s) = prod_{k=j+1..i} decay(k, e, s), walking j downward.
        matrix<T> cum = matrix<T>::Ones(channels_, r);
        for (index_t j = i; j >= 0; --j) {
            for (index_t e = 0; e < channels_; ++e) {
                T acc = T(0);
                for (index_t s = 0; s < r; ++s) acc += cum(e, s) * p1->input_scale(j, e, s) * p1->readout(i, s);
                out(j, e) = acc;
                for (index_t s = 0; s < r; ++s) cum(e, s) *= p1->decay(j, e, s);
            }
        }
        return;
    }
    const auto& p2 = std::get<mamba2_params<T>>(params_);
    const index_t h = p2.decay.cols(), r = p2.input_scale.dim2(), head_dim = channels_ / h;
    vector<T> cum = vector<T>::Ones(h);
    for (index_t j = i; j >= 0; --j) {
        for (index_t hd = 0; hd < h; ++hd) {
            T dot = T(0);
            for (index_t s = 0; s < r; ++s) dot += p2.input_scale(j, hd, s) * p2.readout(i, hd, s);
            out.row(j).segment(hd * head_dim, head_dim).setConstant(cum[hd] * dot);
            cum[hd] *= p2.decay(j, hd);
        }
    }
}

template <class T>
void hidden_attention<T>::row(index_t i, matrix<T>& out) const {
    if (i < 0 || i >= steps_) throw contract_error("hidden_attention::row: index out of range");
    if (!dense_) {
        compute_row(i, out);
        return;
    }
    out.resize(i + 1, channels_);
    for (index_t j = 0; j <= i; ++j) out.row(j) = m_.fiber(i, j);
}

template <class T>
T hidden_attention<T>::at(index_t i, index_t j, index_t e) const {
    if (j > i) return T(0);
    if (dense_) return m_(i, j, e);
    matrix<T> r;
    compute_row(i, r);
    return r(j, e);
}

template <class T>
hidden_attention<T> build_hidden_attention(const ssm_params<T>& params, const model_config& config, int layer,
                                           index_t stream_threshold) {
    if (const auto* p2 = std::get_if<mamba2_params<T>>(&params)) {
        if (config.inner_dim % p2->decay.cols() != 0)
            throw data_error("build_hidden_attention: inner_dim not divisible by head count");
    } else if (std::get<mamba1_params<T>>(params).decay.dim1() != config.inner_dim) {
        throw data_error("build_hidden_attention: decay width differs from inner_dim");
    }
    return hidden_attention<T>(params, config.inner_dim, layer, stream_threshold);
}

template <class T>
matrix<T> apply_hidden_attention(const hidden_attention<T>& m, const matrix<T>& phi, const vector<T>& d_skip) {
    const index_t n = m.steps(), e = m.channels();
    if (phi.rows() != n || phi.cols() != e || d_skip.size() != e)
        throw data_error("apply_hidden_attention: shape mismatch");
    matrix<T> out(n, e);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
        const auto i = static_cast<index_t>(k);
        matrix<T> r;
        m.row(i, r);
        auto acc = (d_skip.transpose().array() * phi.row(i).array()).eval();
        for (index_t j = 0; j <= i; ++j) acc += r.row(j).array() * phi.row(j).array();
        out.row(i) = acc.matrix();
    });
    return out;
}

template <class T>
attribution_matrix mamba_attention_map(const hidden_attention<T>& m) {
    attribution_matrix a;
    a.tag = method{method_kind::mamba_attention, lp_order::l2};
    a.layer = m.layer();
    const index_t n = m.steps();
    a.c = matrix<double>::Zero(n, n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
        const auto i = static_cast<index_t>(k);
        matrix<T> r;
        m.row(i, r);
        for (index_t j = 0; j <= i; ++j) a.c(i, j) = r.row(j).template cast<double>().cwiseAbs().mean();
    });
    return a;
}

template class hidden_attention<float>;
template class hidden_attention<double>;
template hidden_attention<float> build_hidden_attention<float>(const ssm_params<float>&, const model_config&, int,
                                                               index_t);
template hidden_attention<double> build_hidden_attention<double>(const ssm_params<double>&, const model_config&, int,
                                                                 index_t);
template matrix<float> apply_hidden_attention<float>(const hidden_attention<float>&, const matrix<float>&,
                                                     const vector<float>&);
template matrix<double> apply_hidden_attention<double>(const hidden_attention<double>&, const matrix<double>&,
                                                       const vector<double>&);
template attribution_matrix mamba_attention_map<float>(const hidden_attention<float>&);
template attribution_matrix mamba_attention_map<double>(const hidden_attention<double>&);

} // namespace latim
