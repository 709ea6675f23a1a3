#pragma once

// Fully connected network: each hidden layer is
//   h_{l+1} = Dropout(ReLU(BatchNorm(W_l h_l + b_l)))
// followed by a linear output layer and softmax cross-entropy.
// Gradients are derived by hand; see mlp_loss_and_grad.

#include "topoeeg/core.hpp"

#include <string>
#include <vector>

namespace topoeeg {

struct MlpLayer {
    Matrix weight;     // in x out
    RowVector bias;    // out
    // Batch norm (hidden layers only; empty for the output layer).
    RowVector gamma;
    RowVector beta;
    RowVector running_mean;
    RowVector running_var;

    bool has_norm() const { return gamma.size() > 0; }
};

struct MlpModel {
    std::vector<MlpLayer> layers;
    double dropout = 0.3;
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;

    Eigen::Index input_dim() const { return layers.front().weight.rows(); }
    Eigen::Index output_dim() const { return layers.back().weight.cols(); }

    /// Pointers to every trainable scalar, in a fixed order (used by
    /// optimizers and finite-difference checks).
    std::vector<double*> parameters() {
        std::vector<double*> p;
        for (auto& l : layers) {
            for (Eigen::Index i = 0; i < l.weight.size(); ++i) p.push_back(l.weight.data() + i);
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) p.push_back(l.bias.data() + i);
            for (Eigen::Index i = 0; i < l.gamma.size(); ++i) p.push_back(l.gamma.data() + i);
            for (Eigen::Index i = 0; i < l.beta.size(); ++i) p.push_back(l.beta.data() + i);
        }
        return p;
    }
};

/// Gradients laid out like MlpModel::parameters().
struct MlpGrad {
    std::vector<Matrix> weight;
    std::vector<RowVector> bias, gamma, beta;

    std::vector<double> flat() const {
        std::vector<double> out;
        for (std::size_t l = 0; l < weight.size(); ++l) {
            out.insert(out.end(), weight[l].data(), weight[l].data() + weight[l].size());
            out.insert(out.end(), bias[l].data(), bias[l].data() + bias[l].size());
            out.insert(out.end(), gamma[l].data(), gamma[l].data() + gamma[l].size());
            out.insert(out.end(), beta[l].data(), beta[l].data() + beta[l].size());
        }
        return out;
    }
};

/// He-initialized network input -> hidden... -> classes.
inline MlpModel make_mlp(Eigen::Index inputs, const std::vector<int>& hidden, Eigen::Index classes, double dropout,
                         Rng& rng) {
    MlpModel m;
    m.dropout = dropout;
    Eigen::Index prev = inputs;
    auto dense = [&](Eigen::Index in, Eigen::Index out) {
        MlpLayer l;
        l.weight.resize(in, out);
        const double sd = std::sqrt(2.0 / static_cast<double>(in));
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = sd * rng.normal();
        l.bias = RowVector::Zero(out);
        return l;
    };
    for (int h : hidden) {
        auto l = dense(prev, h);
        l.gamma = RowVector::Ones(h);
        l.beta = RowVector::Zero(h);
        l.running_mean = RowVector::Zero(h);
        l.running_var = RowVector::Ones(h);
        m.layers.push_back(std::move(l));
        prev = h;
    }
    m.layers.push_back(dense(prev, classes));
    return m;
}

/// Inference: running batch-norm statistics, no dropout. Returns logits.
inline Matrix mlp_logits(const MlpModel& m, const Eigen::Ref<const Matrix>& x) {
    Matrix h = x;
    for (const auto& l : m.layers) {
        Matrix z = (h * l.weight).rowwise() + l.bias;
        if (l.has_norm()) {
            const RowVector inv = (l.running_var.array() + m.bn_eps).rsqrt();
            z = ((z.rowwise() - l.running_mean).array().rowwise() * (inv.array() * l.gamma.array())).rowwise() +
                l.beta.array();
            h = z.cwiseMax(0.0);
        } else {
            h = std::move(z);
        }
    }
    return h;
}

inline Matrix softmax_rows(const Matrix& logits) {
    Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
    p = p.array().exp();
    p.array().colwise() /= p.rowwise().sum().array();
    return p;
}

/// Training-mode forward and backward pass on one batch. `y` holds class
/// indices 0..K-1. Dropout masks are drawn from `rng` when it is non-null
/// and dropout > 0; pass nullptr for a deterministic pass (gradient checks).
/// Running statistics are updated only when `update_running` is set.
inline double mlp_loss_and_grad(MlpModel& m, const Eigen::Ref<const Matrix>& x, std::span<const int> y, MlpGrad* grad,
                                Rng* rng, bool update_running = false) {
    const std::size_t nl = m.layers.size();
    const auto n = x.rows();
    const double nd = static_cast<double>(n);

    struct Cache {
        Matrix input, xhat, pre_relu, mask;
        RowVector inv_std;
    };
    std::vector<Cache> cache(nl);
    Matrix h = x;
    for (std::size_t li = 0; li < nl; ++li) {
        auto& l = m.layers[li];
        auto& c = cache[li];
        c.input = h;
        Matrix z = (h * l.weight).rowwise() + l.bias;
        if (!l.has_norm()) {
            h = std::move(z);
            continue;
        }
        const RowVector mu = z.colwise().mean();
        const Matrix zc = z.rowwise() - mu;
        const RowVector var = zc.array().square().colwise().mean();
        c.inv_std = (var.array() + m.bn_eps).rsqrt();
        c.xhat = zc.array().rowwise() * c.inv_std.array();
        c.pre_relu = (c.xhat.array().rowwise() * l.gamma.array()).rowwise() + l.beta.array();
        h = c.pre_relu.cwiseMax(0.0);
        if (rng && m.dropout > 0.0) {
            c.mask.resize(h.rows(), h.cols());
            const double keep = 1.0 - m.dropout;
            for (Eigen::Index i = 0; i < c.mask.size(); ++i) c.mask.data()[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
            h = h.cwiseProduct(c.mask);
        }
        if (update_running) {
            const RowVector unbiased = n > 1 ? RowVector(var * (nd / (nd - 1.0))) : var;
            l.running_mean = m.bn_momentum * l.running_mean + (1.0 - m.bn_momentum) * mu;
            l.running_var = m.bn_momentum * l.running_var + (1.0 - m.bn_momentum) * unbiased;
        }
    }

    const Matrix p = softmax_rows(h);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss -= std::log(std::max(p(i, y[static_cast<std::size_t>(i)]), 1e-300));
    loss /= nd;
    if (!grad) return loss;

    grad->weight.assign(nl, {});
    grad->bias.assign(nl, {});
    grad->gamma.assign(nl, {});
    grad->beta.assign(nl, {});
    Matrix d = p;  // dL/dlogits
    for (Eigen::Index i = 0; i < n; ++i) d(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    d /= nd;
    for (std::size_t li = nl; li-- > 0;) {
        auto& l = m.layers[li];
        auto& c = cache[li];
        if (l.has_norm()) {
            // d is dL/d(layer output); undo dropout and ReLU.
            if (c.mask.size() > 0) d = d.cwiseProduct(c.mask);
            d = d.cwiseProduct((c.pre_relu.array() > 0.0).cast<double>().matrix());
            grad->gamma[li] = d.cwiseProduct(c.xhat).colwise().sum();
            grad->beta[li] = d.colwise().sum();
            const Matrix dxhat = d.array().rowwise() * l.gamma.array();
            const RowVector sum_dxhat = dxhat.colwise().sum();
            const RowVector sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat).colwise().sum();
            Matrix dz = (nd * dxhat).rowwise() - sum_dxhat;
            dz.array() -= c.xhat.array().rowwise() * sum_dxhat_xhat.array();
            dz = dz.array().rowwise() * (c.inv_std.array() / nd);
            d = std::move(dz);
        } else {
            grad->gamma[li] = RowVector();
            grad->beta[li] = RowVector();
        }
        grad->weight[li] = c.input.transpose() * d;
        grad->bias[li] = d.colwise().sum();
        if (li > 0) d = d * l.weight.transpose();
    }
    return loss;
}

}  // namespace topoeeg
