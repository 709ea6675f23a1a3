#pragma once

// Hand-rolled generators and small oracles shared by the test binaries.

#include "topoeeg/topoeeg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace testing_support {

using topoeeg::Matrix;
using topoeeg::PersistenceDiagram;
using topoeeg::PersistencePair;
using topoeeg::Rng;
using topoeeg::Vector;

inline std::vector<double> random_signal(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(lo, hi);
    return x;
}

/// Integer-valued signal, so plateaus and ties are common.
inline std::vector<double> random_int_signal(Rng& rng, std::size_t n, int levels) {
    std::vector<double> x(n);
    for (auto& v : x) v = static_cast<double>(rng.index(static_cast<std::size_t>(levels)));
    return x;
}

inline PersistenceDiagram random_diagram(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    PersistenceDiagram pd;
    for (std::size_t i = 0; i < n; ++i) {
        const double b = rng.uniform(lo, hi);
        pd.pairs.push_back({b, b + rng.uniform(0.0, hi - lo)});
    }
    return pd;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

inline Matrix random_normal(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

/// |a - b| / max(|a|, |b|, floor): relative error used for gradient checks.
inline double grad_rel_err(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline bool same_multiset(const PersistenceDiagram& a, const PersistenceDiagram& b) { return a.sorted() == b.sorted(); }

/// Every sequence over {0..levels-1} of length n, in lexicographic order.
template <class F>
void for_each_sequence(std::size_t n, int levels, F&& f) {
    std::vector<double> x(n, 0.0);
    while (true) {
        f(x);
        std::size_t i = n;
        while (i > 0) {
            --i;
            if (x[i] + 1 < levels) {
                x[i] += 1;
                std::fill(x.begin() + static_cast<std::ptrdiff_t>(i) + 1, x.end(), 0.0);
                break;
            }
            if (i == 0) return;
        }
        if (n == 0) return;
    }
}

/// Spearman rank correlation (no ties expected).
inline double spearman(const Vector& a, const Vector& b) {
    auto ranks = [](const Vector& v) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
        std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
        Vector r(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const Vector ra = ranks(a), rb = ranks(b);
    const Vector ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

/// Amplitude of the DFT bin nearest `freq` (single-bin projection).
inline double tone_amplitude(const std::vector<double>& x, double freq, double fs) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double w = 2.0 * M_PI * freq * static_cast<double>(t) / fs;
        re += x[t] * std::cos(w);
        im -= x[t] * std::sin(w);
    }
    return 2.0 * std::hypot(re, im) / static_cast<double>(x.size());
}

/// Max relative error between the analytic logistic gradient and central
/// differences at one random parameter point.
inline double logistic_gradient_error(Rng& rng, Eigen::Index n = 12, Eigen::Index d = 4, Eigen::Index k = 3,
                                      double lambda = 0.1) {
    const Matrix x = random_normal(rng, n, d);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
    Matrix w = random_normal(rng, d, k);
    topoeeg::RowVector b = random_normal(rng, 1, k);
    Matrix gw;
    topoeeg::RowVector gb;
    topoeeg::logistic_loss_grad(w, b, x, y, lambda, &gw, &gb);
    double worst = 0.0;
    auto probe = [&](double& param, double analytic) {
        const double h = 1e-5 * std::max(1.0, std::abs(param));
        const double keep = param;
        param = keep + h;
        const double up = topoeeg::logistic_loss_grad(w, b, x, y, lambda, nullptr, nullptr);
        param = keep - h;
        const double down = topoeeg::logistic_loss_grad(w, b, x, y, lambda, nullptr, nullptr);
        param = keep;
        worst = std::max(worst, grad_rel_err(analytic, (up - down) / (2.0 * h)));
    };
    for (Eigen::Index i = 0; i < w.size(); ++i) probe(w.data()[i], gw.data()[i]);
    for (Eigen::Index i = 0; i < b.size(); ++i) probe(b.data()[i], gb.data()[i]);
    return worst;
}

/// Same check for the MLP on a 3-sample batch, dropout 0, batch norm in train mode.
inline double mlp_gradient_error(Rng& rng, Eigen::Index d = 4, std::vector<int> hidden = {6, 5}, Eigen::Index k = 3) {
    const Eigen::Index n = 3;
    const Matrix x = random_normal(rng, n, d);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
    auto net = topoeeg::make_mlp(d, hidden, k, 0.0, rng);
    for (auto& l : net.layers)
        if (l.has_norm()) {
            l.gamma = random_matrix(rng, 1, l.gamma.size(), 0.5, 1.5);
            l.beta = random_matrix(rng, 1, l.beta.size(), -0.5, 0.5);
        }
    topoeeg::MlpGrad grad;
    topoeeg::mlp_loss_and_grad(net, x, y, &grad, nullptr);
    const auto analytic = grad.flat();
    const auto params = net.parameters();
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& p = *params[i];
        const double h = 1e-5 * std::max(1.0, std::abs(p));
        const double keep = p;
        p = keep + h;
        const double up = topoeeg::mlp_loss_and_grad(net, x, y, nullptr, nullptr);
        p = keep - h;
        const double down = topoeeg::mlp_loss_and_grad(net, x, y, nullptr, nullptr);
        p = keep;
        worst = std::max(worst, grad_rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
    return worst;
}

/// Left-justified, space-padded ASCII field.
inline std::string edf_field(const std::string& v, std::size_t width) {
    std::string out = v.substr(0, width);
    out.append(width - out.size(), ' ');
    return out;
}

/// EDF image assembled byte by byte, without the library writer.
/// One data record per file; every signal has `samples[i].size()` samples.
inline std::string hand_built_edf(const std::vector<std::string>& labels, const std::vector<std::vector<std::int16_t>>& samples,
                                  double phys_min = -100.0, double phys_max = 100.0, int dig_min = -32768,
                                  int dig_max = 32767, const std::string& duration = "1") {
    const std::size_t ns = labels.size();
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    std::string h;
    h += edf_field("0", 8);
    h += edf_field("P01 M 01-JAN-1970 Fixture", 80);
    h += edf_field("Startdate 01-JAN-2000 X X X", 80);
    h += edf_field("01.01.00", 8);
    h += edf_field("12.30.00", 8);
    h += edf_field(std::to_string(256 * (ns + 1)), 8);
    h += edf_field("", 44);
    h += edf_field("1", 8);
    h += edf_field(duration, 8);
    h += edf_field(std::to_string(ns), 4);
    for (const auto& l : labels) h += edf_field(l, 16);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field("AgAgCl electrode", 80);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field("uV", 8);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field(num(phys_min), 8);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field(num(phys_max), 8);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field(std::to_string(dig_min), 8);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field(std::to_string(dig_max), 8);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field("HP:0.1Hz", 80);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field(std::to_string(samples[i].size()), 8);
    for (std::size_t i = 0; i < ns; ++i) h += edf_field("", 32);
    for (const auto& sig : samples)
        for (auto v : sig) {
            const auto u = static_cast<std::uint16_t>(v);
            h.push_back(static_cast<char>(u & 0xff));
            h.push_back(static_cast<char>(u >> 8));
        }
    return h;
}

}  // namespace testing_support
