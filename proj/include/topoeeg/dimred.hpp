#pragma once

// Reduction of a channels x samples segment to a 1-D series. Each time
// sample is one observation (a vector over channels); the reducers embed
// those observations into `target_dim` dimensions, preserving time order.

#include "topoeeg/core.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace topoeeg {

enum class ReducerMethod { PCA, LDA, NMF, FA, TSVD, Isomap, LLE, MDS, TSNE };

inline constexpr std::array<ReducerMethod, 9> kAllReducers = {
    ReducerMethod::PCA,    ReducerMethod::LDA, ReducerMethod::NMF, ReducerMethod::FA,  ReducerMethod::TSVD,
    ReducerMethod::Isomap, ReducerMethod::LLE, ReducerMethod::MDS, ReducerMethod::TSNE};

inline std::string reducer_name(ReducerMethod m) {
    switch (m) {
        case ReducerMethod::PCA: return "pca";
        case ReducerMethod::LDA: return "lda";
        case ReducerMethod::NMF: return "nmf";
        case ReducerMethod::FA: return "fa";
        case ReducerMethod::TSVD: return "tsvd";
        case ReducerMethod::Isomap: return "isomap";
        case ReducerMethod::LLE: return "lle";
        case ReducerMethod::MDS: return "mds";
        case ReducerMethod::TSNE: return "tsne";
    }
    return "?";
}

inline ReducerMethod parse_reducer(std::string_view s) {
    auto v = to_lower(trim(s));
    v.erase(std::remove(v.begin(), v.end(), '-'), v.end());
    for (auto m : kAllReducers)
        if (reducer_name(m) == v) return m;
    throw ValidationError("unknown reducer '" + std::string(s) + "'");
}

inline bool is_manifold(ReducerMethod m) {
    return m == ReducerMethod::Isomap || m == ReducerMethod::LLE || m == ReducerMethod::MDS || m == ReducerMethod::TSNE;
}

struct ReducerSpec {
    ReducerMethod method = ReducerMethod::PCA;
    int target_dim = 1;
    int neighbors = 10;          // Isomap / LLE
    double perplexity = 30.0;    // t-SNE
    int max_iter = 300;          // NMF / FA / t-SNE optimization phase
    double tol = 1e-7;
    std::uint64_t seed = 0;
    Eigen::Index max_samples = 512;  // decimation cap for O(n^2) methods; 0 disables
    bool tsne_pca_init = true;
    int tsne_exaggeration_iters = 100;
    double tsne_exaggeration = 12.0;
};

/// Fitted state. Parametric methods keep projection parameters; manifold
/// methods keep the embedding of the observations they were fitted on.
struct FittedReducer {
    ReducerMethod method = ReducerMethod::PCA;
    RowVector mean;         // PCA / FA / LDA centering
    Matrix components;      // channels x k projection (PCA, TSVD, LDA, FA posterior map transposed)
    Matrix loadings;        // FA: channels x k
    Vector psi;             // FA noise variances
    Matrix nmf_h;           // NMF: k x channels
    Matrix embedding;       // observations x k, the fit-time output
    Vector explained_variance_ratio;
    std::vector<double> history;  // NMF objective / FA mean log-likelihood / t-SNE KL per iteration
    std::size_t history_phase_start = 0;  // t-SNE: first entry after early exaggeration
    bool low_separation = false;          // LDA
    bool graph_bridged = false;           // Isomap / LLE neighbor graph needed bridging

    bool parametric() const { return !is_manifold(method); }

    /// Projects new observations (rows) with the fitted parameters.
    Matrix transform(const Eigen::Ref<const Matrix>& x) const;
};

namespace dimred_detail {

/// Flips each column so its largest-magnitude entry is positive.
inline void fix_signs(Eigen::Ref<Matrix> m, Eigen::Ref<Matrix> also) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::Index arg = 0;
        m.col(j).cwiseAbs().maxCoeff(&arg);
        if (m(arg, j) < 0) {
            m.col(j) *= -1.0;
            if (also.size() > 0) also.col(j) *= -1.0;
        }
    }
}

inline void fix_signs(Eigen::Ref<Matrix> m) {
    Matrix none;
    fix_signs(m, none);
}

inline Matrix covariance(const Eigen::Ref<const Matrix>& centered) {
    return centered.transpose() * centered / static_cast<double>(centered.rows());
}

/// Eigenpairs of a symmetric matrix in descending eigenvalue order.
inline std::pair<Vector, Matrix> eig_desc(const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    if (es.info() != Eigen::Success) throw NumericError("symmetric eigendecomposition failed");
    return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

inline Matrix squared_distances(const Eigen::Ref<const Matrix>& x) {
    const Vector sq = x.rowwise().squaredNorm();
    Matrix d = (-2.0 * x * x.transpose()).colwise() + sq;
    d.rowwise() += sq.transpose();
    d = d.cwiseMax(0.0);
    d.diagonal().setZero();
    return d;
}

inline void check_target(const Eigen::Ref<const Matrix>& x, int k) {
    if (k < 1) throw ValidationError("target_dim must be >= 1");
    if (x.cols() >= 2 && k >= x.cols())
        throw ValidationError("target_dim " + std::to_string(k) + " must be < channel count " + std::to_string(x.cols()));
}

}  // namespace dimred_detail

// ---------------------------------------------------------------------------
// Linear methods

inline FittedReducer fit_pca(const Eigen::Ref<const Matrix>& x, int k = 1) {
    using namespace dimred_detail;
    check_target(x, k);
    FittedReducer r;
    r.method = ReducerMethod::PCA;
    r.mean = x.colwise().mean();
    const Matrix c = x.rowwise() - r.mean;
    auto [vals, vecs] = eig_desc(covariance(c));
    vals = vals.cwiseMax(0.0);
    r.components = vecs.leftCols(k);
    fix_signs(r.components);
    const double total = vals.sum();
    r.explained_variance_ratio = total > 0 ? Vector(vals.head(k) / total) : Vector(Vector::Zero(k));
    r.embedding = r.transform(x);
    return r;
}

inline FittedReducer fit_tsvd(const Eigen::Ref<const Matrix>& x, int k = 1) {
    using namespace dimred_detail;
    check_target(x, k);
    FittedReducer r;
    r.method = ReducerMethod::TSVD;
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinV);
    r.components = svd.matrixV().leftCols(k);
    fix_signs(r.components);
    const Vector sv2 = svd.singularValues().array().square();
    const double total = sv2.sum();
    r.explained_variance_ratio = total > 0 ? Vector(sv2.head(k) / total) : Vector(Vector::Zero(k));
    r.embedding = r.transform(x);
    return r;
}

/// Lee-Seung multiplicative updates for 0.5 * ||X - W H||_F^2 with X >= 0.
/// The fitted embedding is W (observations x rank).
inline FittedReducer fit_nmf(const Eigen::Ref<const Matrix>& x, int rank, int iters = 300, double tol = 1e-7,
                             std::uint64_t seed = 0) {
    if (rank < 1) throw ValidationError("NMF rank must be >= 1");
    if ((x.array() < 0.0).any()) throw ValidationError("NMF input has negative entries");
    const Eigen::Index n = x.rows(), m = x.cols();
    Rng rng(seed);
    const double scale = std::sqrt(x.mean() / rank);
    Matrix w(n, rank), h(rank, m);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.uniform();
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = scale * rng.uniform();

    auto objective = [&] { return 0.5 * (x - w * h).squaredNorm(); };
    // x <- x * num / den, with 0/0 -> 0 and positive/0 left unchanged.
    auto update = [](Matrix& f, const Matrix& num, const Matrix& den) {
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const double a = num.data()[i], b = den.data()[i];
            if (a == 0.0) f.data()[i] = 0.0;
            else if (b > 0.0) f.data()[i] *= a / b;
        }
    };

    FittedReducer r;
    r.method = ReducerMethod::NMF;
    r.history.push_back(objective());
    for (int it = 0; it < iters; ++it) {
        update(h, w.transpose() * x, (w.transpose() * w) * h);
        update(w, x * h.transpose(), w * (h * h.transpose()));
        const double obj = objective();
        const double prev = r.history.back();
        r.history.push_back(obj);
        if (prev - obj <= tol * std::max(prev, 1e-300)) break;
    }
    // Normalize rows of H to unit norm, moving scale into W.
    for (Eigen::Index k = 0; k < rank; ++k) {
        const double nk = h.row(k).norm();
        if (nk > 0) {
            h.row(k) /= nk;
            w.col(k) *= nk;
        }
    }
    r.nmf_h = h;
    r.embedding = w;
    return r;
}

/// Maximum-likelihood factor analysis by EM. `history` holds the mean
/// log-likelihood per observation at each iterate.
inline FittedReducer fit_fa(const Eigen::Ref<const Matrix>& x, int k = 1, int iters = 300, double tol = 1e-9) {
    using namespace dimred_detail;
    check_target(x, k);
    constexpr double kPsiFloor = 1e-6;
    const Eigen::Index p = x.cols();
    const double log2pi = std::log(2.0 * std::numbers::pi);
    FittedReducer r;
    r.method = ReducerMethod::FA;
    r.mean = x.colwise().mean();
    const Matrix c = x.rowwise() - r.mean;
    const Matrix s = covariance(c);

    // Probabilistic-PCA initialization.
    auto [vals, vecs] = eig_desc(s);
    const double rest = p > k ? vals.tail(p - k).mean() : 0.0;
    Matrix lam = vecs.leftCols(k);
    for (int j = 0; j < k; ++j) lam.col(j) *= std::sqrt(std::max(vals[j] - rest, 1e-12));
    Vector psi = (s.diagonal() - lam.rowwise().squaredNorm()).cwiseMax(std::max(kPsiFloor, 1e-3 * s.diagonal().mean()));

    auto loglik = [&](const Matrix& l, const Vector& ps, Matrix& sigma_inv) {
        Matrix sigma = l * l.transpose();
        sigma.diagonal() += ps;
        Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success) throw NumericError("FA: model covariance not positive definite");
        sigma_inv = llt.solve(Matrix::Identity(p, p));
        const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        return -0.5 * (static_cast<double>(p) * log2pi + logdet + sigma_inv.cwiseProduct(s).sum());
    };

    Matrix sigma_inv;
    r.history.push_back(loglik(lam, psi, sigma_inv));
    for (int it = 0; it < iters; ++it) {
        const Matrix beta = lam.transpose() * sigma_inv;                                   // k x p
        const Matrix ezz = Matrix::Identity(k, k) - beta * lam + beta * s * beta.transpose();  // k x k
        lam = (s * beta.transpose()) * ezz.inverse();
        psi = (s.diagonal() - (lam * beta * s).diagonal()).cwiseMax(kPsiFloor);
        const double ll = loglik(lam, psi, sigma_inv);
        const double prev = r.history.back();
        r.history.push_back(ll);
        if (std::abs(ll - prev) < tol) break;
    }
    Matrix none;
    fix_signs(lam, none);
    r.loadings = lam;
    r.psi = psi;
    // Posterior mean E[z | x] = beta (x - mean), stored transposed as components.
    r.components = (lam.transpose() * sigma_inv).transpose();
    const double total = s.trace();
    r.explained_variance_ratio = Vector(k);
    for (int j = 0; j < k; ++j) r.explained_variance_ratio[j] = total > 0 ? lam.col(j).squaredNorm() / total : 0.0;
    r.embedding = r.transform(x);
    return r;
}

/// Fisher discriminant directions from between/within scatter; ridge 1e-6
/// on the within scatter. At most (classes - 1) directions are kept.
inline FittedReducer fit_lda_reducer(const Eigen::Ref<const Matrix>& x, std::span<const int> labels, int k = 1) {
    using namespace dimred_detail;
    if (static_cast<Eigen::Index>(labels.size()) != x.rows())
        throw ValidationError("LDA reducer: label count does not match observations");
    std::vector<int> classes(labels.begin(), labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw ValidationError("LDA reducer needs at least 2 classes, got " + std::to_string(classes.size()));
    const Eigen::Index p = x.cols();
    const int keep = std::min<int>(k, static_cast<int>(classes.size()) - 1);

    FittedReducer r;
    r.method = ReducerMethod::LDA;
    r.mean = x.colwise().mean();
    Matrix sw = Matrix::Zero(p, p), sb = Matrix::Zero(p, p);
    for (int cls : classes) {
        RowVector mu = RowVector::Zero(p);
        Eigen::Index cnt = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            if (labels[static_cast<std::size_t>(i)] == cls) {
                mu += x.row(i);
                ++cnt;
            }
        mu /= static_cast<double>(cnt);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            if (labels[static_cast<std::size_t>(i)] == cls) {
                const RowVector d = x.row(i) - mu;
                sw += d.transpose() * d;
            }
        const RowVector dm = mu - r.mean;
        sb += static_cast<double>(cnt) * dm.transpose() * dm;
    }
    sw.diagonal().array() += 1e-6;
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(sb, sw);
    if (ges.info() != Eigen::Success) throw NumericError("LDA reducer: generalized eigendecomposition failed");
    const Vector vals = ges.eigenvalues().reverse();
    Matrix dirs = ges.eigenvectors().rowwise().reverse().leftCols(keep);
    for (Eigen::Index j = 0; j < dirs.cols(); ++j) dirs.col(j).normalize();
    fix_signs(dirs);
    r.components = dirs;
    r.explained_variance_ratio = vals.head(keep);
    r.low_separation = sb.trace() < 1e-2 * sw.trace();
    r.embedding = r.transform(x);
    return r;
}

// ---------------------------------------------------------------------------
// Manifold methods

/// Classical MDS from a (non-squared) distance matrix.
inline Matrix classical_mds(const Eigen::Ref<const Matrix>& dist, int k) {
    const Eigen::Index n = dist.rows();
    const Matrix d2 = dist.array().square();
    const Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    const Matrix b = -0.5 * j * d2 * j;
    auto [vals, vecs] = dimred_detail::eig_desc(0.5 * (b + b.transpose()));
    Matrix y(n, k);
    for (int c = 0; c < k; ++c) y.col(c) = vecs.col(c) * std::sqrt(std::max(vals[c], 0.0));
    return y;
}

namespace dimred_detail {

/// k nearest neighbours of every row, ties broken by index.
inline std::vector<std::vector<Eigen::Index>> knn(const Matrix& d2, int k) {
    const Eigen::Index n = d2.rows();
    std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        auto cmp = [&](Eigen::Index a, Eigen::Index b) {
            if (a == i || b == i) return b == i && a != i;
            return d2(i, a) < d2(i, b) || (d2(i, a) == d2(i, b) && a < b);
        };
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), cmp);
        out[static_cast<std::size_t>(i)].assign(idx.begin(), idx.begin() + k);
    }
    return out;
}

/// Component id per node of an undirected adjacency structure.
inline std::vector<int> components(const std::vector<std::vector<std::pair<Eigen::Index, double>>>& adj) {
    std::vector<int> comp(adj.size(), -1);
    int next = 0;
    for (std::size_t s = 0; s < adj.size(); ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::size_t> stack{s};
        comp[s] = next;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (const auto& [v, w] : adj[u])
                if (comp[static_cast<std::size_t>(v)] < 0) {
                    comp[static_cast<std::size_t>(v)] = next;
                    stack.push_back(static_cast<std::size_t>(v));
                }
        }
        ++next;
    }
    return comp;
}

}  // namespace dimred_detail

/// Isomap: k-NN graph geodesics (Dijkstra) followed by classical MDS.
/// A disconnected graph is joined by repeatedly adding the shortest edge
/// between two different components.
inline FittedReducer fit_isomap(const Eigen::Ref<const Matrix>& x, int k_neighbors, int dim = 1) {
    using namespace dimred_detail;
    const Eigen::Index n = x.rows();
    if (n < k_neighbors + 2) throw ValidationError("Isomap needs at least neighbors + 2 observations");
    const Matrix d2 = squared_distances(x);
    const auto nb = knn(d2, k_neighbors);
    std::vector<std::vector<std::pair<Eigen::Index, double>>> adj(static_cast<std::size_t>(n));
    auto add_edge = [&](Eigen::Index a, Eigen::Index b) {
        const double w = std::sqrt(d2(a, b));
        adj[static_cast<std::size_t>(a)].emplace_back(b, w);
        adj[static_cast<std::size_t>(b)].emplace_back(a, w);
    };
    for (Eigen::Index i = 0; i < n; ++i)
        for (auto j : nb[static_cast<std::size_t>(i)]) add_edge(i, j);

    FittedReducer r;
    r.method = ReducerMethod::Isomap;
    for (auto comp = components(adj); *std::max_element(comp.begin(), comp.end()) > 0; comp = components(adj)) {
        r.graph_bridged = true;
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index ba = 0, bb = 0;
        for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = a + 1; b < n; ++b)
                if (comp[static_cast<std::size_t>(a)] != comp[static_cast<std::size_t>(b)] && d2(a, b) < best) {
                    best = d2(a, b);
                    ba = a;
                    bb = b;
                }
        add_edge(ba, bb);
    }

    Matrix geo(n, n);
    using Item = std::pair<double, Eigen::Index>;
    for (Eigen::Index s = 0; s < n; ++s) {
        std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        dist[static_cast<std::size_t>(s)] = 0.0;
        pq.emplace(0.0, s);
        while (!pq.empty()) {
            const auto [du, u] = pq.top();
            pq.pop();
            if (du > dist[static_cast<std::size_t>(u)]) continue;
            for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
                const double nd = du + w;
                if (nd < dist[static_cast<std::size_t>(v)]) {
                    dist[static_cast<std::size_t>(v)] = nd;
                    pq.emplace(nd, v);
                }
            }
        }
        for (Eigen::Index t = 0; t < n; ++t) geo(s, t) = dist[static_cast<std::size_t>(t)];
    }
    geo = 0.5 * (geo + geo.transpose());
    r.embedding = classical_mds(geo, dim);
    return r;
}

/// Locally linear embedding with Gram regularization 1e-3 * trace.
inline FittedReducer fit_lle(const Eigen::Ref<const Matrix>& x, int k_neighbors, int dim = 1, double reg = 1e-3) {
    using namespace dimred_detail;
    const Eigen::Index n = x.rows();
    if (n < k_neighbors + 2) throw ValidationError("LLE needs at least neighbors + 2 observations");
    const Matrix d2 = squared_distances(x);
    const auto nb = knn(d2, k_neighbors);
    Matrix w = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& ni = nb[static_cast<std::size_t>(i)];
        Matrix z(k_neighbors, x.cols());
        for (int a = 0; a < k_neighbors; ++a) z.row(a) = x.row(ni[static_cast<std::size_t>(a)]) - x.row(i);
        Matrix g = z * z.transpose();
        const double tr = g.trace();
        g.diagonal().array() += tr > 0 ? reg * tr : reg;
        Vector wi = g.ldlt().solve(Vector::Ones(k_neighbors));
        wi /= wi.sum();
        for (int a = 0; a < k_neighbors; ++a) w(i, ni[static_cast<std::size_t>(a)]) = wi[a];
    }
    const Matrix iw = Matrix::Identity(n, n) - w;
    const Matrix m = iw.transpose() * iw;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw NumericError("LLE eigendecomposition failed");
    FittedReducer r;
    r.method = ReducerMethod::LLE;
    // Skip the bottom (constant) eigenvector.
    r.embedding = es.eigenvectors().middleCols(1, dim) * std::sqrt(static_cast<double>(n));
    return r;
}

inline FittedReducer fit_mds(const Eigen::Ref<const Matrix>& x, int dim = 1) {
    FittedReducer r;
    r.method = ReducerMethod::MDS;
    r.embedding = classical_mds(dimred_detail::squared_distances(x).cwiseSqrt(), dim);
    return r;
}

namespace dimred_detail {

/// Joint probabilities with per-point bandwidths matched to `perplexity`.
inline Matrix tsne_affinities(const Matrix& d2, double perplexity) {
    const Eigen::Index n = d2.rows();
    const double target = std::log(perplexity);
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        // Scale the search to the typical distance of this point.
        double mean_d = d2.row(i).sum() / static_cast<double>(n - 1);
        if (mean_d > 0) beta = 1.0 / mean_d;
        for (int it = 0; it < 100; ++it) {
            double sum = 0.0, dsum = 0.0;
            double dmin = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j)
                if (j != i) dmin = std::min(dmin, d2(i, j));
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double v = std::exp(-(d2(i, j) - dmin) * beta);
                p(i, j) = v;
                sum += v;
                dsum += v * (d2(i, j) - dmin);
            }
            const double h = std::log(sum) + beta * dsum / sum;
            p.row(i) /= sum;
            const double diff = h - target;
            if (std::abs(diff) < 1e-5) break;
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
    }
    Matrix sym = (p + p.transpose()) / (2.0 * static_cast<double>(n));
    return sym.cwiseMax(1e-12);
}

/// KL(P || Q) and its gradient for embedding y.
inline double tsne_p_log_p(const Matrix& p) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p.data()[i] > 0.0) acc += p.data()[i] * std::log(p.data()[i]);
    return acc;
}

/// KL(P || Q) for symmetric P summing to 1, using
/// KL = sum p log p + sum p log(1 + d^2) + log Z. Pass `p_log_p` to skip recomputing it.
inline double tsne_kl(const Matrix& p, const Matrix& y, Matrix* grad, double exaggeration = 1.0,
                      double p_log_p = std::numeric_limits<double>::quiet_NaN()) {
    const Eigen::Index n = y.rows();
    Matrix num(n, n);
    double z = 0.0, cross = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        num(j, j) = 0.0;
        for (Eigen::Index i = 0; i < j; ++i) {
            const double d2 = (y.row(i) - y.row(j)).squaredNorm();
            const double w = 1.0 / (1.0 + d2);
            num(i, j) = w;
            num(j, i) = w;
            z += 2.0 * w;
            cross += 2.0 * p(i, j) * std::log1p(d2);
        }
    }
    if (std::isnan(p_log_p)) p_log_p = tsne_p_log_p(p);
    const double kl = p_log_p + cross + std::log(z);
    if (grad) {
        const double inv_z = 1.0 / z;
        Matrix coef = ((exaggeration * p).array() - num.array() * inv_z) * num.array();
        coef.diagonal().setZero();
        // grad_i = 4 sum_j coef_ij (y_i - y_j)
        *grad = 4.0 * (coef.rowwise().sum().asDiagonal() * y - coef * y);
    }
    return kl;
}

}  // namespace dimred_detail

/// Exact t-SNE. The early-exaggeration phase uses momentum with adaptive
/// gains; afterwards plain gradient descent with a backtracking step keeps
/// the KL objective nonincreasing. `history` holds KL per iteration.
inline FittedReducer fit_tsne(const Eigen::Ref<const Matrix>& x, const ReducerSpec& spec) {
    using namespace dimred_detail;
    const Eigen::Index n = x.rows();
    const int dim = spec.target_dim;
    if (n < 4) throw ValidationError("t-SNE needs at least 4 observations");
    double perp = spec.perplexity;
    if (!(perp < (static_cast<double>(n) - 1.0) / 3.0)) perp = std::max(1.0, (static_cast<double>(n) - 1.0) / 3.0 - 1e-9);
    const Matrix p = tsne_affinities(squared_distances(x), perp);

    Matrix y(n, dim);
    if (spec.tsne_pca_init) {
        const Matrix c = x.rowwise() - x.colwise().mean();
        auto [vals, vecs] = eig_desc(covariance(c));
        Matrix v = vecs.leftCols(dim);
        fix_signs(v);
        y = c * v;
        const double sd = std::sqrt((y.col(0).array() - y.col(0).mean()).square().mean());
        y *= sd > 0 ? 1e-4 / sd : 0.0;
        if (!(sd > 0)) {
            Rng rng(spec.seed);
            for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();
        }
    } else {
        Rng rng(spec.seed);
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();
    }

    FittedReducer r;
    r.method = ReducerMethod::TSNE;
    const double lr = static_cast<double>(n) / spec.tsne_exaggeration / 4.0;
    const double plogp = tsne_p_log_p(p);
    Matrix update = Matrix::Zero(n, dim), gains = Matrix::Ones(n, dim), grad;
    for (int it = 0; it < spec.tsne_exaggeration_iters; ++it) {
        r.history.push_back(tsne_kl(p, y, &grad, spec.tsne_exaggeration, plogp));
        const double momentum = it < 50 ? 0.5 : 0.8;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const bool same = (grad.data()[i] > 0) == (update.data()[i] > 0);
            gains.data()[i] = same ? std::max(gains.data()[i] * 0.8, 0.01) : gains.data()[i] + 0.2;
        }
        update = momentum * update - lr * gains.cwiseProduct(grad);
        y += update;
    }

    r.history_phase_start = r.history.size();
    double step = lr;
    double kl = tsne_kl(p, y, &grad, 1.0, plogp);
    r.history.push_back(kl);
    int stalled = 0;
    for (int it = 0; it < spec.max_iter; ++it) {
        bool accepted = false;
        for (int tries = 0; tries < 40 && !accepted; ++tries) {
            const Matrix trial = y - step * grad;
            Matrix tgrad;
            const double tkl = tsne_kl(p, trial, &tgrad, 1.0, plogp);
            if (tkl <= kl) {
                y = trial;
                grad = std::move(tgrad);
                const double prev = kl;
                kl = tkl;
                r.history.push_back(kl);
                step *= 1.2;
                accepted = true;
                stalled = prev - kl < spec.tol * std::max(prev, 1e-12) ? stalled + 1 : 0;
                if (stalled >= 10) it = spec.max_iter;
            } else {
                step *= 0.5;
            }
        }
        if (!accepted) break;
    }
    r.embedding = y;
    return r;
}

inline Matrix FittedReducer::transform(const Eigen::Ref<const Matrix>& x) const {
    switch (method) {
        case ReducerMethod::PCA:
        case ReducerMethod::FA:
        case ReducerMethod::LDA: return (x.rowwise() - mean) * components;
        case ReducerMethod::TSVD: return x * components;
        case ReducerMethod::NMF: {
            // Nonnegative least squares for W with H fixed, by multiplicative updates.
            if ((x.array() < 0.0).any()) throw ValidationError("NMF transform input has negative entries");
            Matrix w = Matrix::Constant(x.rows(), nmf_h.rows(), std::sqrt(std::max(x.mean(), 1e-12) / nmf_h.rows()));
            const Matrix hht = nmf_h * nmf_h.transpose();
            const Matrix xht = x * nmf_h.transpose();
            for (int it = 0; it < 500; ++it) {
                const Matrix den = w * hht;
                for (Eigen::Index i = 0; i < w.size(); ++i) {
                    const double a = xht.data()[i], b = den.data()[i];
                    if (a == 0.0) w.data()[i] = 0.0;
                    else if (b > 0.0) w.data()[i] *= a / b;
                }
            }
            return w;
        }
        default: break;
    }
    throw ValidationError(reducer_name(method) + " has no out-of-sample transform; use the fitted embedding");
}

// ---------------------------------------------------------------------------

struct ReducedSeries {
    Vector series;            // one value per input sample
    nlohmann::json metadata;  // decimation, flags
};

namespace dimred_detail {

inline std::vector<Eigen::Index> decimation_indices(Eigen::Index n, Eigen::Index m) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i)
        idx[static_cast<std::size_t>(i)] =
            static_cast<Eigen::Index>(std::llround(static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(m - 1)));
    return idx;
}

inline Vector interpolate(const std::vector<Eigen::Index>& idx, const Vector& v, Eigen::Index n) {
    Vector out(n);
    std::size_t seg = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        while (seg + 1 < idx.size() - 1 && idx[seg + 1] <= t) ++seg;
        const auto a = idx[seg], b = idx[seg + 1];
        const double f = b > a ? static_cast<double>(t - a) / static_cast<double>(b - a) : 0.0;
        out[t] = (1.0 - f) * v[static_cast<Eigen::Index>(seg)] + f * v[static_cast<Eigen::Index>(seg + 1)];
    }
    return out;
}

}  // namespace dimred_detail

/// Reduces a channels x samples segment to a series of length samples.
/// LDA requires a reducer fitted on labeled training observations
/// (`supervised`); every other method fits on the segment itself.
inline ReducedSeries reduce_segment(const Eigen::Ref<const Matrix>& segment, const ReducerSpec& spec,
                                    const FittedReducer* supervised = nullptr) {
    using namespace dimred_detail;
    const Eigen::Index channels = segment.rows(), samples = segment.cols();
    if (channels < 2) throw ValidationError("reduce_segment needs at least 2 channels");
    if (spec.target_dim < 1 || spec.target_dim >= channels)
        throw ValidationError("target_dim must be >= 1 and < channel count");
    const Matrix obs = segment.transpose();  // samples x channels
    ReducedSeries out;
    out.metadata["method"] = reducer_name(spec.method);

    if (!is_manifold(spec.method) && samples < channels)
        throw ValidationError("linear reducers need samples >= channels");

    FittedReducer fit;
    switch (spec.method) {
        case ReducerMethod::PCA: fit = fit_pca(obs, spec.target_dim); break;
        case ReducerMethod::TSVD: fit = fit_tsvd(obs, spec.target_dim); break;
        case ReducerMethod::FA: fit = fit_fa(obs, spec.target_dim, spec.max_iter); break;
        case ReducerMethod::NMF: {
            const RowVector mins = obs.colwise().minCoeff();
            fit = fit_nmf(obs.rowwise() - mins, spec.target_dim, spec.max_iter, spec.tol, spec.seed);
            out.metadata["nmf_shift"] = "per-channel minimum";
            break;
        }
        case ReducerMethod::LDA: {
            if (!supervised || supervised->method != ReducerMethod::LDA)
                throw ValidationError("LDA reduction needs a reducer fitted on labeled training segments");
            fit.embedding = supervised->transform(obs);
            out.metadata["low_separation"] = supervised->low_separation;
            break;
        }
        default: {
            Eigen::Index m = samples;
            std::vector<Eigen::Index> idx;
            Matrix sub = obs;
            if (spec.max_samples > 1 && samples > spec.max_samples) {
                m = spec.max_samples;
                idx = decimation_indices(samples, m);
                sub.resize(m, channels);
                for (Eigen::Index i = 0; i < m; ++i) sub.row(i) = obs.row(idx[static_cast<std::size_t>(i)]);
                out.metadata["decimated_to"] = m;
            }
            if ((spec.method == ReducerMethod::Isomap || spec.method == ReducerMethod::LLE) && m < spec.neighbors + 2)
                throw ValidationError("neighbor methods need samples >= neighbors + 2");
            if (spec.method == ReducerMethod::Isomap) fit = fit_isomap(sub, spec.neighbors, spec.target_dim);
            else if (spec.method == ReducerMethod::LLE) fit = fit_lle(sub, spec.neighbors, spec.target_dim);
            else if (spec.method == ReducerMethod::MDS) fit = fit_mds(sub, spec.target_dim);
            else fit = fit_tsne(sub, spec);
            if (fit.graph_bridged) out.metadata["graph_bridged"] = true;
            fix_signs(fit.embedding);
            if (!idx.empty()) {
                out.series = interpolate(idx, fit.embedding.col(0), samples);
                return out;
            }
            break;
        }
    }
    out.series = fit.embedding.col(0);
    return out;
}

}  // namespace topoeeg
