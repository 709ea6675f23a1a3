#pragma once

// Classifiers trained from scratch, evaluation metrics and the stratified split.

#include "topoeeg/mlp.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <optional>
#include <string>
#include <vector>

namespace topoeeg {

enum class ClassifierMethod { Logistic, Ridge, LinearSVM, GaussianNB, LDA, DeepMLP };

inline constexpr std::array<ClassifierMethod, 6> kAllClassifiers = {
    ClassifierMethod::Logistic,   ClassifierMethod::Ridge, ClassifierMethod::LinearSVM,
    ClassifierMethod::GaussianNB, ClassifierMethod::LDA,   ClassifierMethod::DeepMLP};

inline std::string classifier_name(ClassifierMethod m) {
    switch (m) {
        case ClassifierMethod::Logistic: return "logistic";
        case ClassifierMethod::Ridge: return "ridge";
        case ClassifierMethod::LinearSVM: return "linear_svm";
        case ClassifierMethod::GaussianNB: return "gaussian_nb";
        case ClassifierMethod::LDA: return "lda";
        case ClassifierMethod::DeepMLP: return "deep_mlp";
    }
    return "?";
}

inline ClassifierMethod parse_classifier(std::string_view s) {
    auto v = to_lower(trim(s));
    std::replace(v.begin(), v.end(), '-', '_');
    for (auto m : kAllClassifiers)
        if (classifier_name(m) == v) return m;
    if (v == "logistic_regression") return ClassifierMethod::Logistic;
    if (v == "linearsvc" || v == "linear_svc" || v == "svm") return ClassifierMethod::LinearSVM;
    if (v == "gaussiannb" || v == "nb") return ClassifierMethod::GaussianNB;
    if (v == "mlp" || v == "deepmlp") return ClassifierMethod::DeepMLP;
    throw ValidationError("unknown classifier '" + std::string(s) + "'");
}

/// "classical" or "deep", the grouping used in summaries.
inline std::string model_class(ClassifierMethod m) { return m == ClassifierMethod::DeepMLP ? "deep" : "classical"; }

struct ClassifierSpec {
    ClassifierMethod method = ClassifierMethod::Logistic;
    std::optional<double> lambda;  // L2 strength; default 1e-2 (Logistic, SVM), 1.0 (Ridge), 0 (MLP)
    double learning_rate = 1e-2;   // Logistic / SVM step
    int epochs = 500;
    double tol = 1e-9;
    // DeepMLP
    double mlp_learning_rate = 1e-3;
    std::vector<int> hidden = {128, 64};
    double dropout = 0.3;
    int batch_size = 32;
    int patience = 10;               // 0 disables early stopping
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;

    double l2() const {
        if (lambda) return *lambda;
        switch (method) {
            case ClassifierMethod::Ridge: return 1.0;
            case ClassifierMethod::DeepMLP: return 0.0;
            default: return 1e-2;
        }
    }
};

struct TrainedClassifier {
    ClassifierMethod method = ClassifierMethod::Logistic;
    std::vector<int> classes;  // label of each output column
    // Linear decision functions (Logistic, Ridge, LinearSVM, LDA): scores = X W + b.
    Matrix weight;
    RowVector bias;
    // GaussianNB
    Matrix nb_mean, nb_var;
    RowVector nb_log_prior;
    // DeepMLP
    std::optional<MlpModel> mlp;

    std::vector<double> loss_history;
    std::vector<std::string> warnings;
    int epochs_run = 0;

    /// One score column per class; larger is more likely.
    Matrix decision(const Eigen::Ref<const Matrix>& x) const {
        switch (method) {
            case ClassifierMethod::GaussianNB: {
                Matrix s(x.rows(), static_cast<Eigen::Index>(classes.size()));
                for (Eigen::Index c = 0; c < s.cols(); ++c) {
                    const RowVector mu = nb_mean.row(c), var = nb_var.row(c);
                    const double norm = -0.5 * (2.0 * std::numbers::pi * var.array()).log().sum();
                    for (Eigen::Index i = 0; i < x.rows(); ++i)
                        s(i, c) = nb_log_prior[c] + norm - 0.5 * ((x.row(i) - mu).array().square() / var.array()).sum();
                }
                return s;
            }
            case ClassifierMethod::DeepMLP: return mlp_logits(*mlp, x);
            default: return (x * weight).rowwise() + bias;
        }
    }

    std::vector<int> predict(const Eigen::Ref<const Matrix>& x) const {
        if (x.cols() != input_dim())
            throw ValidationError("classifier expects " + std::to_string(input_dim()) + " features, got " +
                                  std::to_string(x.cols()));
        const Matrix s = decision(x);
        std::vector<int> out(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            Eigen::Index arg = 0;
            s.row(i).maxCoeff(&arg);
            out[static_cast<std::size_t>(i)] = classes[static_cast<std::size_t>(arg)];
        }
        return out;
    }

    Eigen::Index input_dim() const {
        if (method == ClassifierMethod::GaussianNB) return nb_mean.cols();
        if (method == ClassifierMethod::DeepMLP) return mlp->input_dim();
        return weight.rows();
    }
};

// ---------------------------------------------------------------------------
// Metrics and split

/// Unweighted mean of per-class recall over the classes present in y_true.
inline double balanced_accuracy(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size())
        throw ValidationError("balanced_accuracy: length mismatch (" + std::to_string(y_true.size()) + " vs " +
                              std::to_string(y_pred.size()) + ")");
    if (y_true.empty()) throw ValidationError("balanced_accuracy: empty input");
    std::map<int, std::pair<double, double>> per;  // class -> (hits, count)
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        auto& e = per[y_true[i]];
        e.second += 1.0;
        if (y_pred[i] == y_true[i]) e.first += 1.0;
    }
    double sum = 0.0;
    for (const auto& [c, e] : per) sum += e.first / e.second;
    return sum / static_cast<double>(per.size());
}

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Per-class split keeping floor(train_fraction * n_c) items of each class
/// (at least one on each side). With `groups`, whole groups (patients) are
/// assigned to one side instead.
inline Split stratified_split(std::span<const int> labels, double train_fraction = 0.8, std::uint64_t seed = 0,
                              std::span<const std::string> groups = {}) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must be in (0, 1)");
    Rng rng(seed);
    Split s;
    if (!groups.empty()) {
        if (groups.size() != labels.size()) throw ValidationError("stratified_split: group count mismatch");
        std::vector<std::string> uniq(groups.begin(), groups.end());
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        if (uniq.size() < 2) throw ValidationError("group split needs at least 2 groups");
        rng.shuffle(uniq);
        const double target = train_fraction * static_cast<double>(labels.size());
        std::set<std::string> train_groups;
        double count = 0.0;
        for (std::size_t g = 0; g + 1 < uniq.size(); ++g) {
            const auto sz = static_cast<double>(std::count(groups.begin(), groups.end(), uniq[g]));
            if (g > 0 && count + sz > target + 1e-9) continue;
            train_groups.insert(uniq[g]);
            count += sz;
        }
        for (std::size_t i = 0; i < labels.size(); ++i)
            (train_groups.count(groups[i]) ? s.train : s.test).push_back(i);
        return s;
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (auto& [c, idx] : by_class) {
        if (idx.size() < 2)
            throw ValidationError("stratified_split: class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                                  " segment(s); need at least 2");
        rng.shuffle(idx);
        auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(idx.size()) + 1e-9));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.test.insert(s.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

// ---------------------------------------------------------------------------
// Training

namespace classify_detail {

inline std::vector<int> encode(std::span<const int> y, const std::vector<int>& classes) {
    std::vector<int> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        out[i] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), y[i]) - classes.begin());
    return out;
}

inline Matrix one_hot(std::span<const int> yi, Eigen::Index k, double off = 0.0) {
    Matrix m = Matrix::Constant(static_cast<Eigen::Index>(yi.size()), k, off);
    for (std::size_t i = 0; i < yi.size(); ++i) m(static_cast<Eigen::Index>(i), yi[i]) = 1.0;
    return m;
}

}  // namespace classify_detail

/// Mean multinomial cross-entropy plus (lambda/2)||W||^2, and its gradient.
inline double logistic_loss_grad(const Matrix& w, const RowVector& b, const Eigen::Ref<const Matrix>& x,
                                 std::span<const int> yi, double lambda, Matrix* gw, RowVector* gb) {
    const double n = static_cast<double>(x.rows());
    const Matrix p = softmax_rows((x * w).rowwise() + b);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) loss -= std::log(std::max(p(i, yi[static_cast<std::size_t>(i)]), 1e-300));
    loss = loss / n + 0.5 * lambda * w.squaredNorm();
    if (gw && gb) {
        Matrix d = p - classify_detail::one_hot(yi, w.cols());
        d /= n;
        *gw = x.transpose() * d + lambda * w;
        *gb = d.colwise().sum();
    }
    return loss;
}

namespace classify_detail {

inline void fit_logistic(TrainedClassifier& m, const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x,
                         const std::vector<int>& yi) {
    const auto k = static_cast<Eigen::Index>(m.classes.size());
    const double lambda = spec.l2();
    m.weight = Matrix::Zero(x.cols(), k);
    m.bias = RowVector::Zero(k);
    double step = spec.learning_rate;
    Matrix gw;
    RowVector gb;
    double loss = logistic_loss_grad(m.weight, m.bias, x, yi, lambda, &gw, &gb);
    m.loss_history.push_back(loss);
    for (int e = 0; e < spec.epochs; ++e) {
        // Fixed step, halved only when a step would increase the loss.
        for (int guard = 0; guard < 60; ++guard) {
            const Matrix w2 = m.weight - step * gw;
            const RowVector b2 = m.bias - step * gb;
            Matrix gw2;
            RowVector gb2;
            const double l2 = logistic_loss_grad(w2, b2, x, yi, lambda, &gw2, &gb2);
            if (l2 <= loss) {
                m.weight = w2;
                m.bias = b2;
                gw = std::move(gw2);
                gb = std::move(gb2);
                break;
            }
            step *= 0.5;
        }
        const double prev = loss;
        loss = logistic_loss_grad(m.weight, m.bias, x, yi, lambda, nullptr, nullptr);
        m.loss_history.push_back(loss);
        m.epochs_run = e + 1;
        if (prev - loss < spec.tol) break;
    }
}

inline void fit_ridge(TrainedClassifier& m, const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x,
                      const std::vector<int>& yi) {
    const auto k = static_cast<Eigen::Index>(m.classes.size());
    const Matrix t = one_hot(yi, k, -1.0);
    const RowVector xm = x.colwise().mean(), tm = t.colwise().mean();
    const Matrix xc = x.rowwise() - xm, tc = t.rowwise() - tm;
    Matrix a = xc.transpose() * xc;
    a.diagonal().array() += spec.l2();
    m.weight = a.ldlt().solve(xc.transpose() * tc);
    m.bias = tm - xm * m.weight;
}

inline void fit_svm(TrainedClassifier& m, const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x,
                    const std::vector<int>& yi) {
    const auto k = static_cast<Eigen::Index>(m.classes.size());
    const double lambda = spec.l2();
    const double n = static_cast<double>(x.rows());
    const Matrix t = one_hot(yi, k, -1.0);
    m.weight = Matrix::Zero(x.cols(), k);
    m.bias = RowVector::Zero(k);
    for (int e = 0; e < spec.epochs; ++e) {
        const Matrix margin = t.cwiseProduct((x * m.weight).rowwise() + m.bias);
        const Matrix active = (margin.array() < 1.0).cast<double>().matrix().cwiseProduct(t);  // -y where hinge active
        const Matrix gw = lambda * m.weight - x.transpose() * active / n;
        const RowVector gb = -active.colwise().sum() / n;
        m.weight -= spec.learning_rate * gw;
        m.bias -= spec.learning_rate * gb;
        m.epochs_run = e + 1;
    }
}

inline void fit_nb(TrainedClassifier& m, const Eigen::Ref<const Matrix>& x, const std::vector<int>& yi) {
    const auto k = static_cast<Eigen::Index>(m.classes.size());
    m.nb_mean = Matrix::Zero(k, x.cols());
    m.nb_var = Matrix::Zero(k, x.cols());
    m.nb_log_prior = RowVector::Zero(k);
    std::vector<double> cnt(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        m.nb_mean.row(yi[static_cast<std::size_t>(i)]) += x.row(i);
        cnt[static_cast<std::size_t>(yi[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) m.nb_mean.row(c) /= cnt[static_cast<std::size_t>(c)];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int c = yi[static_cast<std::size_t>(i)];
        m.nb_var.row(c) += (x.row(i) - m.nb_mean.row(c)).array().square().matrix();
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        m.nb_var.row(c) /= cnt[static_cast<std::size_t>(c)];
        m.nb_var.row(c) = m.nb_var.row(c).cwiseMax(1e-9);
        m.nb_log_prior[c] = std::log(cnt[static_cast<std::size_t>(c)] / static_cast<double>(x.rows()));
    }
}

inline void fit_lda(TrainedClassifier& m, const Eigen::Ref<const Matrix>& x, const std::vector<int>& yi) {
    const auto k = static_cast<Eigen::Index>(m.classes.size());
    Matrix mu = Matrix::Zero(k, x.cols());
    std::vector<double> cnt(static_cast<std::size_t>(k), 0.0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        mu.row(yi[static_cast<std::size_t>(i)]) += x.row(i);
        cnt[static_cast<std::size_t>(yi[static_cast<std::size_t>(i)])] += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) mu.row(c) /= cnt[static_cast<std::size_t>(c)];
    Matrix cov = Matrix::Zero(x.cols(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const RowVector d = x.row(i) - mu.row(yi[static_cast<std::size_t>(i)]);
        cov += d.transpose() * d;
    }
    cov /= std::max(1.0, static_cast<double>(x.rows() - k));
    cov.diagonal().array() += 1e-6;
    const auto ldlt = cov.ldlt();
    m.weight = ldlt.solve(mu.transpose());  // features x k
    m.bias.resize(k);
    for (Eigen::Index c = 0; c < k; ++c)
        m.bias[c] = -0.5 * mu.row(c).dot(m.weight.col(c)) + std::log(cnt[static_cast<std::size_t>(c)] / static_cast<double>(x.rows()));
}

inline void fit_mlp_impl(TrainedClassifier& m, const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x,
                         const std::vector<int>& yi) {
    Rng rng(spec.seed);
    const auto k = static_cast<Eigen::Index>(m.classes.size());

    // Optional stratified validation split for early stopping.
    std::vector<std::size_t> tr(static_cast<std::size_t>(x.rows())), va;
    std::iota(tr.begin(), tr.end(), std::size_t{0});
    bool early = spec.patience > 0 && spec.validation_fraction > 0.0;
    if (early) {
        std::map<int, std::size_t> counts;
        for (int c : yi) ++counts[c];
        for (const auto& [c, n] : counts)
            if (n < 3) early = false;
    }
    if (early) {
        const auto sp = stratified_split(yi, 1.0 - spec.validation_fraction, spec.seed ^ 0x9e3779b97f4a7c15ULL);
        tr = sp.train;
        va = sp.test;
    }
    Matrix xt(static_cast<Eigen::Index>(tr.size()), x.cols());
    std::vector<int> yt(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        xt.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(tr[i]));
        yt[i] = yi[tr[i]];
    }
    Matrix xv(static_cast<Eigen::Index>(va.size()), x.cols());
    std::vector<int> yv(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
        xv.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(va[i]));
        yv[i] = yi[va[i]];
    }

    MlpModel net = make_mlp(x.cols(), spec.hidden, k, spec.dropout, rng);
    auto params = net.parameters();
    std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double lambda = spec.l2();
    long step = 0;

    auto batch = static_cast<std::size_t>(std::max(spec.batch_size, 1));
    if (batch > tr.size()) {
        m.warnings.push_back("batch size " + std::to_string(batch) + " clamped to " + std::to_string(tr.size()) +
                             " training rows");
        batch = tr.size();
    }

    double best_score = -1.0, best_loss = std::numeric_limits<double>::infinity();
    MlpModel best = net;
    int since_best = 0;
    std::vector<std::size_t> order(tr.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int e = 0; e < spec.epochs; ++e) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t s = 0; s < order.size();) {
            std::size_t end = std::min(order.size(), s + batch);
            if (order.size() - end == 1) end = order.size();  // no singleton batch for batch norm
            const auto bn = static_cast<Eigen::Index>(end - s);
            Matrix xb(bn, x.cols());
            std::vector<int> yb(end - s);
            for (std::size_t i = s; i < end; ++i) {
                xb.row(static_cast<Eigen::Index>(i - s)) = xt.row(static_cast<Eigen::Index>(order[i]));
                yb[i - s] = yt[order[i]];
            }
            MlpGrad g;
            epoch_loss += mlp_loss_and_grad(net, xb, yb, &g, &rng, true) * static_cast<double>(bn);
            const auto flat = g.flat();
            ++step;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
            for (std::size_t i = 0; i < params.size(); ++i) {
                const double gi = flat[i] + lambda * *params[i];
                m1[i] = b1 * m1[i] + (1 - b1) * gi;
                m2[i] = b2 * m2[i] + (1 - b2) * gi * gi;
                *params[i] -= spec.mlp_learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
            }
            s = end;
        }
        m.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
        m.epochs_run = e + 1;
        if (!early) continue;
        // Validation BA, ties broken by validation cross-entropy (BA saturates early on easy data).
        const Matrix logits = mlp_logits(net, xv);
        std::vector<int> pv(va.size());
        double val_loss = 0.0;
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            Eigen::Index arg;
            const double top = logits.row(i).maxCoeff(&arg);
            pv[static_cast<std::size_t>(i)] = static_cast<int>(arg);
            val_loss += top + std::log((logits.row(i).array() - top).exp().sum()) - logits(i, yv[static_cast<std::size_t>(i)]);
        }
        val_loss /= static_cast<double>(va.size());
        const double score = balanced_accuracy(yv, pv);
        if (score > best_score || (score == best_score && val_loss < best_loss - 1e-4)) {
            best_score = score;
            best_loss = val_loss;
            best = net;
            since_best = 0;
        } else if (++since_best >= spec.patience) {
            break;
        }
    }
    m.mlp = early ? best : net;
}

}  // namespace classify_detail

/// Fits any supported classifier. X is expected to be standardized.
inline TrainedClassifier fit(const ClassifierSpec& spec, const Eigen::Ref<const Matrix>& x, std::span<const int> y) {
    using namespace classify_detail;
    if (static_cast<Eigen::Index>(y.size()) != x.rows())
        throw ValidationError("fit: " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) + " labels");
    if (!x.allFinite()) throw ValidationError("fit: features contain non-finite values");
    if (spec.epochs < 1) throw ValidationError("fit: epochs must be >= 1");
    if (spec.l2() < 0) throw ValidationError("fit: lambda must be >= 0");
    TrainedClassifier m;
    m.method = spec.method;
    m.classes.assign(y.begin(), y.end());
    std::sort(m.classes.begin(), m.classes.end());
    m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
    if (m.classes.size() < 2) throw ValidationError("fit: need at least 2 classes, got " + std::to_string(m.classes.size()));
    const auto yi = encode(y, m.classes);
    switch (spec.method) {
        case ClassifierMethod::Logistic: fit_logistic(m, spec, x, yi); break;
        case ClassifierMethod::Ridge: fit_ridge(m, spec, x, yi); break;
        case ClassifierMethod::LinearSVM: fit_svm(m, spec, x, yi); break;
        case ClassifierMethod::GaussianNB: fit_nb(m, x, yi); break;
        case ClassifierMethod::LDA: fit_lda(m, x, yi); break;
        case ClassifierMethod::DeepMLP: fit_mlp_impl(m, spec, x, yi); break;
    }
    return m;
}

inline std::vector<int> predict(const TrainedClassifier& m, const Eigen::Ref<const Matrix>& x) {
    if (!x.allFinite()) throw ValidationError("predict: features contain non-finite values");
    return m.predict(x);
}

// ---------------------------------------------------------------------------
// Model container

namespace classify_detail {

inline nlohmann::json tensor(const Matrix& m) {
    return {{"shape", {m.rows(), m.cols()}}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Matrix untensor(const nlohmann::json& j) {
    const auto r = j.at("shape").at(0).get<Eigen::Index>(), c = j.at("shape").at(1).get<Eigen::Index>();
    const auto d = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(d.size()) != r * c) throw ParseError("model tensor: data size does not match shape");
    Matrix m(r, c);
    std::copy(d.begin(), d.end(), m.data());
    return m;
}

}  // namespace classify_detail

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON container: method, classes and named tensors (shape + flat column-major data).
inline nlohmann::json classifier_to_json(const TrainedClassifier& m) {
    using classify_detail::tensor;
    nlohmann::json t = nlohmann::json::object();
    if (m.method == ClassifierMethod::GaussianNB) {
        t["nb_mean"] = tensor(m.nb_mean);
        t["nb_var"] = tensor(m.nb_var);
        t["nb_log_prior"] = tensor(m.nb_log_prior);
    } else if (m.method == ClassifierMethod::DeepMLP) {
        for (std::size_t l = 0; l < m.mlp->layers.size(); ++l) {
            const auto& L = m.mlp->layers[l];
            const std::string p = "layer" + std::to_string(l) + ".";
            t[p + "weight"] = tensor(L.weight);
            t[p + "bias"] = tensor(L.bias);
            if (L.has_norm()) {
                t[p + "gamma"] = tensor(L.gamma);
                t[p + "beta"] = tensor(L.beta);
                t[p + "running_mean"] = tensor(L.running_mean);
                t[p + "running_var"] = tensor(L.running_var);
            }
        }
    } else {
        t["weight"] = tensor(m.weight);
        t["bias"] = tensor(m.bias);
    }
    nlohmann::json j = {{"format", "topoeeg.classifier"},
                        {"version", kModelFormatVersion},
                        {"method", classifier_name(m.method)},
                        {"classes", m.classes},
                        {"tensors", t}};
    if (m.mlp) {
        j["mlp"] = {{"layers", m.mlp->layers.size()},
                    {"dropout", m.mlp->dropout},
                    {"bn_momentum", m.mlp->bn_momentum},
                    {"bn_eps", m.mlp->bn_eps}};
    }
    return j;
}

inline TrainedClassifier classifier_from_json(const nlohmann::json& j) {
    using classify_detail::untensor;
    try {
        if (j.at("format") != "topoeeg.classifier") throw ParseError("not a topoeeg classifier container");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw ParseError("unsupported model version " + j.at("version").dump());
        TrainedClassifier m;
        m.method = parse_classifier(j.at("method").get<std::string>());
        m.classes = j.at("classes").get<std::vector<int>>();
        const auto& t = j.at("tensors");
        if (m.method == ClassifierMethod::GaussianNB) {
            m.nb_mean = untensor(t.at("nb_mean"));
            m.nb_var = untensor(t.at("nb_var"));
            m.nb_log_prior = untensor(t.at("nb_log_prior"));
        } else if (m.method == ClassifierMethod::DeepMLP) {
            MlpModel net;
            const auto& meta = j.at("mlp");
            net.dropout = meta.at("dropout").get<double>();
            net.bn_momentum = meta.at("bn_momentum").get<double>();
            net.bn_eps = meta.at("bn_eps").get<double>();
            const auto nl = meta.at("layers").get<std::size_t>();
            for (std::size_t l = 0; l < nl; ++l) {
                const std::string p = "layer" + std::to_string(l) + ".";
                MlpLayer L;
                L.weight = untensor(t.at(p + "weight"));
                L.bias = untensor(t.at(p + "bias"));
                if (t.contains(p + "gamma")) {
                    L.gamma = untensor(t.at(p + "gamma"));
                    L.beta = untensor(t.at(p + "beta"));
                    L.running_mean = untensor(t.at(p + "running_mean"));
                    L.running_var = untensor(t.at(p + "running_var"));
                }
                net.layers.push_back(std::move(L));
            }
            m.mlp = std::move(net);
        } else {
            m.weight = untensor(t.at("weight"));
            m.bias = untensor(t.at("bias"));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model container: ") + e.what());
    }
}

}  // namespace topoeeg
