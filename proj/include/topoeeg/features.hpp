#pragma once

// Persistence-diagram vectorizers and ordinal-pattern entropy baselines.

#include "topoeeg/persistence.hpp"

#include <json.hpp>

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace topoeeg {

// ---------------------------------------------------------------------------
// Carlsson coordinates

/// (f1..f5) with d_max the largest death in the diagram:
///   f1 = sum b (d-b),            f2 = sum (d_max-d)(d-b),
///   f3 = sum b^2 (d-b)^4,        f4 = sum (d_max-d)^2 (d-b)^4,
///   f5 = max (d-b).
/// The empty diagram maps to zeros.
inline std::array<double, 5> carlsson_coordinates(const PersistenceDiagram& pd) {
    std::array<double, 5> f{};
    if (pd.empty()) return f;
    double dmax = -std::numeric_limits<double>::infinity();
    for (const auto& p : pd.pairs) dmax = std::max(dmax, p.death);
    f[4] = 0.0;
    for (const auto& p : pd.pairs) {
        const double l = p.lifetime();
        const double l4 = l * l * l * l;
        const double gap = dmax - p.death;
        f[0] += p.birth * l;
        f[1] += gap * l;
        f[2] += p.birth * p.birth * l4;
        f[3] += gap * gap * l4;
        f[4] = std::max(f[4], l);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Persistence images

enum class ImageCoordinates { BirthDeath, BirthPersistence };

struct ImageBounds {
    double x_min, x_max, y_min, y_max;
};

struct PersistenceImageParams {
    int grid_size = 20;
    std::optional<double> sigma;          // auto: 0.1 x training lifetime range
    std::optional<ImageBounds> bounds;    // auto: training bounding box padded by 3 sigma
    ImageCoordinates coordinates = ImageCoordinates::BirthDeath;
};

/// Training-derived state of a persistence image vectorizer.
struct ImageFrame {
    int grid_size = 20;
    double sigma = 1.0;
    ImageBounds bounds{0, 1, 0, 1};
    double max_lifetime = 1.0;  // weight normalizer
    ImageCoordinates coordinates = ImageCoordinates::BirthDeath;
};

namespace feature_detail {

inline std::pair<double, double> image_point(const PersistencePair& p, ImageCoordinates c) {
    return c == ImageCoordinates::BirthDeath ? std::pair{p.birth, p.death} : std::pair{p.birth, p.lifetime()};
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace feature_detail

inline ImageFrame fit_image_frame(std::span<const PersistenceDiagram> train, const PersistenceImageParams& params) {
    if (params.grid_size < 1) throw ValidationError("persistence image grid_size must be >= 1");
    ImageFrame fr;
    fr.grid_size = params.grid_size;
    fr.coordinates = params.coordinates;

    double lmin = std::numeric_limits<double>::infinity(), lmax = 0.0;
    double xmin = lmin, xmax = -lmin, ymin = lmin, ymax = -lmin;
    bool any = false;
    for (const auto& pd : train) {
        for (const auto& p : pd.pairs) {
            any = true;
            lmin = std::min(lmin, p.lifetime());
            lmax = std::max(lmax, p.lifetime());
            const auto [x, y] = feature_detail::image_point(p, params.coordinates);
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    fr.max_lifetime = any && lmax > 0.0 ? lmax : 1.0;
    if (params.sigma) {
        fr.sigma = *params.sigma;
    } else {
        const double range = any ? lmax - lmin : 0.0;
        fr.sigma = range > 0.0 ? 0.1 * range : 0.1 * fr.max_lifetime;
    }
    if (!(fr.sigma > 0.0)) throw ValidationError("persistence image sigma must be > 0");

    if (params.bounds) {
        fr.bounds = *params.bounds;
    } else if (any) {
        const double pad = 3.0 * fr.sigma;
        fr.bounds = {xmin - pad, xmax + pad, ymin - pad, ymax + pad};
    } else {
        fr.bounds = {-3.0 * fr.sigma, 3.0 * fr.sigma, -3.0 * fr.sigma, 3.0 * fr.sigma};
    }
    const auto& b = fr.bounds;
    if (!(b.x_max > b.x_min) || !(b.y_max > b.y_min))
        throw ValidationError("persistence image: degenerate (zero-area) bounds");
    return fr;
}

/// grid_size^2 vector, row-major with rows along the vertical (death or
/// persistence) axis. Each point adds a Gaussian weighted by lifetime/L_max,
/// integrated exactly over every pixel.
inline Vector persistence_image(const PersistenceDiagram& pd, const ImageFrame& fr) {
    using feature_detail::normal_cdf;
    const int g = fr.grid_size;
    const auto& b = fr.bounds;
    if (!(b.x_max > b.x_min) || !(b.y_max > b.y_min))
        throw ValidationError("persistence image: degenerate (zero-area) bounds");
    Vector img = Vector::Zero(static_cast<Eigen::Index>(g) * g);
    const double dx = (b.x_max - b.x_min) / g, dy = (b.y_max - b.y_min) / g;
    std::vector<double> mx(static_cast<std::size_t>(g)), my(static_cast<std::size_t>(g));
    for (const auto& p : pd.pairs) {
        const double w = p.lifetime() / fr.max_lifetime;
        if (w == 0.0) continue;
        const auto [x, y] = feature_detail::image_point(p, fr.coordinates);
        for (int i = 0; i < g; ++i) {
            const double x0 = b.x_min + i * dx, y0 = b.y_min + i * dy;
            mx[static_cast<std::size_t>(i)] = normal_cdf((x0 + dx - x) / fr.sigma) - normal_cdf((x0 - x) / fr.sigma);
            my[static_cast<std::size_t>(i)] = normal_cdf((y0 + dy - y) / fr.sigma) - normal_cdf((y0 - y) / fr.sigma);
        }
        for (int r = 0; r < g; ++r)
            for (int c = 0; c < g; ++c)
                img[static_cast<Eigen::Index>(r) * g + c] += w * my[static_cast<std::size_t>(r)] * mx[static_cast<std::size_t>(c)];
    }
    return img;
}

// ---------------------------------------------------------------------------
// Template functions

struct TemplateParams {
    int d = 5;           // grid subdivisions per axis
    double delta = 0.05; // padding fraction
    int degree = 3;      // polynomial max total degree
};

/// Tent grid over (birth, lifetime), fitted on training diagrams.
struct TentFrame {
    int d = 5;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

    double dx() const { return (x1 - x0) / d; }
    double dy() const { return (y1 - y0) / d; }
};

inline TentFrame fit_tent_frame(std::span<const PersistenceDiagram> train, const TemplateParams& params) {
    if (params.d < 1) throw ValidationError("template grid subdivisions must be >= 1");
    if (params.delta < 0.0) throw ValidationError("template padding must be >= 0");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    bool any = false;
    for (const auto& pd : train)
        for (const auto& p : pd.pairs) {
            any = true;
            xmin = std::min(xmin, p.birth);
            xmax = std::max(xmax, p.birth);
            ymin = std::min(ymin, p.lifetime());
            ymax = std::max(ymax, p.lifetime());
        }
    if (!any) xmin = xmax = ymin = ymax = 0.0;
    auto axis = [&](double lo, double hi) -> std::pair<double, double> {
        if (!(hi > lo)) {
            const double c = 0.5 * (lo + hi);
            return {c - 0.5, c + 0.5};  // degenerate: unit box
        }
        const double pad = params.delta * (hi - lo);
        return {lo - pad, hi + pad};
    };
    TentFrame fr;
    fr.d = params.d;
    std::tie(fr.x0, fr.x1) = axis(xmin, xmax);
    std::tie(fr.y0, fr.y1) = axis(ymin, ymax);
    return fr;
}

/// (d+1)^2 tents centered on the grid nodes; feature (i, j) at index i*(d+1)+j,
/// i along birth and j along lifetime.
inline Vector tent_features(const PersistenceDiagram& pd, const TentFrame& fr) {
    const int n = fr.d + 1;
    Vector out = Vector::Zero(static_cast<Eigen::Index>(n) * n);
    const double hx = fr.dx(), hy = fr.dy();
    for (const auto& p : pd.pairs) {
        const double x = p.birth, y = p.lifetime();
        for (int i = 0; i < n; ++i) {
            const double ux = std::abs(x - (fr.x0 + i * hx)) / hx;
            if (ux >= 1.0) continue;
            for (int j = 0; j < n; ++j) {
                const double uy = std::abs(y - (fr.y0 + j * hy)) / hy;
                const double v = 1.0 - std::max(ux, uy);
                if (v > 0.0) out[static_cast<Eigen::Index>(i) * n + j] += v;
            }
        }
    }
    return out;
}

/// Exponent pairs (j, k), 1 <= j+k <= degree, in lexicographic order.
inline std::vector<std::pair<int, int>> polynomial_exponents(int degree) {
    if (degree < 1) throw ValidationError("polynomial degree must be >= 1");
    std::vector<std::pair<int, int>> e;
    for (int j = 0; j <= degree; ++j)
        for (int k = 0; j + k <= degree; ++k)
            if (j + k >= 1) e.emplace_back(j, k);
    return e;
}

/// Feature (j, k) = sum over points of birth^j * lifetime^k.
inline Vector polynomial_features(const PersistenceDiagram& pd, int degree = 3) {
    const auto ex = polynomial_exponents(degree);
    Vector out = Vector::Zero(static_cast<Eigen::Index>(ex.size()));
    for (const auto& p : pd.pairs) {
        const double b = p.birth, l = p.lifetime();
        for (std::size_t i = 0; i < ex.size(); ++i)
            out[static_cast<Eigen::Index>(i)] += std::pow(b, ex[i].first) * std::pow(l, ex[i].second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ordinal-pattern entropies

struct EntropyParams {
    int m = 4;          // embedding dimension
    int tau = 1;        // delay
    double alpha = 2.0; // Renyi order
    double q = 2.0;     // Tsallis order
};

namespace entropy_detail {

inline std::size_t factorial(int m) {
    std::size_t f = 1;
    for (int i = 2; i <= m; ++i) f *= static_cast<std::size_t>(i);
    return f;
}

/// Lehmer code of the stable argsort of one embedded window.
inline std::size_t pattern_code(std::span<const double> w) {
    const std::size_t m = w.size();
    std::array<std::size_t, 16> idx{};
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m),
                     [&](std::size_t a, std::size_t b) { return w[a] < w[b]; });
    std::size_t code = 0;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t smaller = 0;
        for (std::size_t j = i + 1; j < m; ++j)
            if (idx[j] < idx[i]) ++smaller;
        code = code * (m - i) + smaller;
    }
    return code;
}

inline double shannon(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

}  // namespace entropy_detail

struct OrdinalDistributions {
    std::vector<double> plain;     // relative pattern frequencies
    std::vector<double> weighted;  // frequencies weighted by window variance
};

inline OrdinalDistributions ordinal_distributions(std::span<const double> x, int m, int tau) {
    using namespace entropy_detail;
    if (m < 2 || m > 10) throw ValidationError("entropy: embedding dimension must be in [2, 10]");
    if (tau < 1) throw ValidationError("entropy: delay must be >= 1");
    const auto span_len = static_cast<std::size_t>((m - 1) * tau);
    if (x.size() < static_cast<std::size_t>(m * tau + 1))
        throw ValidationError("entropy: signal of length " + std::to_string(x.size()) + " is too short (need >= " +
                              std::to_string(m * tau + 1) + ")");
    const std::size_t n_pat = factorial(m);
    OrdinalDistributions d{std::vector<double>(n_pat, 0.0), std::vector<double>(n_pat, 0.0)};
    std::vector<double> w(static_cast<std::size_t>(m));
    double total_w = 0.0, count = 0.0;
    for (std::size_t t = 0; t + span_len < x.size(); ++t) {
        double mean = 0.0;
        for (int k = 0; k < m; ++k) {
            w[static_cast<std::size_t>(k)] = x[t + static_cast<std::size_t>(k * tau)];
            mean += w[static_cast<std::size_t>(k)];
        }
        mean /= m;
        double var = 0.0;
        for (double v : w) var += (v - mean) * (v - mean);
        var /= m;
        const std::size_t code = pattern_code(w);
        d.plain[code] += 1.0;
        d.weighted[code] += var;
        total_w += var;
        count += 1.0;
    }
    for (auto& v : d.plain) v /= count;
    if (total_w > 0.0) {
        for (auto& v : d.weighted) v /= total_w;
    } else {
        d.weighted = d.plain;
    }
    return d;
}

/// (weighted permutation entropy, Renyi, Tsallis, statistical complexity),
/// each normalized to [0, 1] by its value for the uniform pattern distribution.
inline std::array<double, 4> entropy_features(std::span<const double> x, const EntropyParams& params = {}) {
    using namespace entropy_detail;
    const auto d = ordinal_distributions(x, params.m, params.tau);
    const auto n = static_cast<double>(d.plain.size());
    const double log_n = std::log(n);

    const double wpe = shannon(d.weighted) / log_n;

    double sum_a = 0.0, sum_q = 0.0;
    for (double p : d.plain) {
        if (p > 0.0) {
            sum_a += std::pow(p, params.alpha);
            sum_q += std::pow(p, params.q);
        }
    }
    const double renyi = params.alpha == 1.0 ? shannon(d.plain) / log_n : std::log(sum_a) / (1.0 - params.alpha) / log_n;
    const double tsallis_max = params.q == 1.0 ? log_n : (1.0 - std::pow(n, 1.0 - params.q)) / (params.q - 1.0);
    const double tsallis = (params.q == 1.0 ? shannon(d.plain) : (1.0 - sum_q) / (params.q - 1.0)) / tsallis_max;

    // Jensen-Shannon disequilibrium against the uniform distribution.
    const double h = shannon(d.plain) / log_n;
    std::vector<double> mid(d.plain.size());
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (d.plain[i] + 1.0 / n);
    const double js = shannon(mid) - 0.5 * shannon(d.plain) - 0.5 * log_n;
    const double q0 = -2.0 / ((n + 1.0) / n * std::log(n + 1.0) - 2.0 * std::log(2.0 * n) + log_n);
    const double complexity = h * q0 * js;

    auto clean = [](double v) { return std::abs(v) < 1e-15 ? 0.0 : v; };
    return {clean(wpe), clean(renyi), clean(tsallis), clean(complexity)};
}

// ---------------------------------------------------------------------------
// Featurizer facade

enum class FeatureKind { Carlsson, PersistenceImage, Tent, Polynomial, Entropy };

inline std::string feature_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::Carlsson: return "carlsson";
        case FeatureKind::PersistenceImage: return "persistence_image";
        case FeatureKind::Tent: return "tent";
        case FeatureKind::Polynomial: return "polynomial";
        case FeatureKind::Entropy: return "entropy";
    }
    return "?";
}

inline FeatureKind parse_feature(std::string_view s) {
    const auto v = to_lower(trim(s));
    for (auto k : {FeatureKind::Carlsson, FeatureKind::PersistenceImage, FeatureKind::Tent, FeatureKind::Polynomial,
                   FeatureKind::Entropy})
        if (feature_name(k) == v) return k;
    if (v == "image" || v == "pi") return FeatureKind::PersistenceImage;
    if (v == "poly") return FeatureKind::Polynomial;
    throw ValidationError("unknown feature '" + std::string(s) + "'");
}

struct FeatureSpec {
    FeatureKind kind = FeatureKind::Carlsson;
    PersistenceImageParams image;
    TemplateParams templ;
    EntropyParams entropy;
    EssentialPolicy essential = EssentialPolicy::PairWithGlobalMax;
};

/// A featurizer with its training-derived normalizers frozen.
struct FittedFeaturizer {
    FeatureSpec spec;
    ImageFrame image;
    TentFrame tent;

    bool uses_signal() const { return spec.kind == FeatureKind::Entropy; }

    std::vector<std::string> names() const {
        std::vector<std::string> n;
        switch (spec.kind) {
            case FeatureKind::Carlsson:
                for (int i = 1; i <= 5; ++i) n.push_back("carlsson_f" + std::to_string(i));
                break;
            case FeatureKind::PersistenceImage:
                for (int r = 0; r < image.grid_size; ++r)
                    for (int c = 0; c < image.grid_size; ++c)
                        n.push_back("pi_r" + std::to_string(r) + "c" + std::to_string(c));
                break;
            case FeatureKind::Tent:
                for (int i = 0; i <= tent.d; ++i)
                    for (int j = 0; j <= tent.d; ++j) n.push_back("tent_" + std::to_string(i) + "_" + std::to_string(j));
                break;
            case FeatureKind::Polynomial:
                for (const auto& [j, k] : polynomial_exponents(spec.templ.degree))
                    n.push_back("poly_" + std::to_string(j) + "_" + std::to_string(k));
                break;
            case FeatureKind::Entropy: n = {"wpe", "renyi", "tsallis", "complexity"}; break;
        }
        return n;
    }

    Vector transform(const PersistenceDiagram& pd) const {
        switch (spec.kind) {
            case FeatureKind::Carlsson: {
                const auto f = carlsson_coordinates(pd);
                return to_eigen(f);
            }
            case FeatureKind::PersistenceImage: return persistence_image(pd, image);
            case FeatureKind::Tent: return tent_features(pd, tent);
            case FeatureKind::Polynomial: return polynomial_features(pd, spec.templ.degree);
            case FeatureKind::Entropy: break;
        }
        throw ValidationError("entropy features are computed from the signal, not a diagram");
    }

    Vector transform_signal(std::span<const double> x) const {
        if (!uses_signal()) return transform(sublevel_diagram(x, spec.essential));
        return to_eigen(entropy_features(x, spec.entropy));
    }

    nlohmann::json state() const {
        return {{"kind", feature_name(spec.kind)},
                {"image", {image.grid_size, image.sigma, image.bounds.x_min, image.bounds.x_max, image.bounds.y_min,
                           image.bounds.y_max, image.max_lifetime}},
                {"tent", {tent.d, tent.x0, tent.x1, tent.y0, tent.y1}}};
    }
};

/// Fits training-set normalizers (image bounds, sigma, L_max, tent box).
inline FittedFeaturizer fit_featurizer(const FeatureSpec& spec, std::span<const PersistenceDiagram> train) {
    FittedFeaturizer f;
    f.spec = spec;
    if (spec.kind == FeatureKind::PersistenceImage) f.image = fit_image_frame(train, spec.image);
    if (spec.kind == FeatureKind::Tent) f.tent = fit_tent_frame(train, spec.templ);
    if (spec.kind == FeatureKind::Polynomial) (void)polynomial_exponents(spec.templ.degree);
    return f;
}

}  // namespace topoeeg
