#pragma once

// Clinical frequency bands, Butterworth band-pass design and zero-phase
// filtering, plus column standardization.

#include "topoeeg/core.hpp"

#include <algorithm>
#include <array>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace topoeeg {

enum class Band { Delta, Theta, Alpha, Beta, LowGamma, HighGamma, Broadband };

inline constexpr std::array<Band, 7> kAllBands = {Band::Delta,    Band::Theta,     Band::Alpha,    Band::Beta,
                                                  Band::LowGamma, Band::HighGamma, Band::Broadband};

struct BandEdges {
    double low;
    double high;
};

/// Edges in Hz; nullopt for Broadband.
inline std::optional<BandEdges> band_edges(Band b) {
    switch (b) {
        case Band::Delta: return BandEdges{0.5, 4.0};
        case Band::Theta: return BandEdges{4.0, 8.0};
        case Band::Alpha: return BandEdges{8.0, 13.0};
        case Band::Beta: return BandEdges{13.0, 30.0};
        case Band::LowGamma: return BandEdges{30.0, 50.0};
        case Band::HighGamma: return BandEdges{50.0, 100.0};
        case Band::Broadband: return std::nullopt;
    }
    return std::nullopt;
}

inline std::string band_name(Band b) {
    switch (b) {
        case Band::Delta: return "delta";
        case Band::Theta: return "theta";
        case Band::Alpha: return "alpha";
        case Band::Beta: return "beta";
        case Band::LowGamma: return "low_gamma";
        case Band::HighGamma: return "high_gamma";
        case Band::Broadband: return "broadband";
    }
    return "?";
}

inline Band parse_band(std::string_view s) {
    std::string v = to_lower(trim(s));
    std::replace(v.begin(), v.end(), ' ', '_');
    std::replace(v.begin(), v.end(), '-', '_');
    for (Band b : kAllBands)
        if (band_name(b) == v) return b;
    if (v == "lowgamma") return Band::LowGamma;
    if (v == "highgamma") return Band::HighGamma;
    if (v == "raw") return Band::Broadband;
    throw ValidationError("unknown band '" + std::string(s) + "'");
}

inline bool band_applicable(Band b, double sample_rate) {
    const auto e = band_edges(b);
    return !e || e->high < 0.5 * sample_rate;
}

/// Second-order section, transposed direct form II; a0 == 1.
struct Biquad {
    double b0, b1, b2, a1, a2;
};

/// Butterworth band-pass as cascaded biquads. `order` is the low-pass
/// prototype order, so the band-pass has 2*order poles (scipy's convention).
struct ButterworthBandpass {
    int order = 4;
    std::vector<Biquad> sections;

    /// Frequency response magnitude at `freq` Hz.
    double magnitude(double freq, double fs) const {
        const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * freq / fs);
        const std::complex<double> zi = 1.0 / z;
        std::complex<double> h = 1.0;
        for (const auto& s : sections)
            h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
        return std::abs(h);
    }
};

inline ButterworthBandpass design_butterworth_bandpass(double low, double high, double fs, int order = 4) {
    using cd = std::complex<double>;
    if (!(low > 0.0) || !(low < high)) throw ValidationError("band-pass edges must satisfy 0 < low < high");
    if (high >= 0.5 * fs)
        throw ValidationError("inapplicable band: upper edge " + format_double(high) + " Hz >= Nyquist " +
                              format_double(0.5 * fs) + " Hz");
    const double pi = std::numbers::pi;
    // Pre-warped analog edges.
    const double w1 = 2.0 * fs * std::tan(pi * low / fs);
    const double w2 = 2.0 * fs * std::tan(pi * high / fs);
    const double bw = w2 - w1;
    const double w0sq = w1 * w2;

    std::vector<cd> zpoles;
    for (int k = 0; k < order; ++k) {
        const cd p = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
        const cd a = p * bw / 2.0;
        const cd root = std::sqrt(a * a - w0sq);
        for (const cd s : {a + root, a - root}) zpoles.push_back((2.0 * fs + s) / (2.0 * fs - s));
    }

    // Upper-half-plane poles each form a conjugate-pair section; real poles are paired up.
    std::vector<cd> upper;
    std::vector<double> reals;
    for (const auto& z : zpoles) {
        if (std::abs(z.imag()) < 1e-12 * std::max(1.0, std::abs(z))) reals.push_back(z.real());
        else if (z.imag() > 0) upper.push_back(z);
    }
    std::sort(reals.begin(), reals.end());

    ButterworthBandpass f;
    f.order = order;
    // Each section carries one zero at z=1 and one at z=-1 (order zeros at DC, order at Nyquist).
    for (const auto& z : upper) f.sections.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2)
        f.sections.push_back({1.0, 0.0, -1.0, -(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]});
    if (reals.size() % 2 != 0) throw NumericError("butterworth design produced an unpaired real pole");

    // Unit gain at the (digital image of the) geometric center frequency.
    const double wc = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs));
    const double g = f.magnitude(wc * fs / (2.0 * pi), fs);
    f.sections.front().b0 /= g;
    f.sections.front().b1 /= g;
    f.sections.front().b2 /= g;
    return f;
}

namespace signal_detail {

/// Steady-state initial conditions for a unit step input, per section.
inline std::vector<std::array<double, 2>> sos_zi(const std::vector<Biquad>& sos) {
    std::vector<std::array<double, 2>> zi;
    double scale = 1.0;
    for (const auto& s : sos) {
        const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        const double z2 = s.b2 - s.a2 * gain;
        const double z1 = s.b1 - s.a1 * gain + z2;
        zi.push_back({scale * z1, scale * z2});
        scale *= gain;
    }
    return zi;
}

inline void sos_filter(const std::vector<Biquad>& sos, const std::vector<std::array<double, 2>>& zi, double x0,
                       std::vector<double>& x) {
    for (std::size_t k = 0; k < sos.size(); ++k) {
        const auto& s = sos[k];
        double z1 = zi[k][0] * x0, z2 = zi[k][1] * x0;
        for (double& v : x) {
            const double in = v;
            const double y = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * y + z2;
            z2 = s.b2 * in - s.a2 * y;
            v = y;
        }
    }
}

}  // namespace signal_detail

/// Forward-backward SOS filtering of one series. The series is extended by
/// odd reflection of `padlen` samples at each end and steady-state initial
/// conditions are used, then the padding is trimmed.
inline std::vector<double> sosfiltfilt(const std::vector<Biquad>& sos, std::span<const double> x, std::size_t padlen) {
    using namespace signal_detail;
    const std::size_t n = x.size();
    padlen = std::min(padlen, n > 0 ? n - 1 : 0);
    std::vector<double> ext;
    ext.reserve(n + 2 * padlen);
    for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    const auto zi = sos_zi(sos);
    sos_filter(sos, zi, ext.front(), ext);
    std::reverse(ext.begin(), ext.end());
    sos_filter(sos, zi, ext.front(), ext);
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(padlen), ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

/// Zero-phase 4th-order Butterworth band-pass applied to every row
/// (channel) of `segment`. Broadband returns the input unchanged.
inline Matrix bandpass(const Eigen::Ref<const Matrix>& segment, Band band, double sample_rate, int order = 4) {
    const auto edges = band_edges(band);
    if (!edges) return segment;
    if (!band_applicable(band, sample_rate))
        throw ValidationError("inapplicable band '" + band_name(band) + "': upper edge " + format_double(edges->high) +
                              " Hz >= Nyquist " + format_double(0.5 * sample_rate) + " Hz");
    const auto min_samples = static_cast<Eigen::Index>(8 * order);
    if (segment.cols() < min_samples)
        throw ValidationError("bandpass needs at least " + std::to_string(min_samples) + " samples, got " +
                              std::to_string(segment.cols()));
    const auto filt = design_butterworth_bandpass(edges->low, edges->high, sample_rate, order);
    // Reflect-pad by 3x the number of coefficients of the full band-pass (2*order + 1).
    const auto padlen = static_cast<std::size_t>(3 * (2 * order + 1));
    Matrix out(segment.rows(), segment.cols());
    std::vector<double> row(static_cast<std::size_t>(segment.cols()));
    for (Eigen::Index c = 0; c < segment.rows(); ++c) {
        for (Eigen::Index t = 0; t < segment.cols(); ++t) row[static_cast<std::size_t>(t)] = segment(c, t);
        const auto y = sosfiltfilt(filt.sections, row, padlen);
        for (Eigen::Index t = 0; t < segment.cols(); ++t) out(c, t) = y[static_cast<std::size_t>(t)];
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Per-column z-score fitted on training rows. Zero-variance columns are only centered.
struct Scaler {
    RowVector mean;
    RowVector scale;  // 1 where the column has zero variance

    Matrix apply(const Eigen::Ref<const Matrix>& x) const {
        if (x.cols() != mean.size())
            throw ValidationError("scaler expects " + std::to_string(mean.size()) + " columns, got " +
                                  std::to_string(x.cols()));
        return (x.rowwise() - mean).array().rowwise() / scale.array();
    }
};

inline Scaler standardize_fit(const Eigen::Ref<const Matrix>& train) {
    if (train.rows() < 2) throw ValidationError("standardize_fit needs at least 2 rows");
    Scaler s;
    s.mean = train.colwise().mean();
    const Matrix centered = train.rowwise() - s.mean;
    s.scale = (centered.array().square().colwise().sum() / static_cast<double>(train.rows())).sqrt();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
        if (!(s.scale[j] > 1e-12 * std::abs(s.mean[j]))) s.scale[j] = 1.0;
    return s;
}

inline Matrix standardize_apply(const Scaler& s, const Eigen::Ref<const Matrix>& x) { return s.apply(x); }

}  // namespace topoeeg
