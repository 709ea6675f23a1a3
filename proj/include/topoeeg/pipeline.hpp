#pragma once

// Experiment configs, the dimension-reduced and multichannel pipelines,
// the ablation runner and report generation.

#include "topoeeg/classify.hpp"
#include "topoeeg/dimred.hpp"
#include "topoeeg/features.hpp"
#include "topoeeg/ingest.hpp"
#include "topoeeg/signal.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace topoeeg {

enum class PipelineKind { DimReduced, Multichannel };

inline std::string pipeline_name(PipelineKind p) { return p == PipelineKind::DimReduced ? "dim_reduced" : "multichannel"; }

inline PipelineKind parse_pipeline(std::string_view s) {
    auto v = to_lower(trim(s));
    std::replace(v.begin(), v.end(), '-', '_');
    if (v == "dim_reduced" || v == "dimreduced" || v == "i" || v == "1") return PipelineKind::DimReduced;
    if (v == "multichannel" || v == "ii" || v == "2") return PipelineKind::Multichannel;
    throw ValidationError("unknown pipeline '" + std::string(s) + "'");
}

inline constexpr double kGateThreshold = 0.10;
inline constexpr int kMaxKBest = 500;

struct ExperimentConfig {
    PipelineKind pipeline = PipelineKind::DimReduced;
    Band band = Band::Broadband;
    std::optional<ReducerSpec> reducer = ReducerSpec{};  // DimReduced only
    FeatureSpec feature;
    ClassifierSpec classifier;
    int k_best = kMaxKBest;  // Multichannel only
    std::uint64_t split_seed = 0;
    double train_fraction = 0.8;
    bool group_by_patient = false;

    void validate() const {
        if (pipeline == PipelineKind::DimReduced && !reducer)
            throw ValidationError("dim_reduced config needs a reducer");
        if (pipeline == PipelineKind::Multichannel) {
            if (reducer) throw ValidationError("multichannel config must not carry a reducer");
            if (k_best < 1 || k_best > kMaxKBest)
                throw ValidationError("k_best must be in [1, " + std::to_string(kMaxKBest) + "], got " + std::to_string(k_best));
        }
        if (classifier.epochs < 1) throw ValidationError("classifier.epochs must be >= 1");
        if (classifier.l2() < 0) throw ValidationError("classifier.lambda must be >= 0");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must be in (0, 1)");
    }

    std::string dimred_label() const { return reducer ? reducer_name(reducer->method) : "none"; }

    std::string label() const {
        return pipeline_name(pipeline) + "/" + band_name(band) + "/" + dimred_label() + "/" + feature_name(feature.kind) +
               "/" + classifier_name(classifier.method);
    }
};

// ---------------------------------------------------------------------------
// Config JSON

namespace pipeline_detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

inline std::string coordinates_name(ImageCoordinates c) {
    return c == ImageCoordinates::BirthDeath ? "birth_death" : "birth_persistence";
}

inline ImageCoordinates parse_coordinates(const std::string& s) {
    if (s == "birth_death") return ImageCoordinates::BirthDeath;
    if (s == "birth_persistence") return ImageCoordinates::BirthPersistence;
    throw ValidationError("unknown image coordinates '" + s + "'");
}

inline std::string essential_name(EssentialPolicy e) {
    return e == EssentialPolicy::PairWithGlobalMax ? "pair_with_global_max" : "drop";
}

inline EssentialPolicy parse_essential(const std::string& s) {
    if (s == "pair_with_global_max") return EssentialPolicy::PairWithGlobalMax;
    if (s == "drop") return EssentialPolicy::Drop;
    throw ValidationError("unknown essential policy '" + s + "'");
}

inline nlohmann::json reducer_to_json(const ReducerSpec& r) {
    return {{"method", reducer_name(r.method)},     {"target_dim", r.target_dim}, {"neighbors", r.neighbors},
            {"perplexity", r.perplexity},           {"max_iter", r.max_iter},     {"tol", r.tol},
            {"max_samples", r.max_samples},         {"tsne_pca_init", r.tsne_pca_init},
            {"tsne_exaggeration_iters", r.tsne_exaggeration_iters}, {"tsne_exaggeration", r.tsne_exaggeration}};
}

inline ReducerSpec reducer_from_json(const nlohmann::json& j) {
    ReducerSpec r;
    if (j.is_string()) {
        r.method = parse_reducer(j.get<std::string>());
        return r;
    }
    r.method = parse_reducer(j.at("method").get<std::string>());
    read_opt(j, "target_dim", r.target_dim);
    read_opt(j, "neighbors", r.neighbors);
    read_opt(j, "perplexity", r.perplexity);
    read_opt(j, "max_iter", r.max_iter);
    read_opt(j, "tol", r.tol);
    read_opt(j, "max_samples", r.max_samples);
    read_opt(j, "tsne_pca_init", r.tsne_pca_init);
    read_opt(j, "tsne_exaggeration_iters", r.tsne_exaggeration_iters);
    read_opt(j, "tsne_exaggeration", r.tsne_exaggeration);
    return r;
}

inline nlohmann::json feature_to_json(const FeatureSpec& f) {
    nlohmann::json j = {{"kind", feature_name(f.kind)},
                        {"grid_size", f.image.grid_size},
                        {"sigma", nullptr},
                        {"bounds", nullptr},
                        {"coordinates", coordinates_name(f.image.coordinates)},
                        {"d", f.templ.d},
                        {"delta", f.templ.delta},
                        {"degree", f.templ.degree},
                        {"m", f.entropy.m},
                        {"tau", f.entropy.tau},
                        {"alpha", f.entropy.alpha},
                        {"q", f.entropy.q},
                        {"essential", essential_name(f.essential)}};
    if (f.image.sigma) j["sigma"] = *f.image.sigma;
    if (f.image.bounds) {
        const auto& b = *f.image.bounds;
        j["bounds"] = {b.x_min, b.x_max, b.y_min, b.y_max};
    }
    return j;
}

inline FeatureSpec feature_from_json(const nlohmann::json& j) {
    FeatureSpec f;
    if (j.is_string()) {
        f.kind = parse_feature(j.get<std::string>());
        return f;
    }
    f.kind = parse_feature(j.at("kind").get<std::string>());
    read_opt(j, "grid_size", f.image.grid_size);
    if (j.contains("sigma") && !j.at("sigma").is_null()) f.image.sigma = j.at("sigma").get<double>();
    if (j.contains("bounds") && !j.at("bounds").is_null()) {
        const auto b = j.at("bounds").get<std::vector<double>>();
        if (b.size() != 4) throw ValidationError("feature.bounds must be [x_min, x_max, y_min, y_max]");
        f.image.bounds = ImageBounds{b[0], b[1], b[2], b[3]};
    }
    if (j.contains("coordinates")) f.image.coordinates = parse_coordinates(j.at("coordinates").get<std::string>());
    read_opt(j, "d", f.templ.d);
    read_opt(j, "delta", f.templ.delta);
    read_opt(j, "degree", f.templ.degree);
    read_opt(j, "m", f.entropy.m);
    read_opt(j, "tau", f.entropy.tau);
    read_opt(j, "alpha", f.entropy.alpha);
    read_opt(j, "q", f.entropy.q);
    if (j.contains("essential")) f.essential = parse_essential(j.at("essential").get<std::string>());
    return f;
}

inline nlohmann::json classifier_spec_to_json(const ClassifierSpec& c) {
    return {{"method", classifier_name(c.method)},
            {"lambda", c.l2()},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"tol", c.tol},
            {"mlp_learning_rate", c.mlp_learning_rate},
            {"hidden", c.hidden},
            {"dropout", c.dropout},
            {"batch_size", c.batch_size},
            {"patience", c.patience},
            {"validation_fraction", c.validation_fraction}};
}

inline ClassifierSpec classifier_spec_from_json(const nlohmann::json& j, PipelineKind pipeline) {
    ClassifierSpec c;
    // Multichannel inputs are wider; the MLP default dropout is raised there.
    if (pipeline == PipelineKind::Multichannel) c.dropout = 0.5;
    if (j.is_string()) {
        c.method = parse_classifier(j.get<std::string>());
        return c;
    }
    c.method = parse_classifier(j.at("method").get<std::string>());
    if (j.contains("lambda") && !j.at("lambda").is_null()) c.lambda = j.at("lambda").get<double>();
    read_opt(j, "learning_rate", c.learning_rate);
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "tol", c.tol);
    read_opt(j, "mlp_learning_rate", c.mlp_learning_rate);
    read_opt(j, "hidden", c.hidden);
    read_opt(j, "dropout", c.dropout);
    read_opt(j, "batch_size", c.batch_size);
    read_opt(j, "patience", c.patience);
    read_opt(j, "validation_fraction", c.validation_fraction);
    return c;
}

}  // namespace pipeline_detail

/// Canonical form: every field present, keys sorted. Two configs that mean
/// the same thing serialize identically.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    using namespace pipeline_detail;
    nlohmann::json j = {{"pipeline", pipeline_name(c.pipeline)},
                        {"band", band_name(c.band)},
                        {"reducer", nullptr},
                        {"feature", feature_to_json(c.feature)},
                        {"classifier", classifier_spec_to_json(c.classifier)},
                        {"k_best", c.k_best},
                        {"split_seed", c.split_seed},
                        {"train_fraction", c.train_fraction},
                        {"group_by_patient", c.group_by_patient}};
    if (c.reducer) j["reducer"] = reducer_to_json(*c.reducer);
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    using namespace pipeline_detail;
    try {
        if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
        static const std::set<std::string> known = {"pipeline", "band",     "reducer",        "feature",         "classifier",
                                                    "k_best",   "split_seed", "train_fraction", "group_by_patient", "name"};
        for (const auto& [k, v] : j.items())
            if (!known.count(k)) throw ValidationError("unknown config field '" + k + "'");
        ExperimentConfig c;
        if (j.contains("pipeline")) c.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
        if (j.contains("band")) c.band = parse_band(j.at("band").get<std::string>());
        if (c.pipeline == PipelineKind::Multichannel) c.reducer.reset();
        if (j.contains("reducer")) {
            if (j.at("reducer").is_null()) c.reducer.reset();
            else c.reducer = reducer_from_json(j.at("reducer"));
        }
        if (j.contains("feature")) c.feature = feature_from_json(j.at("feature"));
        c.classifier = j.contains("classifier") ? classifier_spec_from_json(j.at("classifier"), c.pipeline)
                                                : classifier_spec_from_json("logistic", c.pipeline);
        read_opt(j, "k_best", c.k_best);
        read_opt(j, "split_seed", c.split_seed);
        read_opt(j, "train_fraction", c.train_fraction);
        read_opt(j, "group_by_patient", c.group_by_patient);
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("experiment config: ") + e.what());
    }
}

/// Short stable identifier of a config (hex FNV-1a of its canonical JSON).
inline std::string config_id(const ExperimentConfig& c) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(config_to_json(c).dump())));
    return buf;
}

/// A grid file is either a JSON list of configs or an object
///   {"base": {...}, "axes": {"band": [...], "feature": [...], ...}}
/// expanded as the cartesian product of the axes (keys in sorted order).
inline std::vector<ExperimentConfig> grid_from_json(const nlohmann::json& j) {
    std::vector<ExperimentConfig> out;
    if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            try {
                out.push_back(config_from_json(j[i]));
            } catch (const Error& e) {
                throw ValidationError("grid entry " + std::to_string(i) + ": " + e.what());
            }
        }
        return out;
    }
    if (!j.is_object() || !j.contains("axes")) throw ValidationError("grid must be a list of configs or {base, axes}");
    const nlohmann::json base = j.value("base", nlohmann::json::object());
    std::vector<nlohmann::json> cells = {base};
    for (const auto& [key, values] : j.at("axes").items()) {
        if (!values.is_array() || values.empty()) throw ValidationError("grid axis '" + key + "' must be a non-empty list");
        std::vector<nlohmann::json> next;
        for (const auto& cell : cells)
            for (const auto& v : values) {
                auto c = cell;
                c[key] = v;
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        try {
            out.push_back(config_from_json(cells[i]));
        } catch (const Error& e) {
            throw ValidationError("grid cell " + std::to_string(i) + " " + cells[i].dump() + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<ExperimentConfig> load_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open grid file '" + path + "'");
    try {
        return grid_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("grid file '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Results

struct AblationResult {
    ExperimentConfig config;
    std::string id;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_features = 0;
    double train_accuracy = std::nan("");
    double test_accuracy = std::nan("");
    double gap = std::nan("");
    bool gate_passed = false;
    double wall_seconds = 0.0;  // not part of results.csv
    nlohmann::json metadata = nlohmann::json::object();
    std::string error;
    std::string fitted_fingerprint;  // hash of every train-derived parameter

    bool ok() const { return error.empty(); }

    void set_scores(double train, double test) {
        train_accuracy = train;
        test_accuracy = test;
        gap = train - test;
        gate_passed = gap <= kGateThreshold;
    }
};

// ---------------------------------------------------------------------------
// Feature selection

/// One-way ANOVA F statistic per column. Columns with zero within-class
/// variance but distinct class means score +inf; constant columns score 0.
inline std::vector<double> anova_f_scores(const Eigen::Ref<const Matrix>& x, std::span<const int> y) {
    if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw ValidationError("anova: label count mismatch");
    std::map<int, std::vector<Eigen::Index>> groups;
    for (std::size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(static_cast<Eigen::Index>(i));
    const double k = static_cast<double>(groups.size()), n = static_cast<double>(x.rows());
    std::vector<double> f(static_cast<std::size_t>(x.cols()), 0.0);
    if (groups.size() < 2 || n <= k) return f;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double grand = x.col(c).mean();
        double ssb = 0.0, ssw = 0.0;
        for (const auto& [cls, rows] : groups) {
            double mu = 0.0;
            for (auto r : rows) mu += x(r, c);
            mu /= static_cast<double>(rows.size());
            ssb += static_cast<double>(rows.size()) * (mu - grand) * (mu - grand);
            for (auto r : rows) ssw += (x(r, c) - mu) * (x(r, c) - mu);
        }
        const double scale = std::max(1.0, grand * grand) * n;
        if (ssb <= 1e-24 * scale) f[static_cast<std::size_t>(c)] = 0.0;
        else if (ssw <= 1e-24 * scale) f[static_cast<std::size_t>(c)] = std::numeric_limits<double>::infinity();
        else f[static_cast<std::size_t>(c)] = (ssb / (k - 1.0)) / (ssw / (n - k));
    }
    return f;
}

/// Indices of the k best columns by ANOVA F (ties to the lower index), ascending.
inline std::vector<Eigen::Index> select_k_best(const Eigen::Ref<const Matrix>& x, std::span<const int> y, int k) {
    if (k < 1) throw ValidationError("select_k_best: k must be >= 1");
    const auto f = anova_f_scores(x, y);
    std::vector<Eigen::Index> idx(f.size());
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return f[static_cast<std::size_t>(a)] > f[static_cast<std::size_t>(b)]; });
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(k)));
    std::sort(idx.begin(), idx.end());
    return idx;
}

// ---------------------------------------------------------------------------
// Feature construction

/// Features for a set of segments; the first `n_train` rows are the training rows.
struct FeatureMatrix {
    std::vector<std::size_t> segments;  // dataset segment index of each row
    std::size_t n_train = 0;
    std::vector<std::string> names;
    Matrix x;
    nlohmann::json metadata = nlohmann::json::object();
    nlohmann::json fitted = nlohmann::json::object();  // train-derived state
};

namespace pipeline_detail {

inline std::uint64_t model_seed(const ExperimentConfig& c, std::uint64_t global_seed) {
    return hash_combine(global_seed, config_to_json(c).dump());
}

inline std::uint64_t effective_split_seed(const ExperimentConfig& c, std::uint64_t global_seed) {
    return hash_combine(global_seed, "split:" + std::to_string(c.split_seed));
}

inline nlohmann::json matrix_json(const Eigen::Ref<const Matrix>& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}

/// Segments a config can use: all of them for Pipeline I, only those from
/// retained recordings for Pipeline II.
inline std::vector<std::size_t> eligible_segments(const ExperimentConfig& c, const Dataset& ds,
                                                  CommonChannels* channels_out) {
    std::vector<std::size_t> out;
    if (c.pipeline == PipelineKind::DimReduced) {
        out.resize(ds.segments.size());
        std::iota(out.begin(), out.end(), std::size_t{0});
        return out;
    }
    auto cc = select_common_channels(ds);
    if (cc.channels.size() < 2)
        throw ValidationError("multichannel pipeline needs at least 2 common channels, found " +
                              std::to_string(cc.channels.size()));
    const std::set<std::size_t> keep(cc.retained.begin(), cc.retained.end());
    for (std::size_t i = 0; i < ds.segments.size(); ++i)
        if (keep.count(ds.segments[i].recording)) out.push_back(i);
    if (channels_out) *channels_out = std::move(cc);
    return out;
}

inline Matrix filtered_segment(const Dataset& ds, const Segment& s, Band band) {
    const auto& rec = ds.recordings.at(s.recording);
    return bandpass(ds.segment_data(s), band, rec.sample_rate);
}

/// Observations (samples x channels) of a segment, evenly subsampled to at most `cap` rows.
inline Matrix observations(const Matrix& seg, Eigen::Index cap) {
    if (cap <= 1 || seg.cols() <= cap) return seg.transpose();
    const auto idx = dimred_detail::decimation_indices(seg.cols(), cap);
    Matrix out(cap, seg.rows());
    for (Eigen::Index i = 0; i < cap; ++i) out.row(i) = seg.col(idx[static_cast<std::size_t>(i)]).transpose();
    return out;
}

/// Turns per-row 1-D series into features; normalizers are fitted on the first `n_train` rows.
inline void featurize_series(const FeatureSpec& spec, const std::vector<Vector>& series, std::size_t n_train,
                             Matrix& x, Eigen::Index col0, std::vector<std::string>& names, const std::string& prefix,
                             nlohmann::json& fitted) {
    FittedFeaturizer fz;
    std::vector<PersistenceDiagram> diagrams;
    if (spec.kind == FeatureKind::Entropy) {
        fz.spec = spec;
    } else {
        diagrams.reserve(series.size());
        for (const auto& s : series)
            diagrams.push_back(sublevel_diagram(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), spec.essential));
        fz = fit_featurizer(spec, std::span<const PersistenceDiagram>(diagrams.data(), n_train));
    }
    const auto nm = fz.names();
    if (x.cols() < col0 + static_cast<Eigen::Index>(nm.size())) x.conservativeResize(Eigen::NoChange, col0 + static_cast<Eigen::Index>(nm.size()));
    for (std::size_t r = 0; r < series.size(); ++r) {
        const Vector v = spec.kind == FeatureKind::Entropy
                             ? fz.transform_signal(std::span<const double>(series[r].data(), static_cast<std::size_t>(series[r].size())))
                             : fz.transform(diagrams[r]);
        x.block(static_cast<Eigen::Index>(r), col0, 1, v.size()) = v.transpose();
    }
    for (const auto& n : nm) names.push_back(prefix + n);
    fitted[prefix.empty() ? "featurizer" : "featurizer:" + prefix] = fz.state();
}

inline FeatureMatrix build_dim_reduced(const ExperimentConfig& c, const Dataset& ds, const std::vector<std::size_t>& rows,
                                       std::size_t n_train, std::uint64_t seed) {
    FeatureMatrix fm;
    fm.segments = rows;
    fm.n_train = n_train;
    ReducerSpec rs = *c.reducer;

    std::vector<Matrix> filtered;
    filtered.reserve(rows.size());
    for (auto i : rows) filtered.push_back(filtered_segment(ds, ds.segments[i], c.band));

    // LDA: one supervised reducer per recording, fitted on that recording's
    // training segments; recordings lacking two training classes share a
    // pooled fit over all training segments with the same channel count.
    std::map<std::size_t, FittedReducer> lda;
    if (rs.method == ReducerMethod::LDA) {
        auto fit_on = [&](auto pred) -> std::optional<FittedReducer> {
            std::vector<Matrix> obs;
            std::vector<int> lab;
            Eigen::Index total = 0;
            std::set<int> classes;
            for (std::size_t r = 0; r < n_train; ++r) {
                if (!pred(ds.segments[rows[r]])) continue;
                obs.push_back(observations(filtered[r], rs.max_samples));
                total += obs.back().rows();
                const int y = static_cast<int>(ds.segments[rows[r]].label);
                lab.insert(lab.end(), static_cast<std::size_t>(obs.back().rows()), y);
                classes.insert(y);
            }
            if (classes.size() < 2) return std::nullopt;
            Matrix all(total, obs.front().cols());
            Eigen::Index at = 0;
            for (const auto& o : obs) {
                all.middleRows(at, o.rows()) = o;
                at += o.rows();
            }
            return fit_lda_reducer(all, lab, rs.target_dim);
        };
        std::set<std::size_t> recs;
        for (auto i : rows) recs.insert(ds.segments[i].recording);
        int pooled = 0;
        bool low_sep = false;
        for (auto rec : recs) {
            auto f = fit_on([&](const Segment& s) { return s.recording == rec; });
            if (!f) {
                const auto nch = ds.recordings[rec].num_channels();
                f = fit_on([&](const Segment& s) { return ds.recordings[s.recording].num_channels() == nch; });
                ++pooled;
                if (!f) throw ValidationError("LDA reducer: recording '" + ds.recordings[rec].patient_id +
                                              "' has no pool of training segments with 2 classes");
            }
            low_sep = low_sep || f->low_separation;
            fm.fitted["lda:" + std::to_string(rec)] = {matrix_json(f->mean), matrix_json(f->components)};
            lda.emplace(rec, std::move(*f));
        }
        fm.metadata["lda_pooled_recordings"] = pooled;
        fm.metadata["lda_low_separation"] = low_sep;
    }

    std::vector<Vector> series;
    series.reserve(rows.size());
    int decimated = 0, bridged = 0;
    Eigen::Index decimated_to = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        ReducerSpec spec = rs;
        spec.seed = hash_combine(seed, "reduce:" + std::to_string(rows[r]));
        const auto rec = ds.segments[rows[r]].recording;
        const FittedReducer* sup = rs.method == ReducerMethod::LDA ? &lda.at(rec) : nullptr;
        auto red = reduce_segment(filtered[r], spec, sup);
        if (red.metadata.contains("decimated_to")) {
            ++decimated;
            decimated_to = red.metadata["decimated_to"].get<Eigen::Index>();
        }
        if (red.metadata.contains("graph_bridged")) ++bridged;
        series.push_back(std::move(red.series));
    }
    if (decimated) {
        fm.metadata["decimated_segments"] = decimated;
        fm.metadata["decimated_to"] = decimated_to;
    }
    if (bridged) fm.metadata["graph_bridged_segments"] = bridged;
    if (rs.method == ReducerMethod::NMF) fm.metadata["nmf_shift"] = "per-channel minimum";
    fm.metadata["reduction_scope"] = rs.method == ReducerMethod::LDA ? "per_recording" : "per_segment";

    fm.x.resize(static_cast<Eigen::Index>(rows.size()), 0);
    featurize_series(c.feature, series, n_train, fm.x, 0, fm.names, "", fm.fitted);
    return fm;
}

inline FeatureMatrix build_multichannel(const ExperimentConfig& c, const Dataset& ds, const CommonChannels& cc,
                                        const std::vector<std::size_t>& rows, std::size_t n_train) {
    FeatureMatrix fm;
    fm.segments = rows;
    fm.n_train = n_train;
    fm.metadata["channels"] = cc.channels;
    std::vector<std::string> retained;
    for (auto r : cc.retained) retained.push_back(ds.recordings[r].patient_id);
    fm.metadata["retained_recordings"] = retained;
    if (cc.warning) fm.metadata["channel_warning"] = "no channel is shared by every recording";

    // channel name -> row index, per recording
    std::map<std::size_t, std::vector<Eigen::Index>> rowmap;
    for (auto rec : cc.retained) {
        const auto& names = ds.recordings[rec].channels;
        std::vector<Eigen::Index> m;
        for (const auto& ch : cc.channels)
            m.push_back(static_cast<Eigen::Index>(std::find(names.begin(), names.end(), ch) - names.begin()));
        rowmap[rec] = std::move(m);
    }
    std::vector<Matrix> filtered;
    filtered.reserve(rows.size());
    for (auto i : rows) {
        const auto& s = ds.segments[i];
        const auto& map = rowmap.at(s.recording);
        Matrix sub(static_cast<Eigen::Index>(map.size()), s.length);
        const auto data = ds.segment_data(s);
        for (std::size_t k = 0; k < map.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = data.row(map[k]);
        filtered.push_back(bandpass(sub, c.band, ds.recordings[s.recording].sample_rate));
    }
    fm.x.resize(static_cast<Eigen::Index>(rows.size()), 0);
    for (std::size_t k = 0; k < cc.channels.size(); ++k) {
        std::vector<Vector> series;
        series.reserve(rows.size());
        for (const auto& f : filtered) series.push_back(f.row(static_cast<Eigen::Index>(k)).transpose());
        featurize_series(c.feature, series, n_train, fm.x, fm.x.cols(), fm.names, cc.channels[k] + ":", fm.fitted);
    }
    fm.metadata["pre_selection_width"] = fm.x.cols();
    return fm;
}

inline std::vector<std::size_t> ordered_rows(const Split& s) {
    std::vector<std::size_t> rows = s.train;
    rows.insert(rows.end(), s.test.begin(), s.test.end());
    return rows;
}

}  // namespace pipeline_detail

/// Default split for a config: stratified over eligible segments (or grouped
/// by patient), seeded by (global seed, split_seed) so every config in a
/// sweep shares it. Indices refer to dataset segments.
inline Split default_split(const ExperimentConfig& c, const Dataset& ds, std::uint64_t global_seed = 0) {
    const auto elig = pipeline_detail::eligible_segments(c, ds, nullptr);
    std::vector<int> y;
    std::vector<std::string> groups;
    for (auto i : elig) {
        y.push_back(static_cast<int>(ds.segments[i].label));
        if (c.group_by_patient) groups.push_back(ds.recordings[ds.segments[i].recording].patient_id);
    }
    const auto local = stratified_split(y, c.train_fraction, pipeline_detail::effective_split_seed(c, global_seed), groups);
    Split s;
    for (auto i : local.train) s.train.push_back(elig[i]);
    for (auto i : local.test) s.test.push_back(elig[i]);
    return s;
}

/// Builds the unselected, unstandardized feature matrix of a config. Only
/// the training rows of `split` inform fitted normalizers.
inline FeatureMatrix build_features(const ExperimentConfig& c, const Dataset& ds, const Split& split,
                                    std::uint64_t global_seed = 0) {
    using namespace pipeline_detail;
    c.validate();
    ds.validate();
    CommonChannels cc;
    const auto elig = eligible_segments(c, ds, &cc);
    const std::set<std::size_t> ok(elig.begin(), elig.end());
    Split s;
    for (auto i : split.train)
        if (ok.count(i)) s.train.push_back(i);
    for (auto i : split.test)
        if (ok.count(i)) s.test.push_back(i);
    if (s.train.size() < 2 || s.test.empty()) throw ValidationError("split leaves too few eligible segments");
    const auto rows = ordered_rows(s);
    FeatureMatrix fm = c.pipeline == PipelineKind::DimReduced
                           ? build_dim_reduced(c, ds, rows, s.train.size(), model_seed(c, global_seed))
                           : build_multichannel(c, ds, cc, rows, s.train.size());
    if (c.pipeline == PipelineKind::Multichannel) {
        const auto dropped = split.train.size() + split.test.size() - rows.size();
        if (dropped) fm.metadata["dropped_segments"] = dropped;
    }
    if (!fm.x.allFinite()) throw NumericError("features contain non-finite values");
    return fm;
}

/// Runs one config on a fixed split. Test labels are read only when scoring.
inline AblationResult run_with_split(const ExperimentConfig& c, const Dataset& ds, const Split& split,
                                     std::uint64_t global_seed = 0) {
    using namespace pipeline_detail;
    const auto t0 = std::chrono::steady_clock::now();
    AblationResult res;
    res.config = c;
    res.id = config_id(c);
    auto fm = build_features(c, ds, split, global_seed);
    const auto nt = static_cast<Eigen::Index>(fm.n_train);
    const auto ne = fm.x.rows() - nt;
    std::vector<int> y_train, y_test;
    for (std::size_t r = 0; r < fm.segments.size(); ++r)
        (r < fm.n_train ? y_train : y_test).push_back(static_cast<int>(ds.segments[fm.segments[r]].label));

    Matrix x = fm.x;
    if (c.pipeline == PipelineKind::Multichannel) {
        const auto cols = select_k_best(x.topRows(nt), y_train, c.k_best);
        Matrix sel(x.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) sel.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
        x = std::move(sel);
        fm.metadata["selected_columns"] = cols.size();
        fm.fitted["selected"] = cols;
    }
    const Scaler scaler = standardize_fit(x.topRows(nt));
    const Matrix xs = scaler.apply(x);
    ClassifierSpec cs = c.classifier;
    cs.seed = hash_combine(model_seed(c, global_seed), "classifier");
    const auto model = fit(cs, xs.topRows(nt), y_train);
    const double train_ba = balanced_accuracy(y_train, model.predict(xs.topRows(nt)));
    const double test_ba = balanced_accuracy(y_test, model.predict(xs.bottomRows(ne)));

    fm.fitted["scaler"] = {matrix_json(scaler.mean), matrix_json(scaler.scale)};
    fm.fitted["classifier"] = classifier_to_json(model);
    res.fitted_fingerprint = config_id(c) + ":" + [&] {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(fm.fitted.dump())));
        return std::string(buf);
    }();

    res.n_train = static_cast<std::size_t>(nt);
    res.n_test = static_cast<std::size_t>(ne);
    res.n_features = static_cast<std::size_t>(x.cols());
    res.set_scores(train_ba, test_ba);
    res.metadata = fm.metadata;
    res.metadata["split_mode"] = c.group_by_patient ? "patient" : "segment";
    res.metadata["essential"] = pipeline_detail::essential_name(c.feature.essential);
    if (c.band != Band::Broadband) res.metadata["filter"] = "butterworth order 4, zero-phase";
    if (!model.warnings.empty()) res.metadata["classifier_warnings"] = model.warnings;
    if (model.epochs_run) res.metadata["classifier_epochs"] = model.epochs_run;
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

inline AblationResult run_pipeline_one(const ExperimentConfig& c, const Dataset& ds, std::uint64_t global_seed = 0) {
    if (c.pipeline != PipelineKind::DimReduced) throw ValidationError("run_pipeline_one needs a dim_reduced config");
    return run_with_split(c, ds, default_split(c, ds, global_seed), global_seed);
}

inline AblationResult run_pipeline_two(const ExperimentConfig& c, const Dataset& ds, std::uint64_t global_seed = 0) {
    if (c.pipeline != PipelineKind::Multichannel) throw ValidationError("run_pipeline_two needs a multichannel config");
    return run_with_split(c, ds, default_split(c, ds, global_seed), global_seed);
}

/// Runs one config, converting any failure into an error row.
inline AblationResult run_config(const ExperimentConfig& c, const Dataset& ds, std::uint64_t global_seed = 0) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        return c.pipeline == PipelineKind::DimReduced ? run_pipeline_one(c, ds, global_seed)
                                                      : run_pipeline_two(c, ds, global_seed);
    } catch (const std::exception& e) {
        AblationResult r;
        r.config = c;
        r.id = config_id(c);
        r.error = c.label() + ": " + e.what();
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }
}

/// Gate-passing results by descending test accuracy, then gate-failing, then errors.
inline void rank_results(std::vector<AblationResult>& rs) {
    auto tier = [](const AblationResult& r) { return !r.ok() ? 2 : (r.gate_passed ? 0 : 1); };
    std::sort(rs.begin(), rs.end(), [&](const AblationResult& a, const AblationResult& b) {
        if (tier(a) != tier(b)) return tier(a) < tier(b);
        if (a.ok() && a.test_accuracy != b.test_accuracy) return a.test_accuracy > b.test_accuracy;
        return a.id < b.id;
    });
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs every config with `jobs` worker threads. Failures are recorded per config.
inline std::vector<AblationResult> ablate(const std::vector<ExperimentConfig>& grid, const Dataset& ds, unsigned jobs = 0,
                                          std::uint64_t global_seed = 0) {
    std::vector<AblationResult> out(grid.size());
    if (grid.empty()) return out;
    if (jobs == 0) jobs = default_jobs();
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(grid.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) out[i] = run_config(grid[i], ds, global_seed);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    rank_results(out);
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline const std::vector<std::string>& results_header() {
    static const std::vector<std::string> h = {
        "config_id", "pipeline",       "band",   "dimred",      "feature",          "classifier",
        "model_class", "split_mode",   "n_train", "n_test",     "n_features",       "train_balanced_accuracy",
        "test_balanced_accuracy", "gap", "gate_passed", "status", "error",          "fitted_fingerprint",
        "metadata",  "config"};
    return h;
}

inline std::string result_row(const AblationResult& r) {
    const auto& c = r.config;
    const std::vector<std::string> cells = {r.id,
                                            pipeline_name(c.pipeline),
                                            band_name(c.band),
                                            c.dimred_label(),
                                            feature_name(c.feature.kind),
                                            classifier_name(c.classifier.method),
                                            model_class(c.classifier.method),
                                            c.group_by_patient ? "patient" : "segment",
                                            std::to_string(r.n_train),
                                            std::to_string(r.n_test),
                                            std::to_string(r.n_features),
                                            format_double(r.train_accuracy),
                                            format_double(r.test_accuracy),
                                            format_double(r.gap),
                                            r.gate_passed ? "true" : "false",
                                            r.ok() ? "ok" : "error",
                                            r.error,
                                            r.fitted_fingerprint,
                                            r.metadata.dump(),
                                            config_to_json(c).dump()};
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += csv_escape(cells[i]);
    }
    return line;
}

inline std::string results_to_csv(const std::vector<AblationResult>& rs) {
    std::string out;
    for (std::size_t i = 0; i < results_header().size(); ++i) out += (i ? "," : "") + results_header()[i];
    out += '\n';
    for (const auto& r : rs) out += result_row(r) + '\n';
    return out;
}

inline std::vector<AblationResult> results_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != results_header())
        throw ParseError("results CSV: unexpected header");
    std::vector<AblationResult> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != results_header().size())
            throw ParseError("results CSV line " + std::to_string(lineno) + ": expected " +
                             std::to_string(results_header().size()) + " fields, got " + std::to_string(f.size()));
        try {
            AblationResult r;
            r.config = config_from_json(nlohmann::json::parse(f[19]));
            r.id = f[0];
            r.n_train = std::stoul(f[8]);
            r.n_test = std::stoul(f[9]);
            r.n_features = std::stoul(f[10]);
            r.train_accuracy = parse_double(f[11]);
            r.test_accuracy = parse_double(f[12]);
            r.gap = parse_double(f[13]);
            r.gate_passed = f[14] == "true";
            r.error = f[16];
            r.fitted_fingerprint = f[17];
            r.metadata = nlohmann::json::parse(f[18]);
            out.push_back(std::move(r));
        } catch (const Error& e) {
            throw ParseError("results CSV line " + std::to_string(lineno) + ": " + e.what());
        } catch (const std::exception& e) {
            throw ParseError("results CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::string feature_matrix_to_csv(const FeatureMatrix& fm, const Dataset& ds) {
    std::ostringstream out;
    out << "segment,patient,label,split";
    for (const auto& n : fm.names) out << ',' << csv_escape(n);
    out << '\n';
    for (std::size_t r = 0; r < fm.segments.size(); ++r) {
        const auto& s = ds.segments[fm.segments[r]];
        out << fm.segments[r] << ',' << csv_escape(ds.recordings[s.recording].patient_id) << ',' << label_name(s.label) << ','
            << (r < fm.n_train ? "train" : "test");
        for (Eigen::Index c = 0; c < fm.x.cols(); ++c) out << ',' << format_double(fm.x(static_cast<Eigen::Index>(r), c));
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Report

struct GroupSummary {
    std::string group;
    std::string population;  // "all" or "gate_passed"
    std::size_t count = 0;
    double mean = 0, sd = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

namespace report_detail {

/// Linear-interpolation quantile of sorted data.
inline double quantile(const std::vector<double>& s, double q) {
    if (s.size() == 1) return s.front();
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline GroupSummary summarize(std::string group, std::string population, std::vector<double> v) {
    GroupSummary g{std::move(group), std::move(population)};
    g.count = v.size();
    if (v.empty()) {
        g.mean = g.sd = g.min = g.q1 = g.median = g.q3 = g.max = std::nan("");
        return g;
    }
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    g.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - g.mean) * (x - g.mean);
    g.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    g.min = v.front();
    g.max = v.back();
    g.q1 = quantile(v, 0.25);
    g.median = quantile(v, 0.5);
    g.q3 = quantile(v, 0.75);
    return g;
}

inline std::string group_key(const AblationResult& r, const std::string& by) {
    if (by == "band") return band_name(r.config.band);
    if (by == "dimred") return r.config.dimred_label();
    if (by == "feature") return feature_name(r.config.feature.kind);
    if (by == "modelclass") return model_class(r.config.classifier.method);
    throw ValidationError("unknown grouping '" + by + "'");
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw Error("write failed for '" + p.string() + "'");
}

inline std::string svg_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

inline std::string fmt(double v, int prec = 2) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

}  // namespace report_detail

inline const std::vector<std::string>& report_groupings() {
    static const std::vector<std::string> g = {"band", "dimred", "feature", "modelclass"};
    return g;
}

/// Test balanced accuracy summaries per group, for all successful cells and
/// for gate-passing cells only. Groups are in sorted order.
inline std::vector<GroupSummary> summarize_by(const std::vector<AblationResult>& rs, const std::string& by) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& r : rs) {
        if (!r.ok()) continue;
        auto& g = groups[report_detail::group_key(r, by)];
        g.first.push_back(r.test_accuracy);
        if (r.gate_passed) g.second.push_back(r.test_accuracy);
    }
    std::vector<GroupSummary> out;
    for (auto& [k, v] : groups) {
        out.push_back(report_detail::summarize(k, "all", v.first));
        out.push_back(report_detail::summarize(k, "gate_passed", v.second));
    }
    return out;
}

inline std::string summary_to_csv(const std::vector<GroupSummary>& gs, const std::string& by) {
    std::ostringstream out;
    out << by << ",population,count,mean,sd,min,q1,median,q3,max\n";
    for (const auto& g : gs)
        out << csv_escape(g.group) << ',' << g.population << ',' << g.count << ',' << format_double(g.mean) << ','
            << format_double(g.sd) << ',' << format_double(g.min) << ',' << format_double(g.q1) << ','
            << format_double(g.median) << ',' << format_double(g.q3) << ',' << format_double(g.max) << '\n';
    return out.str();
}

/// Gate-passing successful results ranked by test accuracy, at most k.
inline std::vector<AblationResult> top_k(std::vector<AblationResult> rs, std::size_t k) {
    std::erase_if(rs, [](const AblationResult& r) { return !r.ok() || !r.gate_passed; });
    rank_results(rs);
    if (rs.size() > k) rs.resize(k);
    return rs;
}

inline std::string top_k_to_csv(const std::vector<AblationResult>& top) {
    std::ostringstream out;
    out << "Rank,Accuracy,Band,Dim Red,Feature,Classifier,config_id\n";
    for (std::size_t i = 0; i < top.size(); ++i) {
        const auto& r = top[i];
        out << (i + 1) << ',' << format_double(r.test_accuracy) << ',' << band_name(r.config.band) << ','
            << r.config.dimred_label() << ',' << feature_name(r.config.feature.kind) << ','
            << classifier_name(r.config.classifier.method) << ',' << r.id << '\n';
    }
    return out.str();
}

/// Box plot of test balanced accuracy per group; grey = all cells, blue = gate-passing.
inline std::string box_plot_svg(const std::vector<GroupSummary>& gs, const std::string& by) {
    using report_detail::fmt;
    std::map<std::string, std::vector<const GroupSummary*>> groups;
    for (const auto& g : gs) groups[g.group].push_back(&g);
    const double left = 60, top = 40, plot_h = 300, slot = 90;
    const double width = left + slot * static_cast<double>(std::max<std::size_t>(groups.size(), 1)) + 20;
    const double height = top + plot_h + 70;
    auto ypos = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width, 0) << "\" height=\"" << fmt(height, 0)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<text x=\"" << fmt(width / 2, 0) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">Test balanced accuracy by "
      << report_detail::svg_escape(by) << "</text>\n";
    for (int t = 0; t <= 10; t += 2) {
        const double v = t / 10.0;
        s << "<line x1=\"" << fmt(left, 0) << "\" x2=\"" << fmt(width - 10, 0) << "\" y1=\"" << fmt(ypos(v)) << "\" y2=\""
          << fmt(ypos(v)) << "\" stroke=\"#ddd\"/>\n";
        s << "<text x=\"" << fmt(left - 6, 0) << "\" y=\"" << fmt(ypos(v) + 4) << "\" text-anchor=\"end\">" << fmt(v, 1)
          << "</text>\n";
    }
    std::size_t gi = 0;
    for (const auto& [name, members] : groups) {
        const double cx = left + slot * (static_cast<double>(gi) + 0.5);
        int mi = 0;
        for (const auto* g : members) {
            const double x = cx + (mi == 0 ? -18.0 : 18.0);
            ++mi;
            if (g->count == 0) continue;
            const char* color = g->population == "all" ? "#888" : "#3b6fb6";
            s << "<line x1=\"" << fmt(x) << "\" x2=\"" << fmt(x) << "\" y1=\"" << fmt(ypos(g->min)) << "\" y2=\""
              << fmt(ypos(g->max)) << "\" stroke=\"" << color << "\"/>\n";
            s << "<rect x=\"" << fmt(x - 12) << "\" y=\"" << fmt(ypos(g->q3)) << "\" width=\"24\" height=\""
              << fmt(std::max(1.0, ypos(g->q1) - ypos(g->q3))) << "\" fill=\"white\" stroke=\"" << color << "\"/>\n";
            s << "<line x1=\"" << fmt(x - 12) << "\" x2=\"" << fmt(x + 12) << "\" y1=\"" << fmt(ypos(g->median))
              << "\" y2=\"" << fmt(ypos(g->median)) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        }
        s << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(top + plot_h + 18) << "\" text-anchor=\"middle\">"
          << report_detail::svg_escape(name) << "</text>\n";
        ++gi;
    }
    s << "<text x=\"" << fmt(left, 0) << "\" y=\"" << fmt(height - 12, 0)
      << "\" fill=\"#888\">grey: all cells</text><text x=\"" << fmt(left + 110, 0) << "\" y=\"" << fmt(height - 12, 0)
      << "\" fill=\"#3b6fb6\">blue: gate-passing</text>\n";
    s << "</svg>\n";
    return s.str();
}

/// Writes results.csv, top_k.csv, summary_by_*.csv and box_*.svg into `dir`.
inline void report(const std::vector<AblationResult>& rs, const std::string& dir, std::size_t k = 10,
                   bool write_results = true) {
    namespace fs = std::filesystem;
    using report_detail::write_text;
    fs::create_directories(dir);
    const fs::path d(dir);
    if (write_results) write_text(d / "results.csv", results_to_csv(rs));
    write_text(d / "top_k.csv", top_k_to_csv(top_k(rs, k)));
    for (const auto& by : report_groupings()) {
        const auto gs = summarize_by(rs, by);
        write_text(d / ("summary_by_" + by + ".csv"), summary_to_csv(gs, by));
        write_text(d / ("box_" + by + ".svg"), box_plot_svg(gs, by));
    }
}

inline std::vector<AblationResult> load_results(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open results file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return results_from_csv(ss.str());
}

/// Wall times are kept out of results.csv so it is identical across runs.
inline std::string timings_to_csv(const std::vector<AblationResult>& rs) {
    std::ostringstream out;
    out << "config_id,wall_seconds\n";
    for (const auto& r : rs) out << r.id << ',' << report_detail::fmt(r.wall_seconds, 6) << '\n';
    return out.str();
}

}  // namespace topoeeg
