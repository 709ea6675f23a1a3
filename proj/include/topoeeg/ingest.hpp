#pragma once

// Datasets: labeled segment windows over recordings, JSON manifests,
// the synthetic three-state generator and common-channel selection.

#include "topoeeg/edf.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

namespace topoeeg {

/// One labeled window [start, start + length) of a recording.
struct Segment {
    std::size_t recording = 0;
    Eigen::Index start = 0;
    Eigen::Index length = 0;
    SegmentLabel label = SegmentLabel::Interictal;
};

using SegmentSet = std::vector<Segment>;

/// Recordings plus the segment windows defined over them.
struct Dataset {
    std::vector<Recording> recordings;
    SegmentSet segments;

    /// channels x length view of a segment's samples.
    auto segment_data(const Segment& s) const {
        return recordings.at(s.recording).data.middleCols(s.start, s.length);
    }

    std::vector<int> labels() const {
        std::vector<int> y;
        y.reserve(segments.size());
        for (const auto& s : segments) y.push_back(static_cast<int>(s.label));
        return y;
    }

    void validate() const {
        for (const auto& r : recordings) r.validate();
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const auto& s = segments[i];
            if (s.recording >= recordings.size())
                throw ValidationError("segment " + std::to_string(i) + " references missing recording " +
                                      std::to_string(s.recording));
            const auto n = recordings[s.recording].num_samples();
            if (s.length <= 0) throw ValidationError("segment " + std::to_string(i) + " has non-positive length");
            if (s.start < 0 || s.start + s.length > n)
                throw ValidationError("segment " + std::to_string(i) + " window [" + std::to_string(s.start) + ", " +
                                      std::to_string(s.start + s.length) + ") exceeds recording '" +
                                      recordings[s.recording].patient_id + "' length " + std::to_string(n));
        }
    }
};

// ---------------------------------------------------------------------------
// Manifest

struct ManifestSegment {
    Eigen::Index start_sample = 0;
    Eigen::Index length = 0;
    SegmentLabel label = SegmentLabel::Interictal;
};

struct ManifestEntry {
    std::string path;
    std::string patient_id;
    std::vector<ManifestSegment> segments;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    if (!j.is_object() || !j.contains("recordings") || !j["recordings"].is_array())
        throw ParseError("manifest: expected an object with a 'recordings' array");
    std::size_t idx = 0;
    for (const auto& r : j["recordings"]) {
        const std::string where = "manifest recordings[" + std::to_string(idx++) + "]";
        ManifestEntry e;
        try {
            e.path = r.at("path").get<std::string>();
            e.patient_id = r.value("patient_id", std::string{});
            for (const auto& s : r.at("segments")) {
                ManifestSegment ms;
                ms.start_sample = s.at("start_sample").get<Eigen::Index>();
                ms.length = s.at("length").get<Eigen::Index>();
                ms.label = parse_label(s.at("label").get<std::string>());
                e.segments.push_back(ms);
            }
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(where + ": " + ex.what());
        } catch (const ValidationError& ex) {
            throw ValidationError(where + ": " + ex.what());
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& e : m.entries) {
        nlohmann::json segs = nlohmann::json::array();
        for (const auto& s : e.segments)
            segs.push_back({{"start_sample", s.start_sample}, {"length", s.length}, {"label", label_name(s.label)}});
        recs.push_back({{"path", e.path}, {"patient_id", e.patient_id}, {"segments", segs}});
    }
    return {{"recordings", recs}};
}

/// Loads every EDF named in the manifest. Relative paths resolve against the manifest's directory.
inline Dataset load_manifest(const std::string& path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw Error("manifest not found: '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError("manifest '" + path + "': " + ex.what());
    }
    const auto m = manifest_from_json(j);
    const fs::path base = fs::path(path).parent_path();
    Dataset ds;
    for (const auto& e : m.entries) {
        fs::path p(e.path);
        if (p.is_relative()) p = base / p;
        if (!fs::exists(p)) throw Error("recording file not found: '" + p.string() + "'");
        Recording rec;
        try {
            rec = parse_edf(read_file(p.string()), e.patient_id);
        } catch (const Error& ex) {
            throw ParseError("'" + p.string() + "': " + ex.what());
        }
        const std::size_t ri = ds.recordings.size();
        for (const auto& s : e.segments) {
            if (s.length <= 0 || s.start_sample < 0 || s.start_sample + s.length > rec.num_samples())
                throw ValidationError("'" + p.string() + "': segment window [" + std::to_string(s.start_sample) + ", " +
                                      std::to_string(s.start_sample + s.length) + ") out of range for " +
                                      std::to_string(rec.num_samples()) + " samples");
            ds.segments.push_back({ri, s.start_sample, s.length, s.label});
        }
        ds.recordings.push_back(std::move(rec));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct SynthConfig {
    int n_per_class = 10;
    int channels = 4;
    Eigen::Index length = 1024;  // samples per segment
    double sample_rate = 256.0;
    std::uint64_t seed = 7;
    int recordings = 3;  // segments are spread round-robin over this many recordings
};

namespace synth_detail {

/// Unit-variance AR(1) noise.
inline void colored_noise(Rng& rng, Eigen::Ref<RowVector> out, double phi = 0.9) {
    const double scale = std::sqrt(1.0 - phi * phi);
    double prev = rng.normal();
    for (Eigen::Index t = 0; t < out.size(); ++t) {
        prev = phi * prev + scale * rng.normal();
        out[t] = prev;
    }
}

inline Matrix segment(Rng& rng, SegmentLabel label, int channels, Eigen::Index length, double fs) {
    constexpr double kBackground = 10.0;  // microvolts
    constexpr double kAlpha = 40.0;
    constexpr double kIctal = 120.0;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    Matrix x(channels, length);
    RowVector common(length), own(length);
    colored_noise(rng, common);
    std::vector<double> gain(static_cast<std::size_t>(channels));
    for (auto& g : gain) g = rng.uniform(0.8, 1.2);
    for (int c = 0; c < channels; ++c) {
        colored_noise(rng, own);
        x.row(c) = kBackground * (0.6 * gain[static_cast<std::size_t>(c)] * common + 0.8 * own);
    }

    if (label == SegmentLabel::Preictal) {
        const double f = rng.uniform(9.5, 10.5);
        const double phase = rng.uniform(0.0, two_pi);
        for (int c = 0; c < channels; ++c) {
            const double g = gain[static_cast<std::size_t>(c)];
            for (Eigen::Index t = 0; t < length; ++t)
                x(c, t) += kAlpha * g * std::sin(two_pi * f * static_cast<double>(t) / fs + phase);
        }
    } else if (label == SegmentLabel::Ictal) {
        // Rhythmic 3-5 Hz spike-and-wave-like bursts with a slow on/off envelope.
        const double f = rng.uniform(3.8, 4.2);
        const double phase = rng.uniform(0.0, two_pi);
        const double env_f = rng.uniform(0.3, 0.6);
        const double env_phase = rng.uniform(0.0, two_pi);
        for (int c = 0; c < channels; ++c) {
            const double g = gain[static_cast<std::size_t>(c)];
            for (Eigen::Index t = 0; t < length; ++t) {
                const double tt = static_cast<double>(t) / fs;
                const double env = 0.8 + 0.2 * std::sin(two_pi * env_f * tt + env_phase);
                const double w = two_pi * f * tt + phase;
                x(c, t) += kIctal * g * env * (std::sin(w) + 0.35 * std::sin(2.0 * w) + 0.15 * std::sin(3.0 * w));
            }
        }
    }
    return x;
}

}  // namespace synth_detail

/// Deterministic labeled dataset with class-dependent dynamics:
/// interictal = low-amplitude colored noise, preictal = noise plus a weak
/// 8-13 Hz rhythm, ictal = high-amplitude 3-5 Hz rhythmic bursts.
inline Dataset synth_dataset(const SynthConfig& cfg) {
    if (cfg.n_per_class <= 0 || cfg.channels <= 0 || cfg.length <= 0 || !(cfg.sample_rate > 0) || cfg.recordings <= 0)
        throw ValidationError("synth_dataset: all counts must be positive");
    Rng rng(cfg.seed);
    const auto n_rec = static_cast<std::size_t>(cfg.recordings);
    std::vector<std::vector<std::pair<SegmentLabel, Matrix>>> per_rec(n_rec);
    std::size_t k = 0;
    for (int i = 0; i < cfg.n_per_class; ++i) {
        for (int c = 0; c < kNumClasses; ++c) {
            const auto label = static_cast<SegmentLabel>(c);
            per_rec[k % n_rec].emplace_back(label, synth_detail::segment(rng, label, cfg.channels, cfg.length, cfg.sample_rate));
            ++k;
        }
    }
    Dataset ds;
    for (std::size_t r = 0; r < n_rec; ++r) {
        if (per_rec[r].empty()) continue;
        Recording rec;
        char pid[32];
        std::snprintf(pid, sizeof(pid), "synth-%02zu", r + 1);
        rec.patient_id = pid;
        rec.sample_rate = cfg.sample_rate;
        for (int c = 0; c < cfg.channels; ++c) rec.channels.push_back("CH" + std::to_string(c + 1));
        rec.data.resize(cfg.channels, cfg.length * static_cast<Eigen::Index>(per_rec[r].size()));
        Eigen::Index off = 0;
        const std::size_t ri = ds.recordings.size();
        for (auto& [label, m] : per_rec[r]) {
            rec.data.middleCols(off, cfg.length) = m;
            ds.segments.push_back({ri, off, cfg.length, label});
            off += cfg.length;
        }
        ds.recordings.push_back(std::move(rec));
    }
    return ds;
}

/// Writes the dataset as EDF files plus `manifest.json` into `dir`.
/// Returns the manifest path. Output bytes depend only on the dataset.
inline std::string write_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    DatasetManifest m;
    for (std::size_t r = 0; r < ds.recordings.size(); ++r) {
        const auto& rec = ds.recordings[r];
        const std::string file = rec.patient_id + ".edf";
        write_file((fs::path(dir) / file).string(), write_edf(make_edf(rec)));
        ManifestEntry e{file, rec.patient_id, {}};
        for (const auto& s : ds.segments)
            if (s.recording == r) e.segments.push_back({s.start, s.length, s.label});
        m.entries.push_back(std::move(e));
    }
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    write_file(mpath, manifest_to_json(m).dump(2) + "\n");
    return mpath;
}

// ---------------------------------------------------------------------------
// Common channel selection

struct CommonChannels {
    std::vector<std::string> channels;   // ordered as in the first retained recording
    std::vector<std::size_t> retained;   // recording indices, ascending
    double objective = 0.0;              // retained segments x retained channels
    bool warning = false;                // no channel is shared by all recordings
};

namespace channel_detail {

inline std::vector<std::string> intersect(std::span<const Recording> recs, const std::vector<std::size_t>& idx) {
    if (idx.empty()) return {};
    std::vector<std::string> out;
    for (const auto& ch : recs[idx.front()].channels) {
        bool all = true;
        for (std::size_t k = 1; k < idx.size() && all; ++k) {
            const auto& other = recs[idx[k]].channels;
            all = std::find(other.begin(), other.end(), ch) != other.end();
        }
        if (all) out.push_back(ch);
    }
    return out;
}

inline double objective(std::span<const Recording> recs, std::span<const std::size_t> counts,
                        const std::vector<std::size_t>& idx) {
    double segs = 0.0;
    for (auto i : idx) segs += static_cast<double>(counts[i]);
    return segs * static_cast<double>(intersect(recs, idx).size());
}

}  // namespace channel_detail

/// Greedy drop-one search maximizing (retained segments) x (shared channels).
/// The drop path is followed all the way down and a forward greedy pass is
/// seeded from every single recording; the best subset seen wins.
/// `segment_counts[i]` is the number of segments drawn from recording i.
inline CommonChannels select_common_channels(std::span<const Recording> recs, std::span<const std::size_t> segment_counts) {
    using namespace channel_detail;
    if (recs.empty()) throw ValidationError("select_common_channels: need at least one recording");
    if (segment_counts.size() != recs.size())
        throw ValidationError("select_common_channels: segment count list does not match recordings");

    std::vector<std::size_t> cur(recs.size());
    std::iota(cur.begin(), cur.end(), std::size_t{0});
    CommonChannels out;
    out.warning = intersect(recs, cur).empty();

    std::vector<std::size_t> best_set = cur;
    double best = objective(recs, segment_counts, cur);
    auto consider = [&](const std::vector<std::size_t>& set, double v) {
        if (v > best) {
            best = v;
            best_set = set;
            std::sort(best_set.begin(), best_set.end());
        }
    };

    while (cur.size() > 1) {
        double step_best = -1.0;
        std::size_t drop = 0;
        for (std::size_t k = 0; k < cur.size(); ++k) {
            auto trial = cur;
            trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
            const double v = objective(recs, segment_counts, trial);
            if (v > step_best) {
                step_best = v;
                drop = k;
            }
        }
        cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(drop));
        consider(cur, step_best);
    }

    for (std::size_t seed = 0; seed < recs.size(); ++seed) {
        std::vector<std::size_t> grow = {seed};
        std::vector<char> used(recs.size(), 0);
        used[seed] = 1;
        consider(grow, objective(recs, segment_counts, grow));
        while (grow.size() < recs.size()) {
            double step_best = -1.0;
            std::size_t add = recs.size();
            for (std::size_t i = 0; i < recs.size(); ++i) {
                if (used[i]) continue;
                auto trial = grow;
                trial.push_back(i);
                const double v = objective(recs, segment_counts, trial);
                if (v > step_best) {
                    step_best = v;
                    add = i;
                }
            }
            if (step_best <= 0.0) break;
            grow.push_back(add);
            used[add] = 1;
            consider(grow, step_best);
        }
    }

    out.retained = best_set;
    out.channels = intersect(recs, best_set);
    out.objective = best;
    return out;
}

inline CommonChannels select_common_channels(const Dataset& ds) {
    std::vector<std::size_t> counts(ds.recordings.size(), 0);
    for (const auto& s : ds.segments) ++counts.at(s.recording);
    return select_common_channels(ds.recordings, counts);
}

}  // namespace topoeeg
