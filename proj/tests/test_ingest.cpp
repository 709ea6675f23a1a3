#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace topoeeg;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("topoeeg_ingest_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Recording toy(const std::string& id, std::vector<std::string> channels) {
    Recording r;
    r.patient_id = id;
    r.sample_rate = 100.0;
    r.data = Matrix::Zero(static_cast<Eigen::Index>(channels.size()), 10);
    r.channels = std::move(channels);
    return r;
}

std::vector<std::string> names(const std::string& prefix, int n) {
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

double exhaustive_best(std::span<const Recording> recs, std::span<const std::size_t> counts) {
    double best = 0.0;
    const std::size_t n = recs.size();
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
        std::vector<std::string> shared;
        double segs = 0.0;
        bool first = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(mask >> i & 1)) continue;
            segs += static_cast<double>(counts[i]);
            if (first) {
                shared = recs[i].channels;
                first = false;
            } else {
                std::vector<std::string> keep;
                for (const auto& c : shared)
                    if (std::find(recs[i].channels.begin(), recs[i].channels.end(), c) != recs[i].channels.end())
                        keep.push_back(c);
                shared = keep;
            }
        }
        best = std::max(best, segs * static_cast<double>(shared.size()));
    }
    return best;
}

void write_two_file_manifest(const fs::path& dir, const std::string& third_label = "ictal", Eigen::Index third_start = 200) {
    for (const char* id : {"a", "b"}) {
        Recording r = toy(id, {"X", "Y"});
        r.data = Matrix::Random(2, 300);
        write_file((dir / (std::string(id) + ".edf")).string(), write_edf(make_edf(r)));
    }
    nlohmann::json m = {{"recordings", nlohmann::json::array()}};
    for (const char* id : {"a", "b"})
        m["recordings"].push_back({{"path", std::string(id) + ".edf"},
                                   {"patient_id", id},
                                   {"segments",
                                    {{{"start_sample", 0}, {"length", 100}, {"label", "interictal"}},
                                     {{"start_sample", 100}, {"length", 100}, {"label", "Preictal"}},
                                     {{"start_sample", third_start}, {"length", 100}, {"label", third_label}}}}});
    write_file((dir / "manifest.json").string(), m.dump());
}

}  // namespace

TEST(Manifest, TwoFilesThreeSegmentsEach) {
    const auto dir = scratch_dir("ok");
    write_two_file_manifest(dir, "ICTAL");
    const auto ds = load_manifest((dir / "manifest.json").string());
    EXPECT_EQ(ds.recordings.size(), 2u);
    ASSERT_EQ(ds.segments.size(), 6u);
    EXPECT_EQ(ds.segments[2].label, SegmentLabel::Ictal);
    EXPECT_EQ(ds.segments[4].label, SegmentLabel::Preictal);
    EXPECT_EQ(ds.segments[5].recording, 1u);
    EXPECT_EQ(ds.recordings[1].patient_id, "b");
    EXPECT_NO_THROW(ds.validate());
}

TEST(Manifest, WindowBeyondRecordingIsError) {
    const auto dir = scratch_dir("range");
    write_two_file_manifest(dir, "ictal", 250);
    EXPECT_THROW(load_manifest((dir / "manifest.json").string()), ValidationError);
}

TEST(Manifest, UnknownLabelIsError) {
    const auto dir = scratch_dir("label");
    write_two_file_manifest(dir, "postictal");
    EXPECT_THROW(load_manifest((dir / "manifest.json").string()), ValidationError);
}

TEST(Manifest, MissingFiles) {
    const auto dir = scratch_dir("missing");
    EXPECT_THROW(load_manifest((dir / "manifest.json").string()), Error);
    write_two_file_manifest(dir);
    fs::remove(dir / "b.edf");
    try {
        load_manifest((dir / "manifest.json").string());
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("b.edf"), std::string::npos);
    }
}

TEST(Manifest, MalformedJson) {
    const auto dir = scratch_dir("json");
    write_file((dir / "manifest.json").string(), "{\"recordings\": 3}");
    EXPECT_THROW(load_manifest((dir / "manifest.json").string()), ParseError);
    write_file((dir / "manifest.json").string(), "{not json");
    EXPECT_THROW(load_manifest((dir / "manifest.json").string()), ParseError);
}

TEST(Synth, DeterministicForSeed) {
    SynthConfig cfg;
    const auto a = synth_dataset(cfg), b = synth_dataset(cfg);
    ASSERT_EQ(a.recordings.size(), b.recordings.size());
    for (std::size_t i = 0; i < a.recordings.size(); ++i)
        EXPECT_EQ(write_edf(make_edf(a.recordings[i])), write_edf(make_edf(b.recordings[i])));
    cfg.seed = 8;
    EXPECT_NE(synth_dataset(cfg).recordings[0].data, a.recordings[0].data);
}

TEST(Synth, CountsPerLabel) {
    const auto ds = synth_dataset({});
    EXPECT_EQ(ds.segments.size(), 30u);
    std::array<int, 3> per{};
    for (const auto& s : ds.segments) ++per[static_cast<std::size_t>(s.label)];
    EXPECT_EQ(per, (std::array<int, 3>{10, 10, 10}));
    EXPECT_NO_THROW(ds.validate());
}

TEST(Synth, IctalPeakToPeakDominates) {
    const auto ds = synth_dataset({});
    std::array<double, 3> sum{};
    std::array<int, 3> n{};
    for (const auto& s : ds.segments) {
        const Matrix m = ds.segment_data(s);
        double p2p = 0.0;
        for (Eigen::Index c = 0; c < m.rows(); ++c) p2p += m.row(c).maxCoeff() - m.row(c).minCoeff();
        sum[static_cast<std::size_t>(s.label)] += p2p / static_cast<double>(m.rows());
        ++n[static_cast<std::size_t>(s.label)];
    }
    EXPECT_GT(sum[2] / n[2], 3.0 * sum[0] / n[0]);
}

TEST(Synth, PreconditionsChecked) {
    SynthConfig cfg;
    cfg.channels = 0;
    EXPECT_THROW(synth_dataset(cfg), ValidationError);
}

TEST(CommonChannels, IdenticalSetsRetainAll) {
    const std::vector<Recording> recs = {toy("a", {"X", "Y"}), toy("b", {"X", "Y"}), toy("c", {"X", "Y"})};
    const std::vector<std::size_t> counts = {3, 3, 3};
    const auto r = select_common_channels(recs, counts);
    EXPECT_EQ(r.retained, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(r.channels, (std::vector<std::string>{"X", "Y"}));
    EXPECT_FALSE(r.warning);
}

TEST(CommonChannels, ToyInstanceDropsOutlier) {
    auto ab = names("S", 10);
    auto c_channels = std::vector<std::string>{"S0", "S1", "Z"};
    const std::vector<Recording> recs = {toy("A", ab), toy("B", ab), toy("C", c_channels)};
    const std::vector<std::size_t> counts = {10, 10, 5};
    const auto r = select_common_channels(recs, counts);
    EXPECT_EQ(r.retained, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(r.channels.size(), 10u);
    EXPECT_EQ(r.objective, exhaustive_best(recs, counts));
    EXPECT_EQ(r.objective, 200.0);
}

TEST(CommonChannels, SingleRecording) {
    const std::vector<Recording> recs = {toy("a", {"P", "Q", "R"})};
    const std::vector<std::size_t> counts = {4};
    const auto r = select_common_channels(recs, counts);
    EXPECT_EQ(r.channels, (std::vector<std::string>{"P", "Q", "R"}));
    EXPECT_EQ(r.retained, std::vector<std::size_t>{0});
}

TEST(CommonChannels, DisjointSetsWarn) {
    const std::vector<Recording> recs = {toy("a", {"P"}), toy("b", {"Q", "R"})};
    const std::vector<std::size_t> counts = {4, 3};
    const auto r = select_common_channels(recs, counts);
    EXPECT_TRUE(r.warning);
    EXPECT_EQ(r.retained, std::vector<std::size_t>{1});
    EXPECT_THROW(select_common_channels(std::span<const Recording>{}, std::span<const std::size_t>{}), ValidationError);
}

TEST(CommonChannels, GreedyNearExhaustiveAndSubsetProperty) {
    Rng rng(21);
    const auto pool = names("E", 12);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.index(6);
        std::vector<Recording> recs;
        std::vector<std::size_t> counts;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::string> ch;
            for (const auto& c : pool)
                if (rng.uniform() < 0.7) ch.push_back(c);
            if (ch.empty()) ch.push_back(pool[rng.index(pool.size())]);
            recs.push_back(toy("r" + std::to_string(i), ch));
            counts.push_back(1 + rng.index(20));
        }
        const auto r = select_common_channels(recs, counts);
        EXPECT_GE(r.objective, 0.9 * exhaustive_best(recs, counts)) << "trial " << trial;
        for (auto i : r.retained)
            for (const auto& c : r.channels)
                EXPECT_NE(std::find(recs[i].channels.begin(), recs[i].channels.end(), c), recs[i].channels.end());
    }
}
