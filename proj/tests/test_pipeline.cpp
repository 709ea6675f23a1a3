#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

using namespace topoeeg;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

const Dataset& synthetic() {
    static const Dataset ds = synth_dataset({});
    return ds;
}

ExperimentConfig dim_reduced(FeatureKind f = FeatureKind::Carlsson, ClassifierMethod c = ClassifierMethod::Logistic) {
    ExperimentConfig cfg;
    cfg.feature.kind = f;
    cfg.classifier.method = c;
    return cfg;
}

ExperimentConfig multichannel(int k_best = kMaxKBest) {
    ExperimentConfig cfg;
    cfg.pipeline = PipelineKind::Multichannel;
    cfg.reducer.reset();
    cfg.k_best = k_best;
    return cfg;
}

Dataset with_shuffled_labels(Dataset ds, std::uint64_t seed) {
    std::vector<SegmentLabel> labels;
    for (const auto& s : ds.segments) labels.push_back(s.label);
    Rng rng(seed);
    rng.shuffle(labels);
    for (std::size_t i = 0; i < labels.size(); ++i) ds.segments[i].label = labels[i];
    return ds;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

AblationResult fake_result(const std::string& band, ClassifierMethod m, double train, double test) {
    AblationResult r;
    r.config.band = parse_band(band);
    r.config.classifier.method = m;
    r.id = config_id(r.config) + band + classifier_name(m) + format_double(test);
    r.set_scores(train, test);
    return r;
}

}  // namespace

TEST(PipelineOne, SeparatesSyntheticClasses) {
    const auto r = run_pipeline_one(dim_reduced(), synthetic(), 0);
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_GE(r.test_accuracy, 0.9);
    EXPECT_EQ(r.n_train, 24u);
    EXPECT_EQ(r.n_test, 6u);
    EXPECT_EQ(r.n_features, 5u);
}

TEST(PipelineOne, DeterministicForConfigAndSeed) {
    const auto cfg = dim_reduced(FeatureKind::PersistenceImage);
    const auto a = run_config(cfg, synthetic(), 3), b = run_config(cfg, synthetic(), 3);
    EXPECT_EQ(result_row(a), result_row(b));
}

TEST(PipelineOne, ShuffledLabelsNearChance) {
    double sum = 0.0;
    const int reps = 8;
    for (int rep = 0; rep < reps; ++rep) {
        const auto r = run_pipeline_one(dim_reduced(), with_shuffled_labels(synthetic(), 100 + rep), 0);
        ASSERT_TRUE(r.ok());
        sum += r.test_accuracy;
    }
    const double mean = sum / reps;
    EXPECT_GE(mean, 0.15);
    EXPECT_LE(mean, 0.55);
}

TEST(PipelineOne, TestLabelsNeverReachFittedState) {
    for (const auto& cfg : {dim_reduced(FeatureKind::PersistenceImage), dim_reduced(FeatureKind::Tent), multichannel(7)}) {
        auto lda = cfg;
        if (lda.reducer) lda.reducer->method = ReducerMethod::LDA;
        const auto split = default_split(lda, synthetic(), 0);
        const auto base = run_with_split(lda, synthetic(), split, 0);
        Dataset permuted = synthetic();
        std::vector<SegmentLabel> test_labels;
        for (auto i : split.test) test_labels.push_back(permuted.segments[i].label);
        std::rotate(test_labels.begin(), test_labels.begin() + 1, test_labels.end());
        for (std::size_t k = 0; k < split.test.size(); ++k) permuted.segments[split.test[k]].label = test_labels[k];
        const auto moved = run_with_split(lda, permuted, split, 0);
        EXPECT_EQ(base.fitted_fingerprint, moved.fitted_fingerprint) << lda.label();
        EXPECT_EQ(base.train_accuracy, moved.train_accuracy);
    }
}

TEST(PipelineOne, MemorizerFailsGate) {
    auto cfg = dim_reduced(FeatureKind::Tent, ClassifierMethod::DeepMLP);
    cfg.classifier.dropout = 0.0;
    cfg.classifier.patience = 0;
    cfg.classifier.epochs = 3000;
    cfg.classifier.mlp_learning_rate = 1e-2;
    const auto r = run_pipeline_one(cfg, with_shuffled_labels(synthetic(), 99), 0);
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_GT(r.gap, kGateThreshold);
    EXPECT_FALSE(r.gate_passed);
}

TEST(PipelineOne, EveryReducerAndFeatureRuns) {
    SynthConfig small;
    small.n_per_class = 4;
    small.length = 256;
    const auto ds = synth_dataset(small);
    for (auto m : kAllReducers)
        for (auto f : {FeatureKind::Carlsson, FeatureKind::Entropy}) {
            auto cfg = dim_reduced(f);
            cfg.reducer->method = m;
            cfg.reducer->max_iter = 50;
            const auto r = run_config(cfg, ds, 0);
            EXPECT_TRUE(r.ok()) << cfg.label() << ": " << r.error;
        }
}

TEST(PipelineTwo, CarlssonWidthBeforeSelection) {
    const auto cfg = multichannel();
    const auto fm = build_features(cfg, synthetic(), default_split(cfg, synthetic(), 0), 0);
    EXPECT_EQ(fm.x.cols(), 20);
    EXPECT_EQ(fm.names.front(), "CH1:carlsson_f1");
    EXPECT_EQ(fm.names.back(), "CH4:carlsson_f5");
}

TEST(PipelineTwo, KBestClampsToAvailableColumns) {
    const auto all = run_pipeline_two(multichannel(500), synthetic(), 0);
    ASSERT_TRUE(all.ok()) << all.error;
    EXPECT_EQ(all.n_features, 20u);
    EXPECT_EQ(run_pipeline_two(multichannel(7), synthetic(), 0).n_features, 7u);
    auto wide = multichannel();
    wide.feature.kind = FeatureKind::PersistenceImage;
    const auto r = run_pipeline_two(wide, synthetic(), 0);
    ASSERT_TRUE(r.ok()) << r.error;
    EXPECT_EQ(r.n_features, 500u);
    EXPECT_EQ(r.metadata.at("pre_selection_width"), 1600);
}

TEST(PipelineTwo, RejectsInvalidConfigs) {
    auto bad = multichannel(501);
    EXPECT_THROW(bad.validate(), ValidationError);
    auto with_reducer = multichannel();
    with_reducer.reducer = ReducerSpec{};
    EXPECT_THROW(with_reducer.validate(), ValidationError);
    EXPECT_FALSE(run_config(bad, synthetic()).ok());
}

TEST(SelectKBest, Examples) {
    Matrix x(6, 4);
    x << 0, 5, 1.0, 0.3,  //
        0, 5, 1.1, 0.1,   //
        1, 5, 0.9, 0.2,   //
        1, 5, 1.2, 0.5,   //
        2, 5, 1.0, 0.4,   //
        2, 5, 0.8, 0.6;
    const std::vector<int> y = {0, 0, 1, 1, 2, 2};
    const auto f = anova_f_scores(x, y);
    EXPECT_EQ(f[1], 0.0);
    EXPECT_GT(f[0], f[2]);
    EXPECT_GT(f[0], f[3]);
    EXPECT_EQ(select_k_best(x, y, 1), std::vector<Eigen::Index>{0});
    EXPECT_EQ(select_k_best(x, y, 4), (std::vector<Eigen::Index>{0, 1, 2, 3}));
    EXPECT_EQ(select_k_best(x, y, 50).size(), 4u);
    EXPECT_THROW(select_k_best(x, y, 0), ValidationError);
}

TEST(SelectKBest, MatchesDirectAnova) {
    Rng rng(71);
    const Matrix x = random_normal(rng, 30, 5);
    std::vector<int> y(30);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 3);
    const auto f = anova_f_scores(x, y);
    for (Eigen::Index c = 0; c < 5; ++c) {
        std::array<double, 3> sum{}, cnt{};
        for (Eigen::Index i = 0; i < 30; ++i) {
            sum[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += x(i, c);
            cnt[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += 1;
        }
        const double grand = x.col(c).mean();
        double ssb = 0, ssw = 0;
        for (int k = 0; k < 3; ++k) ssb += cnt[k] * std::pow(sum[k] / cnt[k] - grand, 2);
        for (Eigen::Index i = 0; i < 30; ++i) {
            const auto k = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
            ssw += std::pow(x(i, c) - sum[k] / cnt[k], 2);
        }
        EXPECT_LE(rel_err(f[static_cast<std::size_t>(c)], (ssb / 2) / (ssw / 27)), 1e-12);
    }
}

TEST(Ablate, GridOfEight) {
    const auto grid = grid_from_json(nlohmann::json::parse(R"({
        "base": {"pipeline": "dim_reduced"},
        "axes": {"band": ["broadband", "theta"], "feature": ["carlsson", "polynomial"], "classifier": ["logistic", "ridge"]}
    })"));
    ASSERT_EQ(grid.size(), 8u);
    const auto rs = ablate(grid, synthetic(), 2, 0);
    EXPECT_EQ(rs.size(), 8u);
    for (const auto& r : rs) EXPECT_TRUE(r.ok()) << r.error;
    EXPECT_TRUE(ablate({}, synthetic(), 2, 0).empty());
}

TEST(Ablate, FailuresAreRecordedNotThrown) {
    auto bad = dim_reduced();
    bad.band = Band::HighGamma;
    SynthConfig low;
    low.sample_rate = 128.0;
    low.n_per_class = 3;
    low.length = 256;
    const auto rs = ablate({bad, dim_reduced()}, synth_dataset(low), 1, 0);
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_TRUE(rs[0].ok());
    EXPECT_FALSE(rs[1].ok());
    EXPECT_NE(rs[1].error.find("high_gamma"), std::string::npos) << rs[1].error;
}

TEST(Ablate, RankingOrdersTiers) {
    std::vector<AblationResult> rs = {fake_result("alpha", ClassifierMethod::Ridge, 0.95, 0.6),
                                      fake_result("beta", ClassifierMethod::Logistic, 0.7, 0.65),
                                      fake_result("delta", ClassifierMethod::Logistic, 0.72, 0.7)};
    AblationResult err;
    err.id = "0";
    err.error = "boom";
    rs.push_back(err);
    rank_results(rs);
    EXPECT_EQ(band_name(rs[0].config.band), "delta");
    EXPECT_EQ(band_name(rs[1].config.band), "beta");
    EXPECT_FALSE(rs[2].gate_passed);
    EXPECT_FALSE(rs[3].ok());
}

TEST(Gate, PassesExactlyAtThreshold) {
    AblationResult r;
    r.set_scores(0.6, 0.5);
    EXPECT_EQ(r.gate_passed, r.gap <= 0.10);
    r.set_scores(0.75, 0.5);
    EXPECT_FALSE(r.gate_passed);
    r.set_scores(0.5, 0.75);
    EXPECT_TRUE(r.gate_passed);
}

TEST(Config, JsonRoundTripAndValidation) {
    auto cfg = dim_reduced(FeatureKind::PersistenceImage, ClassifierMethod::DeepMLP);
    cfg.band = Band::LowGamma;
    cfg.reducer->method = ReducerMethod::FA;
    cfg.feature.image.sigma = 0.25;
    cfg.classifier.hidden = {32, 16};
    const auto back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
    EXPECT_EQ(config_id(back), config_id(cfg));
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"bnad": "alpha"})")), ValidationError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"band": "kappa"})")), ValidationError);
    const auto mc = config_from_json(nlohmann::json::parse(R"({"pipeline": "multichannel", "classifier": "deep_mlp"})"));
    EXPECT_FALSE(mc.reducer.has_value());
    EXPECT_EQ(mc.classifier.dropout, 0.5);
    EXPECT_THROW(grid_from_json(nlohmann::json::parse(R"({"axes": {"band": []}})")), ValidationError);
}

TEST(Report, TopKClampsAndMatchesBestRow) {
    std::vector<AblationResult> rs;
    for (int i = 0; i < 8; ++i) rs.push_back(fake_result(i % 2 ? "alpha" : "beta", ClassifierMethod::Logistic, 0.5 + 0.05 * i, 0.45 + 0.05 * i));
    rs.push_back(fake_result("low_gamma", ClassifierMethod::Ridge, 1.0, 0.85));
    const auto top = top_k(rs, 10);
    EXPECT_EQ(top.size(), 8u);
    EXPECT_DOUBLE_EQ(top.front().test_accuracy, 0.8);
    const auto csv = top_k_to_csv(top);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "Rank,Accuracy,Band,Dim Red,Feature,Classifier,config_id");
    EXPECT_EQ(top_k(rs, 3).size(), 3u);
}

TEST(Report, ResultsCsvRoundTrip) {
    const auto grid = grid_from_json(nlohmann::json::parse(R"({"axes": {"feature": ["carlsson", "entropy"]}})"));
    auto rs = ablate(grid, synthetic(), 1, 0);
    AblationResult err;
    err.config = dim_reduced();
    err.id = config_id(err.config);
    err.error = "line one, with \"quotes\"";
    rs.push_back(err);
    const auto csv = results_to_csv(rs);
    const auto back = results_from_csv(csv);
    ASSERT_EQ(back.size(), rs.size());
    EXPECT_EQ(results_to_csv(back), csv);
    EXPECT_THROW(results_from_csv("nope\n"), ParseError);
}

TEST(Report, SummaryMeansMatchHandComputation) {
    std::vector<AblationResult> rs = {fake_result("alpha", ClassifierMethod::Logistic, 0.7, 0.6),
                                      fake_result("alpha", ClassifierMethod::DeepMLP, 1.0, 0.4),
                                      fake_result("beta", ClassifierMethod::Ridge, 0.5, 0.5),
                                      fake_result("alpha", ClassifierMethod::Ridge, 0.9, 0.85)};
    const auto dir = fs::temp_directory_path() / "topoeeg_report_test";
    fs::remove_all(dir);
    report(rs, dir.string(), 10);
    for (const char* f : {"results.csv", "top_k.csv", "summary_by_band.csv", "summary_by_dimred.csv",
                          "summary_by_feature.csv", "summary_by_modelclass.csv", "box_band.svg", "box_modelclass.svg"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;

    // Recompute from the per-cell CSV.
    const auto cells = load_results((dir / "results.csv").string());
    std::map<std::string, std::vector<double>> all, passed;
    for (const auto& r : cells) {
        all[band_name(r.config.band)].push_back(r.test_accuracy);
        if (r.gate_passed) passed[band_name(r.config.band)].push_back(r.test_accuracy);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    for (const auto& g : summarize_by(cells, "band")) {
        const auto& src = g.population == "all" ? all[g.group] : passed[g.group];
        EXPECT_EQ(g.count, src.size());
        EXPECT_NEAR(g.mean, mean(src), 1e-15) << g.group << " " << g.population;
    }
    const auto by_class = summarize_by(cells, "modelclass");
    ASSERT_EQ(by_class.size(), 4u);
    EXPECT_EQ(by_class[0].group, "classical");
    EXPECT_EQ(by_class[2].group, "deep");
    EXPECT_EQ(by_class[3].count, 0u);
    EXPECT_NE(slurp(dir / "box_band.svg").find("<svg"), std::string::npos);
}

TEST(FeatureCsv, HeaderNamesFeatures) {
    const auto cfg = dim_reduced(FeatureKind::Polynomial);
    const auto fm = build_features(cfg, synthetic(), default_split(cfg, synthetic(), 0), 0);
    const auto csv = feature_matrix_to_csv(fm, synthetic());
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "segment,patient,label,split,poly_0_1,poly_0_2,poly_0_3,poly_1_0,poly_1_1,poly_1_2,poly_2_0,poly_2_1,poly_3_0");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 31u);
}
