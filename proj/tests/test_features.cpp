#include "support.hpp"

#include <gtest/gtest.h>

using namespace topoeeg;
using namespace testing_support;

namespace {

PersistenceDiagram diagram(std::initializer_list<PersistencePair> p) { return PersistenceDiagram{std::vector<PersistencePair>(p)}; }

PersistenceDiagram merged(const PersistenceDiagram& a, const PersistenceDiagram& b) {
    PersistenceDiagram out = a;
    out.pairs.insert(out.pairs.end(), b.pairs.begin(), b.pairs.end());
    return out;
}

double max_death(const PersistenceDiagram& pd) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& p : pd.pairs) m = std::max(m, p.death);
    return m;
}

ImageFrame frame_around(double b, double d, double sigma, int grid) {
    ImageFrame fr;
    fr.grid_size = grid;
    fr.sigma = sigma;
    fr.bounds = {b - 4 * sigma, b + 4 * sigma, d - 4 * sigma, d + 4 * sigma};
    fr.max_lifetime = d - b;
    return fr;
}

double tent_direct(double x, double y, double cx, double cy, double hx, double hy) {
    return std::max(0.0, 1.0 - std::max(std::abs(x - cx) / hx, std::abs(y - cy) / hy));
}

}  // namespace

TEST(Carlsson, Examples) {
    EXPECT_EQ(carlsson_coordinates(diagram({{0, 1}})), (std::array<double, 5>{0, 0, 0, 0, 1}));
    EXPECT_EQ(carlsson_coordinates(diagram({{0, 2}, {1, 3}})), (std::array<double, 5>{2, 2, 16, 16, 2}));
    EXPECT_EQ(carlsson_coordinates(diagram({})), (std::array<double, 5>{}));
}

TEST(Carlsson, AdditiveOverUnionWithSharedMaxDeath) {
    Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        auto a = random_diagram(rng, 1 + rng.index(8)), b = random_diagram(rng, 1 + rng.index(8));
        const double top = std::max(max_death(a), max_death(b)) + rng.uniform(0.0, 1.0);
        a.pairs.push_back({rng.uniform(-2, top), top});
        b.pairs.push_back({rng.uniform(-2, top), top});
        const auto fa = carlsson_coordinates(a), fb = carlsson_coordinates(b), fu = carlsson_coordinates(merged(a, b));
        for (int i = 0; i < 4; ++i) EXPECT_LE(rel_err(fu[i], fa[i] + fb[i]), 1e-9) << trial << " f" << i + 1;
        EXPECT_EQ(fu[4], std::max(fa[4], fb[4]));
    }
}

TEST(Carlsson, ZeroLifetimePairChangesNothing) {
    Rng rng(32);
    for (int trial = 0; trial < 1000; ++trial) {
        auto pd = random_diagram(rng, 1 + rng.index(10));
        const auto before = carlsson_coordinates(pd);
        const double x = rng.uniform(-2.0, max_death(pd));
        pd.pairs.push_back({x, x});
        const auto after = carlsson_coordinates(pd);
        for (int i = 0; i < 5; ++i) EXPECT_LE(rel_err(after[i], before[i]), 1e-9);
        EXPECT_GE(after[4], 0.0);
    }
}

TEST(PersistenceImage, SinglePointMassWithinFourSigma) {
    const auto fr = frame_around(0.3, 1.7, 0.05, 40);
    const auto img = persistence_image(diagram({{0.3, 1.7}}), fr);
    EXPECT_LE(std::abs(img.sum() - 1.0), 1e-3);
    const auto half = persistence_image(diagram({{0.3, 1.0}}), frame_around(0.3, 1.0, 0.05, 40));
    EXPECT_NEAR(half.sum(), 0.7 / 0.7, 1e-3);
}

TEST(PersistenceImage, LinearOverMultisets) {
    Rng rng(33);
    ImageFrame fr;
    fr.grid_size = 12;
    fr.sigma = 0.3;
    fr.bounds = {-3, 3, -3, 5};
    fr.max_lifetime = 4.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_diagram(rng, rng.index(6)), b = random_diagram(rng, rng.index(6));
        const Vector lhs = persistence_image(merged(a, b), fr);
        const Vector rhs = persistence_image(a, fr) + persistence_image(b, fr);
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
    }
    const auto one = diagram({{0.1, 0.9}});
    EXPECT_LE((persistence_image(merged(one, one), fr) - 2.0 * persistence_image(one, fr)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PersistenceImage, EmptyAndDegenerate) {
    ImageFrame fr;
    EXPECT_EQ(persistence_image(diagram({}), fr), Vector::Zero(400));
    fr.bounds = {1, 1, 0, 1};
    EXPECT_THROW(persistence_image(diagram({}), fr), ValidationError);
    PersistenceImageParams params;
    params.bounds = ImageBounds{0, 1, 2, 2};
    EXPECT_THROW(fit_image_frame(std::span<const PersistenceDiagram>{}, params), ValidationError);
}

TEST(PersistenceImage, FrameFromTraining) {
    const std::vector<PersistenceDiagram> train = {diagram({{0, 1}}), diagram({{0.5, 3.5}})};
    const auto fr = fit_image_frame(train, {});
    EXPECT_DOUBLE_EQ(fr.max_lifetime, 3.0);
    EXPECT_DOUBLE_EQ(fr.sigma, 0.2);
    EXPECT_DOUBLE_EQ(fr.bounds.x_min, -0.6);
    EXPECT_DOUBLE_EQ(fr.bounds.y_max, 4.1);
}

TEST(Tent, Examples) {
    TentFrame fr;
    fr.d = 4;
    fr.x0 = 0;
    fr.x1 = 4;
    fr.y0 = 0;
    fr.y1 = 8;
    EXPECT_EQ(tent_features(diagram({}), fr), Vector::Zero(25));
    const auto at = tent_features(diagram({{1, 3}}), fr);  // birth 1, lifetime 2: node (1, 1)
    EXPECT_DOUBLE_EQ(at[1 * 5 + 1], 1.0);
    EXPECT_DOUBLE_EQ(at.sum(), 1.0);
    const auto mid = tent_features(diagram({{1.5, 3.5}}), fr);  // halfway between birth nodes 1 and 2
    EXPECT_DOUBLE_EQ(mid[1 * 5 + 1], 0.5);
    EXPECT_DOUBLE_EQ(mid[2 * 5 + 1], 0.5);
    EXPECT_DOUBLE_EQ(mid.sum(), 1.0);
}

TEST(Tent, FourSurroundingValuesMatchDirectFormula) {
    Rng rng(34);
    TentFrame fr;
    fr.d = 5;
    fr.x0 = -1;
    fr.x1 = 2;
    fr.y0 = 0;
    fr.y1 = 4;
    for (int trial = 0; trial < 500; ++trial) {
        const double x = rng.uniform(fr.x0, fr.x1 - 1e-9), y = rng.uniform(fr.y0, fr.y1 - 1e-9);
        const auto v = tent_features(diagram({{x, x + y}}), fr);
        const int i = static_cast<int>((x - fr.x0) / fr.dx()), j = static_cast<int>((y - fr.y0) / fr.dy());
        double expected = 0.0, got = 0.0;
        for (int di = 0; di <= 1; ++di)
            for (int dj = 0; dj <= 1; ++dj) {
                expected += tent_direct(x, y, fr.x0 + (i + di) * fr.dx(), fr.y0 + (j + dj) * fr.dy(), fr.dx(), fr.dy());
                got += v[(i + di) * (fr.d + 1) + (j + dj)];
            }
        EXPECT_NEAR(got, expected, 1e-12);
        EXPECT_GT(got, 0.0);
        EXPECT_LE(got, 2.0);
    }
}

TEST(Tent, ValuesBoundedByDiagramSize) {
    Rng rng(35);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<PersistenceDiagram> train = {random_diagram(rng, 1 + rng.index(10))};
        const auto fr = fit_tent_frame(train, {});
        const auto v = tent_features(train[0], fr);
        EXPECT_GE(v.minCoeff(), 0.0);
        EXPECT_LE(v.maxCoeff(), static_cast<double>(train[0].size()) + 1e-12);
    }
}

TEST(Tent, DegenerateBoxExpandsToUnit) {
    const std::vector<PersistenceDiagram> train = {diagram({{2, 3}})};
    const auto fr = fit_tent_frame(train, {});
    EXPECT_DOUBLE_EQ(fr.x1 - fr.x0, 1.0);
    EXPECT_DOUBLE_EQ(fr.y1 - fr.y0, 1.0);
    TemplateParams bad;
    bad.d = 0;
    EXPECT_THROW(fit_tent_frame(train, bad), ValidationError);
}

TEST(Polynomial, Examples) {
    EXPECT_EQ(polynomial_features(diagram({}), 3), Vector::Zero(9));
    const auto p1 = polynomial_features(diagram({{0, 1}}), 1);
    ASSERT_EQ(p1.size(), 2);
    EXPECT_EQ(p1[0], 1.0);
    EXPECT_EQ(p1[1], 0.0);
    const auto ex = polynomial_exponents(3);
    const auto it = std::find(ex.begin(), ex.end(), std::pair{1, 1});
    EXPECT_EQ(polynomial_features(diagram({{1, 2}, {2, 4}}), 3)[it - ex.begin()], 5.0);
    EXPECT_THROW(polynomial_exponents(0), ValidationError);
}

TEST(Polynomial, DegreeOneIsLifetimeAndBirthSums) {
    Rng rng(36);
    for (int trial = 0; trial < 200; ++trial) {
        const auto pd = random_diagram(rng, rng.index(12));
        double sl = 0.0, sb = 0.0;
        for (const auto& p : pd.pairs) {
            sl += p.death - p.birth;
            sb += p.birth;
        }
        const auto f = polynomial_features(pd, 1);
        EXPECT_EQ(f[0], sl);
        EXPECT_EQ(f[1], sb);
    }
}

TEST(Entropy, Examples) {
    std::vector<double> inc(200), flat(200, 3.0);
    for (std::size_t i = 0; i < inc.size(); ++i) inc[i] = static_cast<double>(i);
    EXPECT_EQ(entropy_features(inc)[0], 0.0);
    for (double v : entropy_features(flat)) EXPECT_EQ(v, 0.0);

    Rng rng(37);
    const auto noise = random_signal(rng, 10000, 0.0, 1.0);
    EntropyParams p3;
    p3.m = 3;
    const auto f = entropy_features(noise, p3);
    EXPECT_GE(f[0], 0.99);
    EXPECT_GE(f[1], 0.99);
    EXPECT_GE(f[2], 0.99);
    EXPECT_LT(f[3], 0.05);
}

TEST(Entropy, RangeAndErrors) {
    Rng rng(38);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_int_signal(rng, 20 + rng.index(200), 3);
        for (double v : entropy_features(x)) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0 + 1e-12);
        }
    }
    EXPECT_THROW(entropy_features(std::vector<double>(4, 0.0)), ValidationError);
    EntropyParams bad;
    bad.tau = 0;
    EXPECT_THROW(entropy_features(std::vector<double>(40, 0.0), bad), ValidationError);
}

TEST(Featurizer, EmptyDiagramMapsToZeroAndNamesMatchWidth) {
    const std::vector<PersistenceDiagram> train = {diagram({{0, 1}, {0.2, 0.5}})};
    for (auto k : {FeatureKind::Carlsson, FeatureKind::PersistenceImage, FeatureKind::Tent, FeatureKind::Polynomial}) {
        FeatureSpec spec;
        spec.kind = k;
        const auto f = fit_featurizer(spec, train);
        const auto v = f.transform(diagram({}));
        EXPECT_EQ(v, Vector::Zero(v.size())) << feature_name(k);
        EXPECT_EQ(static_cast<std::size_t>(f.transform(train[0]).size()), f.names().size()) << feature_name(k);
        EXPECT_EQ(parse_feature(feature_name(k)), k);
    }
    FeatureSpec ent;
    ent.kind = FeatureKind::Entropy;
    const auto f = fit_featurizer(ent, train);
    EXPECT_EQ(f.names().size(), 4u);
    EXPECT_THROW(f.transform(train[0]), ValidationError);
    EXPECT_THROW(parse_feature("landscape"), ValidationError);
}
