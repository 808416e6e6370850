#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ussl/rng.hpp"
#include "ussl/synthdata.hpp"

using namespace ussl;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST(Augment, NoNoiseNoDropIsIdentity) {
    auto rng = make_rng(1);
    const std::vector<double> x = {1.0, -2.5, 0.0, 7.0};
    EXPECT_EQ(augment(x, {0.0, 0.0}, rng), x);
}

TEST(Augment, NearCertainDropZeroesEverything) {
    // With drop_prob 0.999 over 8 coordinates a non-zero survivor has
    // probability ~8e-3; seed 5 drops them all.
    auto rng = make_rng(5);
    const std::vector<double> x(8, 3.0);
    const std::vector<double> out = augment(x, {0.0, 0.999}, rng);
    EXPECT_EQ(out, std::vector<double>(8, 0.0));
}

TEST(Augment, MonteCarloMeanMatchesInput) {
    auto rng = make_rng(7);
    const std::vector<double> x = {0.5, -1.0, 2.0};
    std::vector<double> mean(3, 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const std::vector<double> a = augment(x, {0.1, 0.0}, rng);
        for (std::size_t j = 0; j < 3; ++j) mean[j] += a[j];
    }
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(mean[j] / n, x[j], 0.01);
}

TEST(Augment, RejectsBadConfig) {
    auto rng = make_rng(1);
    EXPECT_THROW(augment({1.0}, {-0.1, 0.0}, rng), std::invalid_argument);
    EXPECT_THROW(augment({1.0}, {0.0, 1.0}, rng), std::invalid_argument);
}

TEST(Generate, IdentityDomainReturnsRawClassDraws) {
    // With transform I, shift 0 and no domain noise, generation must emit the
    // raw class Gaussian draws; replicate the stream to check.
    ScenarioSpec spec;
    spec.input_dim = 3;
    spec.k_known = 2;
    spec.seed = 42;
    spec.counts = {2, 0, 0, 0, 0.0, 0.0};
    spec.classes = {{{1.0, 2.0, 3.0}, 0.5}, {{-1.0, 0.0, 1.0}, 2.0}};
    spec.domains = {DomainSpec::identity(3)};
    const Scenario sc = generate_scenario(spec);
    ASSERT_EQ(sc.labeled.size(), 4u);

    auto rng = make_rng(42, Stream::data);
    for (const Sample& s : sc.labeled) {
        const ClassSpec& c = spec.classes[s.class_id];
        std::normal_distribution<double> gauss(0.0, 1.0);  // per-sample, as in generation
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_DOUBLE_EQ(s.x[j], c.mean[j] + c.scale * gauss(rng));
    }
}

TEST(Generate, SameSeedGivesByteIdenticalCsv) {
    const ScenarioSpec spec = default_scenario_spec(9);
    const std::string p1 = testing::TempDir() + "ussl_gen_a.csv";
    const std::string p2 = testing::TempDir() + "ussl_gen_b.csv";
    save_csv(generate_scenario(spec), p1);
    save_csv(generate_scenario(spec), p2);
    EXPECT_EQ(slurp(p1), slurp(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST(Generate, DefaultScenarioClassMeansNearSpecs) {
    const ScenarioSpec spec = default_scenario_spec(4);
    const Scenario sc = generate_scenario(spec);
    // Labeled samples are untransformed (domain 0): per-class sample means
    // should sit within 3*scale/sqrt(n) of the configured means.
    const std::size_t n = spec.counts.labeled_per_class;
    for (std::size_t c = 0; c < spec.k_known; ++c) {
        std::vector<double> mean(spec.input_dim, 0.0);
        for (const Sample& s : sc.labeled)
            if (s.class_id == static_cast<int>(c))
                for (std::size_t j = 0; j < spec.input_dim; ++j) mean[j] += s.x[j];
        const double tol = 3.0 * spec.classes[c].scale / std::sqrt(static_cast<double>(n));
        for (std::size_t j = 0; j < spec.input_dim; ++j)
            EXPECT_NEAR(mean[j] / static_cast<double>(n), spec.classes[c].mean[j], tol);
    }
}

TEST(Generate, CountsAndFlagsAreConsistent) {
    const ScenarioSpec spec = default_scenario_spec(4);
    const Scenario sc = generate_scenario(spec);
    EXPECT_EQ(sc.labeled.size(), 200u);
    EXPECT_EQ(sc.val.size(), 200u);
    EXPECT_EQ(sc.test.size(), 200u);
    EXPECT_EQ(sc.unlabeled.size(), 600u);
    std::size_t n_ukc = 0, n_ukd = 0;
    for (const Sample& s : sc.unlabeled) {
        EXPECT_EQ(s.is_ukc, s.class_id >= static_cast<int>(sc.k_known));
        EXPECT_EQ(s.is_ukd, s.domain_id != 0);
        n_ukc += s.is_ukc;
        n_ukd += s.is_ukd;
    }
    EXPECT_EQ(n_ukc, 180u);
    EXPECT_EQ(n_ukd, 180u);
    for (const Sample& s : sc.labeled) {
        EXPECT_FALSE(s.is_ukc);
        EXPECT_FALSE(s.is_ukd);
    }
    for (const Sample& s : sc.test) {
        EXPECT_FALSE(s.is_ukc);
        EXPECT_FALSE(s.is_ukd);
    }
}

TEST(Generate, NovelBlobsAreFarFromKnownMeans) {
    const ScenarioSpec spec = default_scenario_spec(1);
    for (std::size_t c = spec.k_known; c < spec.classes.size(); ++c)
        for (std::size_t k = 0; k < spec.k_known; ++k) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < spec.input_dim; ++j) {
                const double d = spec.classes[c].mean[j] - spec.classes[k].mean[j];
                d2 += d * d;
            }
            EXPECT_GE(std::sqrt(d2), 10.0);
        }
}

TEST(Generate, RejectsDegenerateTransform) {
    ScenarioSpec spec = default_scenario_spec(1);
    spec.domains[1].transform = Matrix(8, 8, 0.0);
    EXPECT_THROW(generate_scenario(spec), std::invalid_argument);
}

TEST(Csv, EmptyScenarioWritesHeaderOnly) {
    Scenario sc;
    sc.input_dim = 3;
    const std::string path = testing::TempDir() + "ussl_empty.csv";
    save_csv(sc, path);
    EXPECT_EQ(slurp(path), "split,class_id,domain_id,is_ukc,is_ukd,f0,f1,f2\n");
    std::filesystem::remove(path);
}

TEST(Csv, RoundTripPreservesEveryField) {
    const Scenario sc = generate_scenario(default_scenario_spec(11));
    const std::string path = testing::TempDir() + "ussl_roundtrip.csv";
    save_csv(sc, path);
    const Scenario back = load_csv(path);
    EXPECT_EQ(back.k_known, sc.k_known);
    EXPECT_EQ(back.input_dim, sc.input_dim);
    auto same = [](const std::vector<Sample>& a, const std::vector<Sample>& b) {
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].x, b[i].x);
            EXPECT_EQ(a[i].class_id, b[i].class_id);
            EXPECT_EQ(a[i].domain_id, b[i].domain_id);
            EXPECT_EQ(a[i].is_ukc, b[i].is_ukc);
            EXPECT_EQ(a[i].is_ukd, b[i].is_ukd);
        }
    };
    same(sc.labeled, back.labeled);
    same(sc.unlabeled, back.unlabeled);
    same(sc.val, back.val);
    same(sc.test, back.test);
    std::filesystem::remove(path);
}

TEST(Csv, ParsesHandWrittenRows) {
    const std::string path = testing::TempDir() + "ussl_hand.csv";
    {
        std::ofstream out(path);
        out << "split,class_id,domain_id,is_ukc,is_ukd,f0,f1\n";
        out << "labeled,1,0,0,0,0.5,-1.25\n";
        out << "unlabeled,5,1,1,1,3,4\n";
        out << "test,0,0,0,0,0,0\n";
    }
    const Scenario sc = load_csv(path);
    ASSERT_EQ(sc.labeled.size(), 1u);
    ASSERT_EQ(sc.unlabeled.size(), 1u);
    ASSERT_EQ(sc.test.size(), 1u);
    EXPECT_EQ(sc.labeled[0].class_id, 1);
    EXPECT_EQ(sc.labeled[0].x, (std::vector<double>{0.5, -1.25}));
    EXPECT_TRUE(sc.unlabeled[0].is_ukc);
    EXPECT_TRUE(sc.unlabeled[0].is_ukd);
    EXPECT_EQ(sc.unlabeled[0].domain_id, 1);
    EXPECT_EQ(sc.k_known, 2u);
    std::filesystem::remove(path);
}

TEST(Csv, MalformedRowReportsLineNumber) {
    const std::string path = testing::TempDir() + "ussl_malformed.csv";
    {
        std::ofstream out(path);
        out << "split,class_id,domain_id,is_ukc,is_ukd,f0\n";
        out << "labeled,0,0,0,0,1.0\n";
        out << "labeled,0,0,0,0,zzz\n";
    }
    try {
        load_csv(path);
        FAIL() << "expected parse failure";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
    std::filesystem::remove(path);
}

TEST(Csv, InconsistentWidthReportsLineNumber) {
    const std::string path = testing::TempDir() + "ussl_width.csv";
    {
        std::ofstream out(path);
        out << "split,class_id,domain_id,is_ukc,is_ukd,f0,f1\n";
        out << "labeled,0,0,0,0,1.0\n";
    }
    try {
        load_csv(path);
        FAIL() << "expected width failure";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    std::filesystem::remove(path);
}

TEST(ScenarioSpecFile, RoundTripReproducesScenario) {
    const ScenarioSpec spec = default_scenario_spec(13);
    const std::string path = testing::TempDir() + "ussl_spec.txt";
    save_scenario_spec(spec, path);
    const ScenarioSpec back = load_scenario_spec(path);
    const std::string p1 = testing::TempDir() + "ussl_spec_a.csv";
    const std::string p2 = testing::TempDir() + "ussl_spec_b.csv";
    save_csv(generate_scenario(spec), p1);
    save_csv(generate_scenario(back), p2);
    EXPECT_EQ(slurp(p1), slurp(p2));
    std::filesystem::remove(path);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST(ScenarioSpecFile, RotationShorthandMatchesExplicitTransform) {
    const std::string path = testing::TempDir() + "ussl_spec_rot.txt";
    {
        std::ofstream out(path);
        out << "input_dim = 4\nk_known = 2\nseed = 21\n";
        out << "labeled_per_class = 3\nval_total = 2\ntest_total = 2\nunlabeled_total = 4\n";
        out << "ukc_fraction = 0\nukd_fraction = 0.5\n";
        out << "class.0.mean = 2,0,0,0\nclass.0.scale = 1\n";
        out << "class.1.mean = -2,0,0,0\nclass.1.scale = 1\n";
        out << "domain.0.shift = 0,0,0,0\n";
        out << "domain.1.rotation = 0,1,90\ndomain.1.shift = 1,1,1,1\n";
    }
    const ScenarioSpec spec = load_scenario_spec(path);
    ASSERT_EQ(spec.domains.size(), 2u);
    EXPECT_NEAR(spec.domains[1].transform(0, 0), 0.0, 1e-15);
    EXPECT_NEAR(spec.domains[1].transform(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(spec.domains[1].transform(0, 1), -1.0, 1e-15);
    const Scenario sc = generate_scenario(spec);
    EXPECT_EQ(sc.unlabeled.size(), 4u);
    std::filesystem::remove(path);
}
