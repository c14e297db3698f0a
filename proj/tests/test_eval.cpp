#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "impact/eval.hpp"

using namespace impact;

namespace {

// O(n^2) oracle: pair counting with half-credit for ties.
double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j])
                wins += 1.0;
            else if (s[i] == s[j])
                wins += 0.5;
        }
    }
    return wins / pairs;
}

}  // namespace

TEST_CASE("rank AUC equals the pair-counting oracle on random fixtures") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5 + static_cast<int>(rng() % 60);
        std::vector<double> s(n);
        std::vector<int> y(n);
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            // quantize to force ties regularly
            s[i] = std::round(nd(rng) * 4.0) / 4.0;
            y[i] = coin(rng);
            pos += y[i];
        }
        if (pos == 0) y[0] = 1;
        if (pos == n) y[0] = 0;
        CHECK(auc(s, y) == doctest::Approx(auc_pairs(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("AUC is invariant under strictly monotone score transforms") {
    std::vector<double> s{0.1, 2.0, -1.0, 0.7, 1.4, -0.2};
    std::vector<int> y{0, 1, 0, 0, 1, 0};
    const double base = auc(s, y);
    auto t = s;
    for (auto& v : t) v = std::exp(3.0 * v) + 7.0;
    CHECK(auc(t, y) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("AUC hits the closed-form values on simple fixtures") {
    CHECK(auc({0.0, 1.0}, {0, 1}) == doctest::Approx(1.0));
    CHECK(auc({1.0, 0.0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(auc({1.0, 1.0}, {0, 1}) == doctest::Approx(0.5));  // full tie
}

TEST_CASE("AUC rejects degenerate inputs") {
    CHECK_THROWS_AS(auc({1.0, 2.0}, {1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(auc({1.0, 2.0}, {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(auc({1.0}, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(auc({1.0, std::nan("")}, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(auc({1.0, 2.0}, {0, 2}), std::invalid_argument);
}

TEST_CASE("seen/unseen AUC separates anomaly classes by membership") {
    Arch dummy;
    std::vector<SeriesWindow> ws(6);
    std::vector<double> scores{0.1, 0.2, 0.9, 0.8, 0.95, 0.3};
    // two normals, seen-class anomaly x2, unseen-class anomaly, normal
    ws[0].label = 0;
    ws[1].label = 0;
    ws[2].label = 1;
    ws[2].class_id = 0;
    ws[3].label = 1;
    ws[3].class_id = 0;
    ws[4].label = 1;
    ws[4].class_id = 2;
    ws[5].label = 0;
    auto r = seen_unseen_auc(scores, ws, {0, 1});
    REQUIRE(r.seen.has_value());
    REQUIRE(r.unseen.has_value());
    CHECK(*r.seen == doctest::Approx(1.0));
    CHECK(*r.unseen == doctest::Approx(1.0));
    CHECK(r.overall == doctest::Approx(1.0));

    // No unseen anomalies -> unseen AUC absent.
    auto r2 = seen_unseen_auc(scores, ws, {0, 1, 2});
    CHECK_FALSE(r2.unseen.has_value());
}

TEST_CASE("Gaussian KL divergence is near zero for identical distributions") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::vector<double>> a, b;
    for (int i = 0; i < 500; ++i) {
        a.push_back({nd(rng), nd(rng)});
        b.push_back({nd(rng), nd(rng)});
    }
    CHECK(gaussian_kld(a, b) < 0.05);
    CHECK(gaussian_kld(a, a) == doctest::Approx(0.0));
}

TEST_CASE("Gaussian KL divergence matches the 1-D closed form") {
    // Deterministic samples whose fitted moments are exact: use a crafted set.
    std::vector<std::vector<double>> p, q;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n1(1.0, 2.0), n2(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        p.push_back({n1(rng)});
        q.push_back({n2(rng)});
    }
    // KL(N(1,4) || N(0,1)) = 0.5 (log(1/4) + 4 + 1 - 1) = 0.5(4 - log 4)
    const double expect = 0.5 * (4.0 - std::log(4.0));
    CHECK(gaussian_kld(p, q) == doctest::Approx(expect).epsilon(0.05));
    CHECK(gaussian_kld(p, q) > 0.0);
}

TEST_CASE("Gaussian KL fit enforces the sample-size guard and variance floor") {
    std::vector<std::vector<double>> tiny{{1.0, 2.0}, {1.5, 2.5}};
    CHECK_THROWS_AS(gaussian_kld(tiny, tiny), std::invalid_argument);
    // Constant samples: variance floored rather than dividing by zero.
    std::vector<std::vector<double>> flat(10, std::vector<double>{3.0});
    std::vector<std::vector<double>> spread;
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int i = 0; i < 10; ++i) spread.push_back({nd(rng)});
    CHECK(std::isfinite(gaussian_kld(flat, spread)));
    CHECK(std::isfinite(gaussian_kld(spread, flat)));
}

TEST_CASE("decontamination metrics from a labeled influence report") {
    InfluenceReport report;
    auto add = [&](int64_t id, double infl, PartitionTag tag, Provenance prov) {
        InfluenceEntry e;
        e.id = id;
        e.influence = infl;
        e.partition = tag;
        e.provenance = prov;
        report.entries.push_back(e);
    };
    add(0, 2.0, PartitionTag::Contaminated, Provenance::InjectedContaminant);
    add(1, 1.0, PartitionTag::Contaminated, Provenance::Original);       // false flag
    add(2, -1.0, PartitionTag::Clean, Provenance::InjectedContaminant);  // missed
    add(3, -2.0, PartitionTag::Reference, Provenance::Original);
    add(4, 5.0, PartitionTag::LabeledAnomaly, Provenance::Original);     // ignored

    auto m = decon_metrics(report);
    CHECK(m.true_contaminants == 2);
    CHECK(m.flagged == 2);
    CHECK(m.flagged_true == 1);
    CHECK(m.precision == doctest::Approx(0.5));
    CHECK(m.recall == doctest::Approx(0.5));
    CHECK(m.mean_influence_contaminant == doctest::Approx(0.5));   // (2 - 1) / 2
    CHECK(m.mean_influence_normal == doctest::Approx(-0.5));       // (1 - 2) / 2
}

TEST_CASE("evaluation report serializes to json and csv") {
    EvalReport r;
    r.auc.overall = 0.9;
    r.auc.seen = 0.95;
    r.setting = "general";
    r.seed = 7;
    r.ablation = "none";
    auto js = r.to_json();
    CHECK(js.find("\"overall\": 0.9") != std::string::npos);
    CHECK(js.find("unseen") == std::string::npos);
    auto row = r.to_csv_row();
    CHECK(row.rfind("general,7,none,0.9,0.95,", 0) == 0);
    CHECK(EvalReport::csv_header().rfind("setting,", 0) == 0);
}
