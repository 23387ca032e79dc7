#include <cmath>
#include <random>

#include "cascades/thresholds.hpp"
#include "doctest.h"

using namespace cascades;

namespace {

const TaskConfig kConfig{"proxy", "op", 1.0};

void add(CandidateScoreTable& table, const std::string& id, double p_true,
         const std::string& gold) {
    table.put(kConfig, id, make_prediction({"True", "False"}, {p_true, 1 - p_true}));
    table.set_gold(id, gold);
}

}  // namespace

TEST_CASE("score table stores and retrieves by config and doc") {
    CandidateScoreTable t;
    add(t, "d1", 0.8, "True");
    CHECK(t.has(kConfig, "d1"));
    CHECK_FALSE(t.has(kConfig, "d2"));
    CHECK(t.get(kConfig, "d1").confidence == doctest::Approx(0.8));
    CHECK(t.gold("d1") == "True");
    CHECK_THROWS_AS(t.get(kConfig, "d2"), std::invalid_argument);
    CHECK_THROWS_AS(t.gold("d2"), std::invalid_argument);
}

TEST_CASE("lowest accurate confidence becomes the class threshold") {
    CandidateScoreTable t;
    // Predicted True at 0.6 (wrong), 0.7 (right), 0.9 (right).
    add(t, "d1", 0.6, "False");
    add(t, "d2", 0.7, "True");
    add(t, "d3", 0.9, "True");
    auto task = find_thresholds(kConfig, t, {"d1", "d2", "d3"}, {"True", "False"},
                                0.9, 0.10);
    REQUIRE(task.has_value());
    // t=0.6 gives 2/3 accuracy; t=0.7 gives 2/2.
    CHECK(task->thresholds.at("True") == doctest::Approx(0.7));
    CHECK(std::isinf(task->thresholds.at("False")));
}

TEST_CASE("candidate with no accurate threshold anywhere is dropped") {
    CandidateScoreTable t;
    add(t, "d1", 0.9, "False");
    add(t, "d2", 0.95, "False");
    CHECK_FALSE(
        find_thresholds(kConfig, t, {"d1", "d2"}, {"True", "False"}, 0.9, 0.10)
            .has_value());
}

TEST_CASE("coverage gate g filters out narrow tasks") {
    CandidateScoreTable t;
    // One perfectly-classified doc out of 20: coverage 0.05 < g = 0.10.
    add(t, "d0", 0.99, "True");
    std::vector<std::string> ids = {"d0"};
    for (int i = 1; i < 20; ++i) {
        std::string id = "d" + std::to_string(i);
        add(t, id, 0.4, "False");  // predicted False at 0.6, wrong gold
        t.set_gold(id, "True");
        ids.push_back(id);
    }
    CHECK_FALSE(find_thresholds(kConfig, t, ids, {"True", "False"}, 1.0, 0.10)
                    .has_value());
    // The same table passes with a permissive gate.
    CHECK(find_thresholds(kConfig, t, ids, {"True", "False"}, 1.0, 0.04)
              .has_value());
}

TEST_CASE("thresholds match an independent brute-force scan") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        CandidateScoreTable t;
        std::vector<std::string> ids;
        const int n = 12;
        for (int i = 0; i < n; ++i) {
            std::string id = "d" + std::to_string(i);
            double p = 0.05 + 0.90 * unif(rng);
            add(t, id, p, unif(rng) < 0.5 ? "True" : "False");
            ids.push_back(id);
        }
        const double alpha = 0.8, g = 0.10;
        auto task = find_thresholds(kConfig, t, ids, {"True", "False"}, alpha, g);

        // Independent scan: for each class, every observed confidence.
        std::map<ClassLabel, double> expected;
        long covered = 0;
        for (const ClassLabel c : {"True", "False"}) {
            expected[c] = kInfThreshold;
            std::vector<std::pair<double, bool>> preds;
            for (const auto& id : ids) {
                const auto& p = t.get(kConfig, id);
                if (p.predicted == c) preds.emplace_back(p.confidence, t.gold(id) == c);
            }
            std::vector<double> cands;
            for (auto& [conf, ok] : preds) cands.push_back(conf);
            std::sort(cands.begin(), cands.end());
            for (double cand : cands) {
                long tot = 0, ok_n = 0;
                for (auto& [conf, ok] : preds)
                    if (conf >= cand) {
                        ++tot;
                        if (ok) ++ok_n;
                    }
                if (tot > 0 && ok_n >= alpha * tot) {
                    expected[c] = cand;
                    covered += tot;
                    break;
                }
            }
        }
        bool any = std::isfinite(expected["True"]) || std::isfinite(expected["False"]);
        bool retained = any && covered >= g * n;
        CHECK(task.has_value() == retained);
        if (task && retained) {
            CHECK(task->thresholds.at("True") == expected["True"]);
            CHECK(task->thresholds.at("False") == expected["False"]);
        }
    }
}
