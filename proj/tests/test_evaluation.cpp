#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cyberroles/error.hpp"
#include "cyberroles/evaluation.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cyberroles;

namespace {

std::vector<Post> binary_corpus(std::size_t pos, std::size_t neg) {
  std::vector<Post> posts;
  for (std::size_t i = 0; i < pos + neg; ++i) {
    Post p;
    p.post_id = "p" + std::to_string(i);
    p.text = "t";
    if (i < pos) {
      p.harm = 1;
      p.role = RoleLabel::Harasser;
    }
    posts.push_back(p);
  }
  return posts;
}

EvalView cb_view() {
  return {"cb", {"yes", "no"}, [](const Post& p) -> std::optional<std::string> {
            return p.is_cyberbullying() ? "yes" : "no";
          }};
}

FoldPlan plan_for(const std::vector<Post>& posts, std::size_t k, std::uint64_t seed) {
  std::map<std::string, std::string> labels;
  for (const auto& p : posts) labels[p.post_id] = p.is_cyberbullying() ? "yes" : "no";
  return stratified_kfold(labels, k, seed);
}

}  // namespace

TEST_CASE("confusion_matrix examples") {
  const auto cm = confusion_matrix({"A", "A", "B"}, {"A", "B", "B"}, {"A", "B"});
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.total() == 3);

  const std::vector<std::string> g = {"A", "C", "B", "C"};
  const auto diag = confusion_matrix(g, g, {"A", "B", "C"});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) CHECK(diag.at(i, j) == 0);
  CHECK(diag.trace() == 4);

  CHECK_THROWS_AS(confusion_matrix({}, {}, {"A"}), ArgumentError);
  CHECK_THROWS_AS(confusion_matrix({"A"}, {"A", "A"}, {"A"}), ArgumentError);
  CHECK_THROWS_AS(confusion_matrix({"A"}, {"Z"}, {"A"}), ArgumentError);
  CHECK(ConfusionMatrix::from_json(cm.to_json()) == cm);
}

TEST_CASE("f1, error rate and weighted F1 against published rows") {
  CHECK(std::abs(f1_score(0.84, 0.82) - 0.83) <= 0.005);
  CHECK(f1_score(1, 1) == 1.0);
  CHECK(f1_score(0, 0) == 0.0);
  CHECK(error_rate(1.0) == 0.0);
  CHECK(error_rate(0.0) == 1.0);
  CHECK(error_rate(0.56) == doctest::Approx(0.44));
  CHECK_THROWS_AS(error_rate(1.5), ArgumentError);
  CHECK_THROWS_AS(error_rate(-0.1), ArgumentError);

  // Outer model: bullying = harasser + assistant, defending = victim + defender.
  const double bully = 3576 + 24, defend = 1356 + 424;
  CHECK(std::abs(weighted_f1({0.83, 0.67}, {bully, defend}) - 0.78) <= 0.01);
  CHECK(weighted_f1({0.7}, {12}) == doctest::Approx(0.7));
  CHECK(weighted_f1({0.4, 0.6}, {5, 5}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(weighted_f1({0.4, 0.6}, {0, 0}), ArgumentError);
  CHECK_THROWS_AS(weighted_f1({0.4}, {1, 1}), ArgumentError);
}

TEST_CASE("class_metrics: zero true positives with predictions present") {
  // Every assistant post predicted as harasser, one harasser predicted as assistant.
  const auto cm = confusion_matrix({"har", "har", "ass", "ass"}, {"har", "ass", "har", "har"},
                                   {"har", "ass"});
  const auto m = class_metrics(cm);
  CHECK(m[1].precision == 0.0);
  CHECK(m[1].recall == 0.0);
  CHECK(m[1].f1 == 0.0);
  CHECK(m[1].error_rate == 1.0);
  const auto perfect = class_metrics(confusion_matrix({"a", "b"}, {"a", "b"}, {"a", "b"}));
  CHECK(perfect[0].f1 == 1.0);
  CHECK(perfect[0].error_rate == 0.0);
}

TEST_CASE("class_metrics matches a brute-force recount on random instances") {
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<int> ncls(1, 6), nitems(1, 300);
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = ncls(rng);
    std::vector<std::string> labels;
    for (int i = 0; i < c; ++i) labels.push_back("L" + std::to_string(i));
    std::uniform_int_distribution<int> pick(0, c - 1);
    std::vector<std::string> gold, pred;
    for (int i = nitems(rng); i > 0; --i) {
      gold.push_back(labels[pick(rng)]);
      pred.push_back(rng() % 3 ? gold.back() : labels[pick(rng)]);
    }
    const auto cm = confusion_matrix(gold, pred, labels);
    const auto metrics = class_metrics(cm);
    const auto ref = oracle::recount(gold, pred, labels);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto& r = ref.at(labels[i]);
      CHECK(cm.at(i, i) == r.tp);
      CHECK(cm.column_sum(i) - cm.at(i, i) == r.fp);
      CHECK(cm.row_sum(i) - cm.at(i, i) == r.fn);
      CHECK(metrics[i].support == r.support);
      CHECK(metrics[i].support == cm.row_sum(i));
      CHECK(std::abs(metrics[i].precision - r.precision) <= 1e-12);
      CHECK(std::abs(metrics[i].recall - r.recall) <= 1e-12);
      CHECK(std::abs(metrics[i].f1 - r.f1) <= 1e-12);
      CHECK(metrics[i].error_rate == 1.0 - metrics[i].recall);
    }
    const auto rep = EvaluationReport::from_confusion("r", cm);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
    CHECK(std::abs(rep.accuracy - double(correct) / double(gold.size())) <= 1e-12);
    double num = 0, den = 0;
    for (const auto& l : labels) {
      num += ref.at(l).f1 * double(ref.at(l).support);
      den += double(ref.at(l).support);
    }
    CHECK(std::abs(rep.weighted_f1 - num / den) <= 1e-12);
  }
}

TEST_CASE("error_rate is exactly 1 - recall") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double r = u(rng);
    CHECK(error_rate(r) == 1.0 - r);
  }
}

TEST_CASE("average_reports and format_table") {
  const auto a = EvaluationReport::from_confusion(
      "m", confusion_matrix({"x", "y"}, {"x", "y"}, {"x", "y"}));
  const auto b = EvaluationReport::from_confusion(
      "m", confusion_matrix({"x", "y"}, {"y", "y"}, {"x", "y"}));
  const auto avg = average_reports("m", {a, b});
  CHECK(avg.metrics_for("x").recall == doctest::Approx(0.5));
  CHECK(avg.weighted_f1 == doctest::Approx((a.weighted_f1 + b.weighted_f1) / 2));
  const auto table = format_table({a});
  CHECK(table.find("Model") != std::string::npos);
  CHECK(table.find("1.00") != std::string::npos);
  CHECK_THROWS(a.metrics_for("nope"));
}

TEST_CASE("build_binary_testsets") {
  std::vector<std::string> bully, pool;
  for (int i = 0; i < 5380; ++i) bully.push_back("b" + std::to_string(i));
  for (int i = 0; i < 20000; ++i) pool.push_back("n" + std::to_string(i));
  const auto sets = build_binary_testsets(bully, pool, 3, 10872, 1);
  REQUIRE(sets.size() == 3);
  for (const auto& s : sets) {
    CHECK(s.size() == 16252);
    CHECK(std::set<std::string>(s.begin(), s.end()).size() == s.size());
  }
  CHECK(sets[0] != sets[1]);

  const auto alone = build_binary_testsets(bully, pool, 1, 0, 1);
  CHECK(alone.at(0) == bully);

  auto other = build_binary_testsets(bully, pool, 1, 100, 2).at(0);
  auto first = build_binary_testsets(bully, pool, 1, 100, 1).at(0);
  CHECK(other != first);
  CHECK(build_binary_testsets(bully, pool, 1, 100, 1).at(0) == first);

  CHECK_THROWS_AS(build_binary_testsets(bully, pool, 1, 20001, 1), ArgumentError);
  CHECK_THROWS_AS(build_binary_testsets(bully, pool, 0, 10, 1), ArgumentError);
}

TEST_CASE("cross_validate: oracle stub scores perfectly") {
  const auto posts = binary_corpus(30, 70);
  const auto plan = plan_for(posts, 10, 1);
  const auto result = cross_validate(posts, plan, oracle_recipe({cb_view()}), {cb_view()});
  const auto& r = result.pooled.at("cb");
  for (const auto& m : r.classes) CHECK(m.f1 == 1.0);
  CHECK(r.confusion.total() == 100);
  CHECK(result.per_fold.size() == 10);
  CHECK(result.fold_plan_hash == plan.hash());
  CHECK(result.mean_of_folds.at("cb").weighted_f1 == doctest::Approx(1.0));
}

TEST_CASE("cross_validate: majority stub on 70/30") {
  const auto posts = binary_corpus(30, 70);
  const auto plan = plan_for(posts, 10, 2);
  const auto result = cross_validate(posts, plan, majority_recipe({cb_view()}), {cb_view()});
  const auto& r = result.pooled.at("cb");
  CHECK(r.metrics_for("yes").recall == 0.0);
  CHECK(r.metrics_for("yes").error_rate == 1.0);
  CHECK(r.metrics_for("no").recall == 1.0);
}

TEST_CASE("cross_validate: pooled aggregation ignores fold order and thread count") {
  const auto posts = binary_corpus(40, 60);
  const auto plan = plan_for(posts, 5, 3);
  // A deterministic but imperfect predictor: wrong on every seventh post.
  TrainRecipe noisy = [](const std::vector<Post>&, std::size_t) {
    struct P final : FoldPredictor {
      std::map<std::string, std::string> predict(const Post& p) const override {
        const bool flip = std::stoi(p.post_id.substr(1)) % 7 == 0;
        return {{"cb", (p.is_cyberbullying() != flip) ? "yes" : "no"}};
      }
    };
    return std::unique_ptr<FoldPredictor>(new P);
  };
  const auto serial = cross_validate(posts, plan, noisy, {cb_view()}, 1);
  const auto parallel = cross_validate(posts, plan, noisy, {cb_view()}, 3);
  CHECK(serial.to_json() == parallel.to_json());

  // Re-pool the per-fold matrices in shuffled orders.
  std::vector<std::size_t> order = {0, 1, 2, 3, 4};
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(order.begin(), order.end(), rng);
    ConfusionMatrix pooled({"yes", "no"});
    for (auto f : order) pooled.merge(serial.per_fold[f].at("cb").confusion);
    CHECK(pooled == serial.pooled.at("cb").confusion);
  }
}

TEST_CASE("cross_validate: failures carry the fold index") {
  const auto posts = binary_corpus(10, 10);
  const auto plan = plan_for(posts, 5, 0);
  TrainRecipe failing = [](const std::vector<Post>&, std::size_t fold) -> std::unique_ptr<FoldPredictor> {
    if (fold == 3) throw ConfigurationError("boom");
    return nullptr;
  };
  try {
    cross_validate(posts, plan, failing, {cb_view()});
    FAIL("expected FoldError");
  } catch (const FoldError& e) {
    CHECK(e.fold() == 0);  // fold 0 returns no model
  }
  TrainRecipe fails_late = [&](const std::vector<Post>& train, std::size_t fold) {
    if (fold == 3) throw ConfigurationError("boom");
    return oracle_recipe({cb_view()})(train, fold);
  };
  try {
    cross_validate(posts, plan, fails_late, {cb_view()});
    FAIL("expected FoldError");
  } catch (const FoldError& e) {
    CHECK(e.fold() == 3);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
  auto partial = plan;
  partial.assignments.erase(partial.assignments.begin());
  CHECK_THROWS_AS(cross_validate(posts, partial, oracle_recipe({cb_view()}), {cb_view()}),
                  ArgumentError);
}
