#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cyberroles/corpus.hpp"
#include "cyberroles/error.hpp"
#include "cyberroles/sampling.hpp"
#include "json.hpp"

namespace cyberroles {

/// Rows are gold labels, columns are predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t index_of(const std::string& label) const;

  void add(std::size_t gold, std::size_t predicted, std::size_t count = 1);
  void add(const std::string& gold, const std::string& predicted);
  /// Adds another matrix over the same label list.
  void merge(const ConfusionMatrix& other);

  std::size_t at(std::size_t gold, std::size_t predicted) const;
  std::size_t total() const;
  std::size_t row_sum(std::size_t gold) const;
  std::size_t column_sum(std::size_t predicted) const;
  std::size_t trace() const;

  nlohmann::json to_json() const;
  static ConfusionMatrix from_json(const nlohmann::json& j);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> counts_;
};

/// Throws ArgumentError on empty input, a length mismatch or a label
/// missing from `labels`.
ConfusionMatrix confusion_matrix(const std::vector<std::string>& gold,
                                 const std::vector<std::string>& predicted,
                                 const std::vector<std::string>& labels);

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double error_rate = 1.0;
  std::size_t support = 0;
};

/// Harmonic mean; 0 when precision + recall is 0.
double f1_score(double precision, double recall);

/// 1 - recall. Throws ArgumentError outside [0, 1].
double error_rate(double recall);

/// Per-class precision, recall, F1 and error rate. Any 0/0 ratio is 0.
std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& cm);

/// sum(support * f1) / sum(support). Throws ArgumentError when every support
/// is zero or the spans differ in length.
double weighted_f1(const std::vector<double>& f1, const std::vector<double>& supports);
double weighted_f1(const std::vector<ClassMetrics>& metrics);

struct EvaluationReport {
  std::string name;
  ConfusionMatrix confusion;
  std::vector<ClassMetrics> classes;
  double weighted_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  nlohmann::json provenance = nlohmann::json::object();

  static EvaluationReport from_confusion(std::string name, ConfusionMatrix cm,
                                         nlohmann::json provenance = nlohmann::json::object());
  const ClassMetrics& metrics_for(const std::string& label) const;
  nlohmann::json to_json() const;
};

/// Per-class metrics and weighted F1 averaged over several reports with the
/// same label list (folds, or repeated test sets). Classes with zero support
/// in a report are left out of that class's average.
EvaluationReport average_reports(std::string name, const std::vector<EvaluationReport>& reports);

/// `Model  WF  Class  P  R  F1` rows, two decimals, one block per report.
std::string format_table(const std::vector<EvaluationReport>& reports);

/// Each set holds every bullying id plus `sample_size` non-bullying ids drawn
/// without replacement (independently per set, seeded). Throws ArgumentError
/// when the pool is smaller than sample_size or n_sets is 0.
std::vector<std::vector<std::string>> build_binary_testsets(
    const std::vector<std::string>& bullying_ids,
    const std::vector<std::string>& non_bullying_pool, std::size_t n_sets,
    std::size_t sample_size, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// One labelled view of a post for evaluation: e.g. the outer model's
/// category, or the final role. gold() returns nullopt for posts outside
/// the view (a defending-only model is not scored on bullying posts).
struct EvalView {
  std::string name;
  std::vector<std::string> labels;
  std::function<std::optional<std::string>(const Post&)> gold;
};

/// Predictions of a trained fold model: view name -> label.
class FoldPredictor {
 public:
  virtual ~FoldPredictor() = default;
  virtual std::map<std::string, std::string> predict(const Post& post) const = 0;
};

/// Trains a predictor on a fold's training posts. The fold index lets
/// recipes derive per-fold seeds.
using TrainRecipe =
    std::function<std::unique_ptr<FoldPredictor>(const std::vector<Post>& train, std::size_t fold)>;

struct CrossValidationResult {
  std::map<std::string, EvaluationReport> pooled;
  std::map<std::string, EvaluationReport> mean_of_folds;
  std::vector<std::map<std::string, EvaluationReport>> per_fold;
  std::string fold_plan_hash;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

class FoldError : public Error {
 public:
  FoldError(std::size_t fold, const std::string& what)
      : Error("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}
  std::size_t fold() const { return fold_; }

 private:
  std::size_t fold_;
};

/// Scores one trained predictor on `posts`, one report per view. Throws
/// Error when a prediction fails or a view's prediction is missing, and
/// ArgumentError for a label outside a view's label set.
std::map<std::string, EvaluationReport> evaluate_predictor(
    const std::vector<Post>& posts, const FoldPredictor& model,
    const std::vector<EvalView>& views,
    const nlohmann::json& provenance = nlohmann::json::object());

/// Trains on k-1 folds and evaluates on the held-out fold, for each fold.
/// Pooled reports sum the fold confusion matrices; mean_of_folds averages
/// the per-fold metrics. Up to `threads` folds run concurrently; results do
/// not depend on completion order. A failing fold raises FoldError.
CrossValidationResult cross_validate(const std::vector<Post>& corpus, const FoldPlan& plan,
                                     const TrainRecipe& recipe,
                                     const std::vector<EvalView>& views,
                                     std::size_t threads = 1);

/// Predicts the gold label of every view.
TrainRecipe oracle_recipe(std::vector<EvalView> views);
/// Predicts each view's most frequent training label (ties: first in the
/// view's label list).
TrainRecipe majority_recipe(std::vector<EvalView> views);

}  // namespace cyberroles
