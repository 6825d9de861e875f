#include "cyberroles/evaluation.hpp"

#include <algorithm>
#include <future>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "cyberroles/error.hpp"
#include "cyberroles/rng.hpp"

namespace cyberroles {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {
  if (labels_.empty()) throw ArgumentError("confusion matrix needs at least one label");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    for (std::size_t j = i + 1; j < labels_.size(); ++j)
      if (labels_[i] == labels_[j])
        throw ArgumentError("duplicate label '" + labels_[i] + "'");
}

std::size_t ConfusionMatrix::index_of(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw ArgumentError("label '" + label + "' is not in the label set");
  return static_cast<std::size_t>(it - labels_.begin());
}

void ConfusionMatrix::add(std::size_t gold, std::size_t predicted, std::size_t count) {
  if (gold >= size() || predicted >= size()) throw ArgumentError("label index out of range");
  counts_[gold * size() + predicted] += count;
}

void ConfusionMatrix::add(const std::string& gold, const std::string& predicted) {
  add(index_of(gold), index_of(predicted));
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.labels_ != labels_) throw ArgumentError("cannot merge matrices over different labels");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::size_t ConfusionMatrix::at(std::size_t gold, std::size_t predicted) const {
  return counts_.at(gold * size() + predicted);
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::size_t ConfusionMatrix::row_sum(std::size_t gold) const {
  std::size_t n = 0;
  for (std::size_t p = 0; p < size(); ++p) n += at(gold, p);
  return n;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  std::size_t n = 0;
  for (std::size_t g = 0; g < size(); ++g) n += at(g, predicted);
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < size(); ++i) n += at(i, i);
  return n;
}

nlohmann::json ConfusionMatrix::to_json() const {
  std::vector<std::vector<std::size_t>> rows(size(), std::vector<std::size_t>(size()));
  for (std::size_t g = 0; g < size(); ++g)
    for (std::size_t p = 0; p < size(); ++p) rows[g][p] = at(g, p);
  return {{"labels", labels_}, {"counts", rows}};
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& j) {
  ConfusionMatrix cm(j.at("labels").get<std::vector<std::string>>());
  const auto rows = j.at("counts").get<std::vector<std::vector<std::size_t>>>();
  if (rows.size() != cm.size()) throw ParseError("confusion matrix shape mismatch");
  for (std::size_t g = 0; g < rows.size(); ++g) {
    if (rows[g].size() != cm.size()) throw ParseError("confusion matrix shape mismatch");
    for (std::size_t p = 0; p < rows[g].size(); ++p) cm.add(g, p, rows[g][p]);
  }
  return cm;
}

ConfusionMatrix confusion_matrix(const std::vector<std::string>& gold,
                                 const std::vector<std::string>& predicted,
                                 const std::vector<std::string>& labels) {
  if (gold.empty()) throw ArgumentError("confusion_matrix: no items");
  if (gold.size() != predicted.size())
    throw ArgumentError("confusion_matrix: " + std::to_string(gold.size()) + " gold labels vs " +
                        std::to_string(predicted.size()) + " predictions");
  ConfusionMatrix cm(labels);
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], predicted[i]);
  return cm;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

double error_rate(double recall) {
  if (!(recall >= 0.0 && recall <= 1.0))
    throw ArgumentError("recall must lie in [0, 1]");
  return 1.0 - recall;
}

std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out;
  out.reserve(cm.size());
  for (std::size_t c = 0; c < cm.size(); ++c) {
    ClassMetrics m;
    m.label = cm.labels()[c];
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto predicted = static_cast<double>(cm.column_sum(c));
    const auto actual = static_cast<double>(cm.row_sum(c));
    m.precision = predicted > 0.0 ? tp / predicted : 0.0;
    m.recall = actual > 0.0 ? tp / actual : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
    m.error_rate = error_rate(m.recall);
    m.support = cm.row_sum(c);
    out.push_back(m);
  }
  return out;
}

double weighted_f1(const std::vector<double>& f1, const std::vector<double>& supports) {
  if (f1.size() != supports.size()) throw ArgumentError("weighted_f1: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f1.size(); ++i) {
    if (supports[i] < 0.0) throw ArgumentError("weighted_f1: negative support");
    num += supports[i] * f1[i];
    den += supports[i];
  }
  if (den <= 0.0) throw ArgumentError("weighted_f1: all supports are zero");
  return num / den;
}

double weighted_f1(const std::vector<ClassMetrics>& metrics) {
  std::vector<double> f1, sup;
  for (const auto& m : metrics) {
    f1.push_back(m.f1);
    sup.push_back(static_cast<double>(m.support));
  }
  return weighted_f1(f1, sup);
}

EvaluationReport EvaluationReport::from_confusion(std::string name, ConfusionMatrix cm,
                                                  nlohmann::json provenance) {
  EvaluationReport r;
  r.name = std::move(name);
  r.classes = class_metrics(cm);
  r.provenance = std::move(provenance);
  const std::size_t total = cm.total();
  if (total > 0) {
    r.weighted_f1 = cyberroles::weighted_f1(r.classes);
    r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  }
  for (const auto& m : r.classes) {
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
  }
  const auto n = static_cast<double>(r.classes.size());
  r.macro_precision /= n;
  r.macro_recall /= n;
  r.macro_f1 /= n;
  r.confusion = std::move(cm);
  return r;
}

const ClassMetrics& EvaluationReport::metrics_for(const std::string& label) const {
  for (const auto& m : classes)
    if (m.label == label) return m;
  throw ArgumentError("report '" + name + "' has no class '" + label + "'");
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json classes_json = nlohmann::json::array();
  for (const auto& m : classes)
    classes_json.push_back({{"label", m.label},
                            {"precision", m.precision},
                            {"recall", m.recall},
                            {"f1", m.f1},
                            {"error_rate", m.error_rate},
                            {"support", m.support}});
  return {{"name", name},
          {"confusion", confusion.to_json()},
          {"classes", classes_json},
          {"weighted_f1", weighted_f1},
          {"macro_precision", macro_precision},
          {"macro_recall", macro_recall},
          {"macro_f1", macro_f1},
          {"accuracy", accuracy},
          {"provenance", provenance}};
}

EvaluationReport average_reports(std::string name, const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) throw ArgumentError("average_reports: no reports");
  EvaluationReport out;
  out.name = std::move(name);
  out.confusion = reports.front().confusion;
  for (std::size_t i = 1; i < reports.size(); ++i) out.confusion.merge(reports[i].confusion);

  const std::size_t n_classes = reports.front().classes.size();
  out.classes.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& m = out.classes[c];
    m.label = reports.front().classes[c].label;
    std::size_t used = 0;
    for (const auto& r : reports) {
      const auto& rc = r.classes.at(c);
      m.support += rc.support;
      if (rc.support == 0) continue;
      m.precision += rc.precision;
      m.recall += rc.recall;
      m.f1 += rc.f1;
      ++used;
    }
    if (used > 0) {
      m.precision /= static_cast<double>(used);
      m.recall /= static_cast<double>(used);
      m.f1 /= static_cast<double>(used);
    }
    m.error_rate = error_rate(m.recall);
  }
  const auto n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    out.weighted_f1 += r.weighted_f1 / n;
    out.macro_precision += r.macro_precision / n;
    out.macro_recall += r.macro_recall / n;
    out.macro_f1 += r.macro_f1 / n;
    out.accuracy += r.accuracy / n;
  }
  out.provenance = {{"averaged_over", reports.size()}};
  return out;
}

std::string format_table(const std::vector<EvaluationReport>& reports) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(12) << "Model" << std::setw(6) << "WF" << std::setw(22)
     << "Class" << std::setw(6) << "P" << std::setw(6) << "R" << "F1\n";
  for (const auto& r : reports) {
    bool first = true;
    for (const auto& m : r.classes) {
      if (first) {
        os << std::setw(12) << r.name << std::setw(6) << r.weighted_f1;
      } else {
        os << std::setw(12) << "" << std::setw(6) << "";
      }
      os << std::setw(22) << m.label << std::setw(6) << m.precision << std::setw(6)
         << m.recall << m.f1 << '\n';
      first = false;
    }
  }
  return os.str();
}

std::vector<std::vector<std::string>> build_binary_testsets(
    const std::vector<std::string>& bullying_ids,
    const std::vector<std::string>& non_bullying_pool, std::size_t n_sets,
    std::size_t sample_size, std::uint64_t seed) {
  if (n_sets == 0) throw ArgumentError("build_binary_testsets: n_sets must be positive");
  if (non_bullying_pool.size() < sample_size)
    throw ArgumentError("non-bullying pool has " + std::to_string(non_bullying_pool.size()) +
                        " posts, fewer than the sample size " + std::to_string(sample_size));
  std::vector<std::vector<std::string>> sets;
  for (std::size_t s = 0; s < n_sets; ++s) {
    Rng rng = make_rng(seed, 100 + s);
    auto pool = non_bullying_pool;
    // Partial Fisher-Yates: the first sample_size entries are the sample.
    for (std::size_t i = 0; i < sample_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<std::string> set = bullying_ids;
    set.insert(set.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(sample_size));
    sets.push_back(std::move(set));
  }
  return sets;
}

// ---------------------------------------------------------------------------

nlohmann::json CrossValidationResult::to_json() const {
  nlohmann::json pooled_json = nlohmann::json::object(), mean_json = nlohmann::json::object();
  for (const auto& [k, r] : pooled) pooled_json[k] = r.to_json();
  for (const auto& [k, r] : mean_of_folds) mean_json[k] = r.to_json();
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : per_fold) {
    nlohmann::json fj = nlohmann::json::object();
    for (const auto& [k, r] : f) fj[k] = r.to_json();
    folds.push_back(fj);
  }
  return {{"pooled", pooled_json},
          {"mean_of_folds", mean_json},
          {"per_fold", folds},
          {"fold_plan_hash", fold_plan_hash},
          {"seed", seed}};
}

std::map<std::string, EvaluationReport> evaluate_predictor(const std::vector<Post>& posts,
                                                          const FoldPredictor& model,
                                                          const std::vector<EvalView>& views,
                                                          const nlohmann::json& provenance) {
  std::vector<ConfusionMatrix> cms;
  for (const auto& v : views) cms.emplace_back(v.labels);
  for (const auto& post : posts) {
    std::map<std::string, std::string> pred;
    try {
      pred = model.predict(post);
    } catch (const std::exception& e) {
      throw Error("prediction failed on '" + post.post_id + "': " + e.what());
    }
    for (std::size_t v = 0; v < views.size(); ++v) {
      const auto gold = views[v].gold(post);
      if (!gold) continue;
      auto it = pred.find(views[v].name);
      if (it == pred.end())
        throw Error("model gave no '" + views[v].name + "' prediction for '" + post.post_id + "'");
      cms[v].add(*gold, it->second);
    }
  }
  std::map<std::string, EvaluationReport> reports;
  for (std::size_t v = 0; v < views.size(); ++v)
    reports.emplace(views[v].name,
                    EvaluationReport::from_confusion(views[v].name, std::move(cms[v]), provenance));
  return reports;
}

CrossValidationResult cross_validate(const std::vector<Post>& corpus, const FoldPlan& plan,
                                     const TrainRecipe& recipe,
                                     const std::vector<EvalView>& views,
                                     std::size_t threads) {
  if (views.empty()) throw ArgumentError("cross_validate: no evaluation views");
  for (const auto& p : corpus)
    if (!plan.assignments.count(p.post_id))
      throw ArgumentError("fold plan does not cover post '" + p.post_id + "'");
  if (plan.assignments.size() != corpus.size())
    throw ArgumentError("fold plan lists posts that are not in the corpus");

  auto run_fold = [&](std::size_t fold) {
    std::vector<Post> train, test;
    for (const auto& p : corpus)
      (plan.assignments.at(p.post_id) == fold ? test : train).push_back(p);

    std::unique_ptr<FoldPredictor> model;
    try {
      model = recipe(train, fold);
    } catch (const std::exception& e) {
      throw FoldError(fold, std::string("training failed: ") + e.what());
    }
    if (!model) throw FoldError(fold, "recipe returned no model");

    try {
      return evaluate_predictor(test, *model, views,
                                {{"fold", fold}, {"seed", plan.seed}, {"test_posts", test.size()}});
    } catch (const std::exception& e) {
      throw FoldError(fold, e.what());
    }
  };

  CrossValidationResult result;
  result.per_fold.resize(plan.k);
  threads = std::max<std::size_t>(threads, 1);
  for (std::size_t start = 0; start < plan.k; start += threads) {
    std::vector<std::future<std::map<std::string, EvaluationReport>>> jobs;
    const std::size_t end = std::min(plan.k, start + threads);
    if (threads == 1) {
      result.per_fold[start] = run_fold(start);
      continue;
    }
    for (std::size_t f = start; f < end; ++f)
      jobs.push_back(std::async(std::launch::async, run_fold, f));
    for (std::size_t f = start; f < end; ++f) result.per_fold[f] = jobs[f - start].get();
  }

  for (const auto& v : views) {
    ConfusionMatrix pooled(v.labels);
    std::vector<EvaluationReport> fold_reports;
    for (const auto& fold : result.per_fold) {
      const auto& r = fold.at(v.name);
      pooled.merge(r.confusion);
      if (r.confusion.total() > 0) fold_reports.push_back(r);
    }
    result.pooled.emplace(v.name, EvaluationReport::from_confusion(
                                      v.name, std::move(pooled),
                                      {{"aggregation", "pooled"},
                                       {"folds", plan.k},
                                       {"seed", plan.seed},
                                       {"fold_plan_hash", plan.hash()}}));
    if (!fold_reports.empty()) {
      auto mean = average_reports(v.name, fold_reports);
      mean.provenance = {{"aggregation", "mean_of_folds"}, {"folds", fold_reports.size()}};
      result.mean_of_folds.emplace(v.name, std::move(mean));
    }
  }
  result.fold_plan_hash = plan.hash();
  result.seed = plan.seed;
  return result;
}

namespace {

class MapPredictor final : public FoldPredictor {
 public:
  using Fn = std::function<std::map<std::string, std::string>(const Post&)>;
  explicit MapPredictor(Fn fn) : fn_(std::move(fn)) {}
  std::map<std::string, std::string> predict(const Post& post) const override { return fn_(post); }

 private:
  Fn fn_;
};

}  // namespace

TrainRecipe oracle_recipe(std::vector<EvalView> views) {
  return [views = std::move(views)](const std::vector<Post>&, std::size_t) {
    return std::make_unique<MapPredictor>([views](const Post& post) {
      std::map<std::string, std::string> out;
      for (const auto& v : views)
        if (auto g = v.gold(post)) out[v.name] = *g;
      return out;
    });
  };
}

TrainRecipe majority_recipe(std::vector<EvalView> views) {
  return [views = std::move(views)](const std::vector<Post>& train, std::size_t) {
    std::map<std::string, std::string> majority;
    for (const auto& v : views) {
      std::vector<std::size_t> counts(v.labels.size(), 0);
      for (const auto& p : train)
        if (auto g = v.gold(p)) {
          auto it = std::find(v.labels.begin(), v.labels.end(), *g);
          if (it != v.labels.end()) ++counts[static_cast<std::size_t>(it - v.labels.begin())];
        }
      const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
      majority[v.name] = v.labels[static_cast<std::size_t>(best)];
    }
    return std::make_unique<MapPredictor>([majority](const Post&) { return majority; });
  };
}

}  // namespace cyberroles
