#include "cyberroles/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "cyberroles/rng.hpp"

namespace cyberroles {

namespace fs = std::filesystem;

namespace {

bool same_label_set(const std::vector<std::string>& labels, std::set<std::string> expected) {
  return labels.size() == expected.size() &&
         std::set<std::string>(labels.begin(), labels.end()) == expected;
}

std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> items,
                                                    std::size_t n, Rng& rng) {
  std::shuffle(items.begin(), items.end(), rng);
  items.resize(std::min(n, items.size()));
  return items;
}

std::size_t label_index(const std::vector<std::string>& labels, const std::string& label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ConfigurationError("label '" + label + "' missing");
  return static_cast<std::size_t>(it - labels.begin());
}

MemberRecipe reseeded(MemberRecipe recipe, std::uint64_t stream) {
  recipe.training.seed = derive_seed(recipe.training.seed, stream);
  if (recipe.sampler) recipe.sampler->seed = derive_seed(recipe.sampler->seed, stream);
  return recipe;
}

}  // namespace

// ---------------------------------------------------------------------------
// Voting ensemble
// ---------------------------------------------------------------------------

BiasedSets build_biased_training_sets(const std::vector<std::string>& labels,
                                      double majority_fraction, std::uint64_t seed) {
  if (!(majority_fraction > 0.5 && majority_fraction < 1.0))
    throw ArgumentError("majority_fraction must lie strictly between 0.5 and 1");
  std::vector<std::size_t> off, nots;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kOffensive)
      off.push_back(i);
    else if (labels[i] == kNotOffensive)
      nots.push_back(i);
    else
      throw ArgumentError("binary label must be OFF or NOT, got '" + labels[i] + "'");
  }
  if (off.empty() || nots.empty())
    throw ArgumentError("biased training sets need both OFF and NOT examples");

  Rng rng = make_rng(seed, 20);
  auto biased = [&](const std::vector<std::size_t>& majority,
                    const std::vector<std::size_t>& minority, const std::string& name) {
    const double want = static_cast<double>(majority.size()) * (1.0 - majority_fraction) /
                        majority_fraction;
    const auto n_minor = static_cast<std::size_t>(std::llround(want));
    if (n_minor == 0 || n_minor > minority.size())
      throw ArgumentError("pool too small for an " + name + "-majority set at fraction " +
                          std::to_string(majority_fraction) + ": need " +
                          std::to_string(n_minor) + " minority items, have " +
                          std::to_string(minority.size()));
    auto set = majority;
    auto sample = sample_without_replacement(minority, n_minor, rng);
    set.insert(set.end(), sample.begin(), sample.end());
    std::sort(set.begin(), set.end());
    return set;
  };
  BiasedSets out;
  out.set_a = biased(off, nots, kOffensive);
  out.set_b = biased(nots, off, kNotOffensive);
  return out;
}

std::vector<std::size_t> disagreement_subset(const std::vector<std::string>& pred_a,
                                             const std::vector<std::string>& pred_b,
                                             const std::vector<std::string>& gold,
                                             std::uint64_t seed) {
  if (pred_a.size() != gold.size() || pred_b.size() != gold.size())
    throw ArgumentError("disagreement_subset: prediction and gold lengths differ");
  std::map<std::string, std::vector<std::size_t>> by_gold;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (pred_a[i] != pred_b[i]) by_gold[gold[i]].push_back(i);
  if (by_gold.size() < 2) return {};

  std::size_t m = by_gold.begin()->second.size();
  for (const auto& [g, ids] : by_gold) m = std::min(m, ids.size());
  Rng rng = make_rng(seed, 21);
  std::vector<std::size_t> out;
  for (auto& [g, ids] : by_gold) {
    auto s = sample_without_replacement(ids, m, rng);
    out.insert(out.end(), s.begin(), s.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

const std::string& vote(const std::string& pred_a, const std::string& pred_b,
                        const std::string& pred_c) {
  for (const auto* p : {&pred_a, &pred_b, &pred_c})
    if (*p != kOffensive && *p != kNotOffensive)
      throw ArgumentError("vote: label must be OFF or NOT, got '" + *p + "'");
  return pred_a == pred_b ? pred_a : pred_c;
}

VotingEnsemble::VotingEnsemble(TrainedClassifier a, TrainedClassifier b, TrainedClassifier c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  for (const auto* m : {&a_, &b_, &c_})
    if (!same_label_set(m->labels(), {kOffensive, kNotOffensive}))
      throw ConfigurationError("voting ensemble members must be OFF/NOT classifiers");
}

VoteResult VotingEnsemble::combine(Vector pa, Vector pb, Vector pc) const {
  VoteResult r;
  const auto& la = a_.labels()[argmax(pa)];
  const auto& lb = b_.labels()[argmax(pb)];
  const auto& lc = c_.labels()[argmax(pc)];
  r.label = vote(la, lb, lc);
  r.referee_used = la != lb;
  r.proba_a = std::move(pa);
  r.proba_b = std::move(pb);
  r.proba_c = std::move(pc);
  return r;
}

VoteResult VotingEnsemble::predict(const TokenSequence& tokens) const {
  return combine(a_.predict_proba(tokens), b_.predict_proba(tokens), c_.predict_proba(tokens));
}

VoteResult VotingEnsemble::predict_features(const Vector& features) const {
  return combine(a_.predict_proba_features(features), b_.predict_proba_features(features),
                 c_.predict_proba_features(features));
}

// ---------------------------------------------------------------------------
// Role ensemble
// ---------------------------------------------------------------------------

RoleEnsemble::RoleEnsemble(TrainedClassifier outer, TrainedClassifier bullying,
                           TrainedClassifier defending)
    : outer_(std::move(outer)), bullying_(std::move(bullying)), defending_(std::move(defending)) {
  auto names = [](RoleCategory c) {
    std::set<std::string> s;
    for (auto r : category_roles(c)) s.emplace(role_name(r));
    return s;
  };
  if (!same_label_set(outer_.labels(), {std::string(category_name(RoleCategory::Bullying)),
                                        std::string(category_name(RoleCategory::Defending))}))
    throw ConfigurationError("outer model must classify bullying vs defending");
  if (!same_label_set(bullying_.labels(), names(RoleCategory::Bullying)))
    throw ConfigurationError("bullying model must classify harasser vs bystander_assistant");
  if (!same_label_set(defending_.labels(), names(RoleCategory::Defending)))
    throw ConfigurationError("defending model must classify victim vs bystander_defender");
}

RolePrediction RoleEnsemble::route(
    Vector outer_proba, const std::function<Vector(const TrainedClassifier&)>& leaf_proba) const {
  RolePrediction p;
  p.category = category_from_name(outer_.labels()[argmax(outer_proba)]);
  const auto& model = leaf(p.category);
  p.leaf_proba = leaf_proba(model);
  p.role = role_from_name(model.labels()[argmax(p.leaf_proba)]);
  p.outer_proba = std::move(outer_proba);
  return p;
}

RolePrediction RoleEnsemble::predict_role(const TokenSequence& tokens) const {
  return route(outer_.predict_proba(tokens),
               [&](const TrainedClassifier& m) { return m.predict_proba(tokens); });
}

RolePrediction RoleEnsemble::predict_role_features(const Vector& features) const {
  return route(outer_.predict_proba_features(features),
               [&](const TrainedClassifier& m) { return m.predict_proba_features(features); });
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

nlohmann::json PipelinePrediction::to_json(const std::string& post_id) const {
  nlohmann::json j = {
      {"post_id", post_id},
      {"binary", cyberbullying ? "cyberbullying" : "not_cyberbullying"},
      {"role", role ? nlohmann::json(std::string(role_name(*role))) : nlohmann::json(nullptr)},
      {"stage1",
       {{"label", stage1.label},
        {"referee_used", stage1.referee_used},
        {"proba_a", stage1.proba_a},
        {"proba_b", stage1.proba_b},
        {"proba_c", stage1.proba_c}}},
  };
  if (stage2)
    j["stage2"] = {{"category", std::string(category_name(stage2->category))},
                   {"outer_proba", stage2->outer_proba},
                   {"leaf_proba", stage2->leaf_proba}};
  else
    j["stage2"] = nullptr;
  return j;
}

namespace {

template <typename Stage1, typename Stage2>
PipelinePrediction run_pipeline(Stage1&& stage1, Stage2&& stage2) {
  PipelinePrediction p;
  try {
    p.stage1 = stage1();
  } catch (const std::exception& e) {
    throw PipelineError("binary", e.what());
  }
  p.cyberbullying = p.stage1.label == kOffensive;
  if (!p.cyberbullying) return p;
  try {
    p.stage2 = stage2();
  } catch (const std::exception& e) {
    throw PipelineError("roles", e.what());
  }
  p.role = p.stage2->role;
  return p;
}

}  // namespace

PipelinePrediction classify_post(const VotingEnsemble& voting, const RoleEnsemble& roles,
                                 const Post& post, const Preprocessor& preprocessor) {
  TokenSequence tokens;
  try {
    tokens = preprocessor(post.text);
  } catch (const std::exception& e) {
    throw PipelineError("preprocess", e.what());
  }
  return run_pipeline([&] { return voting.predict(tokens); },
                      [&] { return roles.predict_role(tokens); });
}

PipelinePrediction classify_features(const VotingEnsemble& voting, const RoleEnsemble& roles,
                                     const Vector& features) {
  return run_pipeline([&] { return voting.predict_features(features); },
                      [&] { return roles.predict_role_features(features); });
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

nlohmann::json MemberRecipe::to_json() const {
  return {{"training", training.to_json()},
          {"sampler", sampler ? sampler->to_json() : nlohmann::json(nullptr)}};
}

MemberRecipe MemberRecipe::from_json(const nlohmann::json& j) {
  MemberRecipe r;
  if (j.contains("training")) r.training = TrainingConfig::from_json(j.at("training"));
  if (j.contains("sampler") && !j.at("sampler").is_null())
    r.sampler = SamplerConfig::from_json(j.at("sampler"));
  return r;
}

TrainedClassifier train_member(std::shared_ptr<const EncoderBackend> backend,
                               const EncodedDataset& data, const MemberRecipe& recipe) {
  if (!recipe.sampler) return fit_classifier(std::move(backend), data, recipe.training);
  recipe.sampler->validate();
  if (recipe.sampler->mode == SamplerMode::WeightedRandom) {
    WeightedRandomSampler sampler(sampler_weights(std::span<const std::size_t>(data.targets)),
                                  recipe.sampler->replacement, recipe.sampler->seed);
    return fit_classifier(std::move(backend), data, recipe.training, &sampler);
  }
  const auto idx = rebalance_indices(data.targets, *recipe.sampler);
  return fit_classifier(std::move(backend), data.subset(idx), recipe.training);
}

nlohmann::json VotingRecipe::to_json() const {
  return {{"majority_fraction", majority_fraction},
          {"a", a.to_json()},
          {"b", b.to_json()},
          {"c", c.to_json()},
          {"seed", seed}};
}

VotingRecipe VotingRecipe::from_json(const nlohmann::json& j) {
  VotingRecipe r;
  r.majority_fraction = j.value("majority_fraction", r.majority_fraction);
  if (j.contains("a")) r.a = MemberRecipe::from_json(j.at("a"));
  if (j.contains("b")) r.b = MemberRecipe::from_json(j.at("b"));
  if (j.contains("c")) r.c = MemberRecipe::from_json(j.at("c"));
  r.seed = j.value("seed", r.seed);
  return r;
}

nlohmann::json VotingTrainingInfo::to_json() const {
  return {{"set_a", set_a},
          {"set_b", set_b},
          {"disagreements", disagreements},
          {"referee_set", referee_set},
          {"referee_fallback", referee_fallback}};
}

VotingEnsemble train_voting_ensemble(std::shared_ptr<const EncoderBackend> backend,
                                     const std::vector<Vector>& features,
                                     const std::vector<std::string>& labels,
                                     const VotingRecipe& recipe, VotingTrainingInfo* info) {
  if (features.size() != labels.size())
    throw ArgumentError("train_voting_ensemble: features and labels differ in length");
  EncodedDataset pool;
  pool.labels = {kOffensive, kNotOffensive};
  for (std::size_t i = 0; i < features.size(); ++i)
    pool.add(features[i], labels[i] == kOffensive ? 0 : 1);

  const auto sets = build_biased_training_sets(labels, recipe.majority_fraction, recipe.seed);
  auto model_a = train_member(backend, pool.subset(sets.set_a), recipe.a);
  auto model_b = train_member(backend, pool.subset(sets.set_b), recipe.b);

  std::vector<std::string> pred_a, pred_b;
  pred_a.reserve(features.size());
  pred_b.reserve(features.size());
  for (const auto& x : features) {
    pred_a.push_back(model_a.labels()[argmax(model_a.predict_proba_features(x))]);
    pred_b.push_back(model_b.labels()[argmax(model_b.predict_proba_features(x))]);
  }
  std::size_t disagreements = 0;
  for (std::size_t i = 0; i < pred_a.size(); ++i) disagreements += pred_a[i] != pred_b[i];

  auto referee = disagreement_subset(pred_a, pred_b, labels, recipe.seed);
  const bool fallback = referee.empty();
  if (fallback) {
    std::vector<std::string> none_a(labels.size(), kOffensive), none_b(labels.size(), kNotOffensive);
    referee = disagreement_subset(none_a, none_b, labels, derive_seed(recipe.seed, 1));
  }
  auto model_c = train_member(backend, pool.subset(referee), recipe.c);

  if (info) {
    info->set_a = sets.set_a.size();
    info->set_b = sets.set_b.size();
    info->disagreements = disagreements;
    info->referee_set = referee.size();
    info->referee_fallback = fallback;
  }
  return VotingEnsemble(std::move(model_a), std::move(model_b), std::move(model_c));
}

RoleRecipe RoleRecipe::defaults() {
  RoleRecipe r;
  r.outer.sampler = SamplerConfig{};
  return r;
}

nlohmann::json RoleRecipe::to_json() const {
  return {{"outer", outer.to_json()},
          {"bullying", bullying.to_json()},
          {"defending", defending.to_json()}};
}

RoleRecipe RoleRecipe::from_json(const nlohmann::json& j) {
  RoleRecipe r = defaults();
  if (j.contains("outer")) r.outer = MemberRecipe::from_json(j.at("outer"));
  if (j.contains("bullying")) r.bullying = MemberRecipe::from_json(j.at("bullying"));
  if (j.contains("defending")) r.defending = MemberRecipe::from_json(j.at("defending"));
  return r;
}

RoleEnsemble train_role_ensemble(std::shared_ptr<const EncoderBackend> backend,
                                 const std::vector<Post>& posts,
                                 const std::vector<Vector>& features, const RoleRecipe& recipe) {
  if (posts.size() != features.size())
    throw ArgumentError("train_role_ensemble: posts and features differ in length");
  EncodedDataset outer, bullying, defending;
  outer.labels = {std::string(category_name(RoleCategory::Bullying)),
                  std::string(category_name(RoleCategory::Defending))};
  for (auto r : category_roles(RoleCategory::Bullying)) bullying.labels.emplace_back(role_name(r));
  for (auto r : category_roles(RoleCategory::Defending)) defending.labels.emplace_back(role_name(r));

  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (!posts[i].role) continue;
    const auto role = *posts[i].role;
    const auto category = role_to_category(role);
    outer.add(features[i], category == RoleCategory::Bullying ? 0 : 1);
    auto& leaf = category == RoleCategory::Bullying ? bullying : defending;
    leaf.add(features[i], label_index(leaf.labels, std::string(role_name(role))));
  }
  return RoleEnsemble(train_member(backend, outer, recipe.outer),
                      train_member(backend, bullying, recipe.bullying),
                      train_member(backend, defending, recipe.defending));
}

FeatureCache encode_posts(const std::vector<Post>& posts, const Preprocessor& preprocessor,
                          const EncoderBackend& backend) {
  auto cache = std::make_shared<std::unordered_map<std::string, Vector>>();
  cache->reserve(posts.size());
  for (const auto& p : posts) (*cache)[p.post_id] = backend.encode(preprocessor(p.text));
  return cache;
}

// ---------------------------------------------------------------------------
// Views and CV recipes
// ---------------------------------------------------------------------------

std::string stratum(const Post& post) {
  return post.role ? std::string(role_name(*post.role)) : kNoRole;
}

std::vector<EvalView> role_views() {
  std::vector<EvalView> views;
  views.push_back({"outer",
                   {std::string(category_name(RoleCategory::Bullying)),
                    std::string(category_name(RoleCategory::Defending))},
                   [](const Post& p) -> std::optional<std::string> {
                     if (!p.role) return std::nullopt;
                     return std::string(category_name(role_to_category(*p.role)));
                   }});
  for (auto cat : kAllCategories) {
    std::vector<std::string> labels;
    for (auto r : category_roles(cat)) labels.emplace_back(role_name(r));
    views.push_back({std::string(category_name(cat)), labels,
                     [cat](const Post& p) -> std::optional<std::string> {
                       if (!p.role || role_to_category(*p.role) != cat) return std::nullopt;
                       return std::string(role_name(*p.role));
                     }});
  }
  std::vector<std::string> all;
  for (auto r : kAllRoles) all.emplace_back(role_name(r));
  views.push_back({"ensemble", all, [](const Post& p) -> std::optional<std::string> {
                     if (!p.role) return std::nullopt;
                     return std::string(role_name(*p.role));
                   }});
  return views;
}

std::vector<EvalView> binary_views() {
  return {{"binary", {kOffensive, kNotOffensive}, [](const Post& p) -> std::optional<std::string> {
             return p.is_cyberbullying() ? kOffensive : kNotOffensive;
           }}};
}

std::vector<EvalView> pipeline_views() {
  auto views = binary_views();
  std::vector<std::string> labels = {kNoRole};
  for (auto r : kAllRoles) labels.emplace_back(role_name(r));
  views.push_back({"pipeline", labels, [](const Post& p) -> std::optional<std::string> {
                     return stratum(p);
                   }});
  for (auto& v : role_views()) views.push_back(std::move(v));
  return views;
}

namespace {

const Vector& cached(const FeatureCache& cache, const Post& post) {
  auto it = cache->find(post.post_id);
  if (it == cache->end()) throw EncodingError("no cached features for post '" + post.post_id + "'");
  return it->second;
}

RoleRecipe fold_recipe(RoleRecipe r, std::size_t fold) {
  r.outer = reseeded(r.outer, fold * 16 + 1);
  r.bullying = reseeded(r.bullying, fold * 16 + 2);
  r.defending = reseeded(r.defending, fold * 16 + 3);
  return r;
}

VotingRecipe fold_recipe(VotingRecipe r, std::size_t fold) {
  r.a = reseeded(r.a, fold * 16 + 4);
  r.b = reseeded(r.b, fold * 16 + 5);
  r.c = reseeded(r.c, fold * 16 + 6);
  r.seed = derive_seed(r.seed, fold * 16 + 7);
  return r;
}

std::map<std::string, std::string> role_view_predictions(const RoleEnsemble& roles,
                                                         const Vector& x) {
  std::map<std::string, std::string> out;
  const auto pred = roles.predict_role_features(x);
  out["outer"] = std::string(category_name(pred.category));
  out["ensemble"] = std::string(role_name(pred.role));
  for (auto cat : kAllCategories) {
    const auto& leaf = roles.leaf(cat);
    out[std::string(category_name(cat))] = leaf.labels()[argmax(leaf.predict_proba_features(x))];
  }
  return out;
}

class RoleFoldModel final : public FoldPredictor {
 public:
  RoleFoldModel(RoleEnsemble roles, FeatureCache cache)
      : roles_(std::move(roles)), cache_(std::move(cache)) {}
  std::map<std::string, std::string> predict(const Post& post) const override {
    return role_view_predictions(roles_, cached(cache_, post));
  }

 private:
  RoleEnsemble roles_;
  FeatureCache cache_;
};

class BinaryFoldModel final : public FoldPredictor {
 public:
  BinaryFoldModel(VotingEnsemble voting, FeatureCache cache)
      : voting_(std::move(voting)), cache_(std::move(cache)) {}
  std::map<std::string, std::string> predict(const Post& post) const override {
    return {{"binary", voting_.predict_features(cached(cache_, post)).label}};
  }

 private:
  VotingEnsemble voting_;
  FeatureCache cache_;
};

class PipelineFoldModel final : public FoldPredictor {
 public:
  PipelineFoldModel(VotingEnsemble voting, RoleEnsemble roles, FeatureCache cache)
      : voting_(std::move(voting)), roles_(std::move(roles)), cache_(std::move(cache)) {}
  std::map<std::string, std::string> predict(const Post& post) const override {
    const auto& x = cached(cache_, post);
    const auto p = classify_features(voting_, roles_, x);
    auto out = role_view_predictions(roles_, x);
    out["binary"] = p.stage1.label;
    out["pipeline"] = p.role ? std::string(role_name(*p.role)) : kNoRole;
    return out;
  }

 private:
  VotingEnsemble voting_;
  RoleEnsemble roles_;
  FeatureCache cache_;
};

RoleEnsemble fit_roles(const std::shared_ptr<const EncoderBackend>& backend,
                       const FeatureCache& cache, const std::vector<Post>& train,
                       const RoleRecipe& recipe) {
  std::vector<Post> role_posts;
  std::vector<Vector> xs;
  for (const auto& p : train)
    if (p.role) {
      role_posts.push_back(p);
      xs.push_back(cached(cache, p));
    }
  return train_role_ensemble(backend, role_posts, xs, recipe);
}

VotingEnsemble fit_voting(const std::shared_ptr<const EncoderBackend>& backend,
                          const FeatureCache& cache, const std::vector<Post>& train,
                          const VotingRecipe& recipe) {
  std::vector<Vector> xs;
  std::vector<std::string> labels;
  for (const auto& p : train) {
    xs.push_back(cached(cache, p));
    labels.push_back(p.is_cyberbullying() ? kOffensive : kNotOffensive);
  }
  return train_voting_ensemble(backend, xs, labels, recipe);
}

}  // namespace

std::unique_ptr<FoldPredictor> ensemble_predictor(std::optional<VotingEnsemble> voting,
                                                  std::optional<RoleEnsemble> roles,
                                                  FeatureCache cache) {
  if (voting && roles)
    return std::make_unique<PipelineFoldModel>(std::move(*voting), std::move(*roles),
                                               std::move(cache));
  if (voting) return std::make_unique<BinaryFoldModel>(std::move(*voting), std::move(cache));
  if (roles) return std::make_unique<RoleFoldModel>(std::move(*roles), std::move(cache));
  throw ArgumentError("ensemble_predictor: no ensemble given");
}

TrainRecipe role_cv_recipe(std::shared_ptr<const EncoderBackend> backend, FeatureCache cache,
                           RoleRecipe recipe) {
  return [=](const std::vector<Post>& train, std::size_t fold) -> std::unique_ptr<FoldPredictor> {
    return std::make_unique<RoleFoldModel>(
        fit_roles(backend, cache, train, fold_recipe(recipe, fold)), cache);
  };
}

TrainRecipe binary_cv_recipe(std::shared_ptr<const EncoderBackend> backend, FeatureCache cache,
                             VotingRecipe recipe) {
  return [=](const std::vector<Post>& train, std::size_t fold) -> std::unique_ptr<FoldPredictor> {
    return std::make_unique<BinaryFoldModel>(
        fit_voting(backend, cache, train, fold_recipe(recipe, fold)), cache);
  };
}

TrainRecipe pipeline_cv_recipe(std::shared_ptr<const EncoderBackend> backend,
                               FeatureCache cache, VotingRecipe voting, RoleRecipe roles) {
  return [=](const std::vector<Post>& train, std::size_t fold) -> std::unique_ptr<FoldPredictor> {
    return std::make_unique<PipelineFoldModel>(
        fit_voting(backend, cache, train, fold_recipe(voting, fold)),
        fit_roles(backend, cache, train, fold_recipe(roles, fold)), cache);
  };
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

Preprocessor Manifest::preprocessor() const {
  const TrainedClassifier& any = voting ? voting->model_a() : roles->outer();
  return Preprocessor(table, preprocess, any.backend().tokenizer());
}

namespace {

void write_manifest(const std::string& path, const std::string& type,
                    const std::vector<std::pair<std::string, const TrainedClassifier*>>& members,
                    const Preprocessor& preprocessor, const nlohmann::json& extra) {
  const fs::path manifest(path);
  const fs::path dir = manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
  fs::create_directories(dir);
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [role, model] : members) {
    const std::string file = manifest.stem().string() + "." + role + ".json";
    model->save((dir / file).string());
    files[role] = file;
  }
  nlohmann::json j = {{"format", "cyberroles-ensemble"},
                      {"version", kManifestVersion},
                      {"type", type},
                      {"members", files},
                      {"preprocess", preprocessor.config().to_json()},
                      {"tables", preprocessor.table().to_json()}};
  if (!extra.is_null()) j["metadata"] = extra;
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write manifest '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace

void save_manifest(const std::string& path, const VotingEnsemble& ensemble,
                   const Preprocessor& preprocessor, const nlohmann::json& extra) {
  write_manifest(path, "voting",
                 {{"a", &ensemble.model_a()}, {"b", &ensemble.model_b()}, {"c", &ensemble.model_c()}},
                 preprocessor, extra);
}

void save_manifest(const std::string& path, const RoleEnsemble& ensemble,
                   const Preprocessor& preprocessor, const nlohmann::json& extra) {
  write_manifest(path, "roles",
                 {{"outer", &ensemble.outer()},
                  {"bullying", &ensemble.bullying()},
                  {"defending", &ensemble.defending()}},
                 preprocessor, extra);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cyberroles-ensemble")
      throw ParseError(path + ": not an ensemble manifest");
    if (j.at("version").get<int>() != kManifestVersion)
      throw ParseError(path + ": unsupported manifest version");
    const fs::path dir = fs::path(path).has_parent_path() ? fs::path(path).parent_path() : ".";
    const auto& members = j.at("members");
    auto member = [&](const char* role) {
      return TrainedClassifier::load((dir / members.at(role).get<std::string>()).string());
    };
    Manifest m;
    m.type = j.at("type").get<std::string>();
    m.preprocess = PreprocessConfig::from_json(j.at("preprocess"));
    m.table = NormalizationTable::from_json(j.at("tables"));
    if (m.type == "voting")
      m.voting.emplace(member("a"), member("b"), member("c"));
    else if (m.type == "roles")
      m.roles.emplace(member("outer"), member("bullying"), member("defending"));
    else
      throw ParseError(path + ": unknown ensemble type '" + m.type + "'");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace cyberroles
