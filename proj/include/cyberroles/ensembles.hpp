#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cyberroles/corpus.hpp"
#include "cyberroles/encoder.hpp"
#include "cyberroles/error.hpp"
#include "cyberroles/evaluation.hpp"
#include "cyberroles/preprocess.hpp"
#include "cyberroles/sampling.hpp"
#include "json.hpp"

namespace cyberroles {

inline const std::string kOffensive = "OFF";
inline const std::string kNotOffensive = "NOT";

// ---------------------------------------------------------------------------
// Biased-pair voting ensemble
// ---------------------------------------------------------------------------

struct BiasedSets {
  std::vector<std::size_t> set_a;  // OFF majority
  std::vector<std::size_t> set_b;  // NOT majority
};

/// set_a keeps every OFF item and a seeded sample of NOT items sized so
/// that OFF makes up `majority_fraction` of the set (rounded to the nearest
/// count); set_b mirrors it with NOT as the majority. Indices refer to
/// `labels` and come back sorted.
///
/// Throws ArgumentError when majority_fraction is outside (0.5, 1), a label
/// is missing, or the pool has too few minority items for the fraction.
BiasedSets build_biased_training_sets(const std::vector<std::string>& labels,
                                      double majority_fraction, std::uint64_t seed);

/// Items where A and B disagree, downsampled (seeded) so both gold labels
/// appear equally often. Sorted indices; possibly empty.
std::vector<std::size_t> disagreement_subset(const std::vector<std::string>& pred_a,
                                             const std::vector<std::string>& pred_b,
                                             const std::vector<std::string>& gold,
                                             std::uint64_t seed);

/// A and B decide when they agree; otherwise C's label stands.
/// Throws ArgumentError for labels other than OFF / NOT.
const std::string& vote(const std::string& pred_a, const std::string& pred_b,
                        const std::string& pred_c);

struct VoteResult {
  std::string label;
  bool referee_used = false;
  Vector proba_a, proba_b, proba_c;
};

class VotingEnsemble {
 public:
  /// Throws ConfigurationError unless every member's label set is
  /// {OFF, NOT} (in any order).
  VotingEnsemble(TrainedClassifier a, TrainedClassifier b, TrainedClassifier c);

  VoteResult predict(const TokenSequence& tokens) const;
  /// For members that share one encoder: features from that encoder.
  VoteResult predict_features(const Vector& features) const;

  const TrainedClassifier& model_a() const { return a_; }
  const TrainedClassifier& model_b() const { return b_; }
  const TrainedClassifier& model_c() const { return c_; }

 private:
  VoteResult combine(Vector pa, Vector pb, Vector pc) const;

  TrainedClassifier a_, b_, c_;
};

// ---------------------------------------------------------------------------
// Hierarchical role ensemble
// ---------------------------------------------------------------------------

struct RolePrediction {
  RoleCategory category;
  RoleLabel role;
  Vector outer_proba;
  Vector leaf_proba;
};

class RoleEnsemble {
 public:
  /// Label sets must be {bullying, defending}, {harasser,
  /// bystander_assistant} and {victim, bystander_defender}; any order.
  /// Throws ConfigurationError otherwise.
  RoleEnsemble(TrainedClassifier outer, TrainedClassifier bullying, TrainedClassifier defending);

  /// The outer model picks the category and only that category's leaf
  /// model is consulted.
  RolePrediction predict_role(const TokenSequence& tokens) const;
  RolePrediction predict_role_features(const Vector& features) const;

  const TrainedClassifier& outer() const { return outer_; }
  const TrainedClassifier& bullying() const { return bullying_; }
  const TrainedClassifier& defending() const { return defending_; }
  const TrainedClassifier& leaf(RoleCategory category) const {
    return category == RoleCategory::Bullying ? bullying_ : defending_;
  }

 private:
  RolePrediction route(Vector outer_proba, const std::function<Vector(const TrainedClassifier&)>& leaf_proba) const;

  TrainedClassifier outer_, bullying_, defending_;
};

// ---------------------------------------------------------------------------
// Two-stage pipeline
// ---------------------------------------------------------------------------

struct PipelinePrediction {
  bool cyberbullying = false;
  std::optional<RoleLabel> role;
  VoteResult stage1;
  std::optional<RolePrediction> stage2;

  nlohmann::json to_json(const std::string& post_id) const;
};

/// Sub-model failures, tagged with the stage ("binary" or "roles").
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(stage + " stage: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Stage 1 votes OFF/NOT; only OFF posts reach the role ensemble.
PipelinePrediction classify_post(const VotingEnsemble& voting, const RoleEnsemble& roles,
                                 const Post& post, const Preprocessor& preprocessor);
PipelinePrediction classify_features(const VotingEnsemble& voting, const RoleEnsemble& roles,
                                     const Vector& features);

// ---------------------------------------------------------------------------
// Training recipes
// ---------------------------------------------------------------------------

/// Training settings for one member plus an optional imbalance strategy.
struct MemberRecipe {
  TrainingConfig training;
  std::optional<SamplerConfig> sampler;

  nlohmann::json to_json() const;
  static MemberRecipe from_json(const nlohmann::json& j);
};

/// WeightedRandom samplers feed batches to the trainer; the undersample and
/// oversample modes rewrite the training set first.
TrainedClassifier train_member(std::shared_ptr<const EncoderBackend> backend,
                               const EncodedDataset& data, const MemberRecipe& recipe);

struct VotingRecipe {
  double majority_fraction = 0.8;
  MemberRecipe a, b, c;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static VotingRecipe from_json(const nlohmann::json& j);
};

struct VotingTrainingInfo {
  std::size_t set_a = 0;
  std::size_t set_b = 0;
  std::size_t disagreements = 0;
  std::size_t referee_set = 0;
  /// True when A and B never disagreed on both labels and C was trained on
  /// a balanced sample of the whole pool instead.
  bool referee_fallback = false;

  nlohmann::json to_json() const;
};

/// Biased sets -> models A and B -> disagreement subset -> model C.
/// `features` and `labels` (OFF / NOT) are parallel.
VotingEnsemble train_voting_ensemble(std::shared_ptr<const EncoderBackend> backend,
                                     const std::vector<Vector>& features,
                                     const std::vector<std::string>& labels,
                                     const VotingRecipe& recipe,
                                     VotingTrainingInfo* info = nullptr);

struct RoleRecipe {
  MemberRecipe outer, bullying, defending;

  /// Weighted random sampling for the outer model, plain shuffled batches
  /// for the leaves.
  static RoleRecipe defaults();

  nlohmann::json to_json() const;
  static RoleRecipe from_json(const nlohmann::json& j);
};

/// Trains on role-labelled posts only. Each leaf sees only the posts of its
/// own category. `features` is parallel to `posts`; posts without a role are
/// ignored.
RoleEnsemble train_role_ensemble(std::shared_ptr<const EncoderBackend> backend,
                                 const std::vector<Post>& posts,
                                 const std::vector<Vector>& features, const RoleRecipe& recipe);

/// Encodes every post once: post_id -> feature vector.
using FeatureCache = std::shared_ptr<const std::unordered_map<std::string, Vector>>;
FeatureCache encode_posts(const std::vector<Post>& posts, const Preprocessor& preprocessor,
                          const EncoderBackend& backend);

// ---------------------------------------------------------------------------
// Evaluation views and cross-validation recipes
// ---------------------------------------------------------------------------

inline const std::string kNoRole = "none";

/// outer / bullying / defending / ensemble, scored on role-labelled posts.
std::vector<EvalView> role_views();
/// binary OFF vs NOT over every post.
std::vector<EvalView> binary_views();
/// binary, the five-way pipeline label (none or a role), and role_views().
std::vector<EvalView> pipeline_views();

TrainRecipe role_cv_recipe(std::shared_ptr<const EncoderBackend> backend, FeatureCache cache,
                           RoleRecipe recipe);
TrainRecipe binary_cv_recipe(std::shared_ptr<const EncoderBackend> backend, FeatureCache cache,
                             VotingRecipe recipe);
TrainRecipe pipeline_cv_recipe(std::shared_ptr<const EncoderBackend> backend,
                               FeatureCache cache, VotingRecipe voting, RoleRecipe roles);

/// Predictor over cached features for evaluation: binary_views() for a
/// voting ensemble, role_views() for a role ensemble, pipeline_views() for
/// both. Throws ArgumentError when neither is given.
std::unique_ptr<FoldPredictor> ensemble_predictor(std::optional<VotingEnsemble> voting,
                                                  std::optional<RoleEnsemble> roles,
                                                  FeatureCache cache);

/// Stratification key used for fold planning: the role name, or "none".
std::string stratum(const Post& post);

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

struct Manifest {
  std::string type;  // "voting" or "roles"
  std::optional<VotingEnsemble> voting;
  std::optional<RoleEnsemble> roles;
  NormalizationTable table;
  PreprocessConfig preprocess;

  /// Preprocessor using the members' tokenizer.
  Preprocessor preprocessor() const;
};

inline constexpr int kManifestVersion = 1;

/// Writes the member checkpoints next to the manifest
/// (<stem>.a.json, <stem>.b.json, ...) and the manifest itself, which refers
/// to them by relative path.
void save_manifest(const std::string& path, const VotingEnsemble& ensemble,
                   const Preprocessor& preprocessor, const nlohmann::json& extra = {});
void save_manifest(const std::string& path, const RoleEnsemble& ensemble,
                   const Preprocessor& preprocessor, const nlohmann::json& extra = {});

/// Loads members and re-validates label-set invariants.
Manifest load_manifest(const std::string& path);

}  // namespace cyberroles
