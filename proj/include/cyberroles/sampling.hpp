#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cyberroles/rng.hpp"
#include "json.hpp"

namespace cyberroles {

// ---------------------------------------------------------------------------
// Stratified folds
// ---------------------------------------------------------------------------

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> assignments;  // post_id -> test fold
  std::vector<std::string> warnings;

  std::vector<std::string> test_ids(std::size_t fold) const;
  std::vector<std::string> train_ids(std::size_t fold) const;

  nlohmann::json to_json() const;
  static FoldPlan from_json(const nlohmann::json& j);
  /// FNV-1a over the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

/// Shuffles each class (classes visited in name order, ids in sorted order)
/// and deals its members round-robin over the folds. The dealing cursor
/// carries over from one class to the next, so per-class fold counts differ
/// by at most one and fold sizes stay balanced as well.
///
/// A class smaller than k leaves some folds without it; that is recorded in
/// plan.warnings. k < 2 throws ArgumentError.
FoldPlan stratified_kfold(const std::map<std::string, std::string>& labels,
                          std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Weighted random sampling
// ---------------------------------------------------------------------------

/// weight(i) = 1 / count(class of i). Each class carries the same total mass.
std::vector<double> sampler_weights(std::span<const std::size_t> classes);
std::vector<double> sampler_weights(const std::vector<std::string>& classes);

/// Draws batch_size indices with probability proportional to weight.
/// Without replacement the draw is successive sampling (Efraimidis-Spirakis
/// keys); batch_size larger than the number of positive weights then throws
/// ArgumentError.
std::vector<std::size_t> draw_batch(std::span<const double> weights,
                                    std::size_t batch_size, bool replacement,
                                    Rng& rng);

/// Source of training batches (indices into the training set).
class BatchSampler {
 public:
  virtual ~BatchSampler() = default;
  virtual std::vector<std::size_t> next_batch(std::size_t batch_size) = 0;
};

class WeightedRandomSampler final : public BatchSampler {
 public:
  WeightedRandomSampler(std::vector<double> weights, bool replacement,
                        std::uint64_t seed);

  std::vector<std::size_t> next_batch(std::size_t batch_size) override;

 private:
  std::vector<double> weights_;
  bool replacement_;
  Rng rng_;
  std::discrete_distribution<std::size_t> dist_;
};

// ---------------------------------------------------------------------------
// Subset rebalancing
// ---------------------------------------------------------------------------

enum class SamplerMode { WeightedRandom, UndersampleMajority, OversampleMinority };

struct SamplerConfig {
  SamplerMode mode = SamplerMode::WeightedRandom;
  double target_ratio = 1.0;
  std::optional<long long> majority_cap;
  bool replacement = true;
  std::uint64_t seed = 0;

  /// Throws ArgumentError for a non-positive ratio or cap, or a cap outside
  /// UndersampleMajority.
  void validate() const;

  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

std::string_view sampler_mode_name(SamplerMode mode);
SamplerMode sampler_mode_from_name(std::string_view name);

/// UndersampleMajority: the largest class (first by name on ties) is cut to
/// majority_cap members, or to target_ratio x the smallest class when no cap
/// is given. OversampleMinority: every class smaller than
/// target_ratio x the largest class is topped up to that size with extra
/// copies of its own members (uniform draws with replacement, or whole
/// cycles plus a distinct remainder without). WeightedRandom returns every
/// id once. The output order is a seeded shuffle.
std::vector<std::string> rebalance_subset(
    const std::map<std::string, std::vector<std::string>>& ids_by_class,
    const SamplerConfig& config);

/// Index form of rebalance_subset: classes[i] is the class of item i and the
/// result lists item indices.
std::vector<std::size_t> rebalance_indices(std::span<const std::size_t> classes,
                                           const SamplerConfig& config);

}  // namespace cyberroles
