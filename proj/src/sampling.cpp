#include "cyberroles/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "cyberroles/error.hpp"

namespace cyberroles {

std::vector<std::string> FoldPlan::test_ids(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments)
    if (f == fold) out.push_back(id);
  return out;
}

std::vector<std::string> FoldPlan::train_ids(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments)
    if (f != fold) out.push_back(id);
  return out;
}

nlohmann::json FoldPlan::to_json() const {
  return {{"k", k}, {"seed", seed}, {"assignments", assignments}, {"warnings", warnings}};
}

FoldPlan FoldPlan::from_json(const nlohmann::json& j) {
  FoldPlan p;
  p.k = j.at("k").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.assignments = j.at("assignments").get<std::map<std::string, std::size_t>>();
  p.warnings = j.value("warnings", std::vector<std::string>{});
  if (p.k < 2) throw ParseError("fold plan: k must be at least 2");
  for (const auto& [id, f] : p.assignments)
    if (f >= p.k) throw ParseError("fold plan: fold index out of range for '" + id + "'");
  return p;
}

std::string FoldPlan::hash() const {
  const auto dump = to_json().dump();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(dump.data(), dump.size());
  return os.str();
}

FoldPlan stratified_kfold(const std::map<std::string, std::string>& labels,
                          std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("stratified_kfold: k must be at least 2");
  std::map<std::string, std::vector<std::string>> by_class;
  for (const auto& [id, cls] : labels) by_class[cls].push_back(id);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  Rng rng = make_rng(seed, 1);
  std::size_t cursor = 0;
  for (auto& [cls, ids] : by_class) {
    if (ids.size() < k)
      plan.warnings.push_back("class '" + cls + "' has " + std::to_string(ids.size()) +
                              " members, fewer than k=" + std::to_string(k) +
                              "; some test folds lack it");
    std::shuffle(ids.begin(), ids.end(), rng);
    for (const auto& id : ids) {
      plan.assignments[id] = cursor;
      cursor = (cursor + 1) % k;
    }
  }
  if (labels.size() < k)
    plan.warnings.push_back("fewer items than folds; some test folds are empty");
  return plan;
}

// ---------------------------------------------------------------------------

std::vector<double> sampler_weights(std::span<const std::size_t> classes) {
  std::map<std::size_t, std::size_t> counts;
  for (auto c : classes) ++counts[c];
  std::vector<double> w;
  w.reserve(classes.size());
  for (auto c : classes) w.push_back(1.0 / static_cast<double>(counts[c]));
  return w;
}

std::vector<double> sampler_weights(const std::vector<std::string>& classes) {
  std::map<std::string, std::size_t> ids;
  std::vector<std::size_t> idx;
  idx.reserve(classes.size());
  for (const auto& c : classes) idx.push_back(ids.emplace(c, ids.size()).first->second);
  return sampler_weights(std::span<const std::size_t>(idx));
}

std::vector<std::size_t> draw_batch(std::span<const double> weights,
                                    std::size_t batch_size, bool replacement,
                                    Rng& rng) {
  if (batch_size == 0) throw ArgumentError("draw_batch: batch_size must be positive");
  std::size_t positive = 0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ArgumentError("draw_batch: weights must be finite and non-negative");
    if (w > 0.0) ++positive;
  }
  if (positive == 0) throw ArgumentError("draw_batch: no item has positive weight");

  std::vector<std::size_t> out;
  out.reserve(batch_size);
  if (replacement) {
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    for (std::size_t i = 0; i < batch_size; ++i) out.push_back(dist(rng));
    return out;
  }
  if (batch_size > positive)
    throw ArgumentError("draw_batch: batch_size " + std::to_string(batch_size) +
                        " exceeds population " + std::to_string(positive) +
                        " without replacement");
  // Smallest Exp(1)/w keys give a weighted sample without replacement.
  std::exponential_distribution<double> exp1(1.0);
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(positive);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double e = exp1(rng);
    if (weights[i] > 0.0) keys.emplace_back(e / weights[i], i);
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(batch_size),
                    keys.end());
  for (std::size_t i = 0; i < batch_size; ++i) out.push_back(keys[i].second);
  return out;
}

WeightedRandomSampler::WeightedRandomSampler(std::vector<double> weights,
                                             bool replacement, std::uint64_t seed)
    : weights_(std::move(weights)),
      replacement_(replacement),
      rng_(make_rng(seed, 2)),
      dist_(weights_.begin(), weights_.end()) {
  if (weights_.empty()) throw ArgumentError("sampler needs at least one item");
}

std::vector<std::size_t> WeightedRandomSampler::next_batch(std::size_t batch_size) {
  if (!replacement_) return draw_batch(weights_, batch_size, false, rng_);
  if (batch_size == 0) throw ArgumentError("batch_size must be positive");
  std::vector<std::size_t> out(batch_size);
  for (auto& i : out) i = dist_(rng_);
  return out;
}

// ---------------------------------------------------------------------------

void SamplerConfig::validate() const {
  if (!(target_ratio > 0.0) || !std::isfinite(target_ratio))
    throw ArgumentError("sampler target_ratio must be positive");
  if (majority_cap) {
    if (mode != SamplerMode::UndersampleMajority)
      throw ArgumentError("majority_cap is only valid with undersample mode");
    if (*majority_cap <= 0) throw ArgumentError("majority_cap must be positive");
  }
}

std::string_view sampler_mode_name(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::WeightedRandom: return "weighted";
    case SamplerMode::UndersampleMajority: return "undersample";
    case SamplerMode::OversampleMinority: return "oversample";
  }
  return "";
}

SamplerMode sampler_mode_from_name(std::string_view name) {
  for (auto m : {SamplerMode::WeightedRandom, SamplerMode::UndersampleMajority,
                 SamplerMode::OversampleMinority})
    if (sampler_mode_name(m) == name) return m;
  throw ArgumentError("unknown sampler mode '" + std::string(name) +
                      "' (expected weighted, undersample or oversample)");
}

nlohmann::json SamplerConfig::to_json() const {
  nlohmann::json j = {{"mode", std::string(sampler_mode_name(mode))},
                      {"target_ratio", target_ratio},
                      {"replacement", replacement},
                      {"seed", seed}};
  j["majority_cap"] = majority_cap ? nlohmann::json(*majority_cap) : nlohmann::json(nullptr);
  return j;
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
  SamplerConfig c;
  c.mode = sampler_mode_from_name(j.value("mode", std::string("weighted")));
  c.target_ratio = j.value("target_ratio", c.target_ratio);
  c.replacement = j.value("replacement", c.replacement);
  c.seed = j.value("seed", c.seed);
  if (j.contains("majority_cap") && !j.at("majority_cap").is_null())
    c.majority_cap = j.at("majority_cap").get<long long>();
  c.validate();
  return c;
}

namespace {

std::vector<std::size_t> rebalance_groups(std::vector<std::vector<std::size_t>> groups,
                                          const SamplerConfig& config) {
  config.validate();
  if (groups.size() < 2) throw ArgumentError("rebalancing needs at least two classes");
  Rng rng = make_rng(config.seed, 3);

  std::size_t largest = 0, smallest = 0;
  for (std::size_t g = 1; g < groups.size(); ++g) {
    if (groups[g].size() > groups[largest].size()) largest = g;
    if (groups[g].size() < groups[smallest].size()) smallest = g;
  }

  std::vector<std::size_t> out;
  switch (config.mode) {
    case SamplerMode::WeightedRandom:
      for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
      break;
    case SamplerMode::UndersampleMajority: {
      const std::size_t cap =
          config.majority_cap
              ? static_cast<std::size_t>(*config.majority_cap)
              : static_cast<std::size_t>(std::llround(
                    config.target_ratio * static_cast<double>(groups[smallest].size())));
      for (std::size_t g = 0; g < groups.size(); ++g) {
        auto members = groups[g];
        if (g == largest && members.size() > cap) {
          std::shuffle(members.begin(), members.end(), rng);
          members.resize(cap);
        }
        out.insert(out.end(), members.begin(), members.end());
      }
      break;
    }
    case SamplerMode::OversampleMinority: {
      const auto target = static_cast<std::size_t>(std::llround(
          config.target_ratio * static_cast<double>(groups[largest].size())));
      for (const auto& members : groups) {
        out.insert(out.end(), members.begin(), members.end());
        if (members.empty() || members.size() >= target) continue;
        std::size_t extra = target - members.size();
        if (config.replacement) {
          std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
          for (; extra > 0; --extra) out.push_back(members[pick(rng)]);
        } else {
          while (extra >= members.size()) {
            out.insert(out.end(), members.begin(), members.end());
            extra -= members.size();
          }
          auto rest = members;
          std::shuffle(rest.begin(), rest.end(), rng);
          out.insert(out.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(extra));
        }
      }
      break;
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

std::vector<std::size_t> rebalance_indices(std::span<const std::size_t> classes,
                                           const SamplerConfig& config) {
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < classes.size(); ++i) by_class[classes[i]].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [c, members] : by_class) groups.push_back(std::move(members));
  return rebalance_groups(std::move(groups), config);
}

std::vector<std::string> rebalance_subset(
    const std::map<std::string, std::vector<std::string>>& ids_by_class,
    const SamplerConfig& config) {
  std::vector<std::string> flat;
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& [cls, ids] : ids_by_class) {
    groups.emplace_back();
    for (const auto& id : ids) {
      groups.back().push_back(flat.size());
      flat.push_back(id);
    }
  }
  std::vector<std::string> out;
  for (auto i : rebalance_groups(std::move(groups), config)) out.push_back(flat[i]);
  return out;
}

}  // namespace cyberroles
