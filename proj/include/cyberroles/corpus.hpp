#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cyberroles {

// ---------------------------------------------------------------------------
// Role taxonomy
// ---------------------------------------------------------------------------

enum class RoleLabel { Harasser, Victim, BystanderAssistant, BystanderDefender };

enum class RoleCategory { Bullying, Defending };

inline constexpr std::array<RoleLabel, 4> kAllRoles = {
    RoleLabel::Harasser, RoleLabel::Victim, RoleLabel::BystanderAssistant,
    RoleLabel::BystanderDefender};

inline constexpr std::array<RoleCategory, 2> kAllCategories = {
    RoleCategory::Bullying, RoleCategory::Defending};

/// Harasser and bystander assistant posts contribute to the bullying; victim
/// and bystander defender posts resist it.
constexpr RoleCategory role_to_category(RoleLabel role) {
  switch (role) {
    case RoleLabel::Harasser:
    case RoleLabel::BystanderAssistant:
      return RoleCategory::Bullying;
    case RoleLabel::Victim:
    case RoleLabel::BystanderDefender:
      return RoleCategory::Defending;
  }
  return RoleCategory::Bullying;
}

/// The two roles of a category, in the order the leaf models use as their
/// label set.
std::array<RoleLabel, 2> category_roles(RoleCategory category);

/// Stable identifiers used in files ("harasser", "bystander_assistant", ...).
std::string_view role_name(RoleLabel role);
std::string_view category_name(RoleCategory category);
RoleLabel role_from_name(std::string_view name);
RoleCategory category_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Standoff labels
// ---------------------------------------------------------------------------

struct HarmLabel {
  int harm = 0;
  std::optional<RoleLabel> role;

  friend bool operator==(const HarmLabel&, const HarmLabel&) = default;
};

/// Parses a post-level annotation label: "<harm>" or "<harm>_<role token>".
///
/// harm is a single digit 0..2. Role tokens are matched case-insensitively;
/// accepted spellings are
///   harasser:            har, harasser
///   victim:              vic, victim
///   bystander assistant: bys_ass, bystander_assistant, assistant, ass
///   bystander defender:  bys_def, bystander_defender, defender, def
/// A harm-0 label carrying a role token parses to (0, none): harm-0 posts are
/// non-cyberbullying and the role is discarded.
///
/// Throws ParseError naming the label for unknown tokens, a harm digit
/// outside 0..2, or harm > 0 without a role.
HarmLabel parse_standoff_label(std::string_view label_raw);

/// Canonical spelling: "0", or "<harm>_Har", "<harm>_Victim",
/// "<harm>_Bys_ass", "<harm>_Bys_def".
std::string format_standoff_label(const HarmLabel& label);

/// Harm levels 1 and 2 collapse onto the role; harm 0 means no role.
constexpr std::optional<RoleLabel> merge_harm_levels(
    int harm, std::optional<RoleLabel> role) {
  if (harm == 0) return std::nullopt;
  return role;
}

struct StandoffAnnotation {
  std::string record_id;
  std::string label_raw;
  std::size_t span_start = 0;
  std::size_t span_end = 0;
  std::string surface_text;
};

/// Reads one annotation file: `id<TAB>label start end<TAB>surface_text`
/// per line. Blank lines are skipped. Discontinuous spans ("0 5;7 9") use
/// the outermost offsets.
std::vector<StandoffAnnotation> read_standoff(std::istream& in);

// ---------------------------------------------------------------------------
// Posts
// ---------------------------------------------------------------------------

struct Post {
  std::string post_id;
  std::string conversation_id;
  std::int64_t seq_index = 0;
  std::string text;
  int harm = 0;
  std::optional<RoleLabel> role;

  bool is_cyberbullying() const { return role.has_value(); }

  friend bool operator==(const Post&, const Post&) = default;
};

/// Checks the per-post invariants (harm range, role iff harm > 0,
/// seq_index >= 0) and post_id uniqueness. Throws ValidationError.
void validate_posts(const std::vector<Post>& posts);

/// Turns the role annotations of one document into posts ordered by span
/// start. Records whose label does not start with a digit (textual category
/// annotations such as insults or threats) are ignored. Post ids are
/// `<document_id>:<record_id>`.
std::vector<Post> posts_from_standoff(
    const std::vector<StandoffAnnotation>& annotations,
    const std::string& document_id);

nlohmann::json post_to_json(const Post& post);
Post post_from_json(const nlohmann::json& j);

/// JSON-lines dataset, one post object per line. Empty lines are skipped.
/// Throws ParseError with the line number on malformed input, and
/// ValidationError when the posts break an invariant.
std::vector<Post> read_jsonl(std::istream& in);
std::vector<Post> load_jsonl(const std::string& path);
void write_jsonl(std::ostream& out, const std::vector<Post>& posts);
void save_jsonl(const std::string& path, const std::vector<Post>& posts);

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct CorpusStats {
  std::map<RoleLabel, std::size_t> role_counts;
  std::size_t non_bullying_count = 0;
  std::size_t total = 0;

  std::size_t bullying_count() const;
  nlohmann::json to_json() const;
};

/// Throws ValidationError on duplicate post ids.
CorpusStats compute_stats(const std::vector<Post>& posts);

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::map<RoleLabel, std::size_t> role_sizes;
  std::size_t non_bullying = 0;
  std::uint64_t seed = 0;
  std::size_t conversations = 20;
  std::size_t pool_size = 40;        // distinct tokens per class
  std::size_t shared_pool_size = 60; // tokens every class may use
  std::size_t min_class_tokens = 4;
  std::size_t max_class_tokens = 10;
  std::size_t max_shared_tokens = 6;
};

/// Deterministic corpus where each class (every role plus the
/// non-cyberbullying class) draws its signal tokens from its own disjoint
/// pool, so a bag-of-words model separates the classes exactly. Every post
/// also mixes in tokens from a shared pool. Conversations are assigned
/// round-robin; harm alternates between 1 and 2 for role posts.
std::vector<Post> generate_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace cyberroles
