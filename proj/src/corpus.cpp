#include "cyberroles/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cyberroles/error.hpp"
#include "cyberroles/rng.hpp"

namespace cyberroles {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<RoleLabel> role_from_token(std::string_view token) {
  static const std::map<std::string, RoleLabel, std::less<>> kTokens = {
      {"har", RoleLabel::Harasser},
      {"harasser", RoleLabel::Harasser},
      {"vic", RoleLabel::Victim},
      {"victim", RoleLabel::Victim},
      {"bys_ass", RoleLabel::BystanderAssistant},
      {"bystander_assistant", RoleLabel::BystanderAssistant},
      {"assistant", RoleLabel::BystanderAssistant},
      {"ass", RoleLabel::BystanderAssistant},
      {"bys_def", RoleLabel::BystanderDefender},
      {"bystander_defender", RoleLabel::BystanderDefender},
      {"defender", RoleLabel::BystanderDefender},
      {"def", RoleLabel::BystanderDefender},
  };
  auto it = kTokens.find(lower(token));
  if (it == kTokens.end()) return std::nullopt;
  return it->second;
}

std::string_view role_token(RoleLabel role) {
  switch (role) {
    case RoleLabel::Harasser: return "Har";
    case RoleLabel::Victim: return "Victim";
    case RoleLabel::BystanderAssistant: return "Bys_ass";
    case RoleLabel::BystanderDefender: return "Bys_def";
  }
  return "";
}

}  // namespace

std::array<RoleLabel, 2> category_roles(RoleCategory category) {
  if (category == RoleCategory::Bullying)
    return {RoleLabel::Harasser, RoleLabel::BystanderAssistant};
  return {RoleLabel::Victim, RoleLabel::BystanderDefender};
}

std::string_view role_name(RoleLabel role) {
  switch (role) {
    case RoleLabel::Harasser: return "harasser";
    case RoleLabel::Victim: return "victim";
    case RoleLabel::BystanderAssistant: return "bystander_assistant";
    case RoleLabel::BystanderDefender: return "bystander_defender";
  }
  return "";
}

std::string_view category_name(RoleCategory category) {
  return category == RoleCategory::Bullying ? "bullying" : "defending";
}

RoleLabel role_from_name(std::string_view name) {
  for (auto r : kAllRoles)
    if (role_name(r) == name) return r;
  throw ParseError("unknown role name '" + std::string(name) + "'");
}

RoleCategory category_from_name(std::string_view name) {
  for (auto c : kAllCategories)
    if (category_name(c) == name) return c;
  throw ParseError("unknown role category '" + std::string(name) + "'");
}

HarmLabel parse_standoff_label(std::string_view label_raw) {
  auto fail = [&](const std::string& why) {
    return ParseError("malformed role label '" + std::string(label_raw) +
                      "': " + why);
  };
  if (label_raw.empty()) throw ParseError("empty role label");
  const char digit = label_raw.front();
  if (!std::isdigit(static_cast<unsigned char>(digit)))
    throw fail("expected a harm digit");
  const int harm = digit - '0';
  if (harm > 2) throw fail("harm must be 0, 1 or 2");

  std::string_view rest = label_raw.substr(1);
  if (rest.empty()) {
    if (harm > 0) throw fail("harm > 0 requires a role");
    return {0, std::nullopt};
  }
  if (rest.front() != '_' || rest.size() == 1)
    throw fail("expected '_<role>' after the harm digit");
  auto role = role_from_token(rest.substr(1));
  if (!role) throw fail("unknown role token '" + std::string(rest.substr(1)) + "'");
  if (harm == 0) return {0, std::nullopt};
  return {harm, role};
}

std::string format_standoff_label(const HarmLabel& label) {
  std::string out = std::to_string(label.harm);
  if (label.role) {
    out += '_';
    out += role_token(*label.role);
  }
  return out;
}

std::vector<StandoffAnnotation> read_standoff(std::istream& in) {
  std::vector<StandoffAnnotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto where = [&] { return "standoff line " + std::to_string(lineno) + ": "; };

    const auto tab1 = line.find('\t');
    if (tab1 == std::string::npos) throw ParseError(where() + "missing tab after id");
    const auto tab2 = line.find('\t', tab1 + 1);

    StandoffAnnotation a;
    a.record_id = line.substr(0, tab1);
    std::string middle = line.substr(
        tab1 + 1, tab2 == std::string::npos ? std::string::npos : tab2 - tab1 - 1);
    if (tab2 != std::string::npos) a.surface_text = line.substr(tab2 + 1);

    std::replace(middle.begin(), middle.end(), ';', ' ');
    std::istringstream fields(middle);
    fields >> a.label_raw;
    std::vector<long long> offsets;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        long long v = std::stoll(tok, &used);
        if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
        offsets.push_back(v);
      } catch (const std::exception&) {
        throw ParseError(where() + "bad offset '" + tok + "'");
      }
    }
    if (a.label_raw.empty() || offsets.size() < 2 || offsets.size() % 2 != 0)
      throw ParseError(where() + "expected 'label start end'");
    a.span_start = static_cast<std::size_t>(*std::min_element(offsets.begin(), offsets.end()));
    a.span_end = static_cast<std::size_t>(*std::max_element(offsets.begin(), offsets.end()));
    if (a.span_end <= a.span_start)
      throw ParseError(where() + "span end must exceed span start");
    out.push_back(std::move(a));
  }
  return out;
}

void validate_posts(const std::vector<Post>& posts) {
  std::unordered_set<std::string> seen;
  seen.reserve(posts.size());
  for (const auto& p : posts) {
    if (p.post_id.empty()) throw ValidationError("post with empty post_id");
    if (!seen.insert(p.post_id).second)
      throw ValidationError("duplicate post_id '" + p.post_id + "'");
    if (p.harm < 0 || p.harm > 2)
      throw ValidationError("post '" + p.post_id + "': harm must be 0, 1 or 2");
    if (p.role.has_value() != (p.harm > 0))
      throw ValidationError("post '" + p.post_id +
                            "': role must be present iff harm > 0");
    if (p.seq_index < 0)
      throw ValidationError("post '" + p.post_id + "': negative seq_index");
  }
}

std::vector<Post> posts_from_standoff(
    const std::vector<StandoffAnnotation>& annotations,
    const std::string& document_id) {
  std::vector<const StandoffAnnotation*> roles;
  for (const auto& a : annotations) {
    if (!a.label_raw.empty() &&
        std::isdigit(static_cast<unsigned char>(a.label_raw.front())))
      roles.push_back(&a);
  }
  std::stable_sort(roles.begin(), roles.end(), [](auto* x, auto* y) {
    return x->span_start < y->span_start;
  });
  std::vector<Post> posts;
  posts.reserve(roles.size());
  for (std::size_t i = 0; i < roles.size(); ++i) {
    const auto label = parse_standoff_label(roles[i]->label_raw);
    Post p;
    p.post_id = document_id + ":" + roles[i]->record_id;
    p.conversation_id = document_id;
    p.seq_index = static_cast<std::int64_t>(i);
    p.text = roles[i]->surface_text;
    p.harm = label.harm;
    p.role = merge_harm_levels(label.harm, label.role);
    posts.push_back(std::move(p));
  }
  validate_posts(posts);
  return posts;
}

nlohmann::json post_to_json(const Post& post) {
  nlohmann::json out = {
      {"post_id", post.post_id},
      {"conversation_id", post.conversation_id},
      {"seq_index", post.seq_index},
      {"text", post.text},
      {"harm", post.harm},
      {"role", post.role ? nlohmann::json(std::string(role_name(*post.role)))
                         : nlohmann::json(nullptr)},
  };
  return out;
}

Post post_from_json(const nlohmann::json& j) {
  Post p;
  try {
    p.post_id = j.at("post_id").get<std::string>();
    p.conversation_id = j.value("conversation_id", std::string{});
    p.seq_index = j.value("seq_index", std::int64_t{0});
    p.text = j.at("text").get<std::string>();
    p.harm = j.at("harm").get<int>();
    const auto& role = j.contains("role") ? j.at("role") : nlohmann::json(nullptr);
    if (!role.is_null()) p.role = role_from_name(role.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad post object: ") + e.what());
  }
  return p;
}

std::vector<Post> read_jsonl(std::istream& in) {
  std::vector<Post> posts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      posts.push_back(post_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate_posts(posts);
  return posts;
}

std::vector<Post> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open dataset '" + path + "'");
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<Post>& posts) {
  for (const auto& p : posts) out << post_to_json(p).dump() << '\n';
}

void save_jsonl(const std::string& path, const std::vector<Post>& posts) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  write_jsonl(out, posts);
}

std::size_t CorpusStats::bullying_count() const {
  std::size_t n = 0;
  for (const auto& [role, count] : role_counts) n += count;
  return n;
}

nlohmann::json CorpusStats::to_json() const {
  nlohmann::json roles = nlohmann::json::object();
  for (auto r : kAllRoles) {
    auto it = role_counts.find(r);
    roles[std::string(role_name(r))] = it == role_counts.end() ? 0 : it->second;
  }
  return {{"roles", roles},
          {"bullying", bullying_count()},
          {"non_bullying", non_bullying_count},
          {"total", total}};
}

CorpusStats compute_stats(const std::vector<Post>& posts) {
  validate_posts(posts);
  CorpusStats stats;
  for (auto r : kAllRoles) stats.role_counts[r] = 0;
  for (const auto& p : posts) {
    if (p.role)
      ++stats.role_counts[*p.role];
    else
      ++stats.non_bullying_count;
  }
  stats.total = posts.size();
  return stats;
}

std::vector<Post> generate_synthetic_corpus(const SyntheticSpec& spec) {
  Rng rng = make_rng(spec.seed, 0);
  static constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m",
                                                 "n", "p", "r", "s", "t", "v", "z"};
  static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u"};
  std::unordered_set<std::string> used;
  auto fresh_word = [&] {
    std::uniform_int_distribution<std::size_t> syllables(2, 4);
    std::uniform_int_distribution<std::size_t> onset(0, std::size(kOnsets) - 1);
    std::uniform_int_distribution<std::size_t> vowel(0, std::size(kVowels) - 1);
    for (;;) {
      std::string w;
      for (std::size_t s = syllables(rng); s > 0; --s) {
        w += kOnsets[onset(rng)];
        w += kVowels[vowel(rng)];
      }
      if (used.insert(w).second) return w;
    }
  };
  auto make_pool = [&](std::size_t n) {
    std::vector<std::string> pool;
    for (std::size_t i = 0; i < n; ++i) pool.push_back(fresh_word());
    return pool;
  };

  const auto shared = make_pool(spec.shared_pool_size);
  // Pool index 0..3 = roles in kAllRoles order, 4 = non-cyberbullying.
  std::vector<std::vector<std::string>> pools;
  for (std::size_t c = 0; c < kAllRoles.size() + 1; ++c)
    pools.push_back(make_pool(std::max<std::size_t>(spec.pool_size, 1)));

  struct Draft {
    std::size_t cls;
    std::optional<RoleLabel> role;
  };
  std::vector<Draft> drafts;
  for (std::size_t r = 0; r < kAllRoles.size(); ++r) {
    auto it = spec.role_sizes.find(kAllRoles[r]);
    const std::size_t n = it == spec.role_sizes.end() ? 0 : it->second;
    for (std::size_t i = 0; i < n; ++i) drafts.push_back({r, kAllRoles[r]});
  }
  for (std::size_t i = 0; i < spec.non_bullying; ++i)
    drafts.push_back({kAllRoles.size(), std::nullopt});
  std::shuffle(drafts.begin(), drafts.end(), rng);

  const std::size_t conversations = std::max<std::size_t>(spec.conversations, 1);
  std::vector<std::int64_t> next_seq(conversations, 0);
  std::uniform_int_distribution<std::size_t> n_class(
      std::max<std::size_t>(spec.min_class_tokens, 1),
      std::max(spec.max_class_tokens, std::max<std::size_t>(spec.min_class_tokens, 1)));
  std::uniform_int_distribution<std::size_t> n_shared(0, spec.max_shared_tokens);

  std::vector<Post> posts;
  posts.reserve(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& d = drafts[i];
    std::vector<std::string> words;
    const auto& pool = pools[d.cls];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t k = n_class(rng); k > 0; --k) words.push_back(pool[pick(rng)]);
    if (!shared.empty()) {
      std::uniform_int_distribution<std::size_t> pick_shared(0, shared.size() - 1);
      for (std::size_t k = n_shared(rng); k > 0; --k) words.push_back(shared[pick_shared(rng)]);
    }
    std::shuffle(words.begin(), words.end(), rng);

    Post p;
    std::ostringstream id;
    id << "syn-" << std::setw(6) << std::setfill('0') << i;
    p.post_id = id.str();
    const std::size_t conv = i % conversations;
    p.conversation_id = "conv-" + std::to_string(conv);
    p.seq_index = next_seq[conv]++;
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (k) p.text += ' ';
      p.text += words[k];
    }
    p.role = d.role;
    p.harm = d.role ? static_cast<int>(1 + i % 2) : 0;
    posts.push_back(std::move(p));
  }
  return posts;
}

}  // namespace cyberroles
