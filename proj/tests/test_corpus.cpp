#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "cyberroles/corpus.hpp"
#include "cyberroles/error.hpp"
#include "doctest.h"

using namespace cyberroles;

TEST_CASE("parse_standoff_label: documented examples") {
  CHECK(parse_standoff_label("2_Har") == HarmLabel{2, RoleLabel::Harasser});
  CHECK(parse_standoff_label("0") == HarmLabel{0, std::nullopt});
  CHECK(parse_standoff_label("1_Victim") == HarmLabel{1, RoleLabel::Victim});
  CHECK(parse_standoff_label("1_victim") == HarmLabel{1, RoleLabel::Victim});
  CHECK(parse_standoff_label("2_Bys_ass") == HarmLabel{2, RoleLabel::BystanderAssistant});
  CHECK(parse_standoff_label("1_BYS_DEF") == HarmLabel{1, RoleLabel::BystanderDefender});
  CHECK(parse_standoff_label("1_defender") == HarmLabel{1, RoleLabel::BystanderDefender});
}

TEST_CASE("parse_standoff_label: harm 0 discards the role") {
  CHECK(parse_standoff_label("0_Har") == HarmLabel{0, std::nullopt});
}

TEST_CASE("parse_standoff_label: malformed labels name the label") {
  for (const char* bad : {"3_Har", "1", "2", "1_Troll", "", "x_Har", "12_Har", "_Har"}) {
    CAPTURE(bad);
    try {
      parse_standoff_label(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      if (*bad) CHECK(std::string(e.what()).find(bad) != std::string::npos);
    }
  }
}

TEST_CASE("format / parse round trip on all valid labels") {
  std::vector<HarmLabel> all = {{0, std::nullopt}};
  for (int h = 1; h <= 2; ++h)
    for (auto r : kAllRoles) all.push_back({h, r});
  CHECK(all.size() == 9);
  for (const auto& l : all) {
    CAPTURE(format_standoff_label(l));
    CHECK(parse_standoff_label(format_standoff_label(l)) == l);
  }
  CHECK(format_standoff_label({2, RoleLabel::Harasser}) == "2_Har");
}

TEST_CASE("merge_harm_levels") {
  CHECK(merge_harm_levels(1, RoleLabel::Victim) == RoleLabel::Victim);
  CHECK(merge_harm_levels(2, RoleLabel::Victim) == RoleLabel::Victim);
  CHECK(merge_harm_levels(0, std::nullopt) == std::nullopt);
  // Never invents a role.
  for (int h = 0; h <= 2; ++h) {
    CHECK(merge_harm_levels(h, std::nullopt) == std::nullopt);
    for (auto r : kAllRoles) {
      auto m = merge_harm_levels(h, r);
      if (m) CHECK(*m == r);
    }
  }
}

TEST_CASE("role_to_category partitions the roles") {
  CHECK(role_to_category(RoleLabel::Harasser) == RoleCategory::Bullying);
  CHECK(role_to_category(RoleLabel::BystanderAssistant) == RoleCategory::Bullying);
  CHECK(role_to_category(RoleLabel::Victim) == RoleCategory::Defending);
  CHECK(role_to_category(RoleLabel::BystanderDefender) == RoleCategory::Defending);
  std::set<RoleLabel> seen;
  for (auto c : kAllCategories)
    for (auto r : category_roles(c)) {
      CHECK(role_to_category(r) == c);
      CHECK(seen.insert(r).second);
    }
  CHECK(seen.size() == 4);
}

TEST_CASE("role and category names round trip") {
  for (auto r : kAllRoles) CHECK(role_from_name(role_name(r)) == r);
  for (auto c : kAllCategories) CHECK(category_from_name(category_name(c)) == c);
  CHECK_THROWS_AS(role_from_name("troll"), ParseError);
  CHECK_THROWS_AS(category_from_name("neutral"), ParseError);
}

namespace {
Post make_post(std::string id, int harm, std::optional<RoleLabel> role) {
  Post p;
  p.post_id = std::move(id);
  p.conversation_id = "c";
  p.text = "text";
  p.harm = harm;
  p.role = role;
  return p;
}
}  // namespace

TEST_CASE("compute_stats: three-post example") {
  std::vector<Post> posts = {make_post("a", 2, RoleLabel::Harasser),
                             make_post("b", 1, RoleLabel::Victim), make_post("c", 0, std::nullopt)};
  const auto s = compute_stats(posts);
  CHECK(s.role_counts.at(RoleLabel::Harasser) == 1);
  CHECK(s.role_counts.at(RoleLabel::Victim) == 1);
  CHECK(s.role_counts.at(RoleLabel::BystanderAssistant) == 0);
  CHECK(s.non_bullying_count == 1);
  CHECK(s.total == 3);
  CHECK(s.bullying_count() == 2);
  const auto j = s.to_json();
  CHECK(j["roles"]["harasser"] == 1);
  CHECK(j["non_bullying"] == 1);
  CHECK(j["total"] == 3);
}

TEST_CASE("compute_stats: empty list and full-corpus counts") {
  const auto empty = compute_stats({});
  CHECK(empty.total == 0);
  for (auto r : kAllRoles) CHECK(empty.role_counts.at(r) == 0);

  SyntheticSpec spec;
  spec.role_sizes = {{RoleLabel::Harasser, 3576},
                     {RoleLabel::Victim, 1356},
                     {RoleLabel::BystanderAssistant, 24},
                     {RoleLabel::BystanderDefender, 424}};
  spec.seed = 1;
  const auto s = compute_stats(generate_synthetic_corpus(spec));
  CHECK(s.bullying_count() == 5380);
  CHECK(s.role_counts.at(RoleLabel::BystanderAssistant) == 24);
}

TEST_CASE("compute_stats: permutation invariant, total identity") {
  SyntheticSpec spec;
  spec.role_sizes = {{RoleLabel::Harasser, 30}, {RoleLabel::BystanderDefender, 7}};
  spec.non_bullying = 12;
  spec.seed = 3;
  auto posts = generate_synthetic_corpus(spec);
  const auto base = compute_stats(posts).to_json();
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(posts.begin(), posts.end(), rng);
    const auto s = compute_stats(posts);
    CHECK(s.to_json() == base);
    CHECK(s.total == s.non_bullying_count + s.bullying_count());
  }
}

TEST_CASE("validate_posts rejects broken invariants") {
  CHECK_THROWS_AS(validate_posts({make_post("a", 1, std::nullopt)}), ValidationError);
  CHECK_THROWS_AS(validate_posts({make_post("a", 0, RoleLabel::Victim)}), ValidationError);
  CHECK_THROWS_AS(validate_posts({make_post("a", 3, RoleLabel::Victim)}), ValidationError);
  CHECK_THROWS_AS(validate_posts({make_post("a", 0, std::nullopt), make_post("a", 0, std::nullopt)}),
                  ValidationError);
  auto p = make_post("a", 0, std::nullopt);
  p.seq_index = -1;
  CHECK_THROWS_AS(validate_posts({p}), ValidationError);
  CHECK_NOTHROW(validate_posts({make_post("a", 0, std::nullopt), make_post("b", 2, RoleLabel::Victim)}));
}

TEST_CASE("standoff import") {
  std::istringstream in(
      "T1\t2_Har 0 12\tyou are dumb\n"
      "\n"
      "T2\tInsult 0 12\tyou are dumb\n"
      "T3\t1_Victim 20 24;26 30\tstop it\n"
      "T0\t0 13 19\thello\n");
  const auto anns = read_standoff(in);
  REQUIRE(anns.size() == 4);
  CHECK(anns[2].span_start == 20);
  CHECK(anns[2].span_end == 30);
  const auto posts = posts_from_standoff(anns, "doc1");
  REQUIRE(posts.size() == 3);
  CHECK(posts[0].post_id == "doc1:T1");
  CHECK(posts[0].role == RoleLabel::Harasser);
  CHECK(posts[1].post_id == "doc1:T0");
  CHECK(!posts[1].role);
  CHECK(posts[2].role == RoleLabel::Victim);
  CHECK(posts[2].seq_index == 2);

  std::istringstream bad("T1\t2_Har zero 12\tx\n");
  CHECK_THROWS_AS(read_standoff(bad), ParseError);
  std::istringstream bad_label("T1\t4_Har 0 1\tx\n");
  CHECK_THROWS_AS(posts_from_standoff(read_standoff(bad_label), "d"), ParseError);
}

TEST_CASE("JSONL round trip") {
  SyntheticSpec spec;
  spec.role_sizes = {{RoleLabel::Victim, 5}};
  spec.non_bullying = 5;
  spec.seed = 4;
  const auto posts = generate_synthetic_corpus(spec);
  std::stringstream buf;
  write_jsonl(buf, posts);
  CHECK(read_jsonl(buf) == posts);

  std::istringstream bad("{\"post_id\":\"a\",\"text\":\"x\",\"harm\":1,\"role\":null}\n");
  CHECK_THROWS_AS(read_jsonl(bad), ValidationError);
  std::istringstream garbage("{\"post_id\":\"a\",\n");
  try {
    read_jsonl(garbage);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("synthetic corpus: sizes, determinism, seeds") {
  SyntheticSpec spec;
  spec.role_sizes = {{RoleLabel::Harasser, 50}, {RoleLabel::Victim, 50}};
  spec.seed = 7;
  const auto a = generate_synthetic_corpus(spec);
  CHECK(a.size() == 100);
  const auto s = compute_stats(a);
  CHECK(s.role_counts.at(RoleLabel::Harasser) == 50);
  CHECK(s.role_counts.at(RoleLabel::Victim) == 50);
  CHECK(generate_synthetic_corpus(spec) == a);
  spec.seed = 8;
  const auto b = generate_synthetic_corpus(spec);
  std::set<std::string> ta, tb;
  for (const auto& p : a) ta.insert(p.text);
  for (const auto& p : b) tb.insert(p.text);
  CHECK(ta != tb);
}

TEST_CASE("synthetic corpus: class vocabularies are disjoint outside the shared pool") {
  SyntheticSpec spec;
  spec.role_sizes = {{RoleLabel::Harasser, 40},
                     {RoleLabel::Victim, 40},
                     {RoleLabel::BystanderAssistant, 40},
                     {RoleLabel::BystanderDefender, 40}};
  spec.non_bullying = 40;
  spec.seed = 11;
  const auto posts = generate_synthetic_corpus(spec);
  // A token seen in every class is shared; any other token must belong to one class.
  std::map<std::string, std::set<std::string>> classes_of;
  for (const auto& p : posts) {
    std::istringstream words(p.text);
    std::string w;
    const std::string cls = p.role ? std::string(role_name(*p.role)) : "none";
    while (words >> w) classes_of[w].insert(cls);
  }
  std::size_t exclusive = 0;
  for (const auto& [w, cls] : classes_of) {
    if (cls.size() == 1) ++exclusive;
  }
  CHECK(exclusive >= 5 * 20);
  // Every post carries at least one class-exclusive token.
  for (const auto& p : posts) {
    std::istringstream words(p.text);
    std::string w;
    bool has = false;
    while (words >> w) has = has || classes_of[w].size() == 1;
    CHECK(has);
  }
}
