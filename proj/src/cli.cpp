#include "cyberroles/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "cyberroles/corpus.hpp"
#include "cyberroles/encoder.hpp"
#include "cyberroles/ensembles.hpp"
#include "cyberroles/evaluation.hpp"
#include "cyberroles/preprocess.hpp"
#include "cyberroles/rng.hpp"
#include "cyberroles/sampling.hpp"

namespace cyberroles {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream ids for seeds derived from the run seed.
constexpr std::uint64_t kFoldStream = 1;
constexpr std::uint64_t kVotingStream = 50;
constexpr std::uint64_t kMemberStream = 60;
constexpr std::uint64_t kSamplerStream = 80;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, input, encoder, sampler, loss, model;
  std::optional<std::string> binary_manifest, roles_manifest;
  std::optional<std::size_t> folds, threads;
  std::optional<std::size_t> harasser, victim, assistant, defender, non_bullying;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Config file first, then flags on top.
json resolve_config(const std::string& command, const Flags& f) {
  json cfg = f.config.empty() ? json::object() : read_json_file(f.config);
  if (!cfg.is_object()) throw ArgumentError("config must be a JSON object");
  auto set = [&](const char* key, const auto& value) {
    if (value) cfg[key] = *value;
  };
  set("seed", f.seed);
  set("out", f.out);
  set("input", f.input);
  set("encoder", f.encoder);
  set("sampler", f.sampler);
  set("loss", f.loss);
  set("model", f.model);
  set("binary_manifest", f.binary_manifest);
  set("roles_manifest", f.roles_manifest);
  set("folds", f.folds);
  set("threads", f.threads);
  json synth = cfg.value("synth", json::object());
  auto set_synth = [&](const char* key, const std::optional<std::size_t>& v) {
    if (v) synth[key] = *v;
  };
  set_synth("harasser", f.harasser);
  set_synth("victim", f.victim);
  set_synth("bystander_assistant", f.assistant);
  set_synth("bystander_defender", f.defender);
  set_synth("non_bullying", f.non_bullying);
  if (command == "synth") cfg["synth"] = synth;

  if (!cfg.contains("seed") || !cfg.at("seed").is_number_unsigned())
    throw ArgumentError("a non-negative integer seed is required (--seed or \"seed\" in the config)");
  cfg["command"] = command;
  return cfg;
}

std::uint64_t seed_of(const json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }

std::string required(const json& cfg, const char* key, const char* flag) {
  if (!cfg.contains(key) || !cfg.at(key).is_string() || cfg.at(key).get<std::string>().empty())
    throw ArgumentError(std::string("missing ") + flag);
  return cfg.at(key).get<std::string>();
}

std::string existing_path(const json& cfg, const char* key, const char* flag) {
  auto path = required(cfg, key, flag);
  if (!fs::exists(path)) throw ArgumentError(std::string(flag) + ": no such file '" + path + "'");
  return path;
}

fs::path output_dir(const json& cfg) {
  fs::path dir = required(cfg, "out", "--out");
  fs::create_directories(dir);
  return dir;
}

std::vector<Post> load_corpus(const json& cfg) { return load_jsonl(existing_path(cfg, "input", "--input")); }

NormalizationTable tables_of(json& cfg) {
  json t = cfg.value("tables", json::object());
  const auto slang = t.value("slang", std::string{});
  const auto emoticons = t.value("emoticons", std::string{});
  if (slang.empty() && emoticons.empty()) {
    cfg["tables"] = {{"slang", "default"}, {"emoticons", "default"}};
    return NormalizationTable::load_default();
  }
  return NormalizationTable::load(slang, emoticons);
}

Preprocessor preprocessor_of(json& cfg, std::shared_ptr<const Tokenizer> tokenizer) {
  auto table = tables_of(cfg);
  auto pc = PreprocessConfig::from_json(cfg.value("preprocess", json::object()));
  pc.validate();
  cfg["preprocess"] = pc.to_json();
  return Preprocessor(std::move(table), pc, std::move(tokenizer));
}

std::shared_ptr<const EncoderBackend> backend_of(json& cfg) {
  const auto spec = cfg.value("encoder", std::string("baseline"));
  cfg["encoder"] = spec;
  return backend_from_spec(spec, seed_of(cfg));
}

TrainingConfig base_training(json& cfg) {
  auto t = TrainingConfig::from_json(cfg.value("training", json::object()));
  if (cfg.contains("loss")) t.loss = loss_from_name(cfg.at("loss").get<std::string>());
  t.validate();
  cfg["training"] = t.to_json();
  return t;
}

MemberRecipe member_recipe(const TrainingConfig& base, const json& overrides,
                           std::optional<SamplerConfig> default_sampler, std::uint64_t seed,
                           std::uint64_t index) {
  json j = {{"training", base.to_json()},
            {"sampler", default_sampler ? default_sampler->to_json() : json(nullptr)}};
  j.merge_patch(overrides);
  auto r = MemberRecipe::from_json(j);
  r.training.seed = derive_seed(seed, kMemberStream + index);
  if (r.sampler) {
    r.sampler->seed = derive_seed(seed, kSamplerStream + index);
    r.sampler->validate();
  }
  r.training.validate();
  return r;
}

VotingRecipe voting_recipe(json& cfg) {
  const auto base = base_training(cfg);
  const auto seed = seed_of(cfg);
  const json v = cfg.value("voting", json::object());
  VotingRecipe r;
  r.majority_fraction = v.value("majority_fraction", r.majority_fraction);
  r.a = member_recipe(base, v.value("a", json::object()), std::nullopt, seed, 0);
  r.b = member_recipe(base, v.value("b", json::object()), std::nullopt, seed, 1);
  r.c = member_recipe(base, v.value("c", json::object()), std::nullopt, seed, 2);
  r.seed = derive_seed(seed, kVotingStream);
  cfg["voting"] = r.to_json();
  return r;
}

RoleRecipe role_recipe(json& cfg) {
  const auto base = base_training(cfg);
  const auto seed = seed_of(cfg);
  const json v = cfg.value("roles", json::object());
  std::optional<SamplerConfig> outer_sampler = SamplerConfig{};
  if (cfg.contains("sampler")) {
    const auto mode = cfg.at("sampler").get<std::string>();
    if (mode == "none")
      outer_sampler.reset();
    else
      outer_sampler->mode = sampler_mode_from_name(mode);
  }
  json outer_overrides = v.value("outer", json::object());
  // --sampler wins over a sampler block in the config file.
  if (cfg.contains("sampler")) outer_overrides.erase("sampler");
  RoleRecipe r;
  r.outer = member_recipe(base, outer_overrides, outer_sampler, seed, 3);
  r.bullying = member_recipe(base, v.value("bullying", json::object()), std::nullopt, seed, 4);
  r.defending = member_recipe(base, v.value("defending", json::object()), std::nullopt, seed, 5);
  cfg["roles"] = r.to_json();
  return r;
}

std::vector<Vector> features_for(const std::vector<Post>& posts, const FeatureCache& cache) {
  std::vector<Vector> xs;
  xs.reserve(posts.size());
  for (const auto& p : posts) xs.push_back(cache->at(p.post_id));
  return xs;
}

std::string format_reports(const std::map<std::string, EvaluationReport>& reports,
                           const std::vector<EvalView>& views) {
  std::vector<EvaluationReport> ordered;
  for (const auto& v : views)
    if (auto it = reports.find(v.name); it != reports.end()) ordered.push_back(it->second);
  return format_table(ordered);
}

json reports_json(const std::map<std::string, EvaluationReport>& reports) {
  json j = json::object();
  for (const auto& [name, r] : reports) j[name] = r.to_json();
  return j;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void cmd_stats(json cfg, std::ostream& out) {
  const auto stats = compute_stats(load_corpus(cfg)).to_json();
  if (cfg.contains("out")) {
    const auto dir = output_dir(cfg);
    write_json(dir / "stats.json", stats);
    write_json(dir / "config.json", cfg);
  }
  out << stats.dump(2) << '\n';
}

void cmd_prepare(json cfg, std::ostream& out) {
  const auto posts = load_corpus(cfg);
  const auto dir = output_dir(cfg);
  const auto pre = preprocessor_of(cfg, std::make_shared<BasicTokenizer>());
  std::string lines;
  for (const auto& p : posts) {
    Post q = p;
    q.text = pre.normalize(p.text);
    json j = post_to_json(q);
    j["tokens"] = pre(p.text);
    lines += j.dump() + "\n";
  }
  write_text(dir / "prepared.jsonl", lines);
  write_json(dir / "config.json", cfg);
  out << "prepared " << posts.size() << " posts -> " << (dir / "prepared.jsonl").string() << '\n';
}

void cmd_synth(json cfg, std::ostream& out) {
  const auto dir = output_dir(cfg);
  json s = cfg.value("synth", json::object());
  SyntheticSpec spec;
  spec.role_sizes = {{RoleLabel::Harasser, s.value("harasser", std::size_t{500})},
                     {RoleLabel::Victim, s.value("victim", std::size_t{300})},
                     {RoleLabel::BystanderAssistant, s.value("bystander_assistant", std::size_t{50})},
                     {RoleLabel::BystanderDefender, s.value("bystander_defender", std::size_t{100})}};
  spec.non_bullying = s.value("non_bullying", std::size_t{1000});
  spec.conversations = s.value("conversations", spec.conversations);
  spec.seed = seed_of(cfg);
  cfg["synth"] = {{"harasser", spec.role_sizes[RoleLabel::Harasser]},
                  {"victim", spec.role_sizes[RoleLabel::Victim]},
                  {"bystander_assistant", spec.role_sizes[RoleLabel::BystanderAssistant]},
                  {"bystander_defender", spec.role_sizes[RoleLabel::BystanderDefender]},
                  {"non_bullying", spec.non_bullying},
                  {"conversations", spec.conversations}};
  const auto posts = generate_synthetic_corpus(spec);
  save_jsonl((dir / "corpus.jsonl").string(), posts);
  write_json(dir / "stats.json", compute_stats(posts).to_json());
  write_json(dir / "config.json", cfg);
  out << "wrote " << posts.size() << " posts -> " << (dir / "corpus.jsonl").string() << '\n';
}

void cmd_train_binary(json cfg, std::ostream& out) {
  const auto posts = load_corpus(cfg);
  const auto dir = output_dir(cfg);
  const auto backend = backend_of(cfg);
  const auto pre = preprocessor_of(cfg, backend->tokenizer());
  const auto recipe = voting_recipe(cfg);
  const auto cache = encode_posts(posts, pre, *backend);
  std::vector<std::string> labels;
  for (const auto& p : posts) labels.push_back(p.is_cyberbullying() ? kOffensive : kNotOffensive);

  VotingTrainingInfo info;
  const auto ensemble = train_voting_ensemble(backend, features_for(posts, cache), labels, recipe, &info);
  save_manifest((dir / "voting.json").string(), ensemble, pre, {{"seed", seed_of(cfg)}});
  write_json(dir / "training_info.json", info.to_json());
  write_json(dir / "config.json", cfg);
  out << "voting ensemble -> " << (dir / "voting.json").string() << " (set A " << info.set_a
      << ", set B " << info.set_b << ", referee set " << info.referee_set << ")\n";
}

void cmd_train_roles(json cfg, std::ostream& out) {
  const auto posts = load_corpus(cfg);
  const auto dir = output_dir(cfg);
  const auto backend = backend_of(cfg);
  const auto pre = preprocessor_of(cfg, backend->tokenizer());
  const auto recipe = role_recipe(cfg);
  std::vector<Post> role_posts;
  for (const auto& p : posts)
    if (p.role) role_posts.push_back(p);
  const auto cache = encode_posts(role_posts, pre, *backend);
  const auto ensemble =
      train_role_ensemble(backend, role_posts, features_for(role_posts, cache), recipe);
  save_manifest((dir / "roles.json").string(), ensemble, pre, {{"seed", seed_of(cfg)}});
  write_json(dir / "config.json", cfg);
  out << "role ensemble (" << role_posts.size() << " posts) -> " << (dir / "roles.json").string()
      << '\n';
}

void cmd_cv(json cfg, std::ostream& out) {
  const auto posts = load_corpus(cfg);
  const auto dir = output_dir(cfg);
  const auto seed = seed_of(cfg);
  const auto k = cfg.value("folds", std::size_t{10});
  const auto threads = cfg.value("threads", std::size_t{1});
  const auto model = cfg.value("model", std::string("pipeline"));
  cfg["folds"] = k;
  cfg["model"] = model;
  // Results do not depend on the thread count, so it stays out of the frozen config.
  cfg.erase("threads");

  std::map<std::string, std::string> strata;
  for (const auto& p : posts) strata[p.post_id] = stratum(p);
  const auto plan = stratified_kfold(strata, k, derive_seed(seed, kFoldStream));

  std::vector<EvalView> views;
  TrainRecipe recipe;
  if (model == "oracle" || model == "majority") {
    views = pipeline_views();
    recipe = model == "oracle" ? oracle_recipe(views) : majority_recipe(views);
  } else {
    const auto backend = backend_of(cfg);
    const auto pre = preprocessor_of(cfg, backend->tokenizer());
    const auto cache = encode_posts(posts, pre, *backend);
    if (model == "roles") {
      views = role_views();
      recipe = role_cv_recipe(backend, cache, role_recipe(cfg));
    } else if (model == "binary") {
      views = binary_views();
      recipe = binary_cv_recipe(backend, cache, voting_recipe(cfg));
    } else if (model == "pipeline") {
      views = pipeline_views();
      auto v = voting_recipe(cfg);
      auto r = role_recipe(cfg);
      recipe = pipeline_cv_recipe(backend, cache, v, r);
    } else {
      throw ArgumentError("--model must be roles, binary, pipeline, oracle or majority");
    }
  }

  const auto result = cross_validate(posts, plan, recipe, views, threads);
  json report = result.to_json();
  report["model"] = model;
  report["warnings"] = plan.warnings;
  const auto table = format_reports(result.pooled, views);
  write_json(dir / "report.json", report);
  write_text(dir / "report.txt", table);
  write_json(dir / "fold_plan.json", plan.to_json());
  write_json(dir / "config.json", cfg);
  for (const auto& w : plan.warnings) out << "warning: " << w << '\n';
  out << table;
}

struct LoadedEnsembles {
  std::optional<Manifest> binary, roles;

  const Manifest& any() const { return binary ? *binary : *roles; }
};

LoadedEnsembles load_ensembles(const json& cfg, bool need_both) {
  LoadedEnsembles e;
  if (cfg.contains("binary_manifest"))
    e.binary = load_manifest(existing_path(cfg, "binary_manifest", "--binary-manifest"));
  if (cfg.contains("roles_manifest"))
    e.roles = load_manifest(existing_path(cfg, "roles_manifest", "--roles-manifest"));
  if (e.binary && e.binary->type != "voting")
    throw ArgumentError("--binary-manifest must point at a voting ensemble");
  if (e.roles && e.roles->type != "roles")
    throw ArgumentError("--roles-manifest must point at a role ensemble");
  if (need_both && !(e.binary && e.roles))
    throw ArgumentError("both --binary-manifest and --roles-manifest are required");
  if (!e.binary && !e.roles)
    throw ArgumentError("give --binary-manifest, --roles-manifest or both");
  if (e.binary && e.roles &&
      e.binary->voting->model_a().backend().descriptor() !=
          e.roles->roles->outer().backend().descriptor())
    throw ArgumentError("the two manifests use different encoders");
  return e;
}

const EncoderBackend& backend_of(const LoadedEnsembles& e) {
  return e.binary ? e.binary->voting->model_a().backend() : e.roles->roles->outer().backend();
}

void cmd_eval(json cfg, std::ostream& out) {
  const auto posts = load_corpus(cfg);
  const auto dir = output_dir(cfg);
  const auto e = load_ensembles(cfg, false);
  const auto cache = encode_posts(posts, e.any().preprocessor(), backend_of(e));

  std::vector<EvalView> views = e.binary && e.roles ? pipeline_views()
                                : e.binary          ? binary_views()
                                                    : role_views();
  std::optional<VotingEnsemble> voting;
  std::optional<RoleEnsemble> roles;
  if (e.binary) voting = e.binary->voting;
  if (e.roles) roles = e.roles->roles;
  const auto predictor = ensemble_predictor(voting, roles, cache);
  const auto reports = evaluate_predictor(posts, *predictor, views, {{"posts", posts.size()}});
  const auto table = format_reports(reports, views);
  write_json(dir / "report.json", reports_json(reports));
  write_text(dir / "report.txt", table);
  write_json(dir / "config.json", cfg);
  out << table;
}

void cmd_predict(json cfg, std::ostream& out) {
  const auto input = existing_path(cfg, "input", "--input");
  const auto dir = output_dir(cfg);
  const auto e = load_ensembles(cfg, true);
  const auto pre = e.binary->preprocessor();

  std::ifstream in(input);
  std::string line, lines;
  std::size_t lineno = 0, count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Post post;
    try {
      const auto j = json::parse(line);
      post.post_id = j.at("post_id").get<std::string>();
      post.text = j.at("text").get<std::string>();
    } catch (const json::exception& ex) {
      throw ParseError(input + ": line " + std::to_string(lineno) + ": " + ex.what());
    }
    const auto p = classify_post(*e.binary->voting, *e.roles->roles, post, pre);
    lines += p.to_json(post.post_id).dump() + "\n";
    ++count;
  }
  write_text(dir / "predictions.jsonl", lines);
  write_json(dir / "config.json", cfg);
  out << "classified " << count << " posts -> " << (dir / "predictions.jsonl").string() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cyberbullying detection and participant-role classification"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run config; flags override its keys")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Run seed (mandatory here or in the config)");
    sub->add_option("--out", f.out, "Output directory");
  };
  auto input = [&](CLI::App* sub) { sub->add_option("-i,--input", f.input, "Corpus JSONL"); };
  auto training = [&](CLI::App* sub) {
    sub->add_option("--encoder", f.encoder, "baseline, baseline:<dim> or contextual:<vectors.jsonl>");
    sub->add_option("--sampler", f.sampler,
                    "Outer role model imbalance strategy: weighted, undersample, oversample, none");
    sub->add_option("--loss", f.loss, "cross_entropy or weighted_cross_entropy");
  };
  auto manifests = [&](CLI::App* sub) {
    sub->add_option("--binary-manifest", f.binary_manifest, "Voting ensemble manifest");
    sub->add_option("--roles-manifest", f.roles_manifest, "Role ensemble manifest");
  };

  auto* stats = app.add_subcommand("stats", "Role and class counts of a corpus");
  common(stats);
  input(stats);
  auto* prepare = app.add_subcommand("prepare", "Normalize and tokenize a corpus");
  common(prepare);
  input(prepare);
  auto* synth = app.add_subcommand("synth", "Generate a separable synthetic corpus");
  common(synth);
  synth->add_option("--harasser", f.harasser, "Harasser posts (default 500)");
  synth->add_option("--victim", f.victim, "Victim posts (default 300)");
  synth->add_option("--assistant", f.assistant, "Bystander assistant posts (default 50)");
  synth->add_option("--defender", f.defender, "Bystander defender posts (default 100)");
  synth->add_option("--non-bullying", f.non_bullying, "Non-cyberbullying posts (default 1000)");
  auto* train_binary = app.add_subcommand("train-binary", "Train the A/B/C voting ensemble");
  common(train_binary);
  input(train_binary);
  training(train_binary);
  auto* train_roles = app.add_subcommand("train-roles", "Train the hierarchical role ensemble");
  common(train_roles);
  input(train_roles);
  training(train_roles);
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  common(cv);
  input(cv);
  training(cv);
  cv->add_option("--folds", f.folds, "Number of folds (default 10)");
  cv->add_option("--model", f.model, "pipeline, roles, binary, oracle or majority");
  cv->add_option("--threads", f.threads, "Folds trained concurrently (default 1)");
  auto* eval = app.add_subcommand("eval", "Score saved ensembles on a labelled corpus");
  common(eval);
  input(eval);
  manifests(eval);
  auto* predict = app.add_subcommand("predict", "Classify posts with both ensembles");
  common(predict);
  predict->add_option("-i,--input", f.input, "JSONL with post_id and text per line");
  manifests(predict);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    json cfg = resolve_config(command, f);
    if (command == "stats") cmd_stats(cfg, out);
    else if (command == "prepare") cmd_prepare(cfg, out);
    else if (command == "synth") cmd_synth(cfg, out);
    else if (command == "train-binary") cmd_train_binary(cfg, out);
    else if (command == "train-roles") cmd_train_roles(cfg, out);
    else if (command == "cv") cmd_cv(cfg, out);
    else if (command == "eval") cmd_eval(cfg, out);
    else if (command == "predict") cmd_predict(cfg, out);
    return kExitOk;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConfigurationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const json::exception& e) {
    err << "error: bad configuration value: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace cyberroles
