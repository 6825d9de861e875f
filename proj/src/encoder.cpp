#include "cyberroles/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cyberroles/error.hpp"
#include "cyberroles/rng.hpp"

namespace cyberroles {

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

std::shared_ptr<const Tokenizer> EncoderBackend::tokenizer() const {
  static const auto basic = std::make_shared<const BasicTokenizer>();
  return basic;
}

Vector encode_baseline(const TokenSequence& tokens, std::size_t dim, std::uint64_t seed) {
  if (dim < 16) throw ArgumentError("baseline encoder dimension must be at least 16");
  Vector v(dim, 0.0);
  const std::uint64_t basis = 0xcbf29ce484222325ULL ^ derive_seed(seed, 0x5eed);

  const std::string* prev = nullptr;
  for (const auto& tok : tokens) {
    if (tok == kStartMarker || tok == kSeparatorMarker) continue;
    std::string key = "1\x1f" + tok;
    v[fnv1a(key.data(), key.size(), basis) % dim] += 1.0;
    if (prev) {
      key = "2\x1f" + *prev + "\x1f" + tok;
      v[fnv1a(key.data(), key.size(), basis) % dim] += 1.0;
    }
    prev = &tok;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

HashedNgramEncoder::HashedNgramEncoder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ < 16) throw ArgumentError("baseline encoder dimension must be at least 16");
}

Vector HashedNgramEncoder::encode(const TokenSequence& tokens) const {
  return encode_baseline(tokens, dim_, seed_);
}

nlohmann::json HashedNgramEncoder::descriptor() const {
  return {{"name", name()}, {"dimension", dim_}, {"seed", seed_}};
}

PrecomputedEncoder::PrecomputedEncoder(std::string name, const std::string& path)
    : name_(std::move(name)), path_(path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open embeddings file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto vec = j.at("vector").get<Vector>();
      if (dim_ == 0) dim_ = vec.size();
      if (vec.empty() || vec.size() != dim_)
        throw ParseError(path + ":" + std::to_string(lineno) + ": vector has dimension " +
                         std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
      table_[j.at("text").get<std::string>()] = std::move(vec);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (dim_ == 0) throw ParseError("embeddings file '" + path + "' is empty");
}

Vector PrecomputedEncoder::encode(const TokenSequence& tokens) const {
  std::string key;
  for (const auto& t : strip_markers(tokens)) {
    if (!key.empty()) key += ' ';
    key += t;
  }
  auto it = table_.find(key);
  if (it == table_.end())
    throw EncodingError("no precomputed embedding for '" + key + "' in " + path_);
  return it->second;
}

nlohmann::json PrecomputedEncoder::descriptor() const {
  return {{"name", name()}, {"dimension", dim_}, {"path", path_}};
}

std::shared_ptr<const EncoderBackend> make_backend(const nlohmann::json& descriptor) {
  const auto name = descriptor.at("name").get<std::string>();
  if (name == "baseline")
    return std::make_shared<HashedNgramEncoder>(descriptor.at("dimension").get<std::size_t>(),
                                                descriptor.value("seed", std::uint64_t{0}));
  if (name.rfind("contextual:", 0) == 0) {
    auto backend = std::make_shared<PrecomputedEncoder>(
        name.substr(11), descriptor.at("path").get<std::string>());
    if (backend->dimension() != descriptor.value("dimension", backend->dimension()))
      throw ConfigurationError("embeddings in '" + descriptor.at("path").get<std::string>() +
                               "' no longer match the recorded dimension");
    return backend;
  }
  throw ConfigurationError("unknown encoder backend '" + name + "'");
}

std::shared_ptr<const EncoderBackend> backend_from_spec(const std::string& spec,
                                                        std::uint64_t seed) {
  if (spec == "baseline") return std::make_shared<HashedNgramEncoder>(
      HashedNgramEncoder::kDefaultDimension, seed);
  if (spec.rfind("baseline:", 0) == 0) {
    std::size_t dim = 0;
    try {
      dim = std::stoul(spec.substr(9));
    } catch (const std::exception&) {
      throw ArgumentError("bad encoder spec '" + spec + "'");
    }
    return std::make_shared<HashedNgramEncoder>(dim, seed);
  }
  if (spec.rfind("contextual:", 0) == 0 && spec.size() > 11) {
    const std::string path = spec.substr(11);
    return std::make_shared<PrecomputedEncoder>(
        std::filesystem::path(path).stem().string(), path);
  }
  throw ArgumentError("encoder must be 'baseline', 'baseline:<dim>' or "
                      "'contextual:<embeddings.jsonl>', got '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Head
// ---------------------------------------------------------------------------

SparseVector SparseVector::from_dense(std::span<const double> dense) {
  SparseVector s;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      s.index.push_back(static_cast<std::uint32_t>(i));
      s.value.push_back(dense[i]);
    }
  }
  return s;
}

ClassifierHead ClassifierHead::zeros(std::size_t input_dim, std::size_t hidden,
                                     std::size_t classes) {
  if (input_dim == 0 || hidden == 0 || classes < 2)
    throw ConfigurationError("classifier head needs D > 0, H > 0 and at least 2 classes");
  ClassifierHead h;
  h.input_dim = input_dim;
  h.hidden = hidden;
  h.classes = classes;
  h.w1.assign(input_dim * hidden, 0.0);
  h.b1.assign(hidden, 0.0);
  h.w2.assign(hidden * classes, 0.0);
  h.b2.assign(classes, 0.0);
  return h;
}

ClassifierHead ClassifierHead::random(std::size_t input_dim, std::size_t hidden,
                                      std::size_t classes, std::uint64_t seed) {
  ClassifierHead h = zeros(input_dim, hidden, classes);
  Rng rng = make_rng(seed, 11);
  const double a1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + classes));
  std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
  for (double& w : h.w1) w = u1(rng);
  for (double& w : h.w2) w = u2(rng);
  return h;
}

namespace {

// Hidden activations and logits for one example.
void forward(const ClassifierHead& h, const SparseVector& x, Vector& act, Vector& logits) {
  act.assign(h.b1.begin(), h.b1.end());
  for (std::size_t k = 0; k < x.index.size(); ++k) {
    const double* row = &h.w1[static_cast<std::size_t>(x.index[k]) * h.hidden];
    const double xv = x.value[k];
    for (std::size_t j = 0; j < h.hidden; ++j) act[j] += xv * row[j];
  }
  for (double& a : act) a = std::tanh(a);
  logits.assign(h.b2.begin(), h.b2.end());
  for (std::size_t j = 0; j < h.hidden; ++j) {
    const double* row = &h.w2[j * h.classes];
    for (std::size_t c = 0; c < h.classes; ++c) logits[c] += act[j] * row[c];
  }
}

}  // namespace

Vector ClassifierHead::logits(const SparseVector& x) const {
  Vector act, out;
  forward(*this, x, act, out);
  return out;
}

Vector ClassifierHead::logits(std::span<const double> x) const {
  if (x.size() != input_dim)
    throw EncodingError("feature dimension " + std::to_string(x.size()) +
                        " does not match classifier input " + std::to_string(input_dim));
  return logits(SparseVector::from_dense(x));
}

Vector ClassifierHead::proba(std::span<const double> x) const { return softmax(logits(x)); }

std::size_t ClassifierHead::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

std::array<std::span<double>, 4> ClassifierHead::blocks() {
  return {std::span<double>(w1), std::span<double>(b1), std::span<double>(w2),
          std::span<double>(b2)};
}

Vector softmax(std::span<const double> logits) {
  Vector p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

HeadGradient::HeadGradient(const ClassifierHead& head)
    : w1(head.w1.size(), 0.0),
      b1(head.b1.size(), 0.0),
      w2(head.w2.size(), 0.0),
      b2(head.b2.size(), 0.0),
      row_flag(head.input_dim, 0) {}

void HeadGradient::clear() {
  const std::size_t hidden = b1.size();
  for (auto r : touched_rows) {
    std::fill_n(w1.begin() + static_cast<std::ptrdiff_t>(r * hidden), hidden, 0.0);
    row_flag[r] = 0;
  }
  touched_rows.clear();
  std::fill(b1.begin(), b1.end(), 0.0);
  std::fill(w2.begin(), w2.end(), 0.0);
  std::fill(b2.begin(), b2.end(), 0.0);
}

double batch_loss(const ClassifierHead& head, std::span<const SparseVector* const> xs,
                  std::span<const std::size_t> targets,
                  std::span<const double> example_weights, HeadGradient* grad) {
  if (xs.size() != targets.size() || xs.empty())
    throw ArgumentError("batch_loss: need one target per example and a non-empty batch");
  if (!example_weights.empty() && example_weights.size() != xs.size())
    throw ArgumentError("batch_loss: one weight per example expected");

  double weight_sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    weight_sum += example_weights.empty() ? 1.0 : example_weights[i];

  const std::size_t H = head.hidden, C = head.classes;
  Vector act, logits, dlogits(C), dz(H);
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = example_weights.empty() ? 1.0 : example_weights[i];
    const std::size_t y = targets[i];
    forward(head, *xs[i], act, logits);
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - m);
    const double lse = m + std::log(z);
    total += w * (lse - logits[y]);
    if (!grad) continue;

    const double scale = w / weight_sum;
    for (std::size_t c = 0; c < C; ++c)
      dlogits[c] = scale * (std::exp(logits[c] - lse) - (c == y ? 1.0 : 0.0));
    for (std::size_t c = 0; c < C; ++c) grad->b2[c] += dlogits[c];
    for (std::size_t j = 0; j < H; ++j) {
      double da = 0.0;
      const double* w2row = &head.w2[j * C];
      double* g2row = &grad->w2[j * C];
      for (std::size_t c = 0; c < C; ++c) {
        g2row[c] += act[j] * dlogits[c];
        da += w2row[c] * dlogits[c];
      }
      dz[j] = da * (1.0 - act[j] * act[j]);
      grad->b1[j] += dz[j];
    }
    const auto& x = *xs[i];
    for (std::size_t k = 0; k < x.index.size(); ++k) {
      const auto r = x.index[k];
      if (!grad->row_flag[r]) {
        grad->row_flag[r] = 1;
        grad->touched_rows.push_back(r);
      }
      double* g1row = &grad->w1[static_cast<std::size_t>(r) * H];
      for (std::size_t j = 0; j < H; ++j) g1row[j] += x.value[k] * dz[j];
    }
  }
  return total / weight_sum;
}

void sgd_step(ClassifierHead& head, const HeadGradient& grad, double learning_rate) {
  const std::size_t H = head.hidden;
  for (auto r : grad.touched_rows) {
    double* row = &head.w1[static_cast<std::size_t>(r) * H];
    const double* g = &grad.w1[static_cast<std::size_t>(r) * H];
    for (std::size_t j = 0; j < H; ++j) row[j] -= learning_rate * g[j];
  }
  for (std::size_t i = 0; i < head.b1.size(); ++i) head.b1[i] -= learning_rate * grad.b1[i];
  for (std::size_t i = 0; i < head.w2.size(); ++i) head.w2[i] -= learning_rate * grad.w2[i];
  for (std::size_t i = 0; i < head.b2.size(); ++i) head.b2[i] -= learning_rate * grad.b2[i];
}

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

std::string_view loss_name(LossKind loss) {
  return loss == LossKind::CrossEntropy ? "cross_entropy" : "weighted_cross_entropy";
}

LossKind loss_from_name(std::string_view name) {
  if (name == "cross_entropy" || name == "ce") return LossKind::CrossEntropy;
  if (name == "weighted_cross_entropy" || name == "weighted")
    return LossKind::WeightedCrossEntropy;
  throw ArgumentError("unknown loss '" + std::string(name) +
                      "' (expected cross_entropy or weighted_cross_entropy)");
}

TrainingConfig TrainingConfig::offenseval_preset() {
  TrainingConfig c;
  c.learning_rate = 5e-5;
  c.batch_size = 32;
  c.epochs = 2;
  return c;
}

TrainingConfig TrainingConfig::role_preset() {
  TrainingConfig c;
  c.learning_rate = 2e-5;
  c.batch_size = 8;
  c.epochs = 2;
  return c;
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigurationError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigurationError("batch_size must be positive");
  if (epochs == 0) throw ConfigurationError("epochs must be positive");
  if (hidden == 0) throw ConfigurationError("hidden width must be positive");
  if (loss == LossKind::CrossEntropy && !class_weights.empty())
    throw ConfigurationError("class_weights are only valid with weighted cross-entropy");
  for (const auto& [label, w] : class_weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ConfigurationError("class weight for '" + label + "' must be positive");
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"loss", std::string(loss_name(loss))},
          {"class_weights", class_weights},
          {"hidden", hidden},
          {"init", init == InitScheme::Random ? "random" : "zeros"},
          {"fine_tune_encoder", fine_tune_encoder},
          {"seed", seed}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.loss = loss_from_name(j.value("loss", std::string(loss_name(c.loss))));
  c.class_weights = j.value("class_weights", c.class_weights);
  c.hidden = j.value("hidden", c.hidden);
  const auto init = j.value("init", std::string("random"));
  if (init != "random" && init != "zeros")
    throw ConfigurationError("init must be 'random' or 'zeros'");
  c.init = init == "random" ? InitScheme::Random : InitScheme::Zeros;
  c.fine_tune_encoder = j.value("fine_tune_encoder", c.fine_tune_encoder);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

void EncodedDataset::add(Vector x, std::size_t target) {
  if (target >= labels.size()) throw ArgumentError("target outside the label set");
  features.push_back(std::move(x));
  targets.push_back(target);
}

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> indices) const {
  EncodedDataset out;
  out.labels = labels;
  out.features.reserve(indices.size());
  out.targets.reserve(indices.size());
  for (auto i : indices) {
    out.features.push_back(features.at(i));
    out.targets.push_back(targets.at(i));
  }
  return out;
}

std::map<std::string, double> inverse_frequency_weights(const EncodedDataset& data) {
  std::vector<double> counts(data.labels.size(), 0.0);
  for (auto t : data.targets) counts[t] += 1.0;
  std::vector<double> inv;
  for (double c : counts) inv.push_back(c > 0.0 ? 1.0 / c : 0.0);
  double mean = 0.0;
  std::size_t present = 0;
  for (double v : inv)
    if (v > 0.0) {
      mean += v;
      ++present;
    }
  std::map<std::string, double> out;
  if (present == 0) return out;
  mean /= static_cast<double>(present);
  for (std::size_t c = 0; c < data.labels.size(); ++c)
    if (inv[c] > 0.0) out[data.labels[c]] = inv[c] / mean;
  return out;
}

// ---------------------------------------------------------------------------
// Trained classifier
// ---------------------------------------------------------------------------

TrainedClassifier::TrainedClassifier(std::shared_ptr<const EncoderBackend> backend,
                                     ClassifierHead head, std::vector<std::string> labels,
                                     TrainingConfig config, std::vector<double> step_loss,
                                     std::size_t steps_per_epoch)
    : backend_(std::move(backend)),
      head_(std::move(head)),
      labels_(std::move(labels)),
      config_(std::move(config)),
      step_loss_(std::move(step_loss)),
      steps_per_epoch_(steps_per_epoch) {
  if (!backend_) throw ConfigurationError("classifier without an encoder backend");
  if (labels_.size() != head_.classes)
    throw ConfigurationError("label set size does not match the head's class count");
  if (backend_->dimension() != head_.input_dim)
    throw ConfigurationError("encoder dimension does not match the head's input");
}

std::vector<double> TrainedClassifier::epoch_loss() const {
  std::vector<double> out;
  if (steps_per_epoch_ == 0) return out;
  for (std::size_t s = 0; s < step_loss_.size(); s += steps_per_epoch_) {
    const std::size_t e = std::min(step_loss_.size(), s + steps_per_epoch_);
    out.push_back(std::accumulate(step_loss_.begin() + static_cast<std::ptrdiff_t>(s),
                                  step_loss_.begin() + static_cast<std::ptrdiff_t>(e), 0.0) /
                  static_cast<double>(e - s));
  }
  return out;
}

Vector TrainedClassifier::predict_proba_features(std::span<const double> features) const {
  return head_.proba(features);
}

Vector TrainedClassifier::predict_proba(const TokenSequence& tokens) const {
  return predict_proba_features(backend_->encode(tokens));
}

std::size_t TrainedClassifier::predict_index(const TokenSequence& tokens) const {
  return argmax(predict_proba(tokens));
}

const std::string& TrainedClassifier::predict_label(const TokenSequence& tokens) const {
  return labels_[predict_index(tokens)];
}

nlohmann::json TrainedClassifier::to_json() const {
  return {{"format", "cyberroles-classifier"},
          {"version", kCheckpointVersion},
          {"backend", backend_->descriptor()},
          {"labels", labels_},
          {"config", config_.to_json()},
          {"head",
           {{"input_dim", head_.input_dim},
            {"hidden", head_.hidden},
            {"classes", head_.classes},
            {"w1", head_.w1},
            {"b1", head_.b1},
            {"w2", head_.w2},
            {"b2", head_.b2}}},
          {"training", {{"steps_per_epoch", steps_per_epoch_}, {"step_loss", step_loss_}}}};
}

TrainedClassifier TrainedClassifier::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "cyberroles-classifier")
      throw ParseError("not a classifier checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw ParseError("unsupported checkpoint version " + std::to_string(version));
    const auto& h = j.at("head");
    ClassifierHead head;
    head.input_dim = h.at("input_dim").get<std::size_t>();
    head.hidden = h.at("hidden").get<std::size_t>();
    head.classes = h.at("classes").get<std::size_t>();
    head.w1 = h.at("w1").get<std::vector<double>>();
    head.b1 = h.at("b1").get<std::vector<double>>();
    head.w2 = h.at("w2").get<std::vector<double>>();
    head.b2 = h.at("b2").get<std::vector<double>>();
    if (head.w1.size() != head.input_dim * head.hidden || head.b1.size() != head.hidden ||
        head.w2.size() != head.hidden * head.classes || head.b2.size() != head.classes)
      throw ParseError("checkpoint weight shapes are inconsistent");
    const auto& tr = j.value("training", nlohmann::json::object());
    return TrainedClassifier(make_backend(j.at("backend")), std::move(head),
                             j.at("labels").get<std::vector<std::string>>(),
                             TrainingConfig::from_json(j.at("config")),
                             tr.value("step_loss", std::vector<double>{}),
                             tr.value("steps_per_epoch", std::size_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad classifier checkpoint: ") + e.what());
  }
}

void TrainedClassifier::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write checkpoint '" + path + "'");
  out << to_json().dump() << '\n';
}

TrainedClassifier TrainedClassifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open checkpoint '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

TrainedClassifier fit_classifier(std::shared_ptr<const EncoderBackend> backend,
                                 const EncodedDataset& data, const TrainingConfig& config,
                                 BatchSampler* sampler) {
  config.validate();
  if (!backend) throw ConfigurationError("fit_classifier needs an encoder backend");
  if (config.fine_tune_encoder && !backend->supports_fine_tuning())
    throw ConfigurationError("encoder '" + backend->name() + "' cannot be fine-tuned");
  if (data.labels.size() < 2) throw ConfigurationError("need at least two labels");

  std::vector<std::size_t> counts(data.labels.size(), 0);
  for (auto t : data.targets) {
    if (t >= counts.size()) throw ConfigurationError("target outside the label set");
    ++counts[t];
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      throw ConfigurationError("label '" + data.labels[c] + "' has no training examples");

  std::vector<SparseVector> xs;
  xs.reserve(data.size());
  for (const auto& f : data.features) {
    if (f.size() != backend->dimension())
      throw ConfigurationError("feature dimension " + std::to_string(f.size()) +
                               " does not match encoder '" + backend->name() + "' (" +
                               std::to_string(backend->dimension()) + ")");
    xs.push_back(SparseVector::from_dense(f));
  }

  std::vector<double> label_weight(data.labels.size(), 1.0);
  if (config.loss == LossKind::WeightedCrossEntropy) {
    auto weights = config.class_weights.empty() ? inverse_frequency_weights(data)
                                                : config.class_weights;
    for (std::size_t c = 0; c < data.labels.size(); ++c) {
      auto it = weights.find(data.labels[c]);
      if (it == weights.end())
        throw ConfigurationError("no class weight for label '" + data.labels[c] + "'");
      label_weight[c] = it->second;
    }
  }

  ClassifierHead head =
      config.init == InitScheme::Zeros
          ? ClassifierHead::zeros(backend->dimension(), config.hidden, data.labels.size())
          : ClassifierHead::random(backend->dimension(), config.hidden, data.labels.size(),
                                   config.seed);
  HeadGradient grad(head);

  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  Rng rng = make_rng(config.seed, 12);
  std::vector<std::size_t> order(n);
  std::vector<double> step_loss;
  step_loss.reserve(steps_per_epoch * config.epochs);

  std::vector<const SparseVector*> bx;
  std::vector<std::size_t> by;
  std::vector<double> bw;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (!sampler) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      std::vector<std::size_t> batch;
      if (sampler) {
        batch = sampler->next_batch(config.batch_size);
      } else {
        const std::size_t b = s * config.batch_size;
        batch.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + config.batch_size)));
      }
      bx.clear();
      by.clear();
      bw.clear();
      for (auto i : batch) {
        if (i >= n) throw ConfigurationError("sampler returned an index outside the data");
        bx.push_back(&xs[i]);
        by.push_back(data.targets[i]);
        bw.push_back(label_weight[data.targets[i]]);
      }
      grad.clear();
      const double loss = batch_loss(head, bx, by, bw, &grad);
      if (!std::isfinite(loss)) throw TrainingDivergedError(step, loss);
      sgd_step(head, grad, config.learning_rate);
      step_loss.push_back(loss);
    }
  }
  return TrainedClassifier(std::move(backend), std::move(head), data.labels, config,
                           std::move(step_loss), steps_per_epoch);
}

}  // namespace cyberroles
