#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cyberroles/preprocess.hpp"
#include "cyberroles/sampling.hpp"
#include "json.hpp"

namespace cyberroles {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Encoder backends
// ---------------------------------------------------------------------------

/// Maps a marker-delimited token sequence to a fixed-size feature vector.
/// Implementations must be deterministic and thread-safe for encode().
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual Vector encode(const TokenSequence& tokens) const = 0;

  /// The tokenizer whose output this backend expects.
  virtual std::shared_ptr<const Tokenizer> tokenizer() const;

  /// Whether fit_classifier may update the encoder itself. None of the
  /// bundled backends can; they are always used frozen.
  virtual bool supports_fine_tuning() const { return false; }

  /// Everything needed to rebuild the backend with make_backend().
  virtual nlohmann::json descriptor() const = 0;
};

/// Hashed bag of unigrams and bigrams over the non-marker tokens, counted
/// into `dim` buckets and L2-normalized. Empty input gives the zero vector.
/// Throws ArgumentError for dim < 16.
Vector encode_baseline(const TokenSequence& tokens, std::size_t dim, std::uint64_t seed);

class HashedNgramEncoder final : public EncoderBackend {
 public:
  static constexpr std::size_t kDefaultDimension = 1024;

  explicit HashedNgramEncoder(std::size_t dim = kDefaultDimension, std::uint64_t seed = 0);

  std::string name() const override { return "baseline"; }
  std::size_t dimension() const override { return dim_; }
  Vector encode(const TokenSequence& tokens) const override;
  nlohmann::json descriptor() const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Adapter for contextual encoders run out of process: a JSON-lines file of
/// {"text": "<tokens joined by single spaces>", "vector": [...]} produced
/// by an external model (for example a BERT [CLS] embedding per post).
/// encode() looks the sequence up by its space-joined non-marker tokens and
/// throws EncodingError when it is missing.
class PrecomputedEncoder final : public EncoderBackend {
 public:
  PrecomputedEncoder(std::string name, const std::string& path);

  std::string name() const override { return "contextual:" + name_; }
  std::size_t dimension() const override { return dim_; }
  Vector encode(const TokenSequence& tokens) const override;
  nlohmann::json descriptor() const override;

  std::size_t size() const { return table_.size(); }

 private:
  std::string name_;
  std::string path_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vector> table_;
};

/// Builds a backend from a descriptor written by EncoderBackend::descriptor().
std::shared_ptr<const EncoderBackend> make_backend(const nlohmann::json& descriptor);

/// Parses the command-line form: "baseline", "baseline:<dim>", or
/// "contextual:<embeddings.jsonl>".
std::shared_ptr<const EncoderBackend> backend_from_spec(const std::string& spec,
                                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Classifier head
// ---------------------------------------------------------------------------

/// Sparse view of a feature vector; training works on these.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  static SparseVector from_dense(std::span<const double> dense);
};

/// tanh hidden layer followed by a linear softmax layer.
///
/// Weight layout is row-major by input: w1[d * hidden + h], w2[h * classes + c].
struct ClassifierHead {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;
  std::vector<double> w1, b1, w2, b2;

  static ClassifierHead zeros(std::size_t input_dim, std::size_t hidden, std::size_t classes);
  /// Uniform Glorot initialization; biases start at zero.
  static ClassifierHead random(std::size_t input_dim, std::size_t hidden,
                               std::size_t classes, std::uint64_t seed);

  Vector logits(const SparseVector& x) const;
  Vector logits(std::span<const double> x) const;
  Vector proba(std::span<const double> x) const;

  std::size_t parameter_count() const;
  /// Views over w1, b1, w2, b2, in that order.
  std::array<std::span<double>, 4> blocks();
};

Vector softmax(std::span<const double> logits);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Gradient buffers shaped like a head. Only the w1 rows listed in
/// touched_rows can be nonzero.
struct HeadGradient {
  std::vector<double> w1, b1, w2, b2;
  std::vector<std::uint32_t> touched_rows;
  std::vector<char> row_flag;

  explicit HeadGradient(const ClassifierHead& head);
  void clear();
};

/// Mean (weighted) cross-entropy of a batch. `example_weights` may be empty
/// (all ones); otherwise the loss is sum(w_i * nll_i) / sum(w_i). When grad
/// is non-null the gradient of that loss is accumulated into it.
double batch_loss(const ClassifierHead& head, std::span<const SparseVector* const> xs,
                  std::span<const std::size_t> targets,
                  std::span<const double> example_weights, HeadGradient* grad);

/// head -= learning_rate * grad, touching only the listed w1 rows.
void sgd_step(ClassifierHead& head, const HeadGradient& grad, double learning_rate);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class LossKind { CrossEntropy, WeightedCrossEntropy };
enum class InitScheme { Random, Zeros };

std::string_view loss_name(LossKind loss);
LossKind loss_from_name(std::string_view name);

struct TrainingConfig {
  double learning_rate = 0.2;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  LossKind loss = LossKind::CrossEntropy;
  /// Label -> weight. Left empty with WeightedCrossEntropy, the weights
  /// default to inverse class frequency normalized to mean 1.
  std::map<std::string, double> class_weights;
  std::size_t hidden = 128;
  InitScheme init = InitScheme::Random;
  bool fine_tune_encoder = false;
  std::uint64_t seed = 0;

  /// Single classifiers of the offensive-language voting ensemble:
  /// learning rate 5e-5, batch 32, 2 epochs.
  static TrainingConfig offenseval_preset();
  /// Role models: learning rate 2e-5, batch 8.
  static TrainingConfig role_preset();

  /// Throws ConfigurationError.
  void validate() const;

  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

/// Encoded examples with integer targets into `labels`.
struct EncodedDataset {
  std::vector<std::string> labels;
  std::vector<Vector> features;
  std::vector<std::size_t> targets;

  std::size_t size() const { return targets.size(); }
  void add(Vector x, std::size_t target);
  /// Rows at the given indices (repeats allowed).
  EncodedDataset subset(std::span<const std::size_t> indices) const;
};

/// label -> count / mean count, inverted: weight_c = mean(count) / count_c.
std::map<std::string, double> inverse_frequency_weights(const EncodedDataset& data);

class TrainedClassifier {
 public:
  TrainedClassifier(std::shared_ptr<const EncoderBackend> backend, ClassifierHead head,
                    std::vector<std::string> labels, TrainingConfig config,
                    std::vector<double> step_loss = {}, std::size_t steps_per_epoch = 0);

  const EncoderBackend& backend() const { return *backend_; }
  std::shared_ptr<const EncoderBackend> backend_ptr() const { return backend_; }
  const ClassifierHead& head() const { return head_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const TrainingConfig& config() const { return config_; }
  const std::vector<double>& step_loss() const { return step_loss_; }
  std::vector<double> epoch_loss() const;

  Vector predict_proba(const TokenSequence& tokens) const;
  Vector predict_proba_features(std::span<const double> features) const;
  std::size_t predict_index(const TokenSequence& tokens) const;
  const std::string& predict_label(const TokenSequence& tokens) const;

  /// Self-describing checkpoint with a mandatory version field.
  nlohmann::json to_json() const;
  static TrainedClassifier from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static TrainedClassifier load(const std::string& path);

  static constexpr int kCheckpointVersion = 1;

 private:
  std::shared_ptr<const EncoderBackend> backend_;
  ClassifierHead head_;
  std::vector<std::string> labels_;
  TrainingConfig config_;
  std::vector<double> step_loss_;
  std::size_t steps_per_epoch_ = 0;
};

/// Mini-batch SGD on the head. Runs epochs x ceil(N / batch_size) steps;
/// batches come from `sampler` when given and from a seeded per-epoch
/// shuffle otherwise.
///
/// Throws ConfigurationError when a label has no examples, the feature
/// dimension does not match the backend, or fine-tuning is requested from a
/// backend that cannot do it; TrainingDivergedError on a non-finite loss.
TrainedClassifier fit_classifier(std::shared_ptr<const EncoderBackend> backend,
                                 const EncodedDataset& data, const TrainingConfig& config,
                                 BatchSampler* sampler = nullptr);

}  // namespace cyberroles
