#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cogrl/network.hpp"
#include "cogrl/optim.hpp"
#include "cogrl/problems.hpp"
#include "cogrl/qmatrix.hpp"
#include "cogrl/tensor.hpp"

namespace cogrl {

struct ArchitectureSpec {
  std::string variant = "image_cnn";  // or "cloze_lstm"
  // image_cnn
  std::vector<std::size_t> in_shape;  // channels x H x W
  std::size_t filters = 10;
  std::size_t kernel = 4;
  std::size_t stride = 2;
  // cloze_lstm
  std::size_t embedding_dim = 32;
  std::size_t lstm_hidden = 128;  // per direction
  std::size_t combine_size = 256;
  std::size_t rep_size = 50;
  std::size_t n_classes = 2;

  void validate() const;
};

// Lower-cased distinct characters of the training texts, ids 1..n in byte
// order; id 0 is reserved for characters never seen in training.
class Vocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;

  Vocabulary() = default;
  static Vocabulary build(const std::vector<std::string>& texts);
  // Inverse of serialize().
  static Vocabulary deserialize(const std::string& hex);

  std::size_t size() const { return chars_.size() + 1; }  // including unknown
  std::size_t id(char c) const;
  std::vector<std::size_t> encode(const std::string& text) const;
  const std::string& chars() const { return chars_; }
  // Hex of the sorted character bytes, safe for single-line metadata.
  std::string serialize() const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::string chars_;
};

// conv(filters, kernel, stride) -> flatten -> dense(rep_size, sigmoid) ->
// dense(n_classes, identity).
std::unique_ptr<ImageCnn> build_image_cnn(const ArchitectureSpec& spec, std::uint64_t seed);
// embedding -> forward/backward LSTMs -> dense(combine, tanh) ->
// dense(rep_size, sigmoid) -> dense(n_classes, identity).
std::unique_ptr<ClozeLstm> build_cloze_lstm(const ArchitectureSpec& spec, const Vocabulary& vocab,
                                            std::uint64_t seed);

// Architecture for a bundle: image_cnn for image problems (in_shape taken from
// the data), cloze_lstm for cloze problems; n_classes = answer label count.
ArchitectureSpec default_architecture(const DatasetBundle& bundle);

// Network inputs for problems. Cloze problems need the vocabulary.
std::vector<Sample> to_samples(const std::vector<ProblemInstance>& problems, const Vocabulary* vocab = nullptr);

struct TrainResult {
  // Mean loss over all problems: [0] before training, then after each epoch.
  std::vector<double> loss_history;
  std::size_t epochs = 0;
  bool reached_target = false;
};

// Minibatch SGD with a seeded shuffle every epoch; stops early once the
// full-data mean loss drops below config.target_loss. Needs >= 2 samples and
// >= 2 distinct labels (InputError). A non-finite loss raises NumericError
// naming the epoch and batch.
TrainResult train_model(Network& net, const std::vector<Sample>& samples, const SGDConfig& config);

// Fraction of samples whose arg-max logit equals the label.
double training_accuracy(const Network& net, const std::vector<Sample>& samples);

struct RepresentationMatrix {
  std::vector<std::string> item_ids;
  Tensor values;  // [items x rep_size], entries strictly inside (0, 1)
};

// Pre-output activations per problem, rows in input order. Rows are
// computed on up to `jobs` threads. A network without a pre-output layer is a
// ConfigError. Activations that round to exactly 0 or 1 in double precision
// are nudged to the nearest representable interior value.
RepresentationMatrix extract_representations(const Network& net, const std::vector<std::string>& item_ids,
                                             const std::vector<Sample>& samples, std::size_t jobs = 1);

// q[p][k] = reps[p][k] > tau, columns rep_00.., then sanitized.
// tau outside (0, 1) is a ConfigError.
SanitizedQMatrix threshold_qmatrix(const RepresentationMatrix& reps, double tau = 0.95);
// The raw thresholded matrix, before sanitation.
QMatrix threshold_raw(const RepresentationMatrix& reps, double tau);
std::string rep_column_name(std::size_t k, std::size_t count);

std::string representations_tsv(const RepresentationMatrix& reps);
RepresentationMatrix read_representations(const TsvTable& table);
RepresentationMatrix read_representations(const std::filesystem::path& path);

}  // namespace cogrl
