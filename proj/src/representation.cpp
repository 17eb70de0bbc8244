#include "cogrl/representation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <random>
#include <set>

#include "cogrl/error.hpp"
#include "cogrl/parallel.hpp"

namespace cogrl {

void ArchitectureSpec::validate() const {
  if (rep_size == 0) throw ConfigError("rep_size must be positive");
  if (n_classes < 2) throw ConfigError("need at least 2 answer classes");
  if (variant == "image_cnn") {
    if (in_shape.size() != 3) throw DimensionError("image input shape must be channels x H x W");
    if (filters == 0 || kernel == 0 || stride == 0) throw ConfigError("filters, kernel and stride must be positive");
    if (kernel > in_shape[1] || kernel > in_shape[2]) {
      throw DimensionError("kernel " + std::to_string(kernel) + " larger than image " + std::to_string(in_shape[1]) + "x" + std::to_string(in_shape[2]));
    }
  } else if (variant == "cloze_lstm") {
    if (embedding_dim == 0 || lstm_hidden == 0) throw ConfigError("embedding and hidden sizes must be positive");
    if (combine_size != 2 * lstm_hidden) {
      throw ConfigError("combine_size " + std::to_string(combine_size) + " must equal 2 x lstm_hidden (" +
                        std::to_string(2 * lstm_hidden) + ")");
    }
  } else {
    throw ConfigError("unknown architecture variant '" + variant + "'");
  }
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

namespace {
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
}  // namespace

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  std::set<unsigned char> seen;
  for (const auto& t : texts) {
    for (char c : t) seen.insert(static_cast<unsigned char>(lower(c)));
  }
  Vocabulary v;
  for (auto c : seen) v.chars_.push_back(static_cast<char>(c));
  return v;
}

std::size_t Vocabulary::id(char c) const {
  const char l = lower(c);
  const auto it = std::lower_bound(chars_.begin(), chars_.end(), l,
                                   [](char a, char b) { return static_cast<unsigned char>(a) < static_cast<unsigned char>(b); });
  if (it == chars_.end() || *it != l) return kUnknown;
  return static_cast<std::size_t>(it - chars_.begin()) + 1;
}

std::vector<std::size_t> Vocabulary::encode(const std::string& text) const {
  std::vector<std::size_t> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(id(c));
  return ids;
}

std::string Vocabulary::serialize() const {
  std::string hex;
  char buf[3];
  for (char c : chars_) {
    std::snprintf(buf, sizeof buf, "%02x", static_cast<unsigned char>(c));
    hex += buf;
  }
  return hex;
}

Vocabulary Vocabulary::deserialize(const std::string& hex) {
  if (hex.size() % 2 != 0) throw InputError("vocabulary hex has odd length");
  Vocabulary v;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    unsigned value = 0;
    if (std::sscanf(hex.c_str() + i, "%2x", &value) != 1) throw InputError("bad vocabulary hex");
    v.chars_.push_back(static_cast<char>(value));
  }
  if (!std::is_sorted(v.chars_.begin(), v.chars_.end(), [](char a, char b) {
        return static_cast<unsigned char>(a) < static_cast<unsigned char>(b);
      })) {
    throw InputError("vocabulary characters are not sorted");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

std::unique_ptr<ImageCnn> build_image_cnn(const ArchitectureSpec& spec, std::uint64_t seed) {
  if (spec.variant != "image_cnn") throw ConfigError("build_image_cnn needs variant image_cnn");
  spec.validate();
  Rng rng(seed);
  ConvLayer conv = ConvLayer::create(spec.in_shape[0], spec.filters, spec.kernel, spec.stride, rng);
  const std::size_t flat = shape_product(conv.output_shape(spec.in_shape));
  DenseLayer rep = DenseLayer::create(flat, spec.rep_size, Activation::kSigmoid, rng);
  DenseLayer out = DenseLayer::create(spec.rep_size, spec.n_classes, Activation::kIdentity, rng);
  return std::make_unique<ImageCnn>(spec.in_shape, std::move(conv), std::move(rep), std::move(out));
}

std::unique_ptr<ClozeLstm> build_cloze_lstm(const ArchitectureSpec& spec, const Vocabulary& vocab,
                                            std::uint64_t seed) {
  if (spec.variant != "cloze_lstm") throw ConfigError("build_cloze_lstm needs variant cloze_lstm");
  spec.validate();
  if (vocab.chars().empty()) throw ConfigError("empty vocabulary");
  Rng rng(seed);
  EmbeddingTable embedding = EmbeddingTable::create(vocab.size(), spec.embedding_dim, rng);
  LSTMCell fwd = LSTMCell::create(spec.embedding_dim, spec.lstm_hidden, rng);
  LSTMCell bwd = LSTMCell::create(spec.embedding_dim, spec.lstm_hidden, rng);
  DenseLayer combine = DenseLayer::create(2 * spec.lstm_hidden, spec.combine_size, Activation::kTanh, rng);
  DenseLayer rep = DenseLayer::create(spec.combine_size, spec.rep_size, Activation::kSigmoid, rng);
  DenseLayer out = DenseLayer::create(spec.rep_size, spec.n_classes, Activation::kIdentity, rng);
  return std::make_unique<ClozeLstm>(std::move(embedding), std::move(fwd), std::move(bwd), std::move(combine),
                                     std::move(rep), std::move(out));
}

ArchitectureSpec default_architecture(const DatasetBundle& bundle) {
  if (bundle.problems.empty()) throw InputError("dataset has no problems");
  ArchitectureSpec spec;
  spec.n_classes = bundle.answer_labels.size();
  if (const auto* image = std::get_if<Tensor>(&bundle.problems.front().content)) {
    spec.variant = "image_cnn";
    spec.in_shape = image->shape();
  } else {
    spec.variant = "cloze_lstm";
  }
  return spec;
}

std::vector<Sample> to_samples(const std::vector<ProblemInstance>& problems, const Vocabulary* vocab) {
  std::vector<Sample> samples;
  samples.reserve(problems.size());
  for (const auto& p : problems) {
    if (const auto* image = std::get_if<Tensor>(&p.content)) {
      samples.push_back(Sample{*image, p.answer});
    } else {
      if (!vocab) throw ConfigError("cloze problems need a vocabulary");
      const auto& cloze = std::get<ClozeContent>(p.content);
      samples.push_back(Sample{ClozeTokens{vocab->encode(cloze.prefix()), vocab->encode(cloze.suffix())}, p.answer});
    }
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train_model(Network& net, const std::vector<Sample>& samples, const SGDConfig& config) {
  config.validate();
  if (samples.size() < 2) throw InputError("training needs at least 2 problems");
  std::set<std::size_t> labels;
  for (const auto& s : samples) labels.insert(s.label);
  if (labels.size() < 2) throw InputError("training needs at least 2 distinct answer classes");

  TrainResult result;
  const double initial = batch_loss(net, samples, config.jobs);
  if (!std::isfinite(initial)) throw NumericError("non-finite loss before training");
  result.loss_history.push_back(initial);
  if (initial < config.target_loss) {
    result.reached_target = true;
    return result;
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);
      try {
        const Gradients grads = backprop_grads(net, batch, config.jobs);
        if (!std::isfinite(grads.mean_loss)) throw NumericError("non-finite loss");
        sgd_update(net, *grads.values, config.learning_rate);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + ": " +
                           e.what());
      }
    }
    const double loss = batch_loss(net, samples, config.jobs);
    if (!std::isfinite(loss)) throw NumericError("epoch " + std::to_string(epoch) + ": non-finite loss");
    result.loss_history.push_back(loss);
    result.epochs = epoch;
    if (loss < config.target_loss) {
      result.reached_target = true;
      break;
    }
  }
  return result;
}

double training_accuracy(const Network& net, const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const auto logits = net.forward(s.input).logits;
    const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// Representations and thresholding
// ---------------------------------------------------------------------------

RepresentationMatrix extract_representations(const Network& net, const std::vector<std::string>& item_ids,
                                             const std::vector<Sample>& samples, std::size_t jobs) {
  const std::size_t width = net.representation_size();
  if (width == 0) throw ConfigError("architecture '" + net.architecture() + "' has no pre-output layer");
  if (item_ids.size() != samples.size()) throw DimensionError("item ids and samples differ in length");
  if (samples.empty()) throw InputError("no problems to extract");
  RepresentationMatrix reps;
  reps.item_ids = item_ids;
  reps.values = Tensor({samples.size(), width});
  parallel_for(samples.size(), jobs, [&](std::size_t p) {
    const auto row = net.forward(samples[p].input).representation;
    for (std::size_t k = 0; k < width; ++k) {
      reps.values.at(p, k) = std::clamp(row[k], std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
    }
  });
  return reps;
}

std::string rep_column_name(std::size_t k, std::size_t count) {
  std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::string digits = std::to_string(k);
  if (digits.size() < std::max<std::size_t>(width, 2)) digits.insert(0, std::max<std::size_t>(width, 2) - digits.size(), '0');
  return "rep_" + digits;
}

QMatrix threshold_raw(const RepresentationMatrix& reps, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("threshold tau must lie in (0, 1)");
  const std::size_t n = reps.values.dim(0), width = reps.values.dim(1);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < width; ++k) names.push_back(rep_column_name(k, width));
  std::vector<std::uint8_t> cells(n * width);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t k = 0; k < width; ++k) cells[p * width + k] = reps.values.at(p, k) > tau ? 1 : 0;
  }
  return QMatrix(reps.item_ids, names, cells);
}

SanitizedQMatrix threshold_qmatrix(const RepresentationMatrix& reps, double tau) {
  return sanitize_qmatrix(threshold_raw(reps, tau));
}

std::string representations_tsv(const RepresentationMatrix& reps) {
  const std::size_t n = reps.values.dim(0), width = reps.values.dim(1);
  std::string out = "item_id";
  for (std::size_t k = 0; k < width; ++k) out += "\t" + rep_column_name(k, width);
  out += '\n';
  for (std::size_t p = 0; p < n; ++p) {
    out += reps.item_ids[p];
    for (std::size_t k = 0; k < width; ++k) out += "\t" + format_exact(reps.values.at(p, k));
    out += '\n';
  }
  return out;
}

RepresentationMatrix read_representations(const TsvTable& table) {
  if (table.header.size() < 2 || table.header.front() != "item_id") {
    throw InputError(table.source + ": representation TSV needs item_id followed by value columns");
  }
  if (table.rows.empty()) throw InputError(table.source + ": no representation rows");
  const std::size_t width = table.header.size() - 1;
  RepresentationMatrix reps;
  reps.values = Tensor({table.rows.size(), width});
  std::set<std::string> seen;
  for (std::size_t p = 0; p < table.rows.size(); ++p) {
    const auto& row = table.rows[p];
    if (!seen.insert(row.fields[0]).second) {
      throw InputError(table.source + ":" + std::to_string(row.line) + ": duplicate item '" + row.fields[0] + "'");
    }
    reps.item_ids.push_back(row.fields[0]);
    for (std::size_t k = 0; k < width; ++k) {
      const std::string& field = row.fields[k + 1];
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (field.empty() || *end != '\0' || !std::isfinite(v)) {
        throw InputError(table.source + ":" + std::to_string(row.line) + ": bad value '" + field + "'");
      }
      reps.values.at(p, k) = v;
    }
  }
  return reps;
}

RepresentationMatrix read_representations(const std::filesystem::path& path) {
  return read_representations(read_tsv(path));
}

}  // namespace cogrl
