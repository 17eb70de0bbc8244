#include "cogrl/apprentice.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <random>
#include <set>

#include "cogrl/error.hpp"
#include "cogrl/parallel.hpp"

namespace cogrl {

namespace {

bool ends_with(const std::string& s, const char* tail) {
  const std::string t(tail);
  return s.size() >= t.size() && s.compare(s.size() - t.size(), t.size(), t) == 0;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

void check_binary(std::span<const std::uint8_t> values) {
  for (auto v : values) {
    if (v > 1) throw InputError("feature values must be 0 or 1");
  }
}

}  // namespace

const std::vector<std::string>& article_feature_names() {
  static const std::vector<std::string> names = {
      "next_word_starts_with_vowel", "next_word_ending_st_nd_rd_th", "contains_that_where_who",
      "next_word_already_mentioned", "next_word_ends_in_s",          "contains_but_comma"};
  return names;
}

std::vector<std::string> alphabetic_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

BinaryFeatureVector article_human_features(const ClozeContent& question) {
  const auto all = alphabetic_tokens(question.text);
  const auto before = alphabetic_tokens(question.prefix());
  const auto after = alphabetic_tokens(question.suffix());

  BinaryFeatureVector f;
  f.names = article_feature_names();
  f.values.assign(f.names.size(), 0);
  if (!after.empty()) {
    const std::string& next = after.front();
    f.values[0] = is_vowel(next.front());
    f.values[1] = ends_with(next, "st") || ends_with(next, "nd") || ends_with(next, "rd") || ends_with(next, "th");
    f.values[3] = std::find(before.begin(), before.end(), next) != before.end();
    f.values[4] = next.back() == 's';
  }
  for (const auto& t : all) {
    if (t == "that" || t == "where" || t == "who") f.values[2] = 1;
    if (t == "but") f.values[5] = 1;
  }
  if (question.text.find(',') != std::string::npos) f.values[5] = 1;
  return f;
}

// ---------------------------------------------------------------------------
// Decision tree
// ---------------------------------------------------------------------------

namespace {

struct Builder {
  std::span<const LabeledExample> examples;
  std::size_t n_features = 0;
  std::size_t n_labels = 0;
  std::vector<DecisionTree::Node>* nodes = nullptr;

  std::vector<std::size_t> counts(const std::vector<std::size_t>& subset) const {
    std::vector<std::size_t> c(n_labels, 0);
    for (auto i : subset) ++c[examples[i].label];
    return c;
  }

  // Sum over classes of n_c^2: weighted child Gini is
  // |S| - sum_children (sum_c n_c^2) / |child|, so the best split maximises
  // sum_children (sum_c n_c^2) / |child|. Compared exactly as fractions.
  static unsigned __int128 square_sum(const std::vector<std::size_t>& c) {
    unsigned __int128 s = 0;
    for (auto n : c) s += static_cast<unsigned __int128>(n) * n;
    return s;
  }

  std::size_t build(const std::vector<std::size_t>& subset) {
    const auto c = counts(subset);
    const std::size_t majority = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    const std::size_t id = nodes->size();
    nodes->push_back(DecisionTree::Node{-1, 0, 0, majority});
    if (c[majority] == subset.size()) return id;

    int best = -1;
    unsigned __int128 best_num = 0, best_den = 1;
    for (std::size_t f = 0; f < n_features; ++f) {
      std::vector<std::size_t> c0(n_labels, 0), c1(n_labels, 0);
      std::size_t n0 = 0, n1 = 0;
      for (auto i : subset) {
        if (examples[i].features[f]) {
          ++c1[examples[i].label];
          ++n1;
        } else {
          ++c0[examples[i].label];
          ++n0;
        }
      }
      if (n0 == 0 || n1 == 0) continue;
      // score = s0/n0 + s1/n1 = (s0*n1 + s1*n0) / (n0*n1)
      const unsigned __int128 num = square_sum(c0) * n1 + square_sum(c1) * n0;
      const unsigned __int128 den = static_cast<unsigned __int128>(n0) * n1;
      if (best < 0 || num * best_den > best_num * den) {
        best = static_cast<int>(f);
        best_num = num;
        best_den = den;
      }
    }
    if (best < 0) return id;  // identical feature vectors with mixed labels

    std::vector<std::size_t> zero, one;
    for (auto i : subset) (examples[i].features[best] ? one : zero).push_back(i);
    const std::size_t z = build(zero);
    const std::size_t o = build(one);
    auto& node = (*nodes)[id];
    node.feature = best;
    node.zero = z;
    node.one = o;
    return id;
  }
};

}  // namespace

DecisionTree DecisionTree::fit(std::vector<std::string> feature_names, std::span<const LabeledExample> examples) {
  if (examples.empty()) throw InputError("cannot fit a decision tree to no examples");
  std::size_t n_labels = 0;
  for (const auto& e : examples) {
    if (e.features.size() != feature_names.size()) {
      throw InputError("example has " + std::to_string(e.features.size()) + " features, expected " +
                       std::to_string(feature_names.size()));
    }
    check_binary(e.features);
    n_labels = std::max(n_labels, e.label + 1);
  }
  DecisionTree tree;
  tree.feature_names_ = std::move(feature_names);
  Builder b{examples, tree.feature_names_.size(), n_labels, &tree.nodes_};
  std::vector<std::size_t> all(examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  b.build(all);
  return tree;
}

DecisionTree fit_decision_tree(std::vector<std::string> feature_names, std::span<const LabeledExample> examples) {
  return DecisionTree::fit(std::move(feature_names), examples);
}

std::size_t DecisionTree::predict(std::span<const std::uint8_t> features) const {
  if (features.size() != feature_names_.size()) {
    throw InputError("tree expects " + std::to_string(feature_names_.size()) + " features, got " +
                     std::to_string(features.size()));
  }
  std::size_t at = 0;
  while (nodes_[at].feature >= 0) {
    at = features[static_cast<std::size_t>(nodes_[at].feature)] ? nodes_[at].one : nodes_[at].zero;
  }
  return nodes_[at].label;
}

std::size_t DecisionTree::predict(const BinaryFeatureVector& features) const {
  if (features.names != feature_names_) throw InputError("feature names differ from the tree's training set");
  return predict(std::span<const std::uint8_t>(features.values));
}

std::size_t DecisionTree::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [node, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes_[node].feature >= 0) {
      stack.push_back({nodes_[node].zero, d + 1});
      stack.push_back({nodes_[node].one, d + 1});
    }
  }
  return deepest;
}

// ---------------------------------------------------------------------------
// Simulated learners
// ---------------------------------------------------------------------------

std::vector<std::size_t> simulate_learner(const std::vector<std::string>& feature_names,
                                          std::span<const CurriculumStep> curriculum, std::size_t n_labels,
                                          const SimConfig& config) {
  if (n_labels == 0) throw ConfigError("simulated learner needs at least one answer label");
  if (config.refit_every == 0) throw ConfigError("refit_every must be positive");
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> guess(0, n_labels - 1);

  std::vector<LabeledExample> memory;
  std::optional<DecisionTree> tree;
  std::vector<std::size_t> attempts;
  attempts.reserve(curriculum.size());
  for (const auto& step : curriculum) {
    if (step.features.size() != feature_names.size()) {
      throw InputError("item '" + step.item_id + "' has " + std::to_string(step.features.size()) +
                       " features, expected " + std::to_string(feature_names.size()));
    }
    if (step.answer >= n_labels) throw InputError("item '" + step.item_id + "' answer out of range");
    attempts.push_back(tree ? tree->predict(std::span<const std::uint8_t>(step.features)) : guess(rng));
    memory.push_back(LabeledExample{step.features, step.answer});
    if (memory.size() % config.refit_every == 0) tree = DecisionTree::fit(feature_names, memory);
  }
  return attempts;
}

std::uint64_t student_seed(std::uint64_t base, std::size_t index) {
  // splitmix64 finaliser over base + golden-ratio stride
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ItemFeatures features_from_qmatrix(const QMatrix& q, const DatasetBundle& bundle) {
  ItemFeatures out;
  out.names = q.kc_names();
  out.n_labels = bundle.answer_labels.size();
  for (const auto& p : bundle.problems) {
    const std::size_t row = q.require_item(p.item_id);
    std::vector<std::uint8_t> bits(q.cols());
    for (std::size_t k = 0; k < q.cols(); ++k) bits[k] = q.at(row, k);
    out.by_item[p.item_id] = std::move(bits);
    out.answers[p.item_id] = p.answer;
  }
  return out;
}

ItemFeatures human_article_features(const DatasetBundle& bundle) {
  ItemFeatures out;
  out.names = article_feature_names();
  out.n_labels = bundle.answer_labels.size();
  for (const auto& p : bundle.problems) {
    const auto* cloze = std::get_if<ClozeContent>(&p.content);
    if (!cloze) throw InputError("item '" + p.item_id + "' is not a cloze question");
    out.by_item[p.item_id] = article_human_features(*cloze).values;
    out.answers[p.item_id] = p.answer;
  }
  return out;
}

TransactionLog simulate_log(const TransactionLog& original, const ItemFeatures& features, const SimConfig& sim,
                            std::size_t jobs) {
  if (original.empty()) throw InputError("cannot simulate an empty log");
  const auto students = original.students();
  const auto sequences = original.student_sequences();
  std::vector<std::vector<Transaction>> per_student(students.size());

  parallel_for(students.size(), jobs, [&](std::size_t s) {
    std::vector<CurriculumStep> curriculum;
    curriculum.reserve(sequences[s].size());
    for (auto r : sequences[s]) {
      const auto& item = original.rows[r].item_id;
      const auto f = features.by_item.find(item);
      const auto a = features.answers.find(item);
      if (f == features.by_item.end() || a == features.answers.end()) {
        throw InputError("no features for item '" + item + "'");
      }
      curriculum.push_back(CurriculumStep{item, f->second, a->second});
    }
    SimConfig cfg = sim;
    cfg.seed = student_seed(sim.seed, s);
    const auto attempts = simulate_learner(features.names, curriculum, features.n_labels, cfg);
    auto& out = per_student[s];
    for (std::size_t i = 0; i < curriculum.size(); ++i) {
      const auto& src = original.rows[sequences[s][i]];
      out.push_back(Transaction{src.student_id, src.item_id, attempts[i] == curriculum[i].answer ? 1 : 0, src.order});
    }
  });

  TransactionLog pooled;
  for (auto& rows : per_student) {
    for (auto& t : rows) pooled.rows.push_back(std::move(t));
  }
  return pooled;
}

StudyResult simulate_and_estimate(const TransactionLog& original, const ItemFeatures& features,
                                  const QMatrix& q_eval, const FitConfig& fit, const SimConfig& sim,
                                  std::size_t jobs) {
  StudyResult result;
  result.simulated = simulate_log(original, features, sim, jobs);
  result.simulated_fit = afm_fit(result.simulated, q_eval, fit);
  result.original_fit = afm_fit(original, q_eval, fit);
  result.report = param_report(result.original_fit.params, q_eval, &result.simulated_fit.params);
  return result;
}

std::string study_report_tsv(const ParamReport& report) {
  return param_report_tsv(report, "original", "simulated");
}

}  // namespace cogrl
