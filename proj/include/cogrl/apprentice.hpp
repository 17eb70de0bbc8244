#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cogrl/afm.hpp"
#include "cogrl/problems.hpp"
#include "cogrl/qmatrix.hpp"
#include "cogrl/transactions.hpp"

namespace cogrl {

struct BinaryFeatureVector {
  std::vector<std::string> names;
  std::vector<std::uint8_t> values;  // each 0 or 1
};

// next_word_starts_with_vowel, next_word_ending_st_nd_rd_th,
// contains_that_where_who, next_word_already_mentioned, next_word_ends_in_s,
// contains_but_comma
const std::vector<std::string>& article_feature_names();

// Lower-cased maximal alphabetic runs.
std::vector<std::string> alphabetic_tokens(const std::string& text);

// The six expert article-selection predicates. The "next word" is the first
// token after the blank; with no such token its features are 0.
BinaryFeatureVector article_human_features(const ClozeContent& question);

struct LabeledExample {
  std::vector<std::uint8_t> features;
  std::size_t label = 0;
};

// Binary-feature classification tree grown CART-style on Gini impurity.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;       // -1 for a leaf
    std::size_t zero = 0;   // child for feature value 0
    std::size_t one = 0;    // child for feature value 1
    std::size_t label = 0;  // majority label of the node's training subset
  };

  // Splits on the feature with the lowest weighted child Gini among features
  // that leave both children non-empty (ties: lowest feature index). Stops
  // when a node is pure or no feature separates it. Leaf label = majority,
  // ties to the lowest class index. Throws InputError on an empty set.
  static DecisionTree fit(std::vector<std::string> feature_names, std::span<const LabeledExample> examples);

  std::size_t predict(std::span<const std::uint8_t> features) const;
  // Checks the feature names against the training schema.
  std::size_t predict(const BinaryFeatureVector& features) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t depth() const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<Node> nodes_;
};

DecisionTree fit_decision_tree(std::vector<std::string> feature_names, std::span<const LabeledExample> examples);

struct SimConfig {
  std::uint64_t seed = 0;
  std::size_t refit_every = 1;
};

struct CurriculumStep {
  std::string item_id;
  std::vector<std::uint8_t> features;
  std::size_t answer = 0;
};

// One simulated student. Before the first fit, attempts are uniform seeded
// guesses over `n_labels`. After each problem the (features, answer) pair is
// stored and the tree is rebuilt every `refit_every` examples. Returns the
// first-attempt label per step.
std::vector<std::size_t> simulate_learner(const std::vector<std::string>& feature_names,
                                          std::span<const CurriculumStep> curriculum, std::size_t n_labels,
                                          const SimConfig& config);

// Seed of the i-th simulated student (students in sorted id order).
std::uint64_t student_seed(std::uint64_t base, std::size_t index);

struct ItemFeatures {
  std::vector<std::string> names;
  std::map<std::string, std::vector<std::uint8_t>> by_item;
  std::map<std::string, std::size_t> answers;
  std::size_t n_labels = 0;
};

// Feature table from thresholded representations: KC columns as features.
ItemFeatures features_from_qmatrix(const QMatrix& q, const DatasetBundle& bundle);
ItemFeatures human_article_features(const DatasetBundle& bundle);

// One simulated learner per student of `original`, replaying that student's
// item sequence with identical order fields. Students run on up to `jobs`
// threads; the pooled log lists students in sorted id order.
TransactionLog simulate_log(const TransactionLog& original, const ItemFeatures& features, const SimConfig& sim,
                            std::size_t jobs = 1);

struct StudyResult {
  TransactionLog simulated;
  AFMFit simulated_fit;
  AFMFit original_fit;
  ParamReport report;  // original (main columns) vs simulated (other), per KC of q_eval
};

StudyResult simulate_and_estimate(const TransactionLog& original, const ItemFeatures& features,
                                  const QMatrix& q_eval, const FitConfig& fit, const SimConfig& sim,
                                  std::size_t jobs = 1);

// KC, original intercept/slope, simulated intercept/slope, correlations footer.
std::string study_report_tsv(const ParamReport& report);

}  // namespace cogrl
