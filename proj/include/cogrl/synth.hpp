#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cogrl/afm.hpp"
#include "cogrl/problems.hpp"
#include "cogrl/qmatrix.hpp"
#include "cogrl/transactions.hpp"

namespace cogrl {

// ---------------------------------------------------------------------------
// Student logs from known AFM parameters
// ---------------------------------------------------------------------------

struct AfmLogSpec {
  std::size_t students = 100;
  std::size_t items = 60;
  std::size_t kcs = 5;
  // 0 means one pass over every item.
  std::size_t transactions_per_student = 0;
  double theta_mean = 0.0;
  double theta_sd = 1.0;
  double beta_lo = -1.0, beta_hi = 1.0;
  double gamma_lo = 0.0, gamma_hi = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticAfmLog {
  TransactionLog log;
  QMatrix q;
  AFMParams truth;
};

// theta ~ Normal(theta_mean, theta_sd), beta ~ U(beta_lo, beta_hi),
// gamma ~ U(gamma_lo, gamma_hi). Items get 1-2 KCs unless `q` is supplied, in
// which case its items and KCs are used. Every student walks a seeded
// permutation of the items (repeated if transactions_per_student > items)
// and each outcome is Bernoulli(afm_predict) at the current opportunities.
SyntheticAfmLog synth_afm_log(const AfmLogSpec& spec, const std::optional<QMatrix>& q = std::nullopt);

// ---------------------------------------------------------------------------
// Visual template domain
// ---------------------------------------------------------------------------

struct VisualSpec {
  std::size_t templates = 4;
  std::size_t images_per_template = 10;
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t jitter = 1;      // max translation in pixels, each axis
  double noise = 0.05;         // uniform pixel noise amplitude
  std::size_t blocks = 3;      // rectangles per template mask
  std::uint64_t seed = 0;

  void validate() const;
};

struct VisualDataset {
  DatasetBundle bundle;
  std::vector<std::size_t> template_of;  // per problem
  QMatrix oracle_q;                      // items x templates, one 1 per row
};

// Each template is a fixed mask of axis-aligned blocks inside a margin of
// `jitter` pixels; instances translate it by a seeded offset in
// [-jitter, jitter]^2 and add pixel noise. Answer class = template % 2.
VisualDataset synth_visual(const VisualSpec& spec);

// ---------------------------------------------------------------------------
// Rule-based article (a/an/the) cloze domain
// ---------------------------------------------------------------------------

struct ClozeSpec {
  std::size_t questions = 72;
  bool include_inexpressible = true;  // "an" before a silent-h word
  // Student log generated alongside the questions (0 students = none).
  std::size_t students = 0;
  // Chance a generated student retains a studied example.
  double retention = 0.6;
  // Chance a generated student's attempt is swapped for a wrong label.
  double slip = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClozeDataset {
  DatasetBundle bundle;
  QMatrix kc_model;                          // one KC per question
  std::vector<std::string> kc_of;            // per problem
  std::vector<std::vector<std::uint8_t>> full_features;  // human features + vowel sound
  std::vector<std::string> full_feature_names;
};

// KCs and their rules (first match wins):
//   the_mentioned   next word already appears before the blank  -> the
//   the_clause      sentence contains that/where/who            -> the
//   the_contrast    sentence contains "but" or a comma          -> the
//   the_ordinal     next word ends in st/nd/rd/th               -> the
//   the_plural      next word ends in s                         -> the
//   an_vowel        next word starts with a vowel letter        -> an
//   an_silent_h     next word starts with a silent h (hour...)  -> an
//   a_consonant     otherwise                                   -> a
// The six article features determine every answer except an_silent_h, whose
// feature vectors coincide with a_consonant ones. KCs differ in how many
// feature patterns they span (1, 2 or 4), so they are learned at different
// speeds. Generated students are apprentice learners over the full feature
// set (human features + vowel sound) that keep each studied example with
// probability `retention`: a decision tree over the retained examples, a
// uniform guess before the first one, then a slip with probability `slip`.
ClozeDataset synth_cloze(const ClozeSpec& spec);

}  // namespace cogrl
