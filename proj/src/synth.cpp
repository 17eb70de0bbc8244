#include "cogrl/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "cogrl/apprentice.hpp"
#include "cogrl/error.hpp"
#include "cogrl/layers.hpp"

namespace cogrl {

namespace {

std::string numbered(const char* prefix, std::size_t i, std::size_t n) {
  int width = 1;
  for (std::size_t m = n > 0 ? n - 1 : 0; m >= 10; m /= 10) ++width;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, std::max(width, 2), i);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// AFM logs
// ---------------------------------------------------------------------------

void AfmLogSpec::validate() const {
  if (students == 0 || items == 0 || kcs == 0) throw ConfigError("students, items and kcs must be positive");
  if (!(theta_sd >= 0.0) || !std::isfinite(theta_mean)) throw ConfigError("invalid theta distribution");
  if (!(beta_lo <= beta_hi) || !std::isfinite(beta_lo) || !std::isfinite(beta_hi)) {
    throw ConfigError("invalid beta range");
  }
  if (!(gamma_lo <= gamma_hi) || gamma_lo < 0.0 || !std::isfinite(gamma_hi)) {
    throw ConfigError("gamma range must satisfy 0 <= lo <= hi");
  }
}

SyntheticAfmLog synth_afm_log(const AfmLogSpec& spec, const std::optional<QMatrix>& given) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SyntheticAfmLog out;

  std::vector<std::string> students;
  for (std::size_t s = 0; s < spec.students; ++s) students.push_back(numbered("s_", s, spec.students));

  if (given) {
    out.q = *given;
    if (out.q.rows() == 0 || out.q.cols() == 0) throw ConfigError("supplied Q-matrix is empty");
  } else {
    std::vector<std::string> items, kcs;
    for (std::size_t i = 0; i < spec.items; ++i) items.push_back(numbered("item_", i, spec.items));
    for (std::size_t k = 0; k < spec.kcs; ++k) kcs.push_back(numbered("kc_", k, spec.kcs));
    std::vector<std::uint8_t> cells(spec.items * spec.kcs, 0);
    std::bernoulli_distribution second(0.5);
    std::uniform_int_distribution<std::size_t> other(0, spec.kcs > 1 ? spec.kcs - 2 : 0);
    for (std::size_t i = 0; i < spec.items; ++i) {
      const std::size_t first = i % spec.kcs;
      cells[i * spec.kcs + first] = 1;
      if (spec.kcs > 1 && second(rng)) {
        std::size_t k = other(rng);
        if (k >= first) ++k;
        cells[i * spec.kcs + k] = 1;
      }
    }
    out.q = QMatrix(items, kcs, cells);
  }

  std::normal_distribution<double> theta(spec.theta_mean, spec.theta_sd);
  std::uniform_real_distribution<double> beta(spec.beta_lo, spec.beta_hi);
  std::uniform_real_distribution<double> gamma(spec.gamma_lo, spec.gamma_hi);
  for (const auto& s : students) out.truth.theta[s] = spec.theta_sd > 0.0 ? theta(rng) : spec.theta_mean;
  for (const auto& k : out.q.kc_names()) out.truth.beta[k] = beta(rng);
  for (const auto& k : out.q.kc_names()) out.truth.gamma[k] = gamma(rng);

  const std::size_t n_items = out.q.rows();
  const std::size_t per_student = spec.transactions_per_student == 0 ? n_items : spec.transactions_per_student;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& s : students) {
    std::vector<std::size_t> seen(out.q.cols(), 0);
    std::vector<std::size_t> order;
    std::uint64_t t = 0;
    while (t < per_student) {
      if (order.empty()) {
        order.resize(n_items);
        for (std::size_t i = 0; i < n_items; ++i) order[i] = n_items - 1 - i;  // popped from the back
        std::shuffle(order.begin(), order.end(), rng);
      }
      const std::size_t row = order.back();
      order.pop_back();
      const auto kcs = out.q.kcs_of(row);
      double z = out.truth.theta[s];
      for (auto k : kcs) {
        const auto& name = out.q.kc_names()[k];
        z += out.truth.beta[name] + out.truth.gamma[name] * static_cast<double>(seen[k]);
      }
      const int outcome = unit(rng) < sigmoid(z) ? 1 : 0;
      out.log.rows.push_back(Transaction{s, out.q.item_ids()[row], outcome, ++t});
      for (auto k : kcs) ++seen[k];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Visual templates
// ---------------------------------------------------------------------------

void VisualSpec::validate() const {
  if (templates < 2) throw ConfigError("visual domain needs at least 2 templates");
  if (images_per_template == 0 || channels == 0 || blocks == 0) {
    throw ConfigError("images_per_template, channels and blocks must be positive");
  }
  if (height < 2 * jitter + 2 || width < 2 * jitter + 2) {
    throw ConfigError("jitter " + std::to_string(jitter) + " pushes templates out of a " + std::to_string(height) +
                      "x" + std::to_string(width) + " frame");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("noise must lie in [0, 1]");
}

VisualDataset synth_visual(const VisualSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t H = spec.height, W = spec.width, J = spec.jitter;
  const std::size_t inner_h = H - 2 * J, inner_w = W - 2 * J;

  // Masks live in the inner frame so any translation within +-jitter stays in view.
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<std::vector<double>> intensity;
  std::uniform_real_distribution<double> shade(0.6, 1.0);
  for (std::size_t t = 0; t < spec.templates; ++t) {
    std::vector<std::uint8_t> mask;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      mask.assign(H * W, 0);
      for (std::size_t b = 0; b < spec.blocks; ++b) {
        const std::size_t max_h = std::max<std::size_t>(2, inner_h / 2), max_w = std::max<std::size_t>(2, inner_w / 2);
        const std::size_t bh = std::uniform_int_distribution<std::size_t>(2, std::min(max_h, inner_h))(rng);
        const std::size_t bw = std::uniform_int_distribution<std::size_t>(2, std::min(max_w, inner_w))(rng);
        const std::size_t y0 = J + std::uniform_int_distribution<std::size_t>(0, inner_h - bh)(rng);
        const std::size_t x0 = J + std::uniform_int_distribution<std::size_t>(0, inner_w - bw)(rng);
        for (std::size_t y = y0; y < y0 + bh; ++y) {
          for (std::size_t x = x0; x < x0 + bw; ++x) mask[y * W + x] = 1;
        }
      }
      if (std::find(masks.begin(), masks.end(), mask) == masks.end()) break;
    }
    if (std::find(masks.begin(), masks.end(), mask) != masks.end()) {
      throw ConfigError("could not draw distinct template masks for this frame size");
    }
    masks.push_back(mask);
    std::vector<double> shades(spec.channels);
    for (auto& s : shades) s = shade(rng);
    intensity.push_back(shades);
  }

  VisualDataset out;
  out.bundle.answer_labels = {"class_0", "class_1"};
  const std::size_t n = spec.templates * spec.images_per_template;
  std::vector<std::string> ids;
  std::vector<std::uint8_t> oracle(n * spec.templates, 0);
  std::uniform_int_distribution<long> shift(-static_cast<long>(J), static_cast<long>(J));
  std::uniform_real_distribution<double> jitter_noise(-spec.noise, spec.noise);
  for (std::size_t t = 0; t < spec.templates; ++t) {
    for (std::size_t m = 0; m < spec.images_per_template; ++m) {
      const std::size_t index = t * spec.images_per_template + m;
      const long dy = shift(rng), dx = shift(rng);
      Tensor image({spec.channels, H, W});
      for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t y = 0; y < H; ++y) {
          for (std::size_t x = 0; x < W; ++x) {
            const long sy = static_cast<long>(y) - dy, sx = static_cast<long>(x) - dx;
            double v = 0.0;
            if (sy >= 0 && sx >= 0 && sy < static_cast<long>(H) && sx < static_cast<long>(W) &&
                masks[t][static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx)]) {
              v = intensity[t][c];
            }
            if (spec.noise > 0.0) v += jitter_noise(rng);
            image.at(c, y, x) = std::clamp(v, 0.0, 1.0);
          }
        }
      }
      ids.push_back(numbered("img_", index, n));
      out.bundle.problems.push_back(ProblemInstance{ids.back(), std::move(image), t % 2});
      out.template_of.push_back(t);
      oracle[index * spec.templates + t] = 1;
    }
  }
  std::vector<std::string> kcs;
  for (std::size_t t = 0; t < spec.templates; ++t) kcs.push_back("template_" + std::to_string(t));
  out.oracle_q = QMatrix(ids, kcs, oracle);
  return out;
}

// ---------------------------------------------------------------------------
// Article cloze domain
// ---------------------------------------------------------------------------

namespace {

enum class NounKind { kConsonant, kVowel, kConsonantPlural, kVowelPlural, kSilentH, kOrdinal };

const std::vector<std::string>& nouns(NounKind kind) {
  static const std::vector<std::string> consonant = {
      "cat",    "dog",   "lamp",   "book",   "chair",  "table",  "pencil", "garden", "river", "kite",
      "rabbit", "window", "bottle", "candle", "jacket", "tiger", "basket", "ladder", "guitar", "pillow",
      "wagon",  "carrot", "puppy",  "banana", "violin", "bucket", "doctor", "farmer"};
  static const std::vector<std::string> vowel = {"apple", "egg",    "orange", "umbrella", "igloo",  "owl",
                                                 "eagle", "oven",   "acorn",  "engine",   "album",  "otter",
                                                 "iguana", "envelope", "onion", "ostrich"};
  static const std::vector<std::string> consonant_plural = {"cats",   "dogs",  "books",   "lamps",  "chairs",
                                                            "kites",  "rabbits", "candles", "tigers", "baskets",
                                                            "pillows", "wagons"};
  static const std::vector<std::string> vowel_plural = {"apples", "eggs",   "oranges", "owls",
                                                        "onions", "eagles", "acorns",  "engines"};
  static const std::vector<std::string> silent_h = {"hour", "heir", "honor", "heirloom", "honorable"};
  static const std::vector<std::string> ordinal = {"first", "second", "third",   "fourth",  "fifth",
                                                   "sixth", "seventh", "ninth",  "tenth",   "hundredth"};
  switch (kind) {
    case NounKind::kConsonant: return consonant;
    case NounKind::kVowel: return vowel;
    case NounKind::kConsonantPlural: return consonant_plural;
    case NounKind::kVowelPlural: return vowel_plural;
    case NounKind::kSilentH: return silent_h;
    case NounKind::kOrdinal: return ordinal;
  }
  return consonant;
}

// "{}" marks the noun; the blank precedes it.
const std::vector<std::string> kPlainTemplates = {
    "She bought ___ {} yesterday.",        "I saw ___ {} in the park.",      "We found ___ {} near the door.",
    "My brother wants ___ {} for his birthday.", "They painted ___ {} last week.", "He drew ___ {} on the board.",
    "Please hand me ___ {} now.",          "Grandma keeps ___ {} in her room."};
const std::vector<std::string> kClauseTemplates = {
    "___ {} that you lent me is broken.", "He visited ___ {} where they played.", "I know ___ {} that she painted.",
    "She waved at ___ {} who stood there.", "We talked about ___ {} that we lost."};
const std::vector<std::string> kContrastTemplates = {
    "I like cake but ___ {} is better.", "After lunch, we saw ___ {} again.", "He looked around, and found ___ {}.",
    "It was late but ___ {} was still open.", "On Monday, she cleaned ___ {}."};
const std::vector<std::string> kMentionedTemplates = {
    "I noticed {} in the shop and bought ___ {} later.", "Tom drew {} and then colored ___ {} blue.",
    "My sister wanted {} so I gave her ___ {} today.",     "We read about {} and then visited ___ {}."};
const std::vector<std::string> kOrdinalTemplates = {
    "She won ___ {} prize.", "He sat in ___ {} row.", "We missed ___ {} train.", "They took ___ {} place."};

struct KcRule {
  const char* name;
  const char* answer;
  double weight;  // share of questions per 72
  const std::vector<std::string>* templates;
  std::vector<NounKind> variants;  // distinct feature patterns the KC spans
};

const std::vector<KcRule>& cloze_rules() {
  static const std::vector<KcRule> rules = {
      {"the_mentioned", "the", 9, &kMentionedTemplates,
       {NounKind::kConsonant, NounKind::kVowel, NounKind::kConsonantPlural, NounKind::kVowelPlural}},
      {"the_clause", "the", 9, &kClauseTemplates, {NounKind::kConsonant, NounKind::kVowel}},
      {"the_contrast", "the", 9, &kContrastTemplates, {NounKind::kConsonant, NounKind::kVowel}},
      {"the_ordinal", "the", 9, &kOrdinalTemplates, {NounKind::kOrdinal}},
      {"the_plural", "the", 9, &kPlainTemplates, {NounKind::kConsonantPlural, NounKind::kVowelPlural}},
      {"an_vowel", "an", 9, &kPlainTemplates, {NounKind::kVowel}},
      {"an_silent_h", "an", 6, &kPlainTemplates, {NounKind::kSilentH}},
      {"a_consonant", "a", 12, &kPlainTemplates, {NounKind::kConsonant}},
  };
  return rules;
}

std::string fill(const std::string& tmpl, const std::string& noun) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl.compare(i, 2, "{}") == 0) {
      out += noun;
      ++i;
    } else {
      out += tmpl[i];
    }
  }
  return out;
}

bool silent_h_word(const std::string& w) {
  const auto& list = nouns(NounKind::kSilentH);
  return std::find(list.begin(), list.end(), w) != list.end();
}

// The KC a question's text falls under, by the first-match rule list.
std::string classify(const ClozeContent& q) {
  const auto f = article_human_features(q).values;
  if (f[3]) return "the_mentioned";
  if (f[2]) return "the_clause";
  if (f[5]) return "the_contrast";
  if (f[1]) return "the_ordinal";
  if (f[4]) return "the_plural";
  if (f[0]) return "an_vowel";
  const auto after = alphabetic_tokens(q.suffix());
  if (!after.empty() && silent_h_word(after.front())) return "an_silent_h";
  return "a_consonant";
}

std::uint8_t vowel_sound(const ClozeContent& q) {
  const auto after = alphabetic_tokens(q.suffix());
  if (after.empty()) return 0;
  const char c = after.front().front();
  return (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || silent_h_word(after.front())) ? 1 : 0;
}

// Largest-remainder allocation of `total` over the weights, at least one each.
std::vector<std::size_t> allocate(const std::vector<double>& weights, std::size_t total) {
  const std::size_t n = weights.size();
  double sum = 0.0;
  for (double w : weights) sum += w;
  std::vector<std::size_t> counts(n, 1);
  std::size_t assigned = n;
  std::vector<std::pair<double, std::size_t>> remainders;
  const double rest = static_cast<double>(total - n);
  for (std::size_t i = 0; i < n; ++i) {
    const double share = rest * weights[i] / sum;
    const auto whole = static_cast<std::size_t>(std::floor(share));
    counts[i] += whole;
    assigned += whole;
    remainders.push_back({share - static_cast<double>(whole), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) ++counts[remainders[j % n].second];
  return counts;
}

}  // namespace

void ClozeSpec::validate() const {
  const std::size_t kcs = include_inexpressible ? 8 : 7;
  if (questions < kcs) throw ConfigError("cloze domain needs at least " + std::to_string(kcs) + " questions");
  if (!(retention >= 0.0 && retention <= 1.0)) throw ConfigError("retention must lie in [0, 1]");
  if (!(slip >= 0.0 && slip < 1.0)) throw ConfigError("slip must lie in [0, 1)");
}

ClozeDataset synth_cloze(const ClozeSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  std::vector<const KcRule*> rules;
  std::vector<double> weights;
  for (const auto& r : cloze_rules()) {
    if (!spec.include_inexpressible && std::string(r.name) == "an_silent_h") continue;
    rules.push_back(&r);
    weights.push_back(r.weight);
  }
  if (!spec.include_inexpressible) weights.back() += 6;  // its share goes to a_consonant
  const auto counts = allocate(weights, spec.questions);

  ClozeDataset out;
  out.bundle.answer_labels = {"a", "an", "the"};
  auto label_of = [&](const std::string& a) {
    return static_cast<std::size_t>(std::find(out.bundle.answer_labels.begin(), out.bundle.answer_labels.end(), a) -
                                    out.bundle.answer_labels.begin());
  };

  struct Draft {
    std::string text, kc;
    std::size_t answer;
  };
  std::vector<Draft> drafts;
  std::set<std::string> used;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const KcRule& rule = *rules[r];
    for (std::size_t n = 0; n < counts[r]; ++n) {
      // Cycle the variants so multi-pattern KCs cover all their patterns.
      const auto& words = nouns(rule.variants[n % rule.variants.size()]);
      std::string text;
      for (int attempt = 0; attempt < 200; ++attempt) {
        const auto& tmpl = (*rule.templates)[std::uniform_int_distribution<std::size_t>(0, rule.templates->size() - 1)(rng)];
        const auto& noun = words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
        text = fill(tmpl, noun);
        if (!used.count(text)) break;
      }
      used.insert(text);
      drafts.push_back(Draft{text, rule.name, label_of(rule.answer)});
    }
  }
  std::shuffle(drafts.begin(), drafts.end(), rng);

  std::vector<std::string> ids;
  std::map<std::vector<std::uint8_t>, std::size_t> expressible_answer;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& d = drafts[i];
    ClozeContent content = parse_cloze(d.text);
    if (classify(content) != d.kc) {
      throw ConfigError("rule set is inconsistent: '" + d.text + "' generated for " + d.kc + " but matches " +
                        classify(content));
    }
    auto human = article_human_features(content).values;
    if (d.kc != "an_silent_h") {
      const auto [it, fresh] = expressible_answer.emplace(human, d.answer);
      if (!fresh && it->second != d.answer) {
        throw ConfigError("rule set is contradictory on the article features of '" + d.text + "'");
      }
    }
    human.push_back(vowel_sound(content));
    ids.push_back(numbered("q_", i, drafts.size()));
    out.full_features.push_back(std::move(human));
    out.kc_of.push_back(d.kc);
    out.bundle.problems.push_back(ProblemInstance{ids.back(), std::move(content), d.answer});
  }
  out.full_feature_names = article_feature_names();
  out.full_feature_names.push_back("next_word_vowel_sound");

  std::vector<std::string> kc_names;
  for (const auto* r : rules) kc_names.push_back(r->name);
  std::vector<std::uint8_t> cells(ids.size() * kc_names.size(), 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto k = static_cast<std::size_t>(std::find(kc_names.begin(), kc_names.end(), out.kc_of[i]) - kc_names.begin());
    cells[i * kc_names.size() + k] = 1;
  }
  out.kc_model = QMatrix(ids, kc_names, cells);
  out.bundle.human_model = out.kc_model;

  if (spec.students > 0) {
    TransactionLog log;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t labels = out.bundle.answer_labels.size();
    std::uniform_int_distribution<std::size_t> guess(0, labels - 1);
    std::uniform_int_distribution<std::size_t> wrong(1, labels - 1);
    for (std::size_t s = 0; s < spec.students; ++s) {
      const std::string student = numbered("s_", s, spec.students);
      std::vector<std::size_t> order(ids.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<LabeledExample> memory;
      std::optional<DecisionTree> tree;
      std::uint64_t t = 0;
      for (auto i : order) {
        const auto& features = out.full_features[i];
        const std::size_t answer = out.bundle.problems[i].answer;
        std::size_t attempt = tree ? tree->predict(std::span<const std::uint8_t>(features)) : guess(rng);
        if (unit(rng) < spec.slip) attempt = (attempt + wrong(rng)) % labels;
        log.rows.push_back(Transaction{student, ids[i], attempt == answer ? 1 : 0, ++t});
        if (unit(rng) < spec.retention) {
          memory.push_back(LabeledExample{features, answer});
          tree = DecisionTree::fit(out.full_feature_names, memory);
        }
      }
    }
    out.bundle.transactions = std::move(log);
  }
  out.bundle.validate();
  return out;
}

}  // namespace cogrl
