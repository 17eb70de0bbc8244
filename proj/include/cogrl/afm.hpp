#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogrl/qmatrix.hpp"
#include "cogrl/transactions.hpp"

namespace cogrl {

struct KcOpportunity {
  std::size_t kc = 0;     // Q-matrix column
  std::size_t count = 0;  // prior same-student transactions whose items need this KC

  friend bool operator==(const KcOpportunity&, const KcOpportunity&) = default;
};

// Aligned with log.rows; each entry lists the KCs of that row's item in
// Q-matrix column order.
using OpportunityTable = std::vector<std::vector<KcOpportunity>>;

OpportunityTable compute_opportunities(const TransactionLog& log, const QMatrix& q);

// Additive Factors Model parameters (logit scale).
struct AFMParams {
  std::map<std::string, double> theta;  // student proficiency
  std::map<std::string, double> beta;   // KC easiness
  std::map<std::string, double> gamma;  // KC learning rate, >= 0

  friend bool operator==(const AFMParams&, const AFMParams&) = default;
};

// p = sigmoid(theta_s + sum_{k in item} (beta_k + gamma_k * t_k)).
// `opportunities` holds t_k for q.kcs_of(item) in order. Unknown student, item
// or KC -> InputError.
double afm_predict(const AFMParams& params, const QMatrix& q, const std::string& student,
                   const std::string& item, std::span<const std::size_t> opportunities);

// Same, but entities absent from `params` contribute 0 (cold start).
double afm_predict_cold(const AFMParams& params, const QMatrix& q, const std::string& student,
                        std::span<const KcOpportunity> opportunities);

struct FitConfig {
  double l2_theta = 1.0;
  double l2_beta_gamma = 0.0;
  double tol = 1e-6;
  std::size_t max_iter = 500;

  void validate() const;
};

struct FitDiagnostics {
  std::size_t iterations = 0;
  bool converged = false;
  double objective = 0.0;       // penalized log-likelihood
  double log_likelihood = 0.0;
  std::vector<double> objective_history;  // accepted iterates, non-decreasing
};

struct AFMFit {
  AFMParams params;
  FitDiagnostics diagnostics;
};

// Maximises sum log Bernoulli(y | p) - l2_theta/2 sum theta^2
//   - l2_beta_gamma/2 sum (beta^2 + gamma^2)
// over students and KCs present in the log, with gamma >= 0.
AFMFit afm_fit(const TransactionLog& log, const QMatrix& q, const FitConfig& config);

// Fit restricted to `rows` of the log, with opportunities precomputed on the
// full log.
AFMFit afm_fit_rows(const TransactionLog& log, const QMatrix& q, const OpportunityTable& opportunities,
                    std::span<const std::size_t> rows, const FitConfig& config);

// Root mean squared error of cold-start predictions over the log.
double afm_rmse(const AFMParams& params, const QMatrix& q, const TransactionLog& log);

struct CVConfig {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

struct CVResult {
  double mean_rmse = 0.0;
  std::vector<double> fold_rmse;
  std::vector<std::vector<std::string>> fold_items;
};

// Deterministic item -> fold map: sorted distinct items shuffled by seed,
// fold = shuffled position mod folds.
std::map<std::string, std::size_t> assign_item_folds(const std::vector<std::string>& items,
                                                     const CVConfig& cv);

// Folds run on up to `jobs` threads; results do not depend on `jobs`.
CVResult item_stratified_cv(const TransactionLog& log, const QMatrix& q, const FitConfig& fit,
                            const CVConfig& cv, std::size_t jobs = 1);

struct NamedModel {
  std::string name;
  QMatrix q;
};

struct ComparisonRow {
  std::string model;
  std::size_t kcs = 0;
  CVResult cv;
};

std::vector<ComparisonRow> compare_models(const TransactionLog& log, const std::vector<NamedModel>& models,
                                          const FitConfig& fit, const CVConfig& cv, std::size_t jobs = 1);
std::string comparison_tsv(const std::vector<ComparisonRow>& rows);
std::string comparison_text(const std::vector<ComparisonRow>& rows);

// Pearson product-moment correlation. Throws InputError on length mismatch or
// fewer than 2 points, and on zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct ParamReportRow {
  std::string kc;
  double intercept = 0.0;  // sigmoid(beta), probability scale
  double slope = 0.0;      // gamma, logits per opportunity
  std::optional<double> other_intercept;
  std::optional<double> other_slope;
};

struct ParamReport {
  std::vector<ParamReportRow> rows;
  std::optional<double> intercept_correlation;
  std::optional<double> slope_correlation;
};

// One row per Q-matrix KC. With `other`, also reports its values and the
// Pearson correlations of both columns; a KC missing from either set is an
// InputError.
ParamReport param_report(const AFMParams& params, const QMatrix& q, const AFMParams* other = nullptr);
std::string param_report_tsv(const ParamReport& report, const std::string& label = "fitted",
                             const std::string& other_label = "reference");

// Params TSV: entity<TAB>role<TAB>value, role in {theta, beta, gamma}.
std::string params_tsv(const AFMParams& params);
AFMParams read_params(const std::filesystem::path& path);
AFMParams read_params(const TsvTable& table);

}  // namespace cogrl
