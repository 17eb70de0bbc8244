#include "cogrl/afm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "cogrl/error.hpp"
#include "cogrl/layers.hpp"
#include "cogrl/parallel.hpp"
#include "cogrl/tsv.hpp"

namespace cogrl {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Term {
  std::size_t kc;  // local KC index
  double t;
};

struct DesignRow {
  std::size_t student;
  double y;
  std::vector<Term> terms;
};

// Compact problem over the students and KCs present in the fitted rows.
struct Problem {
  std::vector<std::string> students;
  std::vector<std::string> kcs;
  std::vector<DesignRow> rows;

  std::size_t n_students() const { return students.size(); }
  std::size_t n_kcs() const { return kcs.size(); }
  std::size_t n_params() const { return students.size() + 2 * kcs.size(); }
  std::size_t beta_index(std::size_t k) const { return students.size() + k; }
  std::size_t gamma_index(std::size_t k) const { return students.size() + kcs.size() + k; }
};

Problem build_problem(const TransactionLog& log, const QMatrix& q, const OpportunityTable& opps,
                      std::span<const std::size_t> rows) {
  Problem problem;
  std::map<std::string, std::size_t> student_index;
  std::map<std::size_t, std::size_t> kc_index;  // Q column -> local
  for (std::size_t r : rows) {
    student_index.emplace(log.rows[r].student_id, 0);
    for (const auto& o : opps[r]) kc_index.emplace(o.kc, 0);
  }
  for (auto& [id, idx] : student_index) {
    idx = problem.students.size();
    problem.students.push_back(id);
  }
  for (auto& [col, idx] : kc_index) {
    idx = problem.kcs.size();
    problem.kcs.push_back(q.kc_names()[col]);
  }
  problem.rows.reserve(rows.size());
  for (std::size_t r : rows) {
    DesignRow row{student_index.at(log.rows[r].student_id), static_cast<double>(log.rows[r].outcome), {}};
    for (const auto& o : opps[r]) row.terms.push_back({kc_index.at(o.kc), static_cast<double>(o.count)});
    problem.rows.push_back(std::move(row));
  }
  return problem;
}

double linear_predictor(const Problem& problem, const Eigen::VectorXd& x, const DesignRow& row) {
  double z = x[row.student];
  for (const auto& term : row.terms) {
    z += x[problem.beta_index(term.kc)] + x[problem.gamma_index(term.kc)] * term.t;
  }
  return z;
}

struct Evaluation {
  double objective = 0.0;
  double log_likelihood = 0.0;
};

Evaluation evaluate(const Problem& problem, const FitConfig& config, const Eigen::VectorXd& x) {
  Evaluation e;
  for (const auto& row : problem.rows) {
    const double z = linear_predictor(problem, x, row);
    e.log_likelihood += row.y * z - softplus(z);
  }
  const std::size_t s = problem.n_students();
  const double theta_sq = x.head(s).squaredNorm();
  const double bg_sq = x.tail(x.size() - s).squaredNorm();
  e.objective = e.log_likelihood - 0.5 * config.l2_theta * theta_sq - 0.5 * config.l2_beta_gamma * bg_sq;
  return e;
}

void gradient_and_curvature(const Problem& problem, const FitConfig& config, const Eigen::VectorXd& x,
                            Eigen::VectorXd& grad, Eigen::MatrixXd& curvature) {
  const std::size_t n = problem.n_params();
  grad.setZero(n);
  curvature.setZero(n, n);
  std::vector<std::size_t> idx;
  std::vector<double> val;
  for (const auto& row : problem.rows) {
    const double p = sigmoid(linear_predictor(problem, x, row));
    const double resid = row.y - p;
    const double w = p * (1.0 - p);
    idx.assign(1, row.student);
    val.assign(1, 1.0);
    for (const auto& term : row.terms) {
      idx.push_back(problem.beta_index(term.kc));
      val.push_back(1.0);
      idx.push_back(problem.gamma_index(term.kc));
      val.push_back(term.t);
    }
    for (std::size_t a = 0; a < idx.size(); ++a) {
      grad[idx[a]] += resid * val[a];
      for (std::size_t b = 0; b < idx.size(); ++b) curvature(idx[a], idx[b]) += w * val[a] * val[b];
    }
  }
  const std::size_t s = problem.n_students();
  for (std::size_t i = 0; i < n; ++i) {
    const double lambda = i < s ? config.l2_theta : config.l2_beta_gamma;
    grad[i] -= lambda * x[i];
    curvature(i, i) += lambda;
  }
}

void project(const Problem& problem, Eigen::VectorXd& x) {
  for (std::size_t k = 0; k < problem.n_kcs(); ++k) {
    double& g = x[problem.gamma_index(k)];
    if (g < 0.0) g = 0.0;
  }
}

std::string iterate_dump(const Problem& problem, const Eigen::VectorXd& x) {
  std::ostringstream out;
  out << " [iterate:";
  for (std::size_t k = 0; k < problem.n_kcs(); ++k) {
    out << ' ' << problem.kcs[k] << "(beta=" << x[problem.beta_index(k)]
        << ", gamma=" << x[problem.gamma_index(k)] << ')';
  }
  double max_theta = 0.0;
  for (std::size_t s = 0; s < problem.n_students(); ++s) max_theta = std::max(max_theta, std::abs(x[s]));
  out << " max|theta|=" << max_theta << ']';
  return out.str();
}

// Direction that solves the Newton system on the coordinates not pinned at
// the gamma >= 0 bound.
Eigen::VectorXd newton_direction(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                                 const Eigen::MatrixXd& curvature) {
  const std::size_t n = problem.n_params();
  std::vector<std::size_t> free;
  free.reserve(n);
  std::vector<bool> pinned(n, false);
  for (std::size_t k = 0; k < problem.n_kcs(); ++k) {
    const std::size_t i = problem.gamma_index(k);
    if (x[i] <= 0.0 && grad[i] <= 0.0) pinned[i] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!pinned[i]) free.push_back(i);
  }
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(n);
  if (free.empty()) return direction;

  const std::size_t m = free.size();
  Eigen::MatrixXd h(m, m);
  Eigen::VectorXd g(m);
  double max_diag = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    g[a] = grad[free[a]];
    for (std::size_t b = 0; b < m; ++b) h(a, b) = curvature(free[a], free[b]);
    max_diag = std::max(max_diag, h(a, a));
  }
  double damping = 1e-10 * (1.0 + max_diag);
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::MatrixXd damped = h;
    damped.diagonal().array() += damping;
    Eigen::LLT<Eigen::MatrixXd> llt(damped);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd step = llt.solve(g);
      if (step.allFinite()) {
        for (std::size_t a = 0; a < m; ++a) direction[free[a]] = step[a];
        return direction;
      }
    }
    damping *= 100.0;
  }
  return grad;
}

AFMParams to_params(const Problem& problem, const Eigen::VectorXd& x) {
  AFMParams params;
  for (std::size_t s = 0; s < problem.n_students(); ++s) params.theta[problem.students[s]] = x[s];
  for (std::size_t k = 0; k < problem.n_kcs(); ++k) {
    params.beta[problem.kcs[k]] = x[problem.beta_index(k)];
    params.gamma[problem.kcs[k]] = x[problem.gamma_index(k)];
  }
  return params;
}

double lookup(const std::map<std::string, double>& m, const std::string& key) {
  const auto it = m.find(key);
  return it == m.end() ? 0.0 : it->second;
}

}  // namespace

OpportunityTable compute_opportunities(const TransactionLog& log, const QMatrix& q) {
  OpportunityTable table(log.rows.size());
  std::vector<std::size_t> item_rows(log.rows.size());
  for (std::size_t r = 0; r < log.rows.size(); ++r) item_rows[r] = q.require_item(log.rows[r].item_id);

  std::vector<std::size_t> counts(q.cols());
  for (const auto& sequence : log.student_sequences()) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t r : sequence) {
      for (std::size_t kc : q.kcs_of(item_rows[r])) {
        table[r].push_back({kc, counts[kc]});
        ++counts[kc];
      }
    }
  }
  return table;
}

double afm_predict(const AFMParams& params, const QMatrix& q, const std::string& student,
                   const std::string& item, std::span<const std::size_t> opportunities) {
  const auto theta = params.theta.find(student);
  if (theta == params.theta.end()) throw InputError("unknown student '" + student + "'");
  const auto kcs = q.kcs_of(q.require_item(item));
  if (opportunities.size() != kcs.size()) {
    throw DimensionError("item '" + item + "' needs " + std::to_string(kcs.size()) + " opportunity counts");
  }
  double z = theta->second;
  for (std::size_t k = 0; k < kcs.size(); ++k) {
    const auto& name = q.kc_names()[kcs[k]];
    const auto beta = params.beta.find(name);
    const auto gamma = params.gamma.find(name);
    if (beta == params.beta.end() || gamma == params.gamma.end()) {
      throw InputError("unknown KC '" + name + "'");
    }
    z += beta->second + gamma->second * static_cast<double>(opportunities[k]);
  }
  return sigmoid(z);
}

double afm_predict_cold(const AFMParams& params, const QMatrix& q, const std::string& student,
                        std::span<const KcOpportunity> opportunities) {
  double z = lookup(params.theta, student);
  for (const auto& o : opportunities) {
    const auto& name = q.kc_names()[o.kc];
    z += lookup(params.beta, name) + lookup(params.gamma, name) * static_cast<double>(o.count);
  }
  return sigmoid(z);
}

void FitConfig::validate() const {
  if (!(l2_theta >= 0.0) || !(l2_beta_gamma >= 0.0)) throw ConfigError("L2 penalties must be non-negative");
  if (!(tol > 0.0)) throw ConfigError("fit tolerance must be positive");
  if (max_iter == 0) throw ConfigError("max_iter must be positive");
}

AFMFit afm_fit_rows(const TransactionLog& log, const QMatrix& q, const OpportunityTable& opportunities,
                    std::span<const std::size_t> rows, const FitConfig& config) {
  config.validate();
  if (rows.empty()) throw InputError("cannot fit AFM to an empty log");
  const Problem problem = build_problem(log, q, opportunities, rows);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(problem.n_params());
  Evaluation current = evaluate(problem, config, x);
  AFMFit fit;
  fit.diagnostics.objective_history.push_back(current.objective);

  Eigen::VectorXd grad;
  Eigen::MatrixXd curvature;
  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    gradient_and_curvature(problem, config, x, grad, curvature);
    if (!grad.allFinite()) throw FitError("non-finite AFM gradient" + iterate_dump(problem, x));

    bool accepted = false;
    Eigen::VectorXd candidate;
    Evaluation next;
    // Newton direction first, projected gradient as fallback; both with step halving.
    const Eigen::VectorXd directions[2] = {newton_direction(problem, x, grad, curvature), grad};
    for (const auto& direction : directions) {
      double step = 1.0;
      for (int halving = 0; halving < 60 && !accepted; ++halving, step *= 0.5) {
        candidate = x + step * direction;
        project(problem, candidate);
        next = evaluate(problem, config, candidate);
        if (!std::isfinite(next.objective)) continue;
        if (next.objective >= current.objective) accepted = true;
      }
      if (accepted) break;
    }
    fit.diagnostics.iterations = iter + 1;
    if (!accepted) {
      // No ascent along either direction: stationary to working precision.
      fit.diagnostics.converged = true;
      break;
    }
    const double change = (next.objective - current.objective) / std::max(1.0, std::abs(current.objective));
    x = candidate;
    current = next;
    fit.diagnostics.objective_history.push_back(current.objective);
    if (change < config.tol) {
      fit.diagnostics.converged = true;
      break;
    }
  }
  if (!std::isfinite(current.objective) || !x.allFinite()) {
    throw FitError("non-finite AFM objective" + iterate_dump(problem, x));
  }
  fit.diagnostics.objective = current.objective;
  fit.diagnostics.log_likelihood = current.log_likelihood;
  fit.params = to_params(problem, x);
  return fit;
}

AFMFit afm_fit(const TransactionLog& log, const QMatrix& q, const FitConfig& config) {
  if (log.empty()) throw InputError("cannot fit AFM to an empty log");
  const auto opps = compute_opportunities(log, q);
  std::vector<std::size_t> rows(log.rows.size());
  std::iota(rows.begin(), rows.end(), 0);
  return afm_fit_rows(log, q, opps, rows, config);
}

namespace {
double rmse_rows(const AFMParams& params, const QMatrix& q, const TransactionLog& log,
                 const OpportunityTable& opps, std::span<const std::size_t> rows) {
  double sq = 0.0;
  for (std::size_t r : rows) {
    const double p = afm_predict_cold(params, q, log.rows[r].student_id, opps[r]);
    const double e = log.rows[r].outcome - p;
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(rows.size()));
}
}  // namespace

double afm_rmse(const AFMParams& params, const QMatrix& q, const TransactionLog& log) {
  if (log.empty()) throw InputError("cannot score an empty log");
  const auto opps = compute_opportunities(log, q);
  std::vector<std::size_t> rows(log.rows.size());
  std::iota(rows.begin(), rows.end(), 0);
  return rmse_rows(params, q, log, opps, rows);
}

std::map<std::string, std::size_t> assign_item_folds(const std::vector<std::string>& items, const CVConfig& cv) {
  if (cv.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::vector<std::string> order(items);
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  if (cv.folds > order.size()) {
    throw ConfigError("cannot split " + std::to_string(order.size()) + " items into " +
                      std::to_string(cv.folds) + " folds");
  }
  std::mt19937_64 rng(cv.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::map<std::string, std::size_t> folds;
  for (std::size_t k = 0; k < order.size(); ++k) folds[order[k]] = k % cv.folds;
  return folds;
}

CVResult item_stratified_cv(const TransactionLog& log, const QMatrix& q, const FitConfig& fit,
                            const CVConfig& cv, std::size_t jobs) {
  if (log.empty()) throw InputError("cannot cross-validate an empty log");
  const auto folds = assign_item_folds(log.items(), cv);
  const auto opps = compute_opportunities(log, q);

  CVResult result;
  result.fold_rmse.resize(cv.folds);
  result.fold_items.resize(cv.folds);
  for (const auto& [item, fold] : folds) result.fold_items[fold].push_back(item);

  parallel_for(cv.folds, jobs, [&](std::size_t fold) {
    std::vector<std::size_t> train, test;
    for (std::size_t r = 0; r < log.rows.size(); ++r) {
      (folds.at(log.rows[r].item_id) == fold ? test : train).push_back(r);
    }
    if (train.empty()) throw InputError("fold " + std::to_string(fold) + " has an empty training split");
    const auto fitted = afm_fit_rows(log, q, opps, train, fit);
    result.fold_rmse[fold] = rmse_rows(fitted.params, q, log, opps, test);
  });
  result.mean_rmse = std::accumulate(result.fold_rmse.begin(), result.fold_rmse.end(), 0.0) /
                     static_cast<double>(cv.folds);
  return result;
}

std::vector<ComparisonRow> compare_models(const TransactionLog& log, const std::vector<NamedModel>& models,
                                          const FitConfig& fit, const CVConfig& cv, std::size_t jobs) {
  if (models.empty()) throw ConfigError("compare needs at least one model");
  std::vector<ComparisonRow> rows;
  for (const auto& model : models) {
    rows.push_back({model.name, model.q.cols(), item_stratified_cv(log, model.q, fit, cv, jobs)});
  }
  return rows;
}

std::string comparison_tsv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "model\tkcs\tcv_rmse";
  const std::size_t folds = rows.empty() ? 0 : rows.front().cv.fold_rmse.size();
  for (std::size_t f = 0; f < folds; ++f) out << "\tfold" << f;
  out << '\n';
  for (const auto& row : rows) {
    out << row.model << '\t' << row.kcs << '\t' << format_fixed(row.cv.mean_rmse);
    for (double r : row.cv.fold_rmse) out << '\t' << format_fixed(r);
    out << '\n';
  }
  return out.str();
}

std::string comparison_text(const std::vector<ComparisonRow>& rows) {
  std::size_t width = 5;
  for (const auto& row : rows) width = std::max(width, row.model.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "model" << "  " << std::right << std::setw(6)
      << "kcs" << "  " << std::setw(8) << "cv_rmse" << '\n';
  for (const auto& row : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << row.model << "  " << std::right << std::setw(6)
        << row.kcs << "  " << std::setw(8) << format_fixed(row.cv.mean_rmse, 4) << '\n';
  }
  return out.str();
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InputError("pearson needs equal-length inputs");
  if (xs.size() < 2) throw InputError("pearson needs at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw InputError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ParamReport param_report(const AFMParams& params, const QMatrix& q, const AFMParams* other) {
  ParamReport report;
  auto fetch = [](const AFMParams& p, const std::string& kc, const char* which) {
    const auto b = p.beta.find(kc);
    const auto g = p.gamma.find(kc);
    if (b == p.beta.end() || g == p.gamma.end()) {
      throw InputError(std::string("KC '") + kc + "' missing from " + which + " parameters");
    }
    return std::pair{b->second, g->second};
  };
  for (const auto& kc : q.kc_names()) {
    ParamReportRow row;
    row.kc = kc;
    const auto [beta, gamma] = fetch(params, kc, "fitted");
    row.intercept = sigmoid(beta);
    row.slope = gamma;
    if (other) {
      const auto [ob, og] = fetch(*other, kc, "reference");
      row.other_intercept = sigmoid(ob);
      row.other_slope = og;
    }
    report.rows.push_back(row);
  }
  if (other && report.rows.size() >= 2) {
    std::vector<double> a, b, c, d;
    for (const auto& row : report.rows) {
      a.push_back(row.intercept);
      b.push_back(*row.other_intercept);
      c.push_back(row.slope);
      d.push_back(*row.other_slope);
    }
    try {
      report.intercept_correlation = pearson(a, b);
    } catch (const InputError&) {
    }
    try {
      report.slope_correlation = pearson(c, d);
    } catch (const InputError&) {
    }
  }
  return report;
}

std::string param_report_tsv(const ParamReport& report, const std::string& label, const std::string& other_label) {
  const bool paired = !report.rows.empty() && report.rows.front().other_intercept.has_value();
  std::ostringstream out;
  out << "kc\t" << label << "_intercept\t" << label << "_slope";
  if (paired) out << '\t' << other_label << "_intercept\t" << other_label << "_slope";
  out << '\n';
  for (const auto& row : report.rows) {
    out << row.kc << '\t' << format_fixed(row.intercept) << '\t' << format_fixed(row.slope);
    if (paired) out << '\t' << format_fixed(*row.other_intercept) << '\t' << format_fixed(*row.other_slope);
    out << '\n';
  }
  if (paired) {
    auto corr = [](const std::optional<double>& v) { return v ? format_fixed(*v) : std::string("NA"); };
    out << "correlation\t\t\t" << corr(report.intercept_correlation) << '\t' << corr(report.slope_correlation)
        << '\n';
  }
  return out.str();
}

std::string params_tsv(const AFMParams& params) {
  std::ostringstream out;
  out << "entity\trole\tvalue\n";
  for (const auto& [id, v] : params.theta) out << id << "\ttheta\t" << format_exact(v) << '\n';
  for (const auto& [id, v] : params.beta) out << id << "\tbeta\t" << format_exact(v) << '\n';
  for (const auto& [id, v] : params.gamma) out << id << "\tgamma\t" << format_exact(v) << '\n';
  return out.str();
}

AFMParams read_params(const TsvTable& table) {
  const std::size_t entity = table.column("entity"), role = table.column("role"), value = table.column("value");
  AFMParams params;
  for (const auto& row : table.rows) {
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(row.fields[value], &used);
      if (used != row.fields[value].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError(table.source + ":" + std::to_string(row.line) + ": bad value '" + row.fields[value] + "'");
    }
    const auto& r = row.fields[role];
    auto& target = r == "theta" ? params.theta : r == "beta" ? params.beta : r == "gamma" ? params.gamma
                                                                                          : params.theta;
    if (r != "theta" && r != "beta" && r != "gamma") {
      throw InputError(table.source + ":" + std::to_string(row.line) + ": unknown role '" + r + "'");
    }
    if (!target.emplace(row.fields[entity], v).second) {
      throw InputError(table.source + ":" + std::to_string(row.line) + ": duplicate " + r + " for '" +
                       row.fields[entity] + "'");
    }
  }
  return params;
}

AFMParams read_params(const std::filesystem::path& path) { return read_params(read_tsv(path)); }

}  // namespace cogrl
