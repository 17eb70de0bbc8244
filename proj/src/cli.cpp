#include "cogrl/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cogrl/afm.hpp"
#include "cogrl/apprentice.hpp"
#include "cogrl/checkpoint.hpp"
#include "cogrl/error.hpp"
#include "cogrl/ingest.hpp"
#include "cogrl/representation.hpp"
#include "cogrl/synth.hpp"

namespace cogrl::cli {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

// Everything a run touched, for the manifest.
struct Run {
  std::uint64_t seed = 0;
  std::string seed_source = "default";
  std::size_t jobs = 1;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;

  void input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path.string() + ": cannot open");
    std::ostringstream bytes;
    bytes << in.rdbuf();
    inputs.emplace_back(path.string(), hex64(fnv1a64(bytes.str())));
  }
  void write(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path, text);
    outputs.push_back(path.string());
  }
};

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open");
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return line;
  }
  throw InputError(path.string() + ": file is empty");
}

bool header_has(const fs::path& path, const std::string& column) {
  for (const auto& f : split_tabs(first_line(path))) {
    if (f == column) return true;
  }
  return false;
}

TransactionLog read_log(Run& run, const fs::path& path) {
  run.input(path);
  return load_transactions(path);
}

// A cognitive model file: either a Q-matrix TSV or an (item_id, kc_name)
// pair table.
QMatrix read_model(Run& run, const fs::path& path) {
  run.input(path);
  if (header_has(path, "kc_name")) {
    const auto table = read_tsv(path);
    const std::size_t item_col = table.column("item_id");
    std::vector<std::string> items;
    for (const auto& row : table.rows) {
      if (std::find(items.begin(), items.end(), row.fields[item_col]) == items.end()) {
        items.push_back(row.fields[item_col]);
      }
    }
    return load_human_model(table, items);
  }
  return read_qmatrix(path);
}

// Image manifest (has an "image" column) or cloze TSV (has "text").
DatasetBundle read_dataset(Run& run, const fs::path& path) {
  run.input(path);
  if (header_has(path, "image")) return load_images(path);
  if (header_has(path, "text")) return load_cloze(path);
  throw InputError(path.string() + ": neither an image manifest nor a cloze file");
}

std::vector<std::string> cloze_texts(const DatasetBundle& bundle) {
  std::vector<std::string> texts;
  for (const auto& p : bundle.problems) texts.push_back(std::get<ClozeContent>(p.content).text);
  return texts;
}

void add_fit_flags(CLI::App* sub, FitConfig& fit) {
  sub->add_option("--l2-theta", fit.l2_theta, "Gaussian penalty on student proficiency");
  sub->add_option("--l2-beta-gamma", fit.l2_beta_gamma, "Penalty on KC easiness and learning rate");
  sub->add_option("--tol", fit.tol, "Convergence tolerance on the objective");
  sub->add_option("--max-iter", fit.max_iter, "Newton iteration cap");
}

// ---------------------------------------------------------------------------

struct SynthAfmArgs {
  AfmLogSpec spec;
  std::string q_path, out_dir;
};

void synth_afm(Run& run, SynthAfmArgs a, std::ostream& out) {
  a.spec.seed = run.seed;
  std::optional<QMatrix> q;
  if (!a.q_path.empty()) q = read_model(run, a.q_path);
  const auto data = synth_afm_log(a.spec, q);
  const fs::path dir = a.out_dir;
  run.write(dir / "transactions.tsv", transactions_tsv(data.log));
  run.write(dir / "q.tsv", qmatrix_tsv(data.q));
  run.write(dir / "truth_params.tsv", params_tsv(data.truth));
  out << "transactions " << data.log.size() << " students " << data.truth.theta.size() << " items "
      << data.q.rows() << " kcs " << data.q.cols() << '\n';
}

struct SynthVisualArgs {
  VisualSpec spec;
  std::size_t students = 0;
  std::string out_dir;
};

void synth_visual_cmd(Run& run, SynthVisualArgs a, std::ostream& out) {
  a.spec.seed = run.seed;
  const auto data = synth_visual(a.spec);
  const fs::path dir = a.out_dir;
  save_images(data.bundle, dir);
  run.outputs.push_back((dir / "manifest.tsv").string());
  run.write(dir / "oracle_q.tsv", qmatrix_tsv(data.oracle_q));
  if (a.students > 0) {
    AfmLogSpec log_spec;
    log_spec.students = a.students;
    log_spec.seed = run.seed;
    const auto log = synth_afm_log(log_spec, data.oracle_q);
    run.write(dir / "transactions.tsv", transactions_tsv(log.log));
    run.write(dir / "truth_params.tsv", params_tsv(log.truth));
  }
  out << "images " << data.bundle.problems.size() << " templates " << a.spec.templates << '\n';
}

struct SynthClozeArgs {
  ClozeSpec spec;
  bool no_inexpressible = false;
  std::string out_dir;
};

void synth_cloze_cmd(Run& run, SynthClozeArgs a, std::ostream& out) {
  a.spec.seed = run.seed;
  a.spec.include_inexpressible = !a.no_inexpressible;
  const auto data = synth_cloze(a.spec);
  const fs::path dir = a.out_dir;
  run.write(dir / "cloze.tsv", cloze_tsv(data.bundle));
  run.write(dir / "kc_model.tsv", human_model_tsv(data.kc_model));
  std::vector<std::uint8_t> cells;
  for (const auto& row : data.full_features) cells.insert(cells.end(), row.begin(), row.end());
  run.write(dir / "full_features.tsv",
            qmatrix_tsv(QMatrix(data.bundle.item_ids(), data.full_feature_names, std::move(cells))));
  if (data.bundle.transactions) run.write(dir / "transactions.tsv", transactions_tsv(*data.bundle.transactions));
  out << "questions " << data.bundle.problems.size() << " kcs " << data.kc_model.cols() << " transactions "
      << (data.bundle.transactions ? data.bundle.transactions->size() : 0) << '\n';
}

struct TrainArgs {
  std::string data, out_dir;
  ArchitectureSpec arch;
  SGDConfig sgd;
};

void train_rep(Run& run, TrainArgs a, std::ostream& out) {
  const auto bundle = read_dataset(run, a.data);
  ArchitectureSpec spec = default_architecture(bundle);
  spec.filters = a.arch.filters;
  spec.kernel = a.arch.kernel;
  spec.stride = a.arch.stride;
  spec.embedding_dim = a.arch.embedding_dim;
  spec.lstm_hidden = a.arch.lstm_hidden;
  spec.combine_size = 2 * a.arch.lstm_hidden;
  spec.rep_size = a.arch.rep_size;

  std::map<std::string, std::string> meta{{"seed", std::to_string(run.seed)}};
  std::unique_ptr<Network> net;
  std::optional<Vocabulary> vocab;
  if (spec.variant == "image_cnn") {
    net = build_image_cnn(spec, run.seed);
  } else {
    vocab = Vocabulary::build(cloze_texts(bundle));
    net = build_cloze_lstm(spec, *vocab, run.seed);
    meta["vocabulary"] = vocab->serialize();
  }
  std::string labels;
  for (const auto& l : bundle.answer_labels) labels += (labels.empty() ? "" : ",") + l;
  meta["answer_labels"] = labels;

  const auto samples = to_samples(bundle.problems, vocab ? &*vocab : nullptr);
  a.sgd.seed = run.seed;
  a.sgd.jobs = run.jobs;
  const auto result = train_model(*net, samples, a.sgd);
  const double accuracy = training_accuracy(*net, samples);
  const auto reps = extract_representations(*net, bundle.item_ids(), samples, run.jobs);

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  save_checkpoint(*net, meta, dir / "checkpoint.txt");
  run.outputs.push_back((dir / "checkpoint.txt").string());
  run.write(dir / "reps.tsv", representations_tsv(reps));
  std::string history = "epoch\tloss\n";
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    history += std::to_string(e) + '\t' + format_exact(result.loss_history[e]) + '\n';
  }
  run.write(dir / "training.tsv", history);
  out << "architecture " << net->architecture() << " epochs " << result.epochs << " loss "
      << format_fixed(result.loss_history.back()) << " accuracy " << format_fixed(accuracy, 4) << " target "
      << (result.reached_target ? "reached" : "not-reached") << '\n';
}

struct QArgs {
  std::string reps, out, raw_out, report_out, baselines_dir, human;
  double tau = 0.95;
};

void qmatrix_cmd(Run& run, const QArgs& a, std::ostream& out) {
  run.input(a.reps);
  const auto reps = read_representations(fs::path(a.reps));
  const auto raw = threshold_raw(reps, a.tau);
  const auto sq = sanitize_qmatrix(raw);
  run.write(a.out, qmatrix_tsv(sq.q));
  if (!a.raw_out.empty()) run.write(a.raw_out, qmatrix_tsv(raw));
  const std::string report = sq.report.to_text();
  if (!a.report_out.empty()) run.write(a.report_out, report);
  if (!a.baselines_dir.empty()) {
    const fs::path dir = a.baselines_dir;
    run.write(dir / "faculty.tsv", qmatrix_tsv(faculty_transfer(reps.item_ids)));
    run.write(dir / "identical.tsv", qmatrix_tsv(identical_transfer(reps.item_ids)));
    if (!a.human.empty()) {
      run.input(a.human);
      run.write(dir / "human.tsv", qmatrix_tsv(load_human_model(fs::path(a.human), reps.item_ids)));
    }
  } else if (!a.human.empty()) {
    throw ConfigError("--human needs --baselines-dir");
  }
  out << "items " << sq.q.rows() << " kcs " << sq.q.cols() << " (raw " << raw.cols() << ")\n" << report;
}

struct FitArgs {
  std::string log, q, out;
  FitConfig fit;
};

void fit_afm_cmd(Run& run, const FitArgs& a, std::ostream& out) {
  const auto log = read_log(run, a.log);
  const auto q = read_model(run, a.q);
  const auto fitted = afm_fit(log, q, a.fit);
  run.write(a.out, params_tsv(fitted.params));
  const auto& d = fitted.diagnostics;
  out << "iterations " << d.iterations << " converged " << (d.converged ? "yes" : "no") << " log_likelihood "
      << format_fixed(d.log_likelihood) << " objective " << format_fixed(d.objective) << '\n';
}

struct CvArgs {
  std::string log, q, out;
  FitConfig fit;
  std::size_t folds = 10;
};

void cv_cmd(Run& run, const CvArgs& a, std::ostream& out) {
  const auto log = read_log(run, a.log);
  const auto q = read_model(run, a.q);
  const auto result = item_stratified_cv(log, q, a.fit, CVConfig{a.folds, run.seed}, run.jobs);
  std::string tsv = "fold\titems\trmse\n";
  for (std::size_t f = 0; f < result.fold_rmse.size(); ++f) {
    tsv += std::to_string(f) + '\t' + std::to_string(result.fold_items[f].size()) + '\t' +
           format_exact(result.fold_rmse[f]) + '\n';
  }
  tsv += "mean\t" + std::to_string(log.items().size()) + '\t' + format_exact(result.mean_rmse) + '\n';
  run.write(a.out, tsv);
  out << "kcs " << q.cols() << " folds " << a.folds << " mean_rmse " << format_fixed(result.mean_rmse) << '\n';
}

struct CompareArgs {
  std::string log, out;
  std::vector<std::string> models;
  FitConfig fit;
  std::size_t folds = 10;
};

void compare_cmd(Run& run, const CompareArgs& a, std::ostream& out) {
  const auto log = read_log(run, a.log);
  const auto items = log.items();
  std::vector<NamedModel> models;
  for (const auto& spec : a.models) {
    if (spec == "faculty") {
      models.push_back({"faculty", faculty_transfer(items)});
    } else if (spec == "identical") {
      models.push_back({"identical", identical_transfer(items)});
    } else if (const auto eq = spec.find('='); eq != std::string::npos && eq > 0) {
      models.push_back({spec.substr(0, eq), read_model(run, spec.substr(eq + 1))});
    } else {
      throw ConfigError("model '" + spec + "' is not faculty, identical or name=path");
    }
  }
  const auto rows = compare_models(log, models, a.fit, CVConfig{a.folds, run.seed}, run.jobs);
  run.write(a.out, comparison_tsv(rows));
  out << comparison_text(rows);
}

struct SimArgs {
  std::string log, data, features, eval_q, out, sim_log;
  bool human = false;
  FitConfig fit;
  std::size_t refit_every = 1;
};

void simulate_cmd(Run& run, const SimArgs& a, std::ostream& out) {
  if (a.human == !a.features.empty()) throw ConfigError("give exactly one of --human-features and --features");
  const auto log = read_log(run, a.log);
  const auto bundle = read_dataset(run, a.data);
  const auto features = a.human ? human_article_features(bundle) : features_from_qmatrix(read_model(run, a.features), bundle);
  const auto q_eval = read_model(run, a.eval_q);
  const auto study = simulate_and_estimate(log, features, q_eval, a.fit, SimConfig{run.seed, a.refit_every}, run.jobs);
  const std::string report = study_report_tsv(study.report);
  run.write(a.out, report);
  if (!a.sim_log.empty()) run.write(a.sim_log, transactions_tsv(study.simulated));
  out << report;
}

struct GradArgs {
  std::vector<std::string> archs{"cnn", "lstm"};
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::string out;
};

// Reduced-size instances of both architectures with random weights and data.
bool gradcheck_cmd(Run& run, const GradArgs& a, std::ostream& out) {
  std::mt19937_64 rng(run.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::string tsv = "architecture\tchecked\tmax_relative_error\tworst_parameter\tworst_index\tpass\n";
  bool ok = true;
  for (const auto& arch : a.archs) {
    ArchitectureSpec spec;
    spec.rep_size = 5;
    std::unique_ptr<Network> net;
    std::vector<Sample> batch;
    if (arch == "cnn") {
      spec.in_shape = {2, 10, 10};
      spec.filters = 3;
      spec.n_classes = 2;
      net = build_image_cnn(spec, run.seed);
      for (std::size_t i = 0; i < 3; ++i) {
        Tensor x(spec.in_shape);
        for (double& v : x.values()) v = unit(rng);
        batch.push_back({x, i % 2});
      }
    } else if (arch == "lstm") {
      spec.variant = "cloze_lstm";
      spec.embedding_dim = 4;
      spec.lstm_hidden = 3;
      spec.combine_size = 6;
      spec.n_classes = 3;
      const auto vocab = Vocabulary::build({"abcde "});
      net = build_cloze_lstm(spec, vocab, run.seed);
      std::uniform_int_distribution<std::size_t> tok(0, vocab.size() - 1), len(1, 5);
      for (std::size_t i = 0; i < 3; ++i) {
        ClozeTokens t;
        for (std::size_t n = len(rng); n > 0; --n) t.prefix.push_back(tok(rng));
        for (std::size_t n = len(rng) - 1; n > 0; --n) t.suffix.push_back(tok(rng));
        batch.push_back({t, i % 3});
      }
    } else {
      throw ConfigError("unknown architecture '" + arch + "' (cnn or lstm)");
    }
    const auto report = grad_check(*net, batch, a.epsilon);
    const bool pass = report.max_relative_error < a.tolerance;
    ok = ok && pass;
    tsv += arch + '\t' + std::to_string(report.checked) + '\t' + format_exact(report.max_relative_error) + '\t' +
           report.worst_parameter + '\t' + std::to_string(report.worst_index) + '\t' + (pass ? "yes" : "no") + '\n';
    out << arch << " checked " << report.checked << " max_relative_error " << std::scientific
        << std::setprecision(3) << report.max_relative_error << std::defaultfloat << " (" << report.worst_parameter
        << '[' << report.worst_index << "]) " << (pass ? "pass" : "FAIL") << '\n';
  }
  if (!a.out.empty()) run.write(a.out, tsv);
  return ok;
}

struct ReportArgs {
  std::string params, q, other, out, label = "fitted", other_label = "reference";
};

void param_report_cmd(Run& run, const ReportArgs& a, std::ostream& out) {
  run.input(a.params);
  const auto params = read_params(fs::path(a.params));
  const auto q = read_model(run, a.q);
  std::optional<AFMParams> other;
  if (!a.other.empty()) {
    run.input(a.other);
    other = read_params(fs::path(a.other));
  }
  const auto report = param_report(params, q, other ? &*other : nullptr);
  const std::string tsv = param_report_tsv(report, a.label, a.other_label);
  if (!a.out.empty()) run.write(a.out, tsv);
  out << tsv;
}

// ---------------------------------------------------------------------------

void record_options(const CLI::App& app, ordered_json& flags) {
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_name();
    if (name.empty() || name == "--help") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      std::string joined;
      for (const auto& r : results) joined += (joined.empty() ? "" : ",") + r;
      flags[name] = joined;
    } else {
      flags[name] = opt->get_default_str();
    }
  }
}

const char* kFooter =
    "Exit codes: 0 success, 2 usage error, 3 missing or malformed input,\n"
    "4 dimension or configuration error, 5 numeric failure (including a failed\n"
    "gradcheck), 70 internal error. Every run prints a one-line JSON manifest to\n"
    "stderr. --seed falls back to the COGRL_SEED environment variable, then 0.";

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  CLI::App app{"Cognitive model discovery from learned problem representations", "cogrl"};
  app.footer(kFooter);
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_flag;
  std::size_t jobs = 1;
  std::string manifest_path;
  app.add_option("--seed", seed_flag, "Seed for every stochastic step");
  app.add_option("--jobs", jobs, "Worker threads; outputs do not depend on it")->check(CLI::PositiveNumber);
  app.add_option("--manifest", manifest_path, "Also write the run manifest to this file");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->require_subcommand(1);
  SynthAfmArgs s_afm;
  auto* s1 = synth->add_subcommand("afm-log", "Student log from known AFM parameters");
  s1->add_option("--students", s_afm.spec.students);
  s1->add_option("--items", s_afm.spec.items);
  s1->add_option("--kcs", s_afm.spec.kcs);
  s1->add_option("--per-student", s_afm.spec.transactions_per_student, "Transactions per student (0 = one pass)");
  s1->add_option("--theta-mean", s_afm.spec.theta_mean);
  s1->add_option("--theta-sd", s_afm.spec.theta_sd);
  s1->add_option("--beta-lo", s_afm.spec.beta_lo);
  s1->add_option("--beta-hi", s_afm.spec.beta_hi);
  s1->add_option("--gamma-lo", s_afm.spec.gamma_lo);
  s1->add_option("--gamma-hi", s_afm.spec.gamma_hi);
  s1->add_option("--q", s_afm.q_path, "Use this cognitive model instead of a random one");
  s1->add_option("--out-dir", s_afm.out_dir)->required();

  SynthVisualArgs s_vis;
  auto* s2 = synth->add_subcommand("visual", "Template image problems");
  s2->add_option("--templates", s_vis.spec.templates);
  s2->add_option("--per-template", s_vis.spec.images_per_template);
  s2->add_option("--channels", s_vis.spec.channels);
  s2->add_option("--height", s_vis.spec.height);
  s2->add_option("--width", s_vis.spec.width);
  s2->add_option("--jitter", s_vis.spec.jitter);
  s2->add_option("--noise", s_vis.spec.noise);
  s2->add_option("--blocks", s_vis.spec.blocks);
  s2->add_option("--students", s_vis.students, "Also simulate an AFM log over the template model");
  s2->add_option("--out-dir", s_vis.out_dir)->required();

  SynthClozeArgs s_cloze;
  auto* s3 = synth->add_subcommand("cloze", "Rule-based article questions");
  s3->add_option("--questions", s_cloze.spec.questions);
  s3->add_option("--students", s_cloze.spec.students);
  s3->add_option("--retention", s_cloze.spec.retention);
  s3->add_option("--slip", s_cloze.spec.slip);
  s3->add_flag("--no-inexpressible", s_cloze.no_inexpressible, "Leave out the silent-h KC");
  s3->add_option("--out-dir", s_cloze.out_dir)->required();

  TrainArgs t;
  auto* train = app.add_subcommand("train-rep", "Train a representation network; write checkpoint and reps");
  train->add_option("--data", t.data, "Image manifest or cloze TSV")->required();
  train->add_option("--filters", t.arch.filters);
  train->add_option("--kernel", t.arch.kernel);
  train->add_option("--stride", t.arch.stride);
  train->add_option("--embedding-dim", t.arch.embedding_dim);
  train->add_option("--hidden", t.arch.lstm_hidden, "LSTM units per direction");
  train->add_option("--rep-size", t.arch.rep_size);
  train->add_option("--lr", t.sgd.learning_rate);
  train->add_option("--batch", t.sgd.batch_size);
  train->add_option("--epochs", t.sgd.max_epochs);
  train->add_option("--target-loss", t.sgd.target_loss);
  train->add_option("--out-dir", t.out_dir)->required();

  QArgs qa;
  auto* qm = app.add_subcommand("qmatrix", "Threshold representations into a sanitized Q-matrix");
  qm->add_option("--reps", qa.reps)->required();
  qm->add_option("--tau", qa.tau);
  qm->add_option("--out", qa.out)->required();
  qm->add_option("--raw-out", qa.raw_out, "Thresholded matrix before sanitation");
  qm->add_option("--report-out", qa.report_out);
  qm->add_option("--baselines-dir", qa.baselines_dir, "Write faculty/identical (and --human) models here");
  qm->add_option("--human", qa.human, "item_id/kc_name table to convert");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit-afm", "Fit the additive factors model");
  fit->add_option("--log", fa.log)->required();
  fit->add_option("--q", fa.q)->required();
  fit->add_option("--out", fa.out)->required();
  add_fit_flags(fit, fa.fit);

  CvArgs ca;
  auto* cv = app.add_subcommand("cv", "Item-stratified cross-validation of one model");
  cv->add_option("--log", ca.log)->required();
  cv->add_option("--q", ca.q)->required();
  cv->add_option("--folds", ca.folds);
  cv->add_option("--out", ca.out)->required();
  add_fit_flags(cv, ca.fit);

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Cross-validated RMSE table for several models");
  compare->add_option("--log", cmp.log)->required();
  compare->add_option("--models", cmp.models, "faculty, identical or name=path")->delimiter(',')->required();
  compare->add_option("--folds", cmp.folds);
  compare->add_option("--out", cmp.out)->required();
  add_fit_flags(compare, cmp.fit);

  SimArgs sa;
  sa.fit.l2_beta_gamma = 1.0;
  auto* sim = app.add_subcommand("simulate", "Apprentice-learner study against a human log");
  sim->add_option("--log", sa.log)->required();
  sim->add_option("--data", sa.data, "Image manifest or cloze TSV")->required();
  sim->add_flag("--human-features", sa.human, "Use the six article features");
  sim->add_option("--features", sa.features, "Binary feature table (Q-matrix TSV layout)");
  sim->add_option("--eval-q", sa.eval_q, "Model both logs are fitted with")->required();
  sim->add_option("--refit-every", sa.refit_every)->check(CLI::PositiveNumber);
  sim->add_option("--out", sa.out)->required();
  sim->add_option("--sim-log", sa.sim_log);
  add_fit_flags(sim, sa.fit);

  GradArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of both architectures");
  grad->add_option("--arch", ga.archs, "cnn, lstm")->delimiter(',');
  grad->add_option("--epsilon", ga.epsilon);
  grad->add_option("--tolerance", ga.tolerance);
  grad->add_option("--out", ga.out);

  ReportArgs ra;
  auto* rep = app.add_subcommand("param-report", "Per-KC intercept/slope table, optionally against other params");
  rep->add_option("--params", ra.params)->required();
  rep->add_option("--q", ra.q)->required();
  rep->add_option("--other", ra.other);
  rep->add_option("--label", ra.label);
  rep->add_option("--other-label", ra.other_label);
  rep->add_option("--out", ra.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "cogrl: " << e.what() << '\n';
    return kUsage;
  }

  Run run;
  run.jobs = jobs;
  if (seed_flag) {
    run.seed = *seed_flag;
    run.seed_source = "flag";
  } else if (const char* env = std::getenv("COGRL_SEED")) {
    try {
      std::size_t used = 0;
      const std::string text = env;
      run.seed = std::stoull(text, &used);
      if (used != text.size() || text.front() == '-') throw std::invalid_argument(text);
    } catch (const std::exception&) {
      err << "cogrl: COGRL_SEED='" << env << "' is not an unsigned integer\n";
      return kUsage;
    }
    run.seed_source = "COGRL_SEED";
  }

  std::string name;
  const CLI::App* leaf = &app;
  ordered_json flags;
  record_options(app, flags);
  while (!leaf->get_subcommands().empty()) {
    leaf = leaf->get_subcommands().front();
    name += (name.empty() ? "" : " ") + leaf->get_name();
    record_options(*leaf, flags);
  }

  int code = kOk;
  std::string error;
  try {
    if (s1->parsed()) synth_afm(run, s_afm, out);
    else if (s2->parsed()) synth_visual_cmd(run, s_vis, out);
    else if (s3->parsed()) synth_cloze_cmd(run, s_cloze, out);
    else if (train->parsed()) train_rep(run, t, out);
    else if (qm->parsed()) qmatrix_cmd(run, qa, out);
    else if (fit->parsed()) fit_afm_cmd(run, fa, out);
    else if (cv->parsed()) cv_cmd(run, ca, out);
    else if (compare->parsed()) compare_cmd(run, cmp, out);
    else if (sim->parsed()) simulate_cmd(run, sa, out);
    else if (grad->parsed()) {
      if (!gradcheck_cmd(run, ga, out)) {
        code = kNumeric;
        error = "gradient check above tolerance";
      }
    } else if (rep->parsed()) param_report_cmd(run, ra, out);
  } catch (const InputError& e) {
    code = kInput;
    error = e.what();
  } catch (const DimensionError& e) {
    code = kConfig;
    error = e.what();
  } catch (const ConfigError& e) {
    code = kConfig;
    error = e.what();
  } catch (const NumericError& e) {
    code = kNumeric;
    error = e.what();
  } catch (const FitError& e) {
    code = kNumeric;
    error = e.what();
  } catch (const std::exception& e) {
    code = kInternal;
    error = e.what();
  }
  if (code != kOk) err << "cogrl " << name << ": " << error << '\n';

  ordered_json manifest;
  manifest["subcommand"] = name;
  manifest["flags"] = flags;
  manifest["seed"] = run.seed;
  manifest["seed_source"] = run.seed_source;
  manifest["jobs"] = run.jobs;
  ordered_json inputs = ordered_json::object();
  for (const auto& [path, digest] : run.inputs) inputs[path] = "fnv1a64:" + digest;
  manifest["inputs"] = inputs;
  manifest["outputs"] = run.outputs;
  manifest["exit_code"] = code;
  manifest["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string line = manifest.dump();
  err << line << '\n';
  if (!manifest_path.empty()) {
    std::ofstream m(manifest_path);
    m << line << '\n';
  }
  return code;
}

}  // namespace cogrl::cli
