// End-to-end acceptance checks. One PASS/FAIL line per criterion; the exit
// status is non-zero if any criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cogrl/afm.hpp"
#include "cogrl/apprentice.hpp"
#include "cogrl/cli.hpp"
#include "cogrl/layers.hpp"
#include "cogrl/representation.hpp"
#include "cogrl/synth.hpp"
#include "oracles.hpp"

using namespace cogrl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fails]");
  }
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& check) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  if (!v.pass) ++failures;
  std::cout << "criterion " << id << " (" << name << "): " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail
            << "  [" << fmt(since(t0), 1) << " s]" << std::endl;
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"cogrl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) {
    std::cerr << "cogrl";
    for (const auto& a : args) std::cerr << ' ' << a;
    std::cerr << "\n" << err.str();
  }
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("cogrl_acceptance_" + std::to_string(::getpid()));
  Scratch() {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

// ---------------------------------------------------------------------------

Verdict gradient_fidelity(const fs::path& scratch) {
  Verdict v;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int seed = 1; seed <= 5; ++seed) {
    const auto out = scratch / ("grad_" + std::to_string(seed) + ".tsv");
    cli({"gradcheck", "--seed", std::to_string(seed), "--epsilon", "1e-5", "--tolerance", "1e-4", "--out",
         out.string()});
    std::istringstream rows(slurp(out));
    std::string line;
    std::getline(rows, line);
    int archs = 0;
    while (std::getline(rows, line)) {
      std::istringstream f(line);
      std::string arch, checked, err;
      f >> arch >> checked >> err;
      worst = std::max(worst, std::stod(err));
      ++archs;
    }
    if (archs != 2) v.require(false, "seed " + std::to_string(seed) + " did not report both architectures");
  }
  const double secs = since(t0);
  v.require(worst < 1e-4, "max relative error over cnn+lstm, 5 seeds = " + sci(worst) + " < 1e-4");
  v.require(secs < 30.0, "runtime " + fmt(secs, 2) + " s < 30 s");
  return v;
}

Verdict transcription() {
  Verdict v;
  Rng rng(20240);
  std::uniform_int_distribution<std::size_t> small(1, 3), kern(1, 4), stride(1, 3), extra(0, 6);
  double conv_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = small(rng), out = small(rng), r = kern(rng), s = stride(rng);
    const Tensor x = oracle::random_tensor({in, r + extra(rng), r + extra(rng)}, rng);
    ConvLayer layer = ConvLayer::create(in, out, r, s, rng);
    fill_uniform(layer.gains, 2.0, rng);
    const Tensor y = conv_forward(layer, x);
    const Tensor want = oracle::conv_direct(layer.kernels, {layer.gains.values().begin(), layer.gains.values().end()}, s, x);
    if (y.shape() != want.shape()) {
      conv_err = INFINITY;
      break;
    }
    for (std::size_t n = 0; n < y.size(); ++n) conv_err = std::max(conv_err, std::abs(y[n] - want[n]));
  }
  double lstm_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ni = 1 + extra(rng), nh = 1 + extra(rng);
    const LSTMCell cell = LSTMCell::create(ni, nh, rng);
    auto vec = [&](std::size_t n, double b) {
      const Tensor t = oracle::random_tensor({n}, rng, -b, b);
      return std::vector<double>(t.values().begin(), t.values().end());
    };
    const auto x = vec(ni, 2), h = vec(nh, 1), c = vec(nh, 3);
    const auto got = lstm_step(cell, x, h, c);
    const auto want = oracle::lstm_direct(cell, x, h, c);
    for (std::size_t u = 0; u < nh; ++u) {
      lstm_err = std::max({lstm_err, std::abs(got.h[u] - want.h[u]), std::abs(got.c[u] - want.c[u]),
                           std::abs(got.gates[0][u] - want.i[u]), std::abs(got.gates[1][u] - want.f[u]),
                           std::abs(got.gates[2][u] - want.g[u]), std::abs(got.gates[3][u] - want.o[u])});
    }
  }
  v.require(conv_err <= 1e-12, "conv max |diff| over 100 cases = " + sci(conv_err) + " <= 1e-12");
  v.require(lstm_err <= 1e-12, "lstm max |diff| over 100 cases = " + sci(lstm_err) + " <= 1e-12");
  return v;
}

Verdict afm_recovery() {
  Verdict v;
  double min_beta = 1.0, min_gamma = 1.0, slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AfmLogSpec spec;
    spec.seed = seed;
    const auto data = synth_afm_log(spec);
    const auto t0 = Clock::now();
    const auto fit = afm_fit(data.log, data.q, FitConfig{});
    slowest = std::max(slowest, since(t0));
    std::vector<double> b, bh, g, gh;
    for (const auto& k : data.q.kc_names()) {
      b.push_back(data.truth.beta.at(k));
      bh.push_back(fit.params.beta.at(k));
      g.push_back(data.truth.gamma.at(k));
      gh.push_back(fit.params.gamma.at(k));
    }
    min_beta = std::min(min_beta, pearson(b, bh));
    min_gamma = std::min(min_gamma, pearson(g, gh));
  }
  v.require(min_beta >= 0.9, "min Pearson(beta) over seeds 1-5 = " + fmt(min_beta) + " >= 0.9");
  v.require(min_gamma >= 0.8, "min Pearson(gamma) = " + fmt(min_gamma) + " >= 0.8");
  v.require(slowest < 60.0, "slowest fit " + fmt(slowest, 3) + " s < 60 s");
  return v;
}

// Visual pipeline shared by the ordering and clustering criteria.
struct VisualRun {
  double accuracy = 0.0;
  double share = 0.0;
  double rmse_faculty = 0.0, rmse_identical = 0.0, rmse_cogrl = 0.0;
  std::size_t cogrl_kcs = 0;
  double seconds = 0.0;
};

SGDConfig visual_training(std::uint64_t seed) {
  SGDConfig sgd;
  sgd.seed = seed;
  sgd.learning_rate = 0.5;
  sgd.batch_size = 1;
  sgd.max_epochs = 1000;
  sgd.target_loss = 0.0;
  return sgd;
}

VisualRun visual_pipeline(std::uint64_t seed) {
  const auto t0 = Clock::now();
  VisualSpec vs;
  vs.seed = seed;
  const auto data = synth_visual(vs);
  auto net = build_image_cnn(default_architecture(data.bundle), seed);
  const auto samples = to_samples(data.bundle.problems);
  train_model(*net, samples, visual_training(seed));

  VisualRun run;
  run.accuracy = training_accuracy(*net, samples);
  const auto reps = extract_representations(*net, data.bundle.item_ids(), samples);
  const auto raw = threshold_raw(reps, 0.95);
  std::size_t pairs = 0, shared = 0;
  for (std::size_t a = 0; a < samples.size(); ++a) {
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      if (data.template_of[a] != data.template_of[b]) continue;
      ++pairs;
      bool any = false;
      for (std::size_t k = 0; k < raw.cols(); ++k) any = any || (raw.at(a, k) && raw.at(b, k));
      shared += any;
    }
  }
  run.share = static_cast<double>(shared) / static_cast<double>(pairs);

  const auto cogrl_q = sanitize_qmatrix(raw).q;
  run.cogrl_kcs = cogrl_q.cols();
  AfmLogSpec ls;
  ls.students = 50;
  ls.seed = seed;
  const auto log = synth_afm_log(ls, data.oracle_q);
  const auto ids = data.bundle.item_ids();
  const auto rows = compare_models(log.log,
                                   {{"faculty", faculty_transfer(ids)}, {"identical", identical_transfer(ids)},
                                    {"cogrl", cogrl_q}},
                                   FitConfig{}, CVConfig{10, seed});
  run.rmse_faculty = rows[0].cv.mean_rmse;
  run.rmse_identical = rows[1].cv.mean_rmse;
  run.rmse_cogrl = rows[2].cv.mean_rmse;
  run.seconds = since(t0);
  return run;
}

Verdict table_ordering(const std::vector<VisualRun>& runs) {
  Verdict v;
  double seconds = 0.0;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const auto& r = runs[s];
    const std::string tag = "seed " + std::to_string(s + 1) + ": identical " + fmt(r.rmse_identical) +
                            " > faculty " + fmt(r.rmse_faculty) + ", cogrl(" + std::to_string(r.cogrl_kcs) +
                            " KCs) " + fmt(r.rmse_cogrl) + " <= faculty+0.005";
    v.require(r.rmse_identical > r.rmse_faculty && r.rmse_cogrl <= r.rmse_faculty + 0.005, tag);
    seconds = std::max(seconds, r.seconds);
  }
  v.require(seconds < 600.0, "slowest full run " + fmt(seconds, 1) + " s < 600 s");
  return v;
}

Verdict clustering(const std::vector<VisualRun>& runs) {
  Verdict v;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    v.require(runs[s].accuracy >= 0.95 && runs[s].share >= 0.8,
              "seed " + std::to_string(s + 1) + ": accuracy " + fmt(runs[s].accuracy, 3) + ", same-template share " +
                  fmt(runs[s].share, 3));
  }
  return v;
}

Verdict cloze_pipeline() {
  Verdict v;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ClozeSpec cs;
    cs.seed = seed;
    const auto data = synth_cloze(cs);
    std::vector<std::string> texts;
    for (const auto& p : data.bundle.problems) texts.push_back(std::get<ClozeContent>(p.content).text);
    const auto vocab = Vocabulary::build(texts);
    const auto spec = default_architecture(data.bundle);
    auto net = build_cloze_lstm(spec, vocab, seed);
    const auto samples = to_samples(data.bundle.problems, &vocab);
    SGDConfig sgd;
    sgd.seed = seed;
    sgd.learning_rate = 0.2;
    sgd.batch_size = 1;
    sgd.max_epochs = 500;
    const auto result = train_model(*net, samples, sgd);
    const double acc = training_accuracy(*net, samples);
    v.require(samples.size() >= 60 && data.bundle.answer_labels.size() == 3 && acc >= 0.9,
              "seed " + std::to_string(seed) + ": " + std::to_string(samples.size()) + " questions, " +
                  std::to_string(spec.lstm_hidden) + "-unit LSTMs, accuracy " + fmt(acc, 3) + " after " +
                  std::to_string(result.epochs) + " epochs");
  }
  return v;
}

Verdict apprentice_shape() {
  Verdict v;
  FitConfig fit;
  fit.l2_beta_gamma = 1.0;
  double max_silent = 0.0, min_expressible = INFINITY, min_corr = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ClozeSpec cs;
    cs.students = 40;
    cs.seed = seed;
    const auto data = synth_cloze(cs);
    const auto& log = *data.bundle.transactions;

    const auto human = simulate_and_estimate(log, human_article_features(data.bundle), data.kc_model, fit,
                                             SimConfig{seed, 1});
    for (const auto& row : human.report.rows) {
      const double slope = *row.other_slope;
      if (row.kc == "an_silent_h") max_silent = std::max(max_silent, slope);
      else min_expressible = std::min(min_expressible, slope);
    }

    std::vector<std::uint8_t> cells;
    for (const auto& r : data.full_features) cells.insert(cells.end(), r.begin(), r.end());
    const QMatrix full_q(data.bundle.item_ids(), data.full_feature_names, cells);
    const auto full = simulate_and_estimate(log, features_from_qmatrix(full_q, data.bundle), data.kc_model, fit,
                                            SimConfig{seed, 1});
    min_corr = std::min(min_corr, full.report.slope_correlation.value_or(-1.0));
  }
  v.require(max_silent < 0.05, "human features: max inexpressible-KC slope over 5 seeds = " + fmt(max_silent) + " < 0.05");
  v.require(min_expressible > 0.2, "min expressible slope = " + fmt(min_expressible) + " > 0.2");
  v.require(min_corr >= 0.8, "full features: min slope correlation = " + fmt(min_corr) + " >= 0.8");
  return v;
}

// Every subcommand, chained so later steps read earlier outputs, run three
// times (jobs 1, jobs 1, jobs 3) into separate trees that must match byte for
// byte.
Verdict determinism(const fs::path& scratch) {
  Verdict v;
  auto pipeline = [](const fs::path& d, const std::string& jobs) {
    const std::string o = d.string();
    const std::vector<std::vector<std::string>> commands = {
        {"synth", "afm-log", "--students", "30", "--items", "20", "--out-dir", o + "/afm"},
        {"synth", "visual", "--per-template", "4", "--students", "10", "--out-dir", o + "/vis"},
        {"synth", "cloze", "--students", "6", "--out-dir", o + "/cloze"},
        {"train-rep", "--data", o + "/vis/manifest.tsv", "--epochs", "30", "--batch", "4", "--out-dir", o + "/tv"},
        {"train-rep", "--data", o + "/cloze/cloze.tsv", "--hidden", "8", "--embedding-dim", "6", "--epochs", "3",
         "--out-dir", o + "/tc"},
        {"qmatrix", "--reps", o + "/tv/reps.tsv", "--tau", "0.6", "--out", o + "/q.tsv", "--raw-out", o + "/raw.tsv",
         "--report-out", o + "/sanitation.txt", "--baselines-dir", o + "/base"},
        {"qmatrix", "--reps", o + "/tc/reps.tsv", "--human", o + "/cloze/kc_model.tsv", "--baselines-dir",
         o + "/cbase", "--out", o + "/cq.tsv"},
        {"fit-afm", "--log", o + "/afm/transactions.tsv", "--q", o + "/afm/q.tsv", "--out", o + "/params.tsv"},
        {"cv", "--log", o + "/afm/transactions.tsv", "--q", o + "/afm/q.tsv", "--folds", "5", "--out", o + "/cv.tsv"},
        {"compare", "--log", o + "/vis/transactions.tsv", "--models",
         "faculty,identical,cogrl=" + o + "/q.tsv,oracle=" + o + "/vis/oracle_q.tsv", "--out", o + "/compare.tsv"},
        {"simulate", "--log", o + "/cloze/transactions.tsv", "--data", o + "/cloze/cloze.tsv", "--human-features",
         "--eval-q", o + "/cloze/kc_model.tsv", "--out", o + "/sim_human.tsv", "--sim-log", o + "/sim_human_log.tsv"},
        {"simulate", "--log", o + "/cloze/transactions.tsv", "--data", o + "/cloze/cloze.tsv", "--features",
         o + "/cloze/full_features.tsv", "--eval-q", o + "/cloze/kc_model.tsv", "--out", o + "/sim_full.tsv"},
        {"gradcheck", "--out", o + "/grad.tsv"},
        {"param-report", "--params", o + "/params.tsv", "--q", o + "/afm/q.tsv", "--other",
         o + "/afm/truth_params.tsv", "--out", o + "/report.tsv"},
    };
    std::vector<std::string> failed;
    for (auto args : commands) {
      args.insert(args.end(), {"--seed", "13", "--jobs", jobs});
      if (cli(args) != 0) failed.push_back(args[0]);
    }
    return failed;
  };
  const fs::path a = scratch / "det_a", b = scratch / "det_b", c = scratch / "det_c";
  const auto fa = pipeline(a, "1"), fb = pipeline(b, "1"), fc = pipeline(c, "3");
  v.require(fa.empty() && fb.empty() && fc.empty(), "14 commands over 10 subcommands exit 0");

  std::size_t files = 0, mismatched = 0;
  std::string first_mismatch;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(entry.path(), a);
    const std::string bytes = slurp(entry.path());
    if (bytes != slurp(b / rel) || bytes != slurp(c / rel)) {
      ++mismatched;
      if (first_mismatch.empty()) first_mismatch = rel.string();
    }
  }
  v.require(files > 0 && mismatched == 0,
            std::to_string(files) + " output files identical across reruns and --jobs 1/3" +
                (first_mismatch.empty() ? "" : " (first mismatch " + first_mismatch + ")"));
  return v;
}

Verdict invariant_suites() {
  Verdict v;
  for (const std::string suite : {"test_neuralcore", "test_cogmodel", "test_afm", "test_ingest", "test_representation",
                                  "test_apprentice"}) {
    const auto t0 = Clock::now();
    const std::string cmd = std::string(COGRL_TEST_DIR) + "/" + suite + " --no-intro --minimal > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const double secs = since(t0);
    v.require(status == 0 && secs < 60.0, suite + (status == 0 ? " passed" : " FAILED") + " in " + fmt(secs, 1) + " s");
  }
  return v;
}

}  // namespace

int main() {
  Scratch scratch;
  report(1, "gradient fidelity", [&] { return gradient_fidelity(scratch.dir); });
  report(2, "convolution/LSTM transcription", transcription);
  report(3, "AFM parameter recovery", afm_recovery);

  std::vector<VisualRun> visual;
  std::string visual_error;
  try {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) visual.push_back(visual_pipeline(seed));
  } catch (const std::exception& e) {
    visual_error = e.what();
  }
  auto visual_check = [&](auto&& check) {
    return [&, check] {
      if (!visual_error.empty()) throw std::runtime_error(visual_error);
      return check();
    };
  };
  report(4, "model ordering on the visual domain",
         visual_check([&] { return table_ordering(visual); }));
  report(5, "representation clustering", visual_check([&] { return clustering(visual); }));
  report(6, "cloze pipeline", cloze_pipeline);
  report(7, "apprentice study shape", apprentice_shape);
  report(8, "CLI determinism", [&] { return determinism(scratch.dir); });
  report(9, "invariant suites", invariant_suites);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
