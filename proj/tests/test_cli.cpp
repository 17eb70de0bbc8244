#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cogrl/cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
  nlohmann::json manifest() const {
    const auto end = err.find_last_not_of('\n');
    const auto begin = err.rfind('\n', end);
    return nlohmann::json::parse(err.substr(begin == std::string::npos ? 0 : begin + 1, end + 1));
  }
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cogrl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cogrl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Scratch {
  fs::path dir = fs::temp_directory_path() / ("cogrl_cli_" + std::to_string(::getpid()));
  Scratch() {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(cogrl::cli::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(cogrl::cli::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(cogrl::cli::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("usage errors and help") {
  CHECK(invoke({}).code == cogrl::cli::kUsage);
  CHECK(invoke({"frobnicate"}).code == cogrl::cli::kUsage);
  CHECK(invoke({"fit-afm", "--log", "x"}).code == cogrl::cli::kUsage);
  CHECK(invoke({"gradcheck", "--no-such-flag"}).code == cogrl::cli::kUsage);
  CHECK(invoke({"gradcheck", "--jobs", "0"}).code == cogrl::cli::kUsage);
  const auto help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("Exit codes") != std::string::npos);
}

TEST_CASE("error classes map to exit codes") {
  Scratch s;
  const auto missing = invoke({"fit-afm", "--log", s / "none.tsv", "--q", s / "none.tsv", "--out", s / "p.tsv"});
  CHECK(missing.code == cogrl::cli::kInput);
  CHECK(missing.err.find("none.tsv") != std::string::npos);
  CHECK(missing.manifest()["exit_code"] == cogrl::cli::kInput);

  CHECK(invoke({"synth", "visual", "--templates", "1", "--out-dir", s / "v"}).code == cogrl::cli::kConfig);
  CHECK(invoke({"gradcheck", "--arch", "rnn"}).code == cogrl::cli::kConfig);
  CHECK(invoke({"gradcheck", "--tolerance", "1e-30"}).code == cogrl::cli::kNumeric);

  std::ofstream(s / "bad.tsv") << "student_id\titem_id\toutcome\torder\ns\ti\t2\t1\n";
  std::ofstream(s / "q.tsv") << "item_id\tk\ni\t1\n";
  CHECK(invoke({"fit-afm", "--log", s / "bad.tsv", "--q", s / "q.tsv", "--out", s / "p.tsv"}).code ==
        cogrl::cli::kInput);
}

TEST_CASE("manifest records flags, seed and digests") {
  Scratch s;
  std::ofstream(s / "t.tsv") << "student_id\titem_id\toutcome\torder\ns\ti\t1\t1\ns\tj\t0\t2\nu\ti\t0\t1\n";
  const auto r = invoke({"cv", "--log", s / "t.tsv", "--q", s / "t.tsv", "--out", s / "cv.tsv"});
  CHECK(r.code == cogrl::cli::kInput);  // a log is not a Q-matrix

  std::ofstream(s / "q.tsv") << "item_id\tk\ni\t1\nj\t1\n";
  const auto ok = invoke({"fit-afm", "--seed", "9", "--log", s / "t.tsv", "--q", s / "q.tsv", "--out", s / "p.tsv",
                         "--manifest", s / "m.json"});
  REQUIRE(ok.code == 0);
  const auto m = ok.manifest();
  CHECK(m["subcommand"] == "fit-afm");
  CHECK(m["seed"] == 9);
  CHECK(m["flags"]["--l2-theta"] == "1");
  CHECK(m["inputs"][s / "t.tsv"] ==
        "fnv1a64:" + [&] {
          std::ostringstream h;
          h << std::hex << std::setw(16) << std::setfill('0') << cogrl::cli::fnv1a64(slurp(s / "t.tsv"));
          return h.str();
        }());
  CHECK(m["outputs"][0] == s / "p.tsv");
  CHECK(nlohmann::json::parse(slurp(s / "m.json"))["subcommand"] == "fit-afm");
}

TEST_CASE("seed falls back to COGRL_SEED") {
  Scratch s;
  ::setenv("COGRL_SEED", "5", 1);
  const auto env = invoke({"synth", "afm-log", "--students", "4", "--items", "6", "--out-dir", s / "a"});
  ::unsetenv("COGRL_SEED");
  const auto flag = invoke({"synth", "afm-log", "--students", "4", "--items", "6", "--seed", "5", "--out-dir", s / "b"});
  const auto zero = invoke({"synth", "afm-log", "--students", "4", "--items", "6", "--out-dir", s / "c"});
  REQUIRE(env.code == 0);
  CHECK(env.manifest()["seed_source"] == "COGRL_SEED");
  CHECK(zero.manifest()["seed"] == 0);
  CHECK(slurp(s / "a/transactions.tsv") == slurp(s / "b/transactions.tsv"));
  CHECK(slurp(s / "a/transactions.tsv") != slurp(s / "c/transactions.tsv"));

  ::setenv("COGRL_SEED", "abc", 1);
  CHECK(invoke({"gradcheck"}).code == cogrl::cli::kUsage);
  ::unsetenv("COGRL_SEED");
}

TEST_CASE("recovery pipeline through the CLI") {
  Scratch s;
  REQUIRE(invoke({"synth", "afm-log", "--seed", "1", "--out-dir", s / "d"}).code == 0);
  REQUIRE(invoke({"fit-afm", "--log", s / "d/transactions.tsv", "--q", s / "d/q.tsv", "--out", s / "p.tsv"}).code == 0);
  const auto r = invoke({"param-report", "--params", s / "p.tsv", "--q", s / "d/q.tsv", "--other",
                        s / "d/truth_params.tsv", "--out", s / "r.tsv"});
  REQUIRE(r.code == 0);
  const auto last = r.out.substr(r.out.rfind("correlation"));
  std::istringstream row(last);
  std::string label;
  double intercept = 0, slope = 0;
  row >> label >> intercept >> slope;
  CHECK(intercept >= 0.9);
  CHECK(slope >= 0.8);

  const auto cmp = invoke({"compare", "--log", s / "d/transactions.tsv", "--models",
                          "faculty,identical,truth=" + s / "d/q.tsv", "--out", s / "c.tsv"});
  REQUIRE(cmp.code == 0);
  CHECK(slurp(s / "c.tsv").find("truth") != std::string::npos);
  CHECK(invoke({"compare", "--log", s / "d/transactions.tsv", "--models", "bogus", "--out", s / "c2.tsv"}).code ==
        cogrl::cli::kConfig);
}
