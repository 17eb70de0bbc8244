#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>
#include <sstream>

#include "cogrl/error.hpp"
#include "cogrl/qmatrix.hpp"
#include "cogrl/tsv.hpp"

using namespace cogrl;

namespace {

TsvTable table_of(const std::string& text) {
  std::istringstream in(text);
  return read_tsv(in, "mem");
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("i" + std::to_string(i));
  return out;
}

QMatrix random_q(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double density) {
  std::bernoulli_distribution on(density);
  std::vector<std::string> kcs;
  for (std::size_t k = 0; k < cols; ++k) kcs.push_back("k" + std::to_string(k));
  std::vector<std::uint8_t> cells(rows * cols);
  for (auto& c : cells) c = on(rng);
  // Force some duplicate columns now and then.
  if (cols >= 2 && on(rng)) {
    for (std::size_t r = 0; r < rows; ++r) cells[r * cols + 1] = cells[r * cols];
  }
  return QMatrix(ids(rows), kcs, cells);
}

std::set<std::string> memberships(const QMatrix& q, std::size_t row) {
  std::set<std::string> out;
  for (auto k : q.kcs_of(row)) {
    std::string name = q.kc_names()[k];
    std::size_t start = 0;
    for (std::size_t plus = name.find('+'); plus != std::string::npos; plus = name.find('+', start)) {
      out.insert(name.substr(start, plus - start));
      start = plus + 1;
    }
    out.insert(name.substr(start));
  }
  return out;
}

}  // namespace

TEST_CASE("faculty transfer is a single all-ones column") {
  for (std::size_t n : {1u, 3u, 17u}) {
    const QMatrix q = faculty_transfer(ids(n));
    REQUIRE(q.rows() == n);
    REQUIRE(q.cols() == 1);
    CHECK(q.kc_names().front() == "faculty");
    CHECK(q.col_sum(0) == n);
    for (std::size_t r = 0; r < n; ++r) CHECK(q.at(r, 0));
  }
}

TEST_CASE("identical transfer is the identity") {
  for (std::size_t n : {1u, 3u, 9u}) {
    const QMatrix q = identical_transfer(ids(n));
    REQUIRE(q.rows() == n);
    REQUIRE(q.cols() == n);
    for (std::size_t r = 0; r < n; ++r) {
      CHECK(q.row_sum(r) == 1);
      CHECK(q.col_sum(r) == 1);
      CHECK(q.at(r, r));
      CHECK(q.kc_names()[r] == "item_" + q.item_ids()[r]);
    }
  }
  CHECK_THROWS_AS(identical_transfer({"a", "b", "a"}), InputError);
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(QMatrix({"a"}, {"k", "k"}, {1, 0}), InputError);
  CHECK_THROWS_AS(QMatrix({"a"}, {"k"}, {1, 0}), DimensionError);
  CHECK_THROWS_AS(QMatrix({"a"}, {"k"}, {2}), InputError);
}

TEST_CASE("human model from an item/KC pair table") {
  const auto t = table_of("item_id\tkc_name\nA\tkc1\nB\tkc1\nB\tkc2\n");
  const QMatrix q = load_human_model(t, {"A", "B"});
  REQUIRE(q.cols() == 2);
  CHECK(q.kc_names() == std::vector<std::string>{"kc1", "kc2"});
  CHECK(q.at(0, 0));
  CHECK_FALSE(q.at(0, 1));
  CHECK(q.at(1, 0));
  CHECK(q.at(1, 1));

  try {
    load_human_model(t, {"A", "B", "C"});
    FAIL("missing item accepted");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("C") != std::string::npos);
  }
  CHECK_THROWS_AS(load_human_model(t, {"A"}), InputError);
  CHECK_THROWS_AS(load_human_model(table_of("item_id\tkc_name\n"), {"A"}), InputError);

  std::string nine = "item_id\tkc_name\n";
  std::vector<std::string> items;
  for (int i = 0; i < 18; ++i) {
    items.push_back("q" + std::to_string(i));
    nine += items.back() + "\tkc" + std::to_string(i % 9) + "\n";
  }
  CHECK(load_human_model(table_of(nine), items).cols() == 9);

  const QMatrix back = load_human_model(table_of(human_model_tsv(q)), {"A", "B"});
  CHECK(back == q);
}

TEST_CASE("sanitation examples") {
  SUBCASE("zero column dropped") {
    const QMatrix q({"a", "b"}, {"x", "y"}, {1, 0, 1, 0});
    const auto s = sanitize_qmatrix(q);
    CHECK(s.q.kc_names() == std::vector<std::string>{"x"});
    CHECK(s.report.dropped_columns == std::vector<std::string>{"y"});
    CHECK(s.report.changed());
  }
  SUBCASE("duplicate columns merged") {
    const QMatrix q({"a", "b"}, {"x", "y", "z"}, {1, 1, 0, 0, 0, 1});
    const auto s = sanitize_qmatrix(q);
    CHECK(s.q.kc_names() == std::vector<std::string>{"x+y", "z"});
    REQUIRE(s.report.merged_columns.size() == 1);
    CHECK(s.report.merged_columns[0].second == "x+y");
  }
  SUBCASE("all-zero row gets the shared residual KC") {
    const QMatrix q({"a", "b", "c"}, {"x"}, {1, 0, 0});
    const auto s = sanitize_qmatrix(q);
    CHECK(s.q.kc_names() == std::vector<std::string>{"x", "residual"});
    CHECK(s.q.at(1, 1));
    CHECK(s.q.at(2, 1));
    CHECK_FALSE(s.q.at(0, 1));
    CHECK(s.report.residual_items == std::vector<std::string>{"b", "c"});
  }
  SUBCASE("residual name avoids collisions") {
    const QMatrix q({"a", "b"}, {"residual"}, {1, 0});
    CHECK(sanitize_qmatrix(q).q.kc_names().back() == "residual_1");
  }
  SUBCASE("an already clean matrix is untouched") {
    const QMatrix q = identical_transfer(ids(4));
    const auto s = sanitize_qmatrix(q);
    CHECK(s.q == q);
    CHECK_FALSE(s.report.changed());
  }
}

TEST_CASE("sanitation properties over random matrices") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t rows = 1 + rng() % 12, cols = 1 + rng() % 8;
    const double density = (rng() % 5) / 8.0;
    const QMatrix q = random_q(rng, rows, cols, density);
    const auto once = sanitize_qmatrix(q);
    const auto twice = sanitize_qmatrix(once.q);
    CHECK(once.q.is_sanitized());
    CHECK(twice.q == once.q);
    CHECK_FALSE(twice.report.changed());
    CHECK(once.q.item_ids() == q.item_ids());
    std::set<std::string> names(once.q.kc_names().begin(), once.q.kc_names().end());
    CHECK(names.size() == once.q.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      if (q.row_sum(r) == 0) {
        CHECK(once.q.row_sum(r) == 1);
        CHECK(once.q.kc_names()[once.q.kcs_of(r).front()] == once.report.residual_kc);
      } else {
        CHECK(memberships(once.q, r) == memberships(q, r));
      }
    }
  }
}

TEST_CASE("Q-matrix TSV round trip") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const QMatrix q = random_q(rng, 1 + rng() % 6, 1 + rng() % 5, 0.4);
    CHECK(read_qmatrix(table_of(qmatrix_tsv(q))) == q);
  }
  CHECK_THROWS_AS(read_qmatrix(table_of("item_id\tk\na\t2\n")), InputError);
  CHECK_THROWS_AS(read_qmatrix(table_of("item\tk\na\t1\n")), InputError);
}
