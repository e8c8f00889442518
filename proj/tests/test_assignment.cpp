#include "doctest.h"

#include <random>

#include "test_support.hpp"
#include "trajkit/assignment.hpp"
#include "trajkit/errors.hpp"

using namespace trajkit;

TEST_CASE("square and rectangular fixtures") {
  Eigen::MatrixXd c(3, 3);
  c << 4, 1, 3,
       2, 0, 5,
       3, 2, 2;
  const Assignment a = solve_assignment(c);
  CHECK(a.row_to_col == std::vector<int>{1, 0, 2});
  CHECK(a.total_cost == 5.0);

  Eigen::MatrixXd wide(2, 4);
  wide << 9, 9, 1, 9,
          9, 2, 9, 9;
  CHECK(solve_assignment(wide).row_to_col == std::vector<int>{2, 1});

  Eigen::MatrixXd tall = wide.transpose();
  CHECK(solve_assignment(tall).row_to_col == std::vector<int>{-1, 1, 0, -1});
}

TEST_CASE("ties resolve lexicographically") {
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(3, 3);
  CHECK(solve_assignment(flat).row_to_col == std::vector<int>{0, 1, 2});
  const Eigen::MatrixXd tall = Eigen::MatrixXd::Zero(3, 2);
  CHECK(solve_assignment(tall).row_to_col == std::vector<int>{0, 1, -1});
}

TEST_CASE("empty and invalid input") {
  CHECK(solve_assignment(Eigen::MatrixXd(0, 3)).row_to_col.empty());
  CHECK(solve_assignment(Eigen::MatrixXd(2, 0)).row_to_col == std::vector<int>{-1, -1});
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve_assignment(bad), Error);
}

TEST_CASE("agrees with brute force on small random matrices") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 5), small(0, 3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 200; ++t) {
    Eigen::MatrixXd c(dim(rng), dim(rng));
    const bool integer = t % 2 == 0;
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = integer ? small(rng) : u(rng);
    const auto [want, cost] = testing::brute_force_assignment(c);
    const Assignment got = solve_assignment(c);
    CHECK(got.row_to_col == want);
    CHECK(got.total_cost == doctest::Approx(cost).epsilon(1e-12));
  }
}
