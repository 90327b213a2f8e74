#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "fsl/linalg.hpp"

using namespace fsl;
using Catch::Matchers::WithinAbs;

TEST_CASE("softmax matches the hand-computed two-logit value", "[linalg]") {
  Vec p = softmax(Vec{1.0, 0.0});
  // e/(e+1) and 1/(e+1)
  CHECK_THAT(p[0], WithinAbs(0.7310585786300049, 1e-12));
  CHECK_THAT(p[1], WithinAbs(0.2689414213699951, 1e-12));
}

TEST_CASE("softmax of equal logits is uniform", "[linalg]") {
  Vec p = softmax(Vec{0.0, 0.0});
  CHECK_THAT(p[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(p[1], WithinAbs(0.5, 1e-15));
}

TEST_CASE("softmax survives large logit gaps without overflow", "[linalg]") {
  Vec p = softmax(Vec{1000.0, 0.0});
  CHECK(all_finite(p));
  CHECK_THAT(p[0], WithinAbs(1.0, 1e-12));
  CHECK(p[1] >= 0.0);
  CHECK(p[1] < 1e-12);
}

TEST_CASE("softmax rows sum to one and stay positive", "[linalg]") {
  Vec logits{3.2, -1.5, 0.0, 7.9, -12.0};
  Vec p = softmax(logits);
  double s = 0.0;
  for (double v : p) {
    CHECK(v > 0.0);
    s += v;
  }
  CHECK_THAT(s, WithinAbs(1.0, 1e-12));
}

TEST_CASE("softmax rejects empty and non-finite input", "[linalg]") {
  CHECK_THROWS_AS(softmax(Vec{}), Error);
  CHECK_THROWS_AS(softmax(Vec{1.0, std::numeric_limits<double>::quiet_NaN()}), Error);
  try {
    softmax(Vec{});
  } catch (const Error& e) {
    CHECK(e.code() == errc::invalid_input);
  }
}

TEST_CASE("cosine similarity on identical, orthogonal and scaled vectors", "[linalg]") {
  Vec a{1.0, 0.0}, b{0.0, 1.0}, c{3.0, 4.0}, d{6.0, 8.0};
  CHECK_THAT(cosine_similarity(a, a), WithinAbs(1.0, 1e-15));
  CHECK_THAT(cosine_similarity(a, b), WithinAbs(0.0, 1e-15));
  CHECK_THAT(cosine_similarity(c, d), WithinAbs(1.0, 1e-15));
}

TEST_CASE("cosine similarity errors on shape mismatch and zero vectors", "[linalg]") {
  Vec a{1.0, 0.0}, three{1.0, 0.0, 0.0}, zero{0.0, 0.0};
  CHECK_THROWS_AS(cosine_similarity(a, three), Error);
  try {
    cosine_similarity(a, zero);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::degenerate_vector);
  }
}

TEST_CASE("cosine similarity stays inside [-1, 1]", "[linalg]") {
  Vec a{1e-8, 1e8, -3.7}, b{2e-8, 2e8, -7.4};
  double c = cosine_similarity(a, b);
  CHECK(c <= 1.0);
  CHECK(c >= -1.0);
}

TEST_CASE("argmax breaks ties toward the lowest index", "[linalg]") {
  Vec v{0.25, 0.5, 0.5, 0.1};
  CHECK(argmax_lowest(v) == 1);
  Vec u{2.0, 2.0, 2.0};
  CHECK(argmax_lowest(u) == 0);
}

TEST_CASE("mean_row averages rows and rejects empty matrices", "[linalg]") {
  Matrix m = Matrix::from_rows({{1.0, 0.0}, {3.0, 2.0}});
  Vec mean = mean_row(m);
  CHECK_THAT(mean[0], WithinAbs(2.0, 1e-15));
  CHECK_THAT(mean[1], WithinAbs(1.0, 1e-15));
  CHECK_THROWS_AS(mean_row(Matrix{}), Error);
}

TEST_CASE("matrix rows append and read back", "[linalg]") {
  Matrix m;
  m.append_row(Vec{1.0, 2.0, 3.0});
  m.append_row(Vec{4.0, 5.0, 6.0});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6.0);
  Vec r = m.row_copy(0);
  CHECK(r == Vec{1.0, 2.0, 3.0});
  m.set_row(0, Vec{7.0, 8.0, 9.0});
  CHECK(m.at(0, 0) == 7.0);
}

TEST_CASE("squared distance is symmetric and zero on itself", "[linalg]") {
  Vec a{1.0, 2.0, -3.0}, b{0.5, -1.0, 4.0};
  CHECK(squared_distance(a, a) == 0.0);
  CHECK_THAT(squared_distance(a, b), WithinAbs(squared_distance(b, a), 1e-15));
  CHECK_THAT(squared_distance(a, b), WithinAbs(0.25 + 9.0 + 49.0, 1e-12));
}

TEST_CASE("all_finite flags NaN and infinity", "[linalg]") {
  CHECK(all_finite(Vec{1.0, -2.0, 0.0}));
  CHECK_FALSE(all_finite(Vec{1.0, std::numeric_limits<double>::infinity()}));
  Matrix m = Matrix::from_rows({{1.0}, {std::numeric_limits<double>::quiet_NaN()}});
  CHECK_FALSE(all_finite(m));
}
