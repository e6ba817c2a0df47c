#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>

#include "mslstm/errors.hpp"
#include "mslstm/prng.hpp"
#include "mslstm/tensor.hpp"

using namespace mslstm;

namespace {

Tensor random_matrix(int rows, int cols, Xoshiro256ss& rng) {
  Tensor t({rows, cols});
  for (double& v : t.data()) {
    v = rng.uniform(-2.0, 2.0);
  }
  return t;
}

// Reference matmul written independently of the library kernel.
Tensor matmul_reference(const Tensor& a, const Tensor& b) {
  Tensor out({a.dim(0), b.dim(1)});
  for (int i = 0; i < a.dim(0); ++i) {
    for (int j = 0; j < b.dim(1); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.dim(1); ++k) {
        acc += a(i, k) * b(k, j);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("tensor construction and element access") {
  Tensor t({2, 3});
  CHECK(t.rank() == 2);
  CHECK(t.dim(0) == 2);
  CHECK(t.dim(1) == 3);
  CHECK(t.size() == 6);
  for (double v : t.data()) {
    CHECK(v == 0.0);
  }

  t(1, 2) = 5.0;
  CHECK(t(1, 2) == 5.0);
  CHECK(t.data()[5] == 5.0);  // row-major

  const Tensor s = Tensor::scalar(3.5);
  CHECK(s.rank() == 0);
  CHECK(s.size() == 1);

  const Tensor v = Tensor::vec({1.0, 2.0});
  CHECK(v.rank() == 1);
  CHECK(v(1) == 2.0);

  const Tensor m = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
  CHECK(m(0, 1) == 2.0);
  CHECK(m(1, 0) == 3.0);

  const Tensor r = m.row(1);
  CHECK(r.rank() == 1);
  CHECK(r(0) == 3.0);
  CHECK(r(1) == 4.0);
}

TEST_CASE("tensor rejects mismatched data size and negative dims") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  CHECK_THROWS_AS(Tensor({-1, 2}), DimensionError);
  // Zero-size dimensions are legal; empty tensors take part in concat.
  const Tensor empty({0});
  CHECK(empty.size() == 0);
  CHECK(empty.empty());
}

TEST_CASE("matmul known case") {
  // [[1,2]] x [[3],[4]] = [[11]]
  const Tensor a = Tensor::matrix(1, 2, {1.0, 2.0});
  const Tensor b = Tensor::matrix(2, 1, {3.0, 4.0});
  const Tensor c = matmul(a, b);
  CHECK(c.rank() == 2);
  CHECK(c.dim(0) == 1);
  CHECK(c.dim(1) == 1);
  CHECK(c(0, 0) == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("matmul identity and reference oracle") {
  Xoshiro256ss rng(31);
  Tensor eye({4, 4});
  for (int i = 0; i < 4; ++i) {
    eye(i, i) = 1.0;
  }
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(rng.bounded(5));
    const int k = 1 + static_cast<int>(rng.bounded(5));
    const int n = 1 + static_cast<int>(rng.bounded(5));
    const Tensor a = random_matrix(m, k, rng);
    const Tensor b = random_matrix(k, n, rng);
    CHECK(max_abs_diff(matmul(a, b), matmul_reference(a, b)) < 1e-12);
  }
  const Tensor a = random_matrix(4, 4, rng);
  CHECK(max_abs_diff(matmul(a, eye), a) < 1e-15);
  CHECK(max_abs_diff(matmul(eye, a), a) < 1e-15);
}

TEST_CASE("matmul associativity") {
  Xoshiro256ss rng(7);
  const Tensor a = random_matrix(3, 4, rng);
  const Tensor b = random_matrix(4, 5, rng);
  const Tensor c = random_matrix(5, 2, rng);
  CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
}

TEST_CASE("matvec equals matmul against a column") {
  Xoshiro256ss rng(11);
  const Tensor a = random_matrix(3, 5, rng);
  Tensor x({5});
  for (double& v : x.data()) {
    v = rng.uniform(-2.0, 2.0);
  }
  const Tensor y = matvec(a, x);
  CHECK(y.rank() == 1);
  CHECK(y.dim(0) == 3);
  for (int i = 0; i < 3; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 5; ++j) {
      acc += a(i, j) * x(j);
    }
    CHECK(y(i) == doctest::Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("shape errors name both shapes") {
  const Tensor a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::matrix(2, 2, {1, 2, 3, 4});
  try {
    matmul(a, b);
    FAIL("matmul should have thrown");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
  try {
    add(a, b);
    FAIL("add should have thrown");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("elementwise operations") {
  const Tensor a = Tensor::vec({1.0, -2.0, 0.5});
  const Tensor b = Tensor::vec({2.0, 3.0, -1.0});

  const Tensor s = add(a, b);
  CHECK(s(0) == 3.0);
  CHECK(s(1) == 1.0);
  CHECK(s(2) == -0.5);

  const Tensor d = sub(a, b);
  CHECK(d(0) == -1.0);
  CHECK(d(1) == -5.0);
  CHECK(d(2) == 1.5);

  const Tensor h = hadamard(a, b);
  CHECK(h(0) == 2.0);
  CHECK(h(1) == -6.0);
  CHECK(h(2) == -0.5);

  const Tensor r = relu(a);
  CHECK(r(0) == 1.0);
  CHECK(r(1) == 0.0);
  CHECK(r(2) == 0.5);

  const Tensor g = sigmoid(Tensor::vec({0.0}));
  CHECK(g(0) == doctest::Approx(0.5).epsilon(1e-15));
  const Tensor t = tanh(Tensor::vec({0.0, 1e9}));
  CHECK(t(0) == 0.0);
  CHECK(t(1) == doctest::Approx(1.0).epsilon(1e-12));

  const Tensor af = affine(a, 2.0, 1.0);
  CHECK(af(0) == 3.0);
  CHECK(af(1) == -3.0);
  CHECK(af(2) == 2.0);

  CHECK(sum(a) == doctest::Approx(-0.5).epsilon(1e-15));

  const Tensor lg = log(Tensor::vec({1.0, std::exp(1.0)}));
  CHECK(lg(0) == 0.0);
  CHECK(lg(1) == doctest::Approx(1.0).epsilon(1e-14));

  const Tensor cl = clamp(a, -1.0, 0.75);
  CHECK(cl(0) == 0.75);
  CHECK(cl(1) == -1.0);
  CHECK(cl(2) == 0.5);
}

TEST_CASE("softmax of equal logits is uniform") {
  const Tensor p = softmax(Tensor::vec({0.0, 0.0, 0.0}));
  for (int i = 0; i < 3; ++i) {
    CHECK(p(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("softmax matches the direct formula and is shift invariant") {
  Xoshiro256ss rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.bounded(6));
    Tensor logits({n});
    for (double& v : logits.data()) {
      v = rng.uniform(-5.0, 5.0);
    }
    const Tensor p = softmax(logits);

    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
      denom += std::exp(logits(i));
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(p(i) == doctest::Approx(std::exp(logits(i)) / denom).epsilon(1e-12));
      total += p(i);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const Tensor shifted = softmax(affine(logits, 1.0, 100.0));
    CHECK(max_abs_diff(p, shifted) < 1e-12);
  }
}

TEST_CASE("softmax is stable at huge logits") {
  const Tensor p = softmax(Tensor::vec({1000.0, 999.0}));
  CHECK(p.all_finite());
  CHECK(p(0) + p(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p(0) > p(1));
}

TEST_CASE("concat joins vectors; the empty vector is an identity") {
  const Tensor a = Tensor::vec({1.0, 2.0});
  const Tensor b = Tensor::vec({3.0});
  const Tensor c = concat(a, b);
  CHECK(c.dim(0) == 3);
  CHECK(c(0) == 1.0);
  CHECK(c(1) == 2.0);
  CHECK(c(2) == 3.0);

  const Tensor empty({0});
  CHECK(max_abs_diff(concat(a, empty), a) == 0.0);
  CHECK(max_abs_diff(concat(empty, a), a) == 0.0);
}

TEST_CASE("mean_over_time averages columns") {
  const Tensor seq = Tensor::matrix(2, 2, {0.0, 1.0, 2.0, 3.0});
  const Tensor mean = mean_over_time(seq);
  CHECK(mean.rank() == 1);
  CHECK(mean(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mean(1) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(Tensor::vec({0.5, 0.5})) == 0);
  CHECK(argmax(Tensor::vec({0.1, 0.5, 0.5})) == 1);
  CHECK(argmax(Tensor::vec({3.0})) == 0);
  CHECK(argmax(Tensor::vec({-2.0, -1.0, -3.0})) == 1);
}
