#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "badam/kernels.hpp"
#include "badam/matrix.hpp"

using namespace badam;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

struct Dims {
  std::size_t m, k, n;
};

const std::vector<Dims> kShapes{{1, 1, 1}, {3, 5, 2}, {17, 33, 9}, {64, 100, 100}, {5, 257, 3}};

}  // namespace

TEST_CASE("gemm variants match the serial reference bit for bit") {
  std::mt19937_64 rng(11);
  for (const auto& d : kShapes) {
    for (bool acc : {false, true}) {
      const Matrix a = random_matrix(d.m, d.k, rng);
      const Matrix b = random_matrix(d.k, d.n, rng);
      const Matrix init = random_matrix(d.m, d.n, rng);
      Matrix c1 = init, c2 = init;
      kernels::gemm_nn(a.view(), b.view(), c1.view(), acc);
      kernels::serial::gemm_nn(a.view(), b.view(), c2.view(), acc);
      CHECK(c1 == c2);

      const Matrix at = random_matrix(d.k, d.m, rng);
      Matrix t1 = init, t2 = init;
      kernels::gemm_tn(at.view(), b.view(), t1.view(), acc);
      kernels::serial::gemm_tn(at.view(), b.view(), t2.view(), acc);
      CHECK(t1 == t2);

      const Matrix bt = random_matrix(d.n, d.k, rng);
      Matrix n1 = init, n2 = init;
      kernels::gemm_nt(a.view(), bt.view(), n1.view(), acc);
      kernels::serial::gemm_nt(a.view(), bt.view(), n2.view(), acc);
      CHECK(n1 == n2);
    }
  }
}

TEST_CASE("gemm_nn agrees with a naive triple loop") {
  std::mt19937_64 rng(3);
  const Matrix a = random_matrix(7, 11, rng);
  const Matrix b = random_matrix(11, 5, rng);
  Matrix c(7, 5);
  kernels::gemm_nn(a.view(), b.view(), c.view());
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < 11; ++p) s += static_cast<long double>(a(i, p)) * b(p, j);
      CHECK(c(i, j) == doctest::Approx(static_cast<double>(s)).epsilon(1e-13));
    }
}

TEST_CASE("element-wise kernels match the serial reference") {
  std::mt19937_64 rng(5);
  for (const auto& d : kShapes) {
    const Matrix a = random_matrix(d.m, d.n, rng);
    std::vector<double> bias(d.n);
    for (std::size_t j = 0; j < d.n; ++j) bias[j] = 0.1 * static_cast<double>(j);

    Matrix x = a, y = a;
    kernels::add_row_vector(x.view(), bias);
    kernels::serial::add_row_vector(y.view(), bias);
    CHECK(x == y);

    std::vector<double> s1(d.n), s2(d.n);
    kernels::column_sums(a.view(), s1);
    kernels::serial::column_sums(a.view(), s2);
    CHECK(s1 == s2);

    Matrix r1 = a, r2 = a;
    kernels::relu_inplace(r1.view());
    kernels::serial::relu_inplace(r2.view());
    CHECK(r1 == r2);
    for (double v : r1.values()) CHECK(v >= 0.0);

    const Matrix scale = random_matrix(d.m, d.n, rng);
    Matrix g1 = a, g2 = a;
    kernels::relu_backward(g1.view(), r1.view(), scale.view());
    kernels::serial::relu_backward(g2.view(), r1.view(), scale.view());
    CHECK(g1 == g2);
    Matrix h1 = a, h2 = a;
    kernels::relu_backward(h1.view(), r1.view(), ConstMatrixView{});
    kernels::serial::relu_backward(h2.view(), r1.view(), ConstMatrixView{});
    CHECK(h1 == h2);

    Matrix p1 = a, p2 = a;
    kernels::softmax_rows(p1.view());
    kernels::serial::softmax_rows(p2.view());
    CHECK(p1 == p2);

    Matrix m1 = a, m2 = a;
    kernels::multiply_inplace(m1.view(), scale.view());
    kernels::serial::multiply_inplace(m2.view(), scale.view());
    CHECK(m1 == m2);
  }
}

TEST_CASE("softmax_rows survives large logits") {
  Matrix m{{1000.0, 1000.0}, {-1000.0, 0.0}};
  kernels::softmax_rows(m.view());
  CHECK(m(0, 0) == doctest::Approx(0.5));
  CHECK(m(1, 1) == doctest::Approx(1.0));
  for (double v : m.values()) CHECK(std::isfinite(v));
}
