#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "las/gradcheck.hpp"
#include "las/tape.hpp"

#include <random>

using las::Tape;
using las::Var;

namespace {

Eigen::MatrixXd randm(int r, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = d(rng);
  return m;
}

}  // namespace

TEST_CASE("matmul identity and small products") {
  Tape<double> t;
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd v(2, 1);
  v << 3, 4;
  Var out = t.matmul(t.input(eye), t.input(v));
  CHECK(t.value(out)(0, 0) == doctest::Approx(3));
  CHECK(t.value(out)(1, 0) == doctest::Approx(4));

  Eigen::MatrixXd a(1, 2);
  a << 1, 2;
  Var out2 = t.matmul(t.input(a), t.input(v));
  CHECK(t.value(out2)(0, 0) == doctest::Approx(11));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tape<double> t;
  Var a = t.input(Eigen::MatrixXd::Zero(2, 3));
  Var b = t.input(Eigen::MatrixXd::Zero(2, 3));
  CHECK_THROWS_AS(t.matmul(a, b), las::DimensionError);
}

TEST_CASE("elementwise basics") {
  Tape<double> t;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 1);
  CHECK(t.value(t.sigmoid_(t.input(z)))(0, 0) == doctest::Approx(0.5));
  CHECK(t.value(t.sigmoid_(t.input(z)))(1, 0) == doctest::Approx(0.5));
  CHECK(t.value(t.tanh_(t.input(z)))(0, 0) == doctest::Approx(0.0));
  Var a = t.input(Eigen::MatrixXd::Zero(2, 2));
  Var b = t.input(Eigen::MatrixXd::Zero(3, 2));
  CHECK_THROWS_AS(t.add(a, b), las::DimensionError);
  CHECK_THROWS_AS(t.cmul(a, b), las::DimensionError);
}

TEST_CASE("softmax properties") {
  Tape<double> t;
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(4, 1, 7.3);
  Eigen::MatrixXd sm = t.value(t.softmax_col(t.input(c)));
  for (int i = 0; i < 4; ++i) CHECK(sm(i) == doctest::Approx(0.25));

  Eigen::MatrixXd l(2, 1);
  l << std::log(1.0), std::log(3.0);
  sm = t.value(t.softmax_col(t.input(l)));
  CHECK(sm(0) == doctest::Approx(0.25));
  CHECK(sm(1) == doctest::Approx(0.75));

  Eigen::MatrixXd big(2, 1);
  big << 1000.0, 0.0;
  sm = t.value(t.softmax_col(t.input(big)));
  CHECK(sm(0) == doctest::Approx(1.0));
  CHECK(sm(1) == doctest::Approx(0.0));
}

TEST_CASE("softmax shift invariance and normalization on random logits") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd l = randm(6, 1, rng) * 5.0;
    Tape<double> t;
    Eigen::MatrixXd a = t.value(t.softmax_col(t.input(l)));
    Eigen::MatrixXd b =
        t.value(t.softmax_col(t.input((l.array() + 13.7).matrix())));
    CHECK(a.sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("grad_check closed form sum of squares") {
  Eigen::MatrixXd x(2, 1);
  x << 1, 2;
  auto f = [](Tape<double>& t, const std::vector<Var>& in) {
    return t.sum(t.cmul(in[0], in[0]));
  };
  Tape<double> t;
  Var xv = t.input(x);
  Var out = f(t, {xv});
  t.backward(out);
  CHECK(t.grad(xv)(0, 0) == doctest::Approx(2.0));
  CHECK(t.grad(xv)(1, 0) == doctest::Approx(4.0));
  auto report = las::grad_check(f, {x}, {"x"}, 1e-5, 1e-6);
  CHECK(report.passed);
}

TEST_CASE("primitive gradients match finite differences on random instances") {
  std::mt19937_64 rng(42);
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd a = randm(3, 4, rng);
    Eigen::MatrixXd b = randm(4, 2, rng);
    auto f = [](Tape<double>& t, const std::vector<Var>& in) {
      Var m = t.matmul(in[0], in[1]);
      Var s = t.sigmoid_(m);
      Var th = t.tanh_(t.add(m, s));
      return t.sum(t.cmul(th, s));
    };
    auto report = las::grad_check(f, {a, b}, {"a", "b"}, 1e-5, 1e-6);
    CHECK(report.passed);
  }
}

TEST_CASE("matmul 5x4 * 4x3 backward matches finite differences") {
  std::mt19937_64 rng(11);
  Eigen::MatrixXd a = randm(5, 4, rng);
  Eigen::MatrixXd b = randm(4, 3, rng);
  auto f = [](Tape<double>& t, const std::vector<Var>& in) {
    return t.sum(t.tanh_(t.matmul(in[0], in[1])));
  };
  auto report = las::grad_check(f, {a, b}, {"a", "b"}, 1e-5, 1e-6);
  CHECK(report.passed);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("softmax, log_softmax, rows, concat, stack gradients") {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 20; ++it) {
    Eigen::MatrixXd a = randm(5, 1, rng);
    Eigen::MatrixXd b = randm(3, 1, rng);
    Eigen::MatrixXd w = randm(1, 8, rng);
    auto f = [](Tape<double>& t, const std::vector<Var>& in) {
      Var sm = t.softmax_col(in[0]);
      Var ls = t.log_softmax_col(in[1]);
      Var cat = t.concat_rows(sm, ls);
      Var st = t.stack_rows({cat, cat});
      Var picked = t.pick(st, 1, 2);
      return t.add(t.sum(t.matmul(in[2], t.transpose(t.rows(st, 0, 1)))),
                   picked);
    };
    auto report = las::grad_check(f, {a, b, w}, {"a", "b", "w"}, 1e-5, 1e-6);
    CHECK(report.passed);
  }
}

TEST_CASE("fan-out accumulates the sum of both uses") {
  Eigen::MatrixXd x(2, 1);
  x << 0.3, -0.7;
  // y = sum(x .* x) uses x twice; grad must be 2x.
  Tape<double> t;
  Var xv = t.input(x);
  Var y = t.sum(t.cmul(xv, xv));
  t.backward(y);
  CHECK(t.grad(xv)(0) == doctest::Approx(0.6));
  CHECK(t.grad(xv)(1) == doctest::Approx(-1.4));

  // Compare against single-use gradients via a frozen copy.
  Tape<double> t2;
  Var x1 = t2.input(x);
  Var x2 = t2.input(x);
  Var y2 = t2.sum(t2.cmul(x1, x2));
  t2.backward(y2);
  Eigen::MatrixXd summed = t2.grad(x1) + t2.grad(x2);
  CHECK((summed - t.grad(xv)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non-finite forward values are a hard error") {
  Tape<double> t;
  Eigen::MatrixXd bad(1, 1);
  bad << std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(t.input(bad), las::NumericError);
  Eigen::MatrixXd huge = Eigen::MatrixXd::Constant(1, 1, 1e308);
  Var h = t.input(huge);
  CHECK_THROWS_AS(t.cmul(h, h), las::NumericError);
}

TEST_CASE("long concat chains survive node-storage reallocation") {
  // Growing the tape reallocates its node vector; operand sizes must be
  // captured before the new node is appended or the backward split widths
  // read freed memory. A long chain from a fresh tape crosses many capacity
  // boundaries mid-concat.
  Tape<double> t;
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  Var acc = t.input(one);
  const int links = 4000;
  for (int i = 0; i < links; ++i) acc = t.concat_rows(acc, t.input(one));
  CHECK(t.value(acc).rows() == links + 1);
  Var total = t.sum(acc);
  CHECK(t.value(total)(0, 0) == doctest::Approx(links + 1));
  t.backward(total);
  // Every leaf contributes exactly once to the sum.
  CHECK(t.grad(acc).minCoeff() == doctest::Approx(1.0));
  CHECK(t.grad(acc).maxCoeff() == doctest::Approx(1.0));
}
