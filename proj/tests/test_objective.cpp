#include <cmath>

#include "doctest.h"
#include "dret/errors.hpp"
#include "dret/objective.hpp"
#include "dret/rng.hpp"

using namespace dret;

TEST_CASE("sim computes dot and cosine with validation") {
  Eigen::VectorXd a(2), b(2);
  a << 1, 2;
  b << 3, 4;
  CHECK(sim(a, b) == 11.0);

  Eigen::VectorXd ortho(2);
  ortho << -2, 1;
  CHECK(sim(a, ortho) == 0.0);

  const LossConfig cosine{1.0, Similarity::cosine};
  CHECK(sim(a, 2 * a, cosine) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd short_vec(3);
  CHECK_THROWS_AS(sim(a, short_vec), DataError);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(sim(a, zero, cosine), DataError);
}

TEST_CASE("pretraining loss oracles") {
  // Uniform scores: softmax is flat, loss = ln n.
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 4, 0.7);
  CHECK(std::abs(loss_cpt(uniform, 1.0).loss - std::log(4.0)) < 1e-12);

  // n=2 diagonal 5: closed form ln(1 + e^-5).
  Eigen::MatrixXd s(2, 2);
  s << 5, 0, 0, 5;
  CHECK(std::abs(loss_cpt(s, 1.0).loss - std::log1p(std::exp(-5.0))) < 1e-12);

  CHECK_THROWS_AS(loss_cpt(Eigen::MatrixXd::Zero(2, 3), 1.0), DataError);
}

TEST_CASE("finetuning loss oracles") {
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 8, -1.25);
  CHECK(std::abs(loss_ft(uniform, 1.0).loss - std::log(8.0)) < 1e-12);

  Eigen::MatrixXd s(1, 2);
  s << 3, 1;
  CHECK(std::abs(loss_ft(s, 1.0).loss - std::log1p(std::exp(-2.0))) < 1e-12);

  // Large temperature flattens the softmax toward uniform over 2n candidates.
  Eigen::MatrixXd wild(3, 6);
  Rng rng(5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) wild(i, j) = 40 * rng.symmetric();
  CHECK(std::abs(loss_ft(wild, 1e6).loss - std::log(6.0)) < 1e-4);

  CHECK_THROWS_AS(loss_ft(Eigen::MatrixXd::Zero(3, 5), 1.0), DataError);
}

TEST_CASE("row-shift invariance on moderate scores") {
  Rng rng(17);
  Eigen::MatrixXd s(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) s(i, j) = 50 * rng.symmetric();
  const LossResult base = loss_cpt(s, 1.0);
  Eigen::MatrixXd shifted = s;
  shifted.row(2).array() += 37.5;
  const LossResult moved = loss_cpt(shifted, 1.0);
  CHECK(std::abs(base.loss - moved.loss) < 1e-10);
  CHECK((base.grad_scores - moved.grad_scores).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("grad_scores rows sum to zero and match finite differences") {
  Rng rng(23);
  Eigen::MatrixXd s(4, 8);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j) s(i, j) = 3 * rng.symmetric();
  const LossResult result = loss_ft(s, 0.7);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(result.grad_scores.row(i).sum()) < 1e-12);

  const double h = 1e-6;
  for (const auto [i, j] : {std::pair{0, 0}, {1, 5}, {3, 2}, {2, 7}}) {
    Eigen::MatrixXd plus = s, minus = s;
    plus(i, j) += h;
    minus(i, j) -= h;
    const double numeric = (loss_ft(plus, 0.7).loss - loss_ft(minus, 0.7).loss) / (2 * h);
    CHECK(std::abs(numeric - result.grad_scores(i, j)) < 1e-8);
  }
}

TEST_CASE("batch permutation leaves the loss unchanged") {
  Rng rng(29);
  const int n = 5;
  Eigen::MatrixXd s(n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2 * n; ++j) s(i, j) = 4 * rng.symmetric();
  const double base = loss_ft(s, 1.0).loss;

  const std::vector<int> perm = {3, 0, 4, 1, 2};
  Eigen::MatrixXd permuted(n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      permuted(i, j) = s(perm[i], perm[j]);
      permuted(i, n + j) = s(perm[i], n + perm[j]);
    }
  CHECK(std::abs(loss_ft(permuted, 1.0).loss - base) < 1e-12);
}

TEST_CASE("grad_wrt_embeddings chain rule matches finite differences") {
  Rng rng(31);
  const int n = 3, d = 5;
  Eigen::MatrixXd q(n, d), p(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      q(i, j) = rng.symmetric();
      p(i, j) = rng.symmetric();
    }

  for (const Similarity mode : {Similarity::dot, Similarity::cosine}) {
    const LossConfig config{1.0, mode};
    const auto loss_of = [&](const Eigen::MatrixXd& qq, const Eigen::MatrixXd& pp) {
      return loss_cpt(score_matrix(qq, pp, config), config.temperature).loss;
    };
    const LossResult at = loss_cpt(score_matrix(q, p, config), config.temperature);
    const EmbeddingGrads grads = grad_wrt_embeddings(q, p, at.grad_scores, config);

    const double h = 1e-6;
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        Eigen::MatrixXd plus = q, minus = q;
        plus(i, j) += h;
        minus(i, j) -= h;
        double numeric = (loss_of(plus, p) - loss_of(minus, p)) / (2 * h);
        worst = std::max(worst, std::abs(numeric - grads.query_grads(i, j)));
        plus = minus = p;
        plus(i, j) += h;
        minus(i, j) -= h;
        numeric = (loss_of(q, plus) - loss_of(q, minus)) / (2 * h);
        worst = std::max(worst, std::abs(numeric - grads.passage_grads(i, j)));
      }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("zero grad_scores produce zero embedding grads") {
  const Eigen::MatrixXd q = Eigen::MatrixXd::Random(2, 3);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Random(2, 3);
  const EmbeddingGrads grads =
      grad_wrt_embeddings(q, p, Eigen::MatrixXd::Zero(2, 2), LossConfig{});
  CHECK(grads.query_grads.isZero(0));
  CHECK(grads.passage_grads.isZero(0));
}
