#include "dret/objective.hpp"

#include <cmath>

#include "dret/errors.hpp"

namespace dret {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string(what) + " contains a non-finite value");
}

// Row softmax of scores/tau with per-row max subtraction.
Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& scores, double tau) {
  Eigen::MatrixXd probs(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const Eigen::RowVectorXd scaled = scores.row(i) / tau;
    const double row_max = scaled.maxCoeff();
    const Eigen::RowVectorXd e = (scaled.array() - row_max).exp();
    probs.row(i) = e / e.sum();
  }
  return probs;
}

// Shared InfoNCE core: positive for row i sits in column i.
LossResult info_nce(const Eigen::MatrixXd& scores, double tau) {
  require_finite(scores, "score matrix");
  if (tau <= 0.0) throw UsageError("temperature must be positive");
  const Eigen::Index n = scores.rows();
  const Eigen::MatrixXd probs = row_softmax(scores, tau);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    loss -= std::log(probs(i, i));
  loss /= static_cast<double>(n);
  Eigen::MatrixXd grad = probs / (static_cast<double>(n) * tau);
  for (Eigen::Index i = 0; i < n; ++i) grad(i, i) -= 1.0 / (static_cast<double>(n) * tau);
  return {loss, std::move(grad)};
}

}  // namespace

double sim(const Eigen::VectorXd& query_embedding, const Eigen::VectorXd& passage_embedding,
           const LossConfig& config) {
  if (query_embedding.size() != passage_embedding.size())
    throw DataError("embedding dimension mismatch in sim()");
  const double dot = query_embedding.dot(passage_embedding);
  if (config.similarity == Similarity::dot) return dot;
  const double nq = query_embedding.norm();
  const double np = passage_embedding.norm();
  if (nq == 0.0 || np == 0.0) throw DataError("zero-norm embedding in cosine similarity");
  return dot / (nq * np);
}

Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& query_embeddings,
                             const Eigen::MatrixXd& passage_embeddings, const LossConfig& config) {
  if (query_embeddings.cols() != passage_embeddings.cols())
    throw DataError("embedding dimension mismatch in score_matrix()");
  Eigen::MatrixXd scores = query_embeddings * passage_embeddings.transpose();
  if (config.similarity == Similarity::cosine) {
    const Eigen::VectorXd qn = query_embeddings.rowwise().norm();
    const Eigen::VectorXd pn = passage_embeddings.rowwise().norm();
    if ((qn.array() == 0.0).any() || (pn.array() == 0.0).any())
      throw DataError("zero-norm embedding in cosine score matrix");
    scores.array().colwise() /= qn.array();
    scores.array().rowwise() /= pn.transpose().array();
  }
  return scores;
}

LossResult loss_cpt(const Eigen::MatrixXd& scores, double temperature) {
  if (scores.rows() != scores.cols())
    throw DataError("loss_cpt requires a square score matrix");
  return info_nce(scores, temperature);
}

LossResult loss_ft(const Eigen::MatrixXd& scores, double temperature) {
  if (scores.cols() != 2 * scores.rows())
    throw DataError("loss_ft requires an n x 2n score matrix");
  return info_nce(scores, temperature);
}

EmbeddingGrads grad_wrt_embeddings(const Eigen::MatrixXd& query_embeddings,
                                   const Eigen::MatrixXd& passage_embeddings,
                                   const Eigen::MatrixXd& grad_scores, const LossConfig& config) {
  if (grad_scores.rows() != query_embeddings.rows() ||
      grad_scores.cols() != passage_embeddings.rows() ||
      query_embeddings.cols() != passage_embeddings.cols())
    throw DataError("shape mismatch in grad_wrt_embeddings()");
  EmbeddingGrads grads;
  if (config.similarity == Similarity::dot) {
    grads.query_grads = grad_scores * passage_embeddings;
    grads.passage_grads = grad_scores.transpose() * query_embeddings;
    return grads;
  }
  // Cosine: S_ij = q_i . p_j / (|q_i| |p_j|); quotient rule per entry.
  const Eigen::Index nq = query_embeddings.rows();
  const Eigen::Index np = passage_embeddings.rows();
  const Eigen::VectorXd qnorm = query_embeddings.rowwise().norm();
  const Eigen::VectorXd pnorm = passage_embeddings.rowwise().norm();
  if ((qnorm.array() == 0.0).any() || (pnorm.array() == 0.0).any())
    throw DataError("zero-norm embedding in cosine gradient");
  grads.query_grads = Eigen::MatrixXd::Zero(nq, query_embeddings.cols());
  grads.passage_grads = Eigen::MatrixXd::Zero(np, passage_embeddings.cols());
  for (Eigen::Index i = 0; i < nq; ++i) {
    for (Eigen::Index j = 0; j < np; ++j) {
      const double g = grad_scores(i, j);
      if (g == 0.0) continue;
      const double dot = query_embeddings.row(i).dot(passage_embeddings.row(j));
      const double inv = 1.0 / (qnorm(i) * pnorm(j));
      const double cos_ij = dot * inv;
      grads.query_grads.row(i) +=
          g * (passage_embeddings.row(j) * inv -
               cos_ij * query_embeddings.row(i) / (qnorm(i) * qnorm(i)));
      grads.passage_grads.row(j) +=
          g * (query_embeddings.row(i) * inv -
               cos_ij * passage_embeddings.row(j) / (pnorm(j) * pnorm(j)));
    }
  }
  return grads;
}

}  // namespace dret
