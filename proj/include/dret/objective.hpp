#pragma once

#include <Eigen/Dense>

namespace dret {

enum class Similarity { dot, cosine };

struct LossConfig {
  double temperature = 1.0;
  Similarity similarity = Similarity::dot;
};

double sim(const Eigen::VectorXd& query_embedding, const Eigen::VectorXd& passage_embedding,
           const LossConfig& config = {});

// All-pairs score matrix: row i is query i against every passage column.
Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& query_embeddings,
                             const Eigen::MatrixXd& passage_embeddings, const LossConfig& config);

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_scores;
};

// Pre-training InfoNCE over an n x n score matrix whose diagonal holds the
// positives; log-sum-exp stabilized by per-row max subtraction.
LossResult loss_cpt(const Eigen::MatrixXd& scores, double temperature);

// Fine-tuning InfoNCE over an n x 2n matrix: columns [0, n) are in-batch
// positives (diagonal is the own positive), columns [n, 2n) hard negatives.
LossResult loss_ft(const Eigen::MatrixXd& scores, double temperature);

struct EmbeddingGrads {
  Eigen::MatrixXd query_grads;
  Eigen::MatrixXd passage_grads;
};

// Chain rule from grad_scores back onto the embeddings that produced the
// score matrix, for either similarity mode.
EmbeddingGrads grad_wrt_embeddings(const Eigen::MatrixXd& query_embeddings,
                                   const Eigen::MatrixXd& passage_embeddings,
                                   const Eigen::MatrixXd& grad_scores, const LossConfig& config);

}  // namespace dret
