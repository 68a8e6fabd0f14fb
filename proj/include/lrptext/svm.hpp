#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lrptext/corpus.hpp"

namespace lrptext {

// One-vs-rest linear SVM over a V-word vocabulary: s_c = w_c . x + b_c.
struct SvmModel {
  Eigen::MatrixXd weights;  // V x C, column c is w_c
  Eigen::VectorXd bias;     // C
  double reg_c = 1.0;
  std::uint64_t vocab_fingerprint = 0;

  std::size_t vocab_size() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t classes() const { return static_cast<std::size_t>(weights.cols()); }
};

struct SvmTrainOptions {
  double reg_c = 1.0;
  // Stop when the spread of projected gradients over one pass drops below this.
  double tolerance = 1e-4;
  std::size_t max_epochs = 1000;
  // The bias is learned as the weight of a constant feature of this value.
  double bias_feature = 1.0;
  std::uint64_t seed = 1;
  // Called after every pass with the class being trained and the dual
  // objective 0.5 ||w||^2 - sum(alpha), which never increases.
  std::function<void(std::size_t cls, std::size_t epoch, double dual_objective)> on_epoch;
};

// L2-regularized L1-hinge loss, one binary problem per class, solved by dual
// coordinate descent. Throws ConfigError when a class has no examples or a
// label is out of range.
SvmModel train_svm(std::span<const TfidfVector> vectors, std::span<const std::size_t> labels,
                   std::size_t n_classes, std::size_t vocab_size, const SvmTrainOptions& options);

// Primal objective 0.5 ||w_c||^2 + C sum max(0, 1 - y_i s_c(x_i)) of one class,
// with the bias weight included in the norm.
double svm_primal_objective(const SvmModel& model, std::size_t cls,
                            std::span<const TfidfVector> vectors, std::span<const std::size_t> labels,
                            double bias_feature = 1.0);

// Hash over the vocabulary fingerprint and all parameters.
std::uint64_t svm_fingerprint(const SvmModel& model);

Eigen::VectorXd svm_scores(const SvmModel& model, const TfidfVector& x);
std::size_t svm_predict(const SvmModel& model, const TfidfVector& x);

struct CrossValidationResult {
  double best_reg_c = 1.0;
  std::vector<std::pair<double, double>> accuracy_by_c;  // (C, mean fold accuracy)
};

// k-fold cross-validation over `grid`; ties go to the smaller C.
CrossValidationResult select_reg_c(std::span<const TfidfVector> vectors,
                                   std::span<const std::size_t> labels, std::size_t n_classes,
                                   std::size_t vocab_size, std::span<const double> grid,
                                   std::size_t folds, const SvmTrainOptions& base);

std::string serialize_svm(const SvmModel& model);
SvmModel deserialize_svm(std::string_view bytes);
void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);

}  // namespace lrptext
