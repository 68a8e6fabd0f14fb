#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrptext/cnn.hpp"
#include "lrptext/relevance.hpp"
#include "lrptext/summary.hpp"

namespace lrptext {

// ---- word deletion -------------------------------------------------------

enum class DeletionProtocol {
  kDecTrueOnCorrect,    // correctly classified, most relevant (true class) first
  kIncTrueOnIncorrect,  // misclassified, least relevant (true class) first
  kDecPredOnIncorrect,  // misclassified, most relevant (predicted class) first
};
enum class DeletionSource { kLrp, kSa, kRandom, kBiasedRandom };

std::string_view to_string(DeletionProtocol protocol);
std::string_view to_string(DeletionSource source);
DeletionProtocol parse_deletion_protocol(std::string_view name);
DeletionSource parse_deletion_source(std::string_view name);

// Replaces the columns at the first k positions of `order` by `deleted_column`.
// Throws ConfigError on duplicate or out-of-range positions, or k > |order|.
InputMatrix delete_words(InputMatrix input, std::span<const std::size_t> order, std::size_t k,
                         const Eigen::VectorXd& deleted_column);

// The column a deleted word takes in the model input: the zero embedding
// mapped through the normalizer, as for out-of-vocabulary tokens.
Eigen::VectorXd deleted_column(std::size_t dim, const Normalizer& norm);

// Maintains the pre-activation convolution map under successive column
// replacements, recomputing only the affected output positions.
class DeletionState {
 public:
  DeletionState(const CnnModel& model, Eigen::MatrixXd input);

  void replace(std::size_t position, const Eigen::VectorXd& column);
  Eigen::VectorXd scores() const;
  std::size_t predicted() const;
  const Eigen::MatrixXd& input() const { return input_; }

 private:
  void recompute(Eigen::Index s);

  const CnnModel& model_;
  Eigen::MatrixXd input_;
  Eigen::MatrixXd conv_pre_;
};

// Documents for deletion experiments. `in_vocabulary(i)[t]` tells whether
// token t of document i has an embedding (used by the biased random mode).
class DeletionCorpus : public InputSource {
 public:
  virtual std::vector<bool> in_vocabulary(std::size_t i) const = 0;
};

struct DeletionOptions {
  std::size_t k_max = 50;
  std::size_t min_length = 100;
  std::size_t random_runs = 10;
  std::uint64_t seed = 1;
  LrpConfig lrp;
};

struct DeletionCurve {
  DeletionProtocol protocol = DeletionProtocol::kDecTrueOnCorrect;
  DeletionSource source = DeletionSource::kLrp;
  std::vector<double> accuracy;  // k = 0..k_max
  std::vector<double> std;       // across random runs; zeros otherwise
  std::size_t documents = 0;
  std::size_t runs = 1;
  std::uint64_t seed = 0;
};

// Subset of documents with at least `min_length` tokens that the protocol
// selects (correct or misclassified undisturbed prediction).
std::vector<std::size_t> deletion_subset(const CnnModel& model, const InputSource& docs,
                                         DeletionProtocol protocol, std::size_t min_length);

// Deletion order for one document: positions sorted by relevance (stable by
// position on ties), or a random permutation prefix.
std::vector<std::size_t> deletion_order(const Eigen::VectorXd& word_relevance, bool decreasing);

// Throws DataError naming the protocol when the subset is empty.
DeletionCurve deletion_experiment(const CnnModel& model, const DeletionCorpus& docs,
                                  const Eigen::VectorXd& deleted, DeletionSource source,
                                  DeletionProtocol protocol, const DeletionOptions& options);

// ---- explanatory power index ---------------------------------------------

struct EpiOptions {
  std::vector<std::size_t> k_values;  // empty = 1..30
  std::size_t splits = 10;
  std::uint64_t seed = 1;
};

struct EpiResult {
  std::vector<std::size_t> k_values;
  std::vector<double> mean;                   // per K
  std::vector<double> std;                    // per K, sample std over splits
  std::vector<std::vector<double>> accuracy;  // [K][split]
  std::size_t best_k = 0;
  std::size_t best_index = 0;
  double epi = 0.0;
  std::size_t documents = 0;
  std::size_t n_eval = 0;
  std::size_t n_neighbors = 0;

  bool operator==(const EpiResult&) const = default;
};

// KNN per split: a random half (floor(n/2)) is classified by the rest with
// euclidean distance and uniform votes. Distance ties go to the lower index,
// vote ties to the lowest class.
EpiResult knn_epi(std::span<const SummaryVector> summaries, std::span<const std::size_t> labels,
                  const EpiOptions& options);

// Per-K accuracies of classifying `queries` with `neighbors`.
std::vector<double> knn_accuracy(std::span<const SummaryVector> summaries, std::span<const std::size_t> labels,
                                 std::span<const std::size_t> queries, std::span<const std::size_t> neighbors,
                                 std::span<const std::size_t> k_values);

double squared_distance(const SummaryVector& a, const SummaryVector& b);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
  bool significant_05 = false;
  bool significant_10 = false;
  bool indistinguishable = false;
};

// Corrected resampled t-test for paired per-split accuracies. Two-sided.
TTestResult corrected_resampled_ttest(std::span<const double> a, std::span<const double> b, double n_eval,
                                      double n_neighbors);

// ---- projection -----------------------------------------------------------

struct PcaResult {
  Eigen::MatrixXd coordinates;  // n x dims
  Eigen::VectorXd variances;    // descending, per component
  Eigen::MatrixXd components;   // d x dims, unit columns
  Eigen::VectorXd mean;         // d
};

// Throws ConfigError with fewer than dims + 1 rows and NumericError when the
// centered data has rank below dims.
PcaResult pca_project(const Eigen::MatrixXd& rows, std::size_t dims = 2);
PcaResult pca_project(std::span<const SummaryVector> vectors, std::size_t dims = 2);

// ---- CSV ------------------------------------------------------------------

std::string deletion_csv(std::span<const DeletionCurve> curves);
std::string epi_csv(std::span<const std::pair<std::string, EpiResult>> rows);
std::string pca_csv(const PcaResult& pca, std::span<const std::string> doc_ids,
                    std::span<const std::string> labels, std::span<const std::string> groups);

}  // namespace lrptext
