#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lrptext/cnn.hpp"
#include "lrptext/corpus.hpp"
#include "lrptext/svm.hpp"

namespace lrptext {

enum class RelevanceMethod { kLrp, kSa };

std::string_view to_string(RelevanceMethod method);
RelevanceMethod parse_relevance_method(std::string_view name);

struct LrpConfig {
  double epsilon = 0.01;  // stabilizer, >= 0

  void validate() const;
};

using FeatureRelevance = std::vector<std::pair<std::size_t, double>>;

// Decomposition of one class score of one document.
struct RelevanceMap {
  std::string model_id;
  RelevanceMethod method = RelevanceMethod::kLrp;
  std::size_t target_class = 0;
  // x_c for CNN LRP, s_c for SVM LRP, squared gradient norm for SA.
  double start_score = 0.0;
  std::vector<std::string> tokens;
  Eigen::MatrixXd input_relevance;  // D x L per-dimension scores (CNN only)
  Eigen::VectorXd word_relevance;   // L pooled per-token scores
  FeatureRelevance feature_relevance;  // per vocabulary entry (SVM only)
  std::size_t zero_denominators = 0;   // LRP neurons whose message denominator was exactly 0

  bool operator==(const RelevanceMap&) const;
};

// Relevance of every CNN layer for one target class.
struct CnnLrpLayers {
  Eigen::VectorXd output;  // R_k, C
  Eigen::VectorXd pooled;  // R_j, F
  Eigen::MatrixXd conv;    // R_{j,t}, F x (L-H+1)
  Eigen::MatrixXd input;   // R_{i,t}, D x L
  std::size_t zero_denominators = 0;
};

// Epsilon-stabilized redistribution from the class score x_c down to the
// input. Fully connected messages use
//   z_jk = x_j w_jk + (b_k + eps * sign(x_k)) / F,  sign(0) = +1,
// max pooling hands R_j to the argmax position, and convolution messages use
//   z_ij(tau) = x_{i,t-tau} w_ij(tau) + (b_j + eps * s_jt) / (H D),
// s_jt = +1 if x_{j,t} > 0 else -1, each normalized by its own sum and scaled
// by the upper relevance. A neuron whose denominator is exactly 0 sends no
// messages and is counted in zero_denominators.
// Throws ConfigError on a trace from a different model or a bad target.
CnnLrpLayers lrp_cnn_layers(const CnnModel& model, const ForwardTrace& trace, std::size_t target,
                            const LrpConfig& config);
RelevanceMap lrp_cnn(const CnnModel& model, const ForwardTrace& trace, std::size_t target,
                     const LrpConfig& config);

// Gradient of x_c with respect to every input entry, by reverse mode.
Eigen::MatrixXd cnn_score_gradient(const CnnModel& model, const ForwardTrace& trace, std::size_t target);

// R_{i,t} = (d x_c / d x_{i,t})^2.
RelevanceMap sa_cnn(const CnnModel& model, const ForwardTrace& trace, std::size_t target);
RelevanceMap sa_cnn(const CnnModel& model, const InputMatrix& input, std::size_t target);

// R_i = (w_c)_i x_i + b_c / nnz(x) over the non-zero entries of x.
// Throws ConfigError on an empty vector.
FeatureRelevance lrp_svm(const SvmModel& model, const TfidfVector& x, std::size_t target);
// R_i = (w_c)_i^2 over the non-zero entries of x.
FeatureRelevance sa_svm(const SvmModel& model, const TfidfVector& x, std::size_t target);

// R_t = sum_i R_{i,t}.
Eigen::VectorXd pool_word_relevance(const Eigen::MatrixXd& input_relevance);

// Token-level view of per-feature SVM relevance: every occurrence of a word
// receives the word's relevance divided by its number of occurrences, so the
// token scores still sum to the feature total. Tokens without a feature get 0.
Eigen::VectorXd spread_feature_relevance(const FeatureRelevance& features,
                                         std::span<const std::string> tokens, const Vocabulary& vocab);

// Full SVM relevance map (feature and token level) for one document.
RelevanceMap svm_relevance(const SvmModel& model, const TfidfVector& x,
                           std::span<const std::string> tokens, const Vocabulary& vocab,
                           std::size_t target, RelevanceMethod method);

// JSON record; doubles are written with round-trip precision.
std::string relevance_to_json(const RelevanceMap& map, bool include_input_relevance = true);
RelevanceMap relevance_from_json(std::string_view text);

}  // namespace lrptext
