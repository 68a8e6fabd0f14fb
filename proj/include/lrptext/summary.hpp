#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrptext/corpus.hpp"
#include "lrptext/embeddings.hpp"
#include "lrptext/relevance.hpp"

namespace lrptext {

enum class SummarySpace { kEmbedding, kBow };
enum class Weighting { kLrp, kSa, kLrpEw, kSaEw, kUniform, kIdf, kTfidf };

std::string_view to_string(SummarySpace space);
std::string_view to_string(Weighting weighting);
Weighting parse_weighting(std::string_view name);

// Relevance-weighted document vector. Embedding-space vectors are dense of
// length D; word-space vectors are stored sparsely with logical length V.
struct SummaryVector {
  SummarySpace space = SummarySpace::kEmbedding;
  Weighting weighting = Weighting::kUniform;
  std::string model_id;
  bool normalized = false;
  std::size_t length = 0;
  Eigen::VectorXd dense;                            // embedding space
  std::vector<std::pair<std::size_t, double>> sparse;  // word space, sorted by index

  double norm() const;
  Eigen::VectorXd to_dense() const;
};

// d_i = sum_t R_t x_{i,t}. Throws ConfigError when |weights| != L.
SummaryVector summary_word_level(const Eigen::VectorXd& weights, const InputMatrix& input,
                                 Weighting weighting, std::string model_id = {});

// d_i = sum_t R_{i,t} x_{i,t}. Throws ConfigError when the shapes differ.
SummaryVector summary_elementwise(const RelevanceMap& map, const InputMatrix& input, Weighting weighting);

// d_i = R_i * presence_i in word space. `present` lists the distinct
// vocabulary indices of the document; every one needs a relevance entry.
SummaryVector summary_svm(const FeatureRelevance& relevance, std::span<const std::size_t> present,
                          std::size_t vocab_size, Weighting weighting, std::string model_id = {});

// Baseline weights: R_t = 1, or R_t = idf(token_t) with 0 for words outside
// the vocabulary.
Eigen::VectorXd uniform_weights(std::size_t length);
Eigen::VectorXd idf_weights(std::span<const std::string> tokens, const Vocabulary& vocab);

// Word-space baselines over the support of a TFIDF vector.
FeatureRelevance binary_presence(const TfidfVector& x);
FeatureRelevance tfidf_relevance(const TfidfVector& x);
std::vector<std::size_t> support(const TfidfVector& x);

// Unit euclidean norm. Throws NumericError on a zero vector.
SummaryVector normalize(SummaryVector v);

// Dense row-major little-endian float64 table (one row per document) plus a
// JSON manifest next to it (<path>.json).
struct SummaryTableInfo {
  SummarySpace space = SummarySpace::kEmbedding;
  Weighting weighting = Weighting::kUniform;
  std::string model_id;
  std::vector<std::string> doc_ids;
  std::vector<std::size_t> labels;
  std::size_t length = 0;
  std::size_t excluded = 0;  // zero vectors left out of the table
  std::string config_hash;
};

void write_summary_table(const std::filesystem::path& path, std::span<const SummaryVector> rows,
                         const SummaryTableInfo& info);
std::vector<SummaryVector> read_summary_table(const std::filesystem::path& path, SummaryTableInfo& info);

}  // namespace lrptext
