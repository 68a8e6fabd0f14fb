#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrptext/relevance.hpp"

namespace lrptext {

// Standalone HTML page with one span per token. Positive relevance is red,
// negative blue, and the opacity is |R_t| / max |R_t| (0 everywhere for an
// all-zero map).
std::string heatmap_html(const RelevanceMap& map, std::string_view class_name);

// Opacity used for token t; exposed for tests.
std::vector<double> heatmap_opacity(const Eigen::VectorXd& word_relevance);

struct TopWord {
  std::string word;
  double relevance = 0.0;
  bool in_train_vocab = true;
};

// Collects the maximum word-level relevance of each distinct word over the
// given (word, relevance) occurrences and returns the k best, sorted by
// relevance, ties by word.
class TopWordCollector {
 public:
  void add(std::string_view word, double relevance);
  void add(const RelevanceMap& map);
  std::vector<TopWord> top(std::size_t k, const std::function<bool(std::string_view)>& in_train_vocab) const;
  std::size_t distinct() const { return best_.size(); }

 private:
  std::map<std::string, double, std::less<>> best_;
};

// Top words of a class for the CNN: word-level relevance for `target` over
// every document.
std::vector<TopWord> top_words_cnn(const CnnModel& model, RelevanceMethod method, std::span<const InputMatrix> docs,
                                   std::size_t target, std::size_t k, const LrpConfig& lrp,
                                   const std::function<bool(std::string_view)>& in_train_vocab);

// Top words of a class for the SVM. A word scores with its whole feature
// relevance in a document, not the per-occurrence share.
std::vector<TopWord> top_words_svm(const SvmModel& model, RelevanceMethod method, std::span<const TfidfVector> docs,
                                   const Vocabulary& vocab, std::size_t target, std::size_t k);

// Resolves a class name; throws ConfigError listing the known names.
std::size_t class_index(std::span<const std::string> class_names, std::string_view name);

std::string top_words_csv(std::span<const TopWord> words);

}  // namespace lrptext
