#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lrptext/cnn.hpp"
#include "lrptext/corpus.hpp"
#include "lrptext/embeddings.hpp"
#include "lrptext/error.hpp"
#include "lrptext/eval.hpp"
#include "lrptext/relevance.hpp"
#include "lrptext/summary.hpp"
#include "lrptext/svm.hpp"

namespace lrptext {

// Declarative run configuration. Every key has a default; `defaults()` prints
// the full tree.
struct RunConfig {
  nlohmann::json tree;

  static nlohmann::json defaults();
  // Merges `user` over the defaults. Unknown keys are a ConfigError.
  static RunConfig from_json(const nlohmann::json& user);

  // Typed accessors; `key` is a dotted path such as "cnn.epochs".
  const nlohmann::json& at(std::string_view key) const;
  template <typename T>
  T get(std::string_view key) const {
    try {
      return at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + std::string(key) + "': " + e.what());
    }
  }
  std::filesystem::path output_dir() const;

  bool is_svm() const;
  std::string model() const;
  CnnHyper cnn_hyper(std::size_t dim, std::size_t classes) const;
  CnnTrainOptions cnn_options() const;
  CbowOptions cbow_options() const;
  SvmTrainOptions svm_options() const;
  LrpConfig lrp() const;
  RelevanceMethod method() const;
  EpiOptions epi_options() const;
  DeletionOptions deletion_options() const;

  // Hash of the listed top-level sections, chained onto `upstream`.
  std::string section_hash(std::initializer_list<std::string_view> sections, std::string_view upstream = {}) const;
  std::string preprocess_hash() const;
  std::string train_hash() const;
  std::string explain_hash() const;
  std::string evaluate_hash() const;
};

// Sets a dotted key from "key=value"; the value is parsed as JSON when
// possible and kept as a string otherwise.
void apply_override(nlohmann::json& tree, std::string_view assignment);

// Reads the JSON file (if given), applies overrides, then the
// LRPTEXT_OUTPUT_DIR environment variable.
RunConfig load_config(const std::optional<std::filesystem::path>& path, std::span<const std::string> overrides);

// ---- artifacts ---------------------------------------------------------------

struct PreparedCorpus {
  std::vector<std::string> classes;
  std::vector<TokenizedDocument> train;
  std::vector<TokenizedDocument> test;
  Vocabulary vocab_cased;
  Vocabulary vocab_lower;
  EmbeddingTable embeddings;
  Normalizer normalizer;
};

std::string corpus_to_tsv(std::span<const TokenizedDocument> docs);
std::vector<TokenizedDocument> corpus_from_tsv(std::string_view text, Split split);

// Network input for a token list: embeddings (zero for unknown words),
// normalized, padded with unknown-word columns (token "") up to `min_width`.
InputMatrix encode_document(std::span<const std::string> tokens, const EmbeddingTable& table,
                            const Normalizer& norm, std::size_t min_width);

class EncodedInputs final : public DeletionCorpus {
 public:
  // Documents are truncated to `max_len` tokens before encoding.
  EncodedInputs(const std::vector<TokenizedDocument>& docs, std::vector<std::size_t> rows,
                const EmbeddingTable& table, const Normalizer& norm, std::size_t min_width,
                std::size_t max_len);

  std::size_t size() const override { return rows_.size(); }
  Eigen::MatrixXd input(std::size_t i) const override { return matrix(i).values; }
  std::size_t label(std::size_t i) const override;
  std::vector<bool> in_vocabulary(std::size_t i) const override;
  InputMatrix matrix(std::size_t i) const;
  const TokenizedDocument& document(std::size_t i) const { return docs_[rows_[i]]; }

 private:
  const std::vector<TokenizedDocument>& docs_;
  std::vector<std::size_t> rows_;
  const EmbeddingTable& table_;
  const Normalizer& norm_;
  std::size_t min_width_;
  std::size_t max_len_;
};

std::vector<std::size_t> all_rows(std::size_t n);

std::vector<std::string> lowercase_tokens(std::span<const std::string> tokens);

// ---- commands --------------------------------------------------------------

void cmd_preprocess(const RunConfig& config);
void cmd_train(const RunConfig& config);

struct ExplainRequest {
  std::string doc_id;                      // test (then train) document id
  std::optional<std::filesystem::path> text_file;  // raw document instead of an id
  std::optional<std::string> target_class;  // default: predicted class
};
// Returns the paths written (record JSON, heatmap HTML).
std::vector<std::filesystem::path> cmd_explain(const RunConfig& config, const ExplainRequest& request);
void cmd_summarize(const RunConfig& config);
void cmd_evaluate(const RunConfig& config, std::string_view which);
void cmd_report(const RunConfig& config);

// Loaders that verify the producing stage's config hash.
PreparedCorpus load_prepared(const RunConfig& config);

}  // namespace lrptext
