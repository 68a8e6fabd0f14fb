#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lrptext {

enum class EmbeddingProvenance { kPretrained, kTrained };
enum class VectorFormat { kText, kBinary };

// Word vectors. Columns of `vectors()` are the context embeddings; a trained
// table may also carry the target (output) embeddings used during training.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> words, Eigen::MatrixXd vectors,
                 EmbeddingProvenance provenance);

  std::size_t dim() const { return static_cast<std::size_t>(vectors_.rows()); }
  std::size_t size() const { return words_.size(); }
  EmbeddingProvenance provenance() const { return provenance_; }

  std::optional<std::size_t> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }

  // The word's vector, or the zero vector of length dim() when absent.
  Eigen::VectorXd lookup(std::string_view word) const;

  const std::vector<std::string>& words() const { return words_; }
  const Eigen::MatrixXd& vectors() const { return vectors_; }
  Eigen::MatrixXd& mutable_vectors() { return vectors_; }

  const std::optional<Eigen::MatrixXd>& target_vectors() const { return target_; }
  void set_target_vectors(Eigen::MatrixXd target) { target_ = std::move(target); }

  // "V D" header, then "word f1 ... fD" lines with round-trip decimals.
  std::string to_text() const;
  // "V D\n" header, then per word: name, ' ', D little-endian float32, '\n'.
  std::string to_binary() const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  Eigen::MatrixXd vectors_;
  std::optional<Eigen::MatrixXd> target_;
  EmbeddingProvenance provenance_ = EmbeddingProvenance::kPretrained;
};

using WordFilter = std::function<bool(std::string_view)>;

// Throws DataError carrying the byte offset of a malformed header or record,
// or of a record whose dimension disagrees with the header. When `keep` is set
// only matching words are stored. Later duplicates of a word are ignored.
EmbeddingTable parse_embeddings(std::string_view bytes, VectorFormat format,
                                const WordFilter& keep = {});
EmbeddingTable load_embeddings(const std::filesystem::path& path, VectorFormat format,
                               const WordFilter& keep = {});
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     VectorFormat format);

enum class CbowObjective { kNegativeSampling, kFullSoftmax };

struct CbowOptions {
  std::size_t dim = 100;
  std::size_t window = 5;     // n context words on each side
  std::size_t negatives = 5;  // k
  std::size_t epochs = 5;
  std::size_t min_count = 1;
  double learning_rate = 0.05;
  CbowObjective objective = CbowObjective::kNegativeSampling;
  std::uint64_t seed = 1;
  // Called after initialization (epoch 0) and after every epoch with the
  // current context and target matrices.
  std::function<void(std::size_t epoch, const Eigen::MatrixXd& context,
                     const Eigen::MatrixXd& target)>
      on_epoch_end;
};

struct CbowResult {
  EmbeddingTable table;  // carries the target vectors as well
  std::vector<double> epoch_losses;  // mean per-position training loss
};

// Continuous bag-of-words training. The context average is taken over the
// context words that exist at sentence boundaries. Throws ConfigError when the
// corpus is empty, window or negatives are 0, or no sequence is longer than
// the window.
CbowResult train_cbow(std::span<const std::vector<std::string>> corpus, const CbowOptions& options);

// Sum over all positions of log P(w_t | context) with the exact softmax over
// the vocabulary. Word ids index the columns of `context`/`target` (D x V).
// Gradients (same shapes) are written when the pointers are non-null.
double cbow_log_likelihood(const Eigen::MatrixXd& context, const Eigen::MatrixXd& target,
                           std::span<const std::vector<std::int32_t>> sequences,
                           std::size_t window, Eigen::MatrixXd* grad_context = nullptr,
                           Eigen::MatrixXd* grad_target = nullptr);

struct InputMatrix {
  Eigen::MatrixXd values;  // D x L, column t = embedding of token t
  std::vector<std::string> tokens;
  bool normalized = false;

  std::size_t dim() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(values.cols()); }
};

// Throws ConfigError on an empty token list.
InputMatrix assemble_input(std::span<const std::string> tokens, const EmbeddingTable& table);

struct Normalizer {
  double mean = 0.0;
  double std = 1.0;

  double apply(double x) const { return (x - mean) / std; }
};

// Scalar mean and population standard deviation over every entry of every
// matrix. Throws NumericError when the standard deviation is 0.
Normalizer fit_normalizer(std::span<const InputMatrix> train_inputs);

// Same statistics computed from token sequences without materializing the
// matrices; out-of-vocabulary tokens contribute zero columns.
Normalizer fit_normalizer(std::span<const std::vector<std::string>> train_tokens,
                          const EmbeddingTable& table);

// Maps every entry to (x - mean) / std. Not idempotent.
InputMatrix apply_normalizer(InputMatrix m, const Normalizer& norm);

}  // namespace lrptext
