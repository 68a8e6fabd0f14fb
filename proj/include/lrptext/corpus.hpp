#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lrptext {

enum class Split { kTrain, kTest };

std::string_view to_string(Split split);

struct RawDocument {
  std::string path;      // relative to the split root, '/'-separated
  std::string category;  // sub-directory name
  Split split = Split::kTrain;
  std::string text;
};

struct TokenizedDocument {
  std::string id;  // same as RawDocument::path
  std::vector<std::string> tokens;
  int label = 0;
  Split split = Split::kTrain;
};

inline constexpr std::size_t kDefaultMaxLen = 400;

struct PreprocessOptions {
  bool lowercase = false;
  std::size_t max_len = kDefaultMaxLen;
};

// Reads <root>/<category>/<file>. Documents are ordered lexicographically by
// relative path. Throws DataError naming the offending path when the root is
// missing, has no category directories, or a category directory is empty.
std::vector<RawDocument> load_dataset(const std::filesystem::path& root, Split split);

// Sorted distinct category names; their positions are the class indices.
std::vector<std::string> category_names(std::span<const RawDocument> docs);

// Everything after the first blank line, or the input unchanged when there is
// none. A line holding only '\r' counts as blank.
std::string strip_header(std::string_view raw);

// Rule-based tokenizer. Text is split on whitespace; each chunk loses leading
// and trailing characters outside {letter, '-', '.', '\''}; remaining
// characters other than letters, digits, '-', '.', '\'' split the chunk
// further. A single sentence-final '.' is detached unless the token holds
// another '.' (keeps "U.S.", "e.g."). Surviving tokens consist of letters,
// '-', '.', '\'' only and contain at least one letter. Bytes that are not
// valid UTF-8 are read as Latin-1.
std::vector<std::string> tokenize_and_filter(std::string_view body, bool lowercase);

// Same case mapping as tokenize_and_filter(..., true), for one token.
std::string lowercase_token(std::string_view token);

std::vector<std::string> truncate(std::vector<std::string> tokens, std::size_t max_len);

// strip_header + tokenize_and_filter + truncate. `labels` maps category names
// to class indices; an unknown category is a DataError.
TokenizedDocument preprocess_document(const RawDocument& raw,
                                      std::span<const std::string> labels,
                                      const PreprocessOptions& options);

std::vector<TokenizedDocument> preprocess_all(std::span<const RawDocument> raw,
                                              std::span<const std::string> labels,
                                              const PreprocessOptions& options);

class Vocabulary {
 public:
  Vocabulary() = default;

  // Word list and per-word document frequencies in index order.
  Vocabulary(std::vector<std::string> words, std::vector<std::uint32_t> doc_freq,
             std::size_t n_documents, bool lowercased);

  std::size_t size() const { return words_.size(); }
  std::size_t n_documents() const { return n_documents_; }
  bool lowercased() const { return lowercased_; }

  std::optional<std::size_t> find(std::string_view word) const;
  const std::string& word(std::size_t index) const { return words_[index]; }
  std::uint32_t doc_freq(std::size_t index) const { return doc_freq_[index]; }
  const std::vector<std::string>& words() const { return words_; }

  // ln(N_train / df), no smoothing.
  double idf(std::size_t index) const;

  // Hash over the word list in index order; pins checkpoints to a vocabulary.
  std::uint64_t fingerprint() const;

  // "word\tindex\tdf" lines, preceded by one "#n_documents\t<N>\tlowercased=<0|1>" line.
  std::string to_tsv() const;
  static Vocabulary from_tsv(std::string_view text);

 private:
  std::vector<std::string> words_;
  std::vector<std::uint32_t> doc_freq_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t n_documents_ = 0;
  bool lowercased_ = false;
};

// Distinct tokens of the training documents with lexicographic indices.
// Throws DataError when there are no documents or no tokens.
Vocabulary build_vocabulary(std::span<const TokenizedDocument> train_docs, bool lowercased);

struct TfidfVector {
  // Sorted by vocabulary index; weights are >= 0 and have unit L2 norm
  // unless the vector is empty.
  std::vector<std::pair<std::size_t, double>> entries;

  std::size_t nnz() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// weight(w) = tf(w, doc) * idf(w) over in-vocabulary tokens, L2-normalized.
// A document without in-vocabulary tokens (or whose tokens all have idf 0)
// yields an empty vector.
TfidfVector tfidf_vector(std::span<const std::string> tokens, const Vocabulary& vocab);

}  // namespace lrptext
