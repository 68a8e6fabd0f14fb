#include "lrptext/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "lrptext/binary_io.hpp"
#include "lrptext/error.hpp"

namespace fs = std::filesystem;

namespace lrptext {

std::string_view to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

std::vector<RawDocument> load_dataset(const fs::path& root, Split split) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw DataError("dataset root is not a directory: " + root.string());
  }
  std::vector<fs::path> categories;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) categories.push_back(entry.path());
  }
  if (categories.empty()) {
    throw DataError("dataset root has no category directories: " + root.string());
  }
  std::sort(categories.begin(), categories.end());

  std::vector<RawDocument> docs;
  for (const auto& dir : categories) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    if (files.empty()) {
      throw DataError("empty category directory: " + dir.string());
    }
    std::sort(files.begin(), files.end());
    const std::string category = dir.filename().string();
    for (const auto& file : files) {
      RawDocument doc;
      doc.path = category + "/" + file.filename().string();
      doc.category = category;
      doc.split = split;
      doc.text = io::read_file(file);
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

std::vector<std::string> category_names(std::span<const RawDocument> docs) {
  std::set<std::string> names;
  for (const auto& d : docs) names.insert(d.category);
  return {names.begin(), names.end()};
}

std::string strip_header(std::string_view raw) {
  std::size_t line_start = 0;
  while (true) {
    std::size_t nl = raw.find('\n', line_start);
    if (nl == std::string_view::npos) break;
    std::string_view line = raw.substr(line_start, nl - line_start);
    if (line.empty() || line == "\r") return std::string(raw.substr(nl + 1));
    line_start = nl + 1;
  }
  return std::string(raw);
}

namespace {

// Code-point level helpers. The tokenizer works on decoded code points so
// multi-byte letters are never split.

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      extra = -1;
    }
    bool valid = extra > 0;
    if (valid) {
      for (int k = 1; k <= extra; ++k) {
        if (i + static_cast<std::size_t>(k) >= s.size()) {
          valid = false;
          break;
        }
        const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xC0) != 0x80) {
          valid = false;
          break;
        }
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    if (valid && (cp < 0x80 || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
                  cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) {
      valid = false;  // overlong or out of range
    }
    if (valid) {
      out.push_back(cp);
      i += static_cast<std::size_t>(extra) + 1;
    } else {
      out.push_back(b0);  // Latin-1 fallback
      ++i;
    }
  }
  return out;
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' ||
         c == 0x85 || c == 0xA0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200A) ||
         c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

bool is_letter(char32_t c) {
  if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
  if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
  if (c >= 0x370 && c <= 0x3FF) return c != 0x37E && c != 0x387;
  if (c >= 0x400 && c <= 0x481) return true;
  return false;
}

bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

bool is_joiner(char32_t c) { return c == U'-' || c == U'.' || c == U'\''; }

bool is_allowed(char32_t c) { return is_letter(c) || is_joiner(c); }

char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  if (c >= 0x391 && c <= 0x3A9) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  return c;
}

std::u32string_view strip_ends(std::u32string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && !is_allowed(s[b])) ++b;
  while (e > b && !is_allowed(s[e - 1])) --e;
  return s.substr(b, e - b);
}

void emit_piece(std::u32string_view piece, bool lowercase, std::vector<std::string>& out) {
  piece = strip_ends(piece);
  if (piece.size() > 1 && piece.back() == U'.' &&
      piece.substr(0, piece.size() - 1).find(U'.') == std::u32string_view::npos) {
    piece.remove_suffix(1);
  }
  if (piece.empty()) return;
  bool has_letter = false;
  for (char32_t c : piece) {
    if (!is_allowed(c)) return;
    has_letter = has_letter || is_letter(c);
  }
  if (!has_letter) return;
  std::string token;
  token.reserve(piece.size());
  for (char32_t c : piece) append_utf8(token, lowercase ? to_lower(c) : c);
  out.push_back(std::move(token));
}

}  // namespace

std::vector<std::string> tokenize_and_filter(std::string_view body, bool lowercase) {
  const std::u32string text = decode(body);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j == i) break;
    std::u32string_view chunk = strip_ends(std::u32string_view(text).substr(i, j - i));
    std::size_t p = 0;
    for (std::size_t q = 0; q <= chunk.size(); ++q) {
      const bool boundary = q == chunk.size() ||
                            !(is_letter(chunk[q]) || is_digit(chunk[q]) || is_joiner(chunk[q]));
      if (boundary) {
        if (q > p) emit_piece(chunk.substr(p, q - p), lowercase, tokens);
        p = q + 1;
      }
    }
    i = j;
  }
  return tokens;
}

std::string lowercase_token(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char32_t c : decode(token)) append_utf8(out, to_lower(c));
  return out;
}

std::vector<std::string> truncate(std::vector<std::string> tokens, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("max_len must be at least 1");
  if (tokens.size() > max_len) tokens.resize(max_len);
  return tokens;
}

TokenizedDocument preprocess_document(const RawDocument& raw, std::span<const std::string> labels,
                                      const PreprocessOptions& options) {
  auto it = std::lower_bound(labels.begin(), labels.end(), raw.category);
  if (it == labels.end() || *it != raw.category) {
    throw DataError("document " + raw.path + " has unknown category '" + raw.category + "'");
  }
  TokenizedDocument doc;
  doc.id = raw.path;
  doc.label = static_cast<int>(it - labels.begin());
  doc.split = raw.split;
  doc.tokens = truncate(tokenize_and_filter(strip_header(raw.text), options.lowercase),
                        options.max_len);
  return doc;
}

std::vector<TokenizedDocument> preprocess_all(std::span<const RawDocument> raw,
                                              std::span<const std::string> labels,
                                              const PreprocessOptions& options) {
  std::vector<TokenizedDocument> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(preprocess_document(r, labels, options));
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::uint32_t> doc_freq,
                       std::size_t n_documents, bool lowercased)
    : words_(std::move(words)),
      doc_freq_(std::move(doc_freq)),
      n_documents_(n_documents),
      lowercased_(lowercased) {
  if (words_.size() != doc_freq_.size()) {
    throw DataError("vocabulary word and frequency lists differ in length");
  }
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (doc_freq_[i] == 0) throw DataError("vocabulary entry '" + words_[i] + "' has df 0");
    if (!index_.emplace(words_[i], i).second) {
      throw DataError("duplicate vocabulary entry '" + words_[i] + "'");
    }
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::idf(std::size_t index) const {
  return std::log(static_cast<double>(n_documents_) / static_cast<double>(doc_freq_[index]));
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = io::fnv1a(lowercased_ ? "lc" : "cs");
  for (const auto& w : words_) {
    h = io::fnv1a(w, h);
    h = io::fnv1a(std::string_view("\n", 1), h);
  }
  return h;
}

std::string Vocabulary::to_tsv() const {
  std::string out = "#n_documents\t" + std::to_string(n_documents_) +
                    "\tlowercased=" + (lowercased_ ? "1" : "0") + "\n";
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out += words_[i];
    out += '\t';
    out += std::to_string(i);
    out += '\t';
    out += std::to_string(doc_freq_[i]);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_tsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n_docs = 0;
  bool lowercased = false;
  if (!std::getline(in, line) || line.rfind("#n_documents\t", 0) != 0) {
    throw DataError("vocabulary TSV lacks the #n_documents header");
  }
  {
    std::istringstream hs(line.substr(13));
    std::string flag;
    hs >> n_docs >> flag;
    lowercased = flag == "lowercased=1";
  }
  std::vector<std::string> words;
  std::vector<std::uint32_t> dfs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw DataError("vocabulary TSV line " + std::to_string(line_no) + " is malformed");
    }
    const std::size_t index = std::stoul(line.substr(t1 + 1, t2 - t1 - 1));
    if (index != words.size()) {
      throw DataError("vocabulary TSV line " + std::to_string(line_no) + " has index " +
                      std::to_string(index) + ", expected " + std::to_string(words.size()));
    }
    words.push_back(line.substr(0, t1));
    dfs.push_back(static_cast<std::uint32_t>(std::stoul(line.substr(t2 + 1))));
  }
  return Vocabulary(std::move(words), std::move(dfs), n_docs, lowercased);
}

Vocabulary build_vocabulary(std::span<const TokenizedDocument> train_docs, bool lowercased) {
  if (train_docs.empty()) throw DataError("cannot build a vocabulary from zero documents");
  std::map<std::string, std::uint32_t> df;
  for (const auto& doc : train_docs) {
    std::set<std::string_view> seen(doc.tokens.begin(), doc.tokens.end());
    for (auto w : seen) ++df[std::string(w)];
  }
  if (df.empty()) throw DataError("training documents contain no tokens");
  std::vector<std::string> words;
  std::vector<std::uint32_t> freqs;
  words.reserve(df.size());
  freqs.reserve(df.size());
  for (auto& [w, f] : df) {
    words.push_back(w);
    freqs.push_back(f);
  }
  return Vocabulary(std::move(words), std::move(freqs), train_docs.size(), lowercased);
}

TfidfVector tfidf_vector(std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::map<std::size_t, double> tf;
  for (const auto& tok : tokens) {
    if (auto idx = vocab.find(tok)) tf[*idx] += 1.0;
  }
  TfidfVector v;
  double sq = 0.0;
  for (auto [idx, count] : tf) {
    const double w = count * vocab.idf(idx);
    if (w > 0.0) {
      v.entries.emplace_back(idx, w);
      sq += w * w;
    }
  }
  if (!v.entries.empty()) {
    const double norm = std::sqrt(sq);
    for (auto& e : v.entries) e.second /= norm;
  }
  return v;
}

}  // namespace lrptext
