#include "lrptext/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "lrptext/binary_io.hpp"
#include "lrptext/error.hpp"
#include "lrptext/rng.hpp"

namespace lrptext {

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, Eigen::MatrixXd vectors,
                               EmbeddingProvenance provenance)
    : words_(std::move(words)), vectors_(std::move(vectors)), provenance_(provenance) {
  if (static_cast<std::size_t>(vectors_.cols()) != words_.size()) {
    throw DataError("embedding table has " + std::to_string(words_.size()) + " words but " +
                    std::to_string(vectors_.cols()) + " vectors");
  }
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) {
      throw DataError("duplicate embedding word '" + words_[i] + "'");
    }
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::VectorXd EmbeddingTable::lookup(std::string_view word) const {
  if (auto idx = find(word)) return vectors_.col(static_cast<Eigen::Index>(*idx));
  return Eigen::VectorXd::Zero(vectors_.rows());
}

std::string EmbeddingTable::to_text() const {
  std::string out = std::to_string(size()) + " " + std::to_string(dim()) + "\n";
  for (std::size_t w = 0; w < size(); ++w) {
    out += words_[w];
    for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
      out += ' ';
      out += io::format_double(vectors_(i, static_cast<Eigen::Index>(w)));
    }
    out += '\n';
  }
  return out;
}

std::string EmbeddingTable::to_binary() const {
  std::ostringstream out(std::ios::binary);
  out << size() << ' ' << dim() << '\n';
  for (std::size_t w = 0; w < size(); ++w) {
    out << words_[w] << ' ';
    for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
      io::write_f32(out, static_cast<float>(vectors_(i, static_cast<Eigen::Index>(w))));
    }
    out << '\n';
  }
  return out.str();
}

namespace {

[[noreturn]] void format_error(std::size_t offset, const std::string& what) {
  throw DataError("embedding file: " + what + " at byte offset " + std::to_string(offset));
}

std::pair<std::size_t, std::size_t> parse_header(std::string_view bytes, std::size_t& pos) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string_view::npos) format_error(0, "missing header line");
  std::string_view line = bytes.substr(0, nl);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::size_t n_words = 0, dim = 0;
  const char* p = line.data();
  const char* end = line.data() + line.size();
  auto r1 = std::from_chars(p, end, n_words);
  if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != ' ') format_error(0, "malformed header");
  auto r2 = std::from_chars(r1.ptr + 1, end, dim);
  while (r2.ptr != end && *r2.ptr == ' ') ++r2.ptr;
  if (r2.ec != std::errc{} || r2.ptr != end || dim == 0) format_error(0, "malformed header");
  pos = nl + 1;
  return {n_words, dim};
}

}  // namespace

EmbeddingTable parse_embeddings(std::string_view bytes, VectorFormat format, const WordFilter& keep) {
  std::size_t pos = 0;
  const auto [n_words, dim] = parse_header(bytes, pos);
  std::vector<std::string> words;
  std::vector<double> flat;
  std::unordered_map<std::string, bool> seen;
  std::vector<double> record(dim);

  for (std::size_t w = 0; w < n_words; ++w) {
    std::string word;
    if (format == VectorFormat::kText) {
      while (pos < bytes.size() && (bytes[pos] == '\n' || bytes[pos] == '\r')) ++pos;
      const std::size_t start = pos;
      if (start >= bytes.size()) {
        format_error(start, "expected " + std::to_string(n_words) + " records, found " +
                                std::to_string(w));
      }
      std::size_t nl = bytes.find('\n', start);
      if (nl == std::string_view::npos) nl = bytes.size();
      std::string_view line = bytes.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      pos = nl;
      std::size_t field_end = line.find(' ');
      if (field_end == 0 || field_end == std::string_view::npos) {
        format_error(start, "malformed record");
      }
      word = std::string(line.substr(0, field_end));
      std::size_t count = 0;
      std::size_t i = field_end;
      while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        if (i >= line.size()) break;
        std::size_t j = line.find(' ', i);
        if (j == std::string_view::npos) j = line.size();
        if (count >= dim) {
          format_error(start, "record for '" + word + "' has more than " + std::to_string(dim) +
                                  " values");
        }
        double v = 0.0;
        auto r = std::from_chars(line.data() + i, line.data() + j, v);
        if (r.ec != std::errc{} || r.ptr != line.data() + j) {
          format_error(start + i, "malformed value in record for '" + word + "'");
        }
        record[count++] = v;
        i = j;
      }
      if (count != dim) {
        format_error(start, "record for '" + word + "' has " + std::to_string(count) +
                                " values, expected " + std::to_string(dim));
      }
    } else {
      while (pos < bytes.size() && bytes[pos] == '\n') ++pos;
      const std::size_t start = pos;
      const std::size_t sp = bytes.find(' ', start);
      if (sp == std::string_view::npos || sp == start) {
        format_error(start, "expected " + std::to_string(n_words) + " records, found " +
                                std::to_string(w));
      }
      word = std::string(bytes.substr(start, sp - start));
      pos = sp + 1;
      if (bytes.size() - pos < 4 * dim) {
        format_error(pos, "truncated vector for '" + word + "'");
      }
      for (std::size_t i = 0; i < dim; ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) {
          u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + 4 * i + b]))
               << (8 * b);
        }
        record[i] = static_cast<double>(std::bit_cast<float>(u));
      }
      pos += 4 * dim;
    }
    if (keep && !keep(word)) continue;
    if (!seen.emplace(word, true).second) continue;
    words.push_back(std::move(word));
    flat.insert(flat.end(), record.begin(), record.end());
  }
  Eigen::MatrixXd vectors =
      Eigen::Map<const Eigen::MatrixXd>(flat.data(), static_cast<Eigen::Index>(dim),
                                        static_cast<Eigen::Index>(words.size()));
  return EmbeddingTable(std::move(words), std::move(vectors), EmbeddingProvenance::kPretrained);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, VectorFormat format,
                               const WordFilter& keep) {
  const std::string bytes = io::read_file(path);
  try {
    return parse_embeddings(bytes, format, keep);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     VectorFormat format) {
  io::write_file(path, format == VectorFormat::kText ? table.to_text() : table.to_binary());
}

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Context positions around t, clipped to the sequence.
void context_of(std::span<const std::int32_t> seq, std::size_t t, std::size_t window,
                std::vector<std::int32_t>& out) {
  out.clear();
  const std::size_t lo = t >= window ? t - window : 0;
  const std::size_t hi = std::min(seq.size() - 1, t + window);
  for (std::size_t u = lo; u <= hi; ++u) {
    if (u != t) out.push_back(seq[u]);
  }
}

}  // namespace

double cbow_log_likelihood(const Eigen::MatrixXd& context, const Eigen::MatrixXd& target,
                           std::span<const std::vector<std::int32_t>> sequences,
                           std::size_t window, Eigen::MatrixXd* grad_context,
                           Eigen::MatrixXd* grad_target) {
  if (grad_context) grad_context->setZero(context.rows(), context.cols());
  if (grad_target) grad_target->setZero(target.rows(), target.cols());
  double total = 0.0;
  std::vector<std::int32_t> ctx;
  Eigen::VectorXd h(context.rows());
  for (const auto& seq : sequences) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      context_of(seq, t, window, ctx);
      if (ctx.empty()) continue;
      h.setZero();
      for (auto c : ctx) h += context.col(c);
      h /= static_cast<double>(ctx.size());
      const Eigen::VectorXd scores = target.transpose() * h;
      const double mx = scores.maxCoeff();
      const Eigen::VectorXd e = (scores.array() - mx).exp().matrix();
      const double z = e.sum();
      total += scores(seq[t]) - mx - std::log(z);
      if (grad_context || grad_target) {
        Eigen::VectorXd resid = -e / z;  // e_w - p
        resid(seq[t]) += 1.0;
        if (grad_target) *grad_target += h * resid.transpose();
        if (grad_context) {
          const Eigen::VectorXd dh = target * resid / static_cast<double>(ctx.size());
          for (auto c : ctx) grad_context->col(c) += dh;
        }
      }
    }
  }
  return total;
}

CbowResult train_cbow(std::span<const std::vector<std::string>> corpus, const CbowOptions& options) {
  if (corpus.empty()) throw ConfigError("CBOW corpus is empty");
  if (options.window == 0) throw ConfigError("CBOW window must be at least 1");
  if (options.negatives == 0 && options.objective == CbowObjective::kNegativeSampling) {
    throw ConfigError("CBOW needs at least one negative sample");
  }
  if (options.dim == 0) throw ConfigError("CBOW dimension must be at least 1");

  std::map<std::string, std::uint64_t> counts;
  for (const auto& seq : corpus) {
    for (const auto& w : seq) ++counts[w];
  }
  std::vector<std::string> words;
  std::vector<std::uint64_t> freq;
  std::unordered_map<std::string, std::int32_t> ids;
  for (const auto& [w, c] : counts) {
    if (c < options.min_count) continue;
    ids.emplace(w, static_cast<std::int32_t>(words.size()));
    words.push_back(w);
    freq.push_back(c);
  }
  std::vector<std::vector<std::int32_t>> sequences;
  std::size_t longest = 0;
  std::size_t n_positions = 0;
  for (const auto& seq : corpus) {
    std::vector<std::int32_t> s;
    for (const auto& w : seq) {
      if (auto it = ids.find(w); it != ids.end()) s.push_back(it->second);
    }
    longest = std::max(longest, s.size());
    if (s.size() >= 2) n_positions += s.size();
    sequences.push_back(std::move(s));
  }
  if (longest <= options.window) {
    throw ConfigError("CBOW window " + std::to_string(options.window) +
                      " is not shorter than any sequence (longest has " +
                      std::to_string(longest) + " tokens)");
  }

  const auto D = static_cast<Eigen::Index>(options.dim);
  const auto V = static_cast<Eigen::Index>(words.size());
  Rng rng(options.seed);
  Eigen::MatrixXd context(D, V);
  const double half = 0.5 / static_cast<double>(options.dim);
  for (Eigen::Index w = 0; w < V; ++w) {
    for (Eigen::Index i = 0; i < D; ++i) context(i, w) = rng.uniform(-half, half);
  }
  Eigen::MatrixXd target = Eigen::MatrixXd::Zero(D, V);

  // Noise distribution: unigram counts raised to 0.75, sampled by bisection
  // on the cumulative table.
  std::vector<double> cumulative(words.size());
  double acc = 0.0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    acc += std::pow(static_cast<double>(freq[w]), 0.75);
    cumulative[w] = acc;
  }
  auto sample_noise = [&]() {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return static_cast<std::int32_t>(it - cumulative.begin());
  };

  if (options.on_epoch_end) options.on_epoch_end(0, context, target);

  CbowResult result;
  const double total_steps = static_cast<double>(options.epochs * n_positions);
  double step = 0.0;
  std::vector<std::int32_t> ctx;
  Eigen::VectorXd h(D), neu1e(D);
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t seen = 0;
    for (const auto& seq : sequences) {
      for (std::size_t t = 0; t < seq.size(); ++t) {
        context_of(seq, t, options.window, ctx);
        if (ctx.empty()) continue;
        const double lr =
            options.learning_rate * std::max(1e-4, 1.0 - step / std::max(1.0, total_steps));
        step += 1.0;
        h.setZero();
        for (auto c : ctx) h += context.col(c);
        h /= static_cast<double>(ctx.size());
        neu1e.setZero();
        const std::int32_t word = seq[t];
        if (options.objective == CbowObjective::kNegativeSampling) {
          for (std::size_t d = 0; d <= options.negatives; ++d) {
            std::int32_t tgt = word;
            double label = 1.0;
            if (d > 0) {
              tgt = sample_noise();
              if (tgt == word) continue;
              label = 0.0;
            }
            const double f = target.col(tgt).dot(h);
            loss -= label > 0 ? log_sigmoid(f) : log_sigmoid(-f);
            const double g = lr * (label - sigmoid(f));
            neu1e += g * target.col(tgt);
            target.col(tgt) += g * h;
          }
        } else {
          const Eigen::VectorXd scores = target.transpose() * h;
          const double mx = scores.maxCoeff();
          const Eigen::VectorXd e = (scores.array() - mx).exp().matrix();
          const double z = e.sum();
          loss -= scores(word) - mx - std::log(z);
          Eigen::VectorXd resid = -e / z;
          resid(word) += 1.0;
          neu1e = lr * (target * resid);
          target.noalias() += lr * h * resid.transpose();
        }
        // Every context word takes the full error, as in the reference
        // word2vec trainer, rather than the 1/|ctx| share of the exact
        // gradient; the exact share leaves the vectors nearly collinear.
        for (auto c : ctx) context.col(c) += neu1e;
        ++seen;
      }
    }
    const double mean_loss = seen ? loss / static_cast<double>(seen) : 0.0;
    if (!std::isfinite(mean_loss)) {
      throw NumericError("CBOW loss became non-finite in epoch " + std::to_string(epoch) +
                         "; lower the learning rate");
    }
    result.epoch_losses.push_back(mean_loss);
    if (options.on_epoch_end) options.on_epoch_end(epoch, context, target);
  }

  result.table = EmbeddingTable(std::move(words), std::move(context), EmbeddingProvenance::kTrained);
  result.table.set_target_vectors(std::move(target));
  return result;
}

InputMatrix assemble_input(std::span<const std::string> tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw ConfigError("cannot assemble an input matrix from zero tokens");
  InputMatrix m;
  m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.dim()),
                                   static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (auto idx = table.find(tokens[t])) {
      m.values.col(static_cast<Eigen::Index>(t)) =
          table.vectors().col(static_cast<Eigen::Index>(*idx));
    }
  }
  m.tokens.assign(tokens.begin(), tokens.end());
  return m;
}

Normalizer fit_normalizer(std::span<const InputMatrix> train_inputs) {
  double n = 0.0, sum = 0.0;
  for (const auto& m : train_inputs) {
    sum += m.values.sum();
    n += static_cast<double>(m.values.size());
  }
  if (n == 0.0) throw NumericError("cannot fit a normalizer on empty inputs");
  const double mean = sum / n;
  double sq = 0.0;
  for (const auto& m : train_inputs) sq += (m.values.array() - mean).square().sum();
  const double std = std::sqrt(sq / n);
  if (!(std > 0.0)) throw NumericError("training inputs have zero standard deviation");
  return {mean, std};
}

Normalizer fit_normalizer(std::span<const std::vector<std::string>> train_tokens,
                          const EmbeddingTable& table) {
  std::vector<double> count(table.size(), 0.0);
  double oov = 0.0, n_tokens = 0.0;
  for (const auto& doc : train_tokens) {
    for (const auto& tok : doc) {
      if (auto idx = table.find(tok)) {
        count[*idx] += 1.0;
      } else {
        oov += 1.0;
      }
      n_tokens += 1.0;
    }
  }
  const double D = static_cast<double>(table.dim());
  const double n = n_tokens * D;
  if (n == 0.0) throw NumericError("cannot fit a normalizer on empty inputs");
  const Eigen::Map<const Eigen::VectorXd> weights(count.data(), static_cast<Eigen::Index>(count.size()));
  const double sum = (table.vectors().colwise().sum() * weights)(0);
  const double mean = sum / n;
  const double sq = ((table.vectors().array() - mean).square().colwise().sum().matrix() * weights)(0) +
                    oov * D * mean * mean;
  const double std = std::sqrt(sq / n);
  if (!(std > 0.0)) throw NumericError("training inputs have zero standard deviation");
  return {mean, std};
}

InputMatrix apply_normalizer(InputMatrix m, const Normalizer& norm) {
  m.values = ((m.values.array() - norm.mean) / norm.std).matrix();
  m.normalized = true;
  return m;
}

}  // namespace lrptext
