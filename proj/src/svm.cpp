#include "lrptext/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lrptext/binary_io.hpp"
#include "lrptext/cnn.hpp"
#include "lrptext/error.hpp"
#include "lrptext/rng.hpp"

namespace lrptext {

namespace {

constexpr char kSvmMagic[8] = {'L', 'R', 'P', 'T', 'S', 'V', 'M', '\0'};
constexpr std::uint32_t kSvmVersion = 1;

double sparse_dot(const Eigen::VectorXd& w, const TfidfVector& x) {
  double s = 0.0;
  for (const auto& [i, v] : x.entries) s += w(static_cast<Eigen::Index>(i)) * v;
  return s;
}

}  // namespace

SvmModel train_svm(std::span<const TfidfVector> vectors, std::span<const std::size_t> labels,
                   std::size_t n_classes, std::size_t vocab_size, const SvmTrainOptions& options) {
  if (vectors.size() != labels.size()) throw ConfigError("vectors and labels differ in count");
  if (!(options.reg_c > 0.0)) throw ConfigError("SVM regularization constant must be positive");
  std::vector<std::size_t> per_class(n_classes, 0);
  for (auto y : labels) {
    if (y >= n_classes) throw ConfigError("SVM label out of range");
    ++per_class[y];
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (per_class[c] == 0) throw ConfigError("class " + std::to_string(c) + " has no training examples");
  }
  for (const auto& x : vectors) {
    if (!x.empty() && x.entries.back().first >= vocab_size) {
      throw ConfigError("feature index exceeds the vocabulary size");
    }
  }

  const std::size_t n = vectors.size();
  const double B = options.bias_feature;
  std::vector<double> qdiag(n);
  for (std::size_t i = 0; i < n; ++i) {
    double q = B * B;
    for (const auto& e : vectors[i].entries) q += e.second * e.second;
    qdiag[i] = q;
  }

  SvmModel model;
  model.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vocab_size),
                                        static_cast<Eigen::Index>(n_classes));
  model.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes));
  model.reg_c = options.reg_c;

  Rng rng(options.seed);
  std::vector<std::size_t> order(n);
  std::vector<double> alpha(n);
  for (std::size_t c = 0; c < n_classes; ++c) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab_size));
    double wb = 0.0;  // weight of the constant bias feature
    std::fill(alpha.begin(), alpha.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
      rng.shuffle(order);
      double pg_max = -std::numeric_limits<double>::infinity();
      double pg_min = std::numeric_limits<double>::infinity();
      for (std::size_t i : order) {
        const double y = labels[i] == c ? 1.0 : -1.0;
        const double g = y * (sparse_dot(w, vectors[i]) + wb * B) - 1.0;
        double pg = g;
        if (alpha[i] == 0.0) {
          pg = std::min(g, 0.0);
        } else if (alpha[i] == options.reg_c) {
          pg = std::max(g, 0.0);
        }
        pg_max = std::max(pg_max, pg);
        pg_min = std::min(pg_min, pg);
        if (std::abs(pg) > 1e-14) {
          const double old = alpha[i];
          alpha[i] = std::clamp(old - g / qdiag[i], 0.0, options.reg_c);
          const double d = (alpha[i] - old) * y;
          for (const auto& [f, v] : vectors[i].entries) w(static_cast<Eigen::Index>(f)) += d * v;
          wb += d * B;
        }
      }
      if (options.on_epoch) {
        double sum_alpha = 0.0;
        for (double a : alpha) sum_alpha += a;
        options.on_epoch(c, epoch, 0.5 * (w.squaredNorm() + wb * wb) - sum_alpha);
      }
      if (pg_max - pg_min < options.tolerance) break;
    }
    model.weights.col(static_cast<Eigen::Index>(c)) = w;
    model.bias(static_cast<Eigen::Index>(c)) = wb * B;
  }
  return model;
}

double svm_primal_objective(const SvmModel& model, std::size_t cls, std::span<const TfidfVector> vectors,
                            std::span<const std::size_t> labels, double bias_feature) {
  const auto c = static_cast<Eigen::Index>(cls);
  const double wb = model.bias(c) / bias_feature;
  double obj = 0.5 * (model.weights.col(c).squaredNorm() + wb * wb);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double y = labels[i] == cls ? 1.0 : -1.0;
    const double s = sparse_dot(model.weights.col(c), vectors[i]) + model.bias(c);
    obj += model.reg_c * std::max(0.0, 1.0 - y * s);
  }
  return obj;
}

std::uint64_t svm_fingerprint(const SvmModel& model) {
  std::uint64_t h = io::fnv1a("svm") ^ model.vocab_fingerprint;
  h = io::hash_doubles(std::span<const double>(model.weights.data(), static_cast<std::size_t>(model.weights.size())), h);
  h = io::hash_doubles(std::span<const double>(model.bias.data(), static_cast<std::size_t>(model.bias.size())), h);
  const double reg[1] = {model.reg_c};
  return io::hash_doubles(reg, h);
}

Eigen::VectorXd svm_scores(const SvmModel& model, const TfidfVector& x) {
  Eigen::VectorXd s = model.bias;
  for (const auto& [i, v] : x.entries) {
    s += v * model.weights.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return s;
}

std::size_t svm_predict(const SvmModel& model, const TfidfVector& x) {
  return argmax_lowest(svm_scores(model, x));
}

CrossValidationResult select_reg_c(std::span<const TfidfVector> vectors,
                                   std::span<const std::size_t> labels, std::size_t n_classes,
                                   std::size_t vocab_size, std::span<const double> grid,
                                   std::size_t folds, const SvmTrainOptions& base) {
  if (grid.empty()) throw ConfigError("empty regularization grid");
  if (folds < 2 || folds > vectors.size()) throw ConfigError("invalid number of folds");
  std::vector<std::size_t> order(vectors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(base.seed);
  rng.shuffle(order);
  std::vector<std::size_t> fold_of(vectors.size());
  for (std::size_t r = 0; r < order.size(); ++r) fold_of[order[r]] = r % folds;

  CrossValidationResult result;
  double best = -1.0;
  for (double c : grid) {
    double acc_sum = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<TfidfVector> tr;
      std::vector<std::size_t> tr_labels;
      for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (fold_of[i] != f) {
          tr.push_back(vectors[i]);
          tr_labels.push_back(labels[i]);
        }
      }
      SvmTrainOptions opt = base;
      opt.reg_c = c;
      opt.on_epoch = nullptr;
      const SvmModel m = train_svm(tr, tr_labels, n_classes, vocab_size, opt);
      std::size_t correct = 0, total = 0;
      for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (fold_of[i] != f) continue;
        ++total;
        if (svm_predict(m, vectors[i]) == labels[i]) ++correct;
      }
      acc_sum += static_cast<double>(correct) / static_cast<double>(total);
    }
    const double mean = acc_sum / static_cast<double>(folds);
    result.accuracy_by_c.emplace_back(c, mean);
    if (mean > best) {
      best = mean;
      result.best_reg_c = c;
    }
  }
  return result;
}

std::string serialize_svm(const SvmModel& model) {
  std::ostringstream out(std::ios::binary);
  out.write(kSvmMagic, sizeof(kSvmMagic));
  io::write_u32(out, kSvmVersion);
  io::write_u64(out, model.vocab_fingerprint);
  io::write_u32(out, static_cast<std::uint32_t>(model.vocab_size()));
  io::write_u32(out, static_cast<std::uint32_t>(model.classes()));
  io::write_f64(out, model.reg_c);
  for (Eigen::Index c = 0; c < model.weights.cols(); ++c) {
    for (Eigen::Index i = 0; i < model.weights.rows(); ++i) io::write_f64(out, model.weights(i, c));
  }
  for (Eigen::Index c = 0; c < model.bias.size(); ++c) io::write_f64(out, model.bias(c));
  return out.str();
}

SvmModel deserialize_svm(std::string_view bytes) {
  std::istringstream in{std::string(bytes), std::ios::binary};
  char magic[8];
  if (!in.read(magic, 8) || std::string_view(magic, 8) != std::string_view(kSvmMagic, 8)) {
    throw DataError("not an SVM checkpoint");
  }
  const auto version = io::read_u32(in, "version");
  if (version != kSvmVersion) {
    throw DataError("SVM checkpoint version " + std::to_string(version) + " is not supported");
  }
  SvmModel m;
  m.vocab_fingerprint = io::read_u64(in, "vocabulary hash");
  const auto V = static_cast<Eigen::Index>(io::read_u32(in, "vocabulary size"));
  const auto C = static_cast<Eigen::Index>(io::read_u32(in, "classes"));
  m.reg_c = io::read_f64(in, "regularization constant");
  m.weights.resize(V, C);
  for (Eigen::Index c = 0; c < C; ++c) {
    for (Eigen::Index i = 0; i < V; ++i) m.weights(i, c) = io::read_f64(in, "weights");
  }
  m.bias.resize(C);
  for (Eigen::Index c = 0; c < C; ++c) m.bias(c) = io::read_f64(in, "bias");
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in SVM checkpoint");
  if (!m.weights.allFinite() || !m.bias.allFinite()) throw DataError("SVM checkpoint has non-finite values");
  return m;
}

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_svm(model));
}

SvmModel load_svm(const std::filesystem::path& path) {
  try {
    return deserialize_svm(io::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace lrptext
