#include "lrptext/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lrptext/binary_io.hpp"
#include "lrptext/error.hpp"
#include "lrptext/rng.hpp"

namespace lrptext {

namespace {

constexpr std::pair<DeletionProtocol, std::string_view> kProtocolNames[] = {
    {DeletionProtocol::kDecTrueOnCorrect, "dec_true_on_correct"},
    {DeletionProtocol::kIncTrueOnIncorrect, "inc_true_on_incorrect"},
    {DeletionProtocol::kDecPredOnIncorrect, "dec_pred_on_incorrect"},
};

constexpr std::pair<DeletionSource, std::string_view> kSourceNames[] = {
    {DeletionSource::kLrp, "lrp"},
    {DeletionSource::kSa, "sa"},
    {DeletionSource::kRandom, "random"},
    {DeletionSource::kBiasedRandom, "biased_random"},
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string_view to_string(DeletionProtocol protocol) {
  for (const auto& [p, name] : kProtocolNames) {
    if (p == protocol) return name;
  }
  return "unknown";
}

std::string_view to_string(DeletionSource source) {
  for (const auto& [s, name] : kSourceNames) {
    if (s == source) return name;
  }
  return "unknown";
}

DeletionProtocol parse_deletion_protocol(std::string_view name) {
  for (const auto& [p, n] : kProtocolNames) {
    if (n == name) return p;
  }
  throw ConfigError("unknown deletion protocol '" + std::string(name) + "'");
}

DeletionSource parse_deletion_source(std::string_view name) {
  for (const auto& [s, n] : kSourceNames) {
    if (n == name) return s;
  }
  throw ConfigError("unknown deletion method '" + std::string(name) + "'");
}

InputMatrix delete_words(InputMatrix input, std::span<const std::size_t> order, std::size_t k,
                         const Eigen::VectorXd& deleted_column) {
  if (k > order.size()) throw ConfigError("cannot delete more words than the order lists");
  if (deleted_column.size() != input.values.rows()) throw ConfigError("deleted column has the wrong dimension");
  std::vector<bool> seen(input.length(), false);
  for (std::size_t p : order) {
    if (p >= input.length()) throw ConfigError("deletion position " + std::to_string(p) + " is out of range");
    if (seen[p]) throw ConfigError("deletion position " + std::to_string(p) + " is listed twice");
    seen[p] = true;
  }
  for (std::size_t n = 0; n < k; ++n) input.values.col(static_cast<Eigen::Index>(order[n])) = deleted_column;
  return input;
}

Eigen::VectorXd deleted_column(std::size_t dim, const Normalizer& norm) {
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), norm.apply(0.0));
}

DeletionState::DeletionState(const CnnModel& model, Eigen::MatrixXd input)
    : model_(model), input_(std::move(input)) {
  const auto H = static_cast<Eigen::Index>(model.hyper.width);
  if (input_.rows() != static_cast<Eigen::Index>(model.hyper.dim) || input_.cols() < H) {
    throw ConfigError("input does not fit the model");
  }
  conv_pre_.resize(static_cast<Eigen::Index>(model.hyper.filters), input_.cols() - H + 1);
  for (Eigen::Index s = 0; s < conv_pre_.cols(); ++s) recompute(s);
}

void DeletionState::recompute(Eigen::Index s) {
  const auto H = static_cast<Eigen::Index>(model_.hyper.width);
  Eigen::VectorXd z = model_.conv_bias;
  for (Eigen::Index tau = 0; tau < H; ++tau) {
    z.noalias() += model_.conv_weights[static_cast<std::size_t>(tau)] * input_.col(s + H - 1 - tau);
  }
  conv_pre_.col(s) = z;
}

void DeletionState::replace(std::size_t position, const Eigen::VectorXd& column) {
  const auto t = static_cast<Eigen::Index>(position);
  const auto H = static_cast<Eigen::Index>(model_.hyper.width);
  input_.col(t) = column;
  // Output s reads column s + H - 1 - tau, so column t feeds s in [t-H+1, t].
  for (Eigen::Index s = std::max<Eigen::Index>(0, t - H + 1); s <= std::min(t, conv_pre_.cols() - 1); ++s) {
    recompute(s);
  }
}

Eigen::VectorXd DeletionState::scores() const {
  const Eigen::VectorXd pooled = conv_pre_.cwiseMax(0.0).rowwise().maxCoeff();
  return model_.out_weights.transpose() * pooled + model_.out_bias;
}

std::size_t DeletionState::predicted() const { return argmax_lowest(scores()); }

std::vector<std::size_t> deletion_subset(const CnnModel& model, const InputSource& docs,
                                         DeletionProtocol protocol, std::size_t min_length) {
  std::vector<std::size_t> subset;
  const bool want_correct = protocol == DeletionProtocol::kDecTrueOnCorrect;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const Eigen::MatrixXd x = docs.input(i);
    if (static_cast<std::size_t>(x.cols()) < min_length) continue;
    const bool correct = predict(model, x).label == docs.label(i);
    if (correct == want_correct) subset.push_back(i);
  }
  return subset;
}

std::vector<std::size_t> deletion_order(const Eigen::VectorXd& word_relevance, bool decreasing) {
  std::vector<std::size_t> order(static_cast<std::size_t>(word_relevance.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = word_relevance(static_cast<Eigen::Index>(a));
    const double rb = word_relevance(static_cast<Eigen::Index>(b));
    return decreasing ? ra > rb : ra < rb;
  });
  return order;
}

DeletionCurve deletion_experiment(const CnnModel& model, const DeletionCorpus& docs,
                                  const Eigen::VectorXd& deleted, DeletionSource source,
                                  DeletionProtocol protocol, const DeletionOptions& options) {
  options.lrp.validate();
  const std::vector<std::size_t> subset = deletion_subset(model, docs, protocol, options.min_length);
  if (subset.empty()) {
    throw DataError("deletion protocol " + std::string(to_string(protocol)) +
                    ": no qualifying documents of length >= " + std::to_string(options.min_length));
  }
  const bool random = source == DeletionSource::kRandom || source == DeletionSource::kBiasedRandom;
  const std::size_t runs = random ? std::max<std::size_t>(1, options.random_runs) : 1;
  const std::size_t kmax = options.k_max;

  // correct[run][k] counts documents classified as their true label.
  std::vector<std::vector<double>> correct(runs, std::vector<double>(kmax + 1, 0.0));

  for (std::size_t n = 0; n < subset.size(); ++n) {
    const std::size_t doc = subset[n];
    const Eigen::MatrixXd x = docs.input(doc);
    const std::size_t label = docs.label(doc);
    const std::size_t L = static_cast<std::size_t>(x.cols());

    std::vector<std::vector<std::size_t>> orders;
    if (!random) {
      const ForwardTrace trace = forward(model, x);
      const std::size_t target =
          protocol == DeletionProtocol::kDecPredOnIncorrect ? argmax_lowest(trace.scores) : label;
      const RelevanceMap map = source == DeletionSource::kLrp ? lrp_cnn(model, trace, target, options.lrp)
                                                              : sa_cnn(model, trace, target);
      orders.push_back(deletion_order(map.word_relevance, protocol != DeletionProtocol::kIncTrueOnIncorrect));
    } else {
      std::vector<std::size_t> candidates;
      if (source == DeletionSource::kBiasedRandom) {
        const std::vector<bool> known = docs.in_vocabulary(doc);
        for (std::size_t t = 0; t < L && t < known.size(); ++t) {
          if (known[t]) candidates.push_back(t);
        }
      } else {
        candidates.resize(L);
        std::iota(candidates.begin(), candidates.end(), std::size_t{0});
      }
      for (std::size_t r = 0; r < runs; ++r) {
        Rng rng(mix(mix(options.seed, r), doc));
        std::vector<std::size_t> c = candidates;
        const std::size_t take = std::min(kmax, c.size());
        for (std::size_t i = 0; i < take; ++i) std::swap(c[i], c[i + rng.below(c.size() - i)]);
        c.resize(take);
        orders.push_back(std::move(c));
      }
    }

    for (std::size_t r = 0; r < orders.size(); ++r) {
      DeletionState state(model, x);
      const auto& order = orders[r];
      correct[r][0] += state.predicted() == label ? 1.0 : 0.0;
      for (std::size_t k = 1; k <= kmax; ++k) {
        if (k <= order.size()) state.replace(order[k - 1], deleted);
        correct[r][k] += state.predicted() == label ? 1.0 : 0.0;
      }
    }
  }

  DeletionCurve curve;
  curve.protocol = protocol;
  curve.source = source;
  curve.documents = subset.size();
  curve.runs = runs;
  curve.seed = random ? options.seed : 0;
  curve.accuracy.assign(kmax + 1, 0.0);
  curve.std.assign(kmax + 1, 0.0);
  const double n_docs = static_cast<double>(subset.size());
  for (std::size_t k = 0; k <= kmax; ++k) {
    std::vector<double> per_run(runs);
    for (std::size_t r = 0; r < runs; ++r) per_run[r] = correct[r][k] / n_docs;
    curve.accuracy[k] = std::accumulate(per_run.begin(), per_run.end(), 0.0) / static_cast<double>(runs);
    curve.std[k] = sample_std(per_run);
  }
  return curve;
}

double squared_distance(const SummaryVector& a, const SummaryVector& b) {
  if (a.space != b.space || a.length != b.length) throw ConfigError("summary vectors are not comparable");
  if (a.space == SummarySpace::kEmbedding) return (a.dense - b.dense).squaredNorm();
  double d = 0.0;
  auto i = a.sparse.begin();
  auto j = b.sparse.begin();
  while (i != a.sparse.end() || j != b.sparse.end()) {
    double diff;
    if (j == b.sparse.end() || (i != a.sparse.end() && i->first < j->first)) {
      diff = i->second;
      ++i;
    } else if (i == a.sparse.end() || j->first < i->first) {
      diff = j->second;
      ++j;
    } else {
      diff = i->second - j->second;
      ++i;
      ++j;
    }
    d += diff * diff;
  }
  return d;
}

std::vector<double> knn_accuracy(std::span<const SummaryVector> summaries, std::span<const std::size_t> labels,
                                 std::span<const std::size_t> queries, std::span<const std::size_t> neighbors,
                                 std::span<const std::size_t> k_values) {
  if (k_values.empty()) throw ConfigError("empty K grid");
  const std::size_t kmax = *std::max_element(k_values.begin(), k_values.end());
  if (*std::min_element(k_values.begin(), k_values.end()) == 0) throw ConfigError("K must be positive");
  if (kmax > neighbors.size()) {
    throw ConfigError("K = " + std::to_string(kmax) + " exceeds the " + std::to_string(neighbors.size()) +
                      " available neighbors");
  }
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;

  std::vector<double> hits(k_values.size(), 0.0);
  std::vector<std::pair<double, std::size_t>> dist(neighbors.size());
  std::vector<std::size_t> votes(classes);
  // winner_at[k] = predicted class using the k nearest
  std::vector<std::size_t> winner_at(kmax + 1);
  for (std::size_t q : queries) {
    for (std::size_t n = 0; n < neighbors.size(); ++n) {
      dist[n] = {squared_distance(summaries[q], summaries[neighbors[n]]), neighbors[n]};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kmax), dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    std::size_t best = 0;
    for (std::size_t k = 1; k <= kmax; ++k) {
      const std::size_t c = labels[dist[k - 1].second];
      ++votes[c];
      if (votes[c] > votes[best] || (votes[c] == votes[best] && c < best)) best = c;
      winner_at[k] = best;
    }
    for (std::size_t i = 0; i < k_values.size(); ++i) {
      if (winner_at[k_values[i]] == labels[q]) hits[i] += 1.0;
    }
  }
  for (double& h : hits) h /= static_cast<double>(queries.size());
  return hits;
}

EpiResult knn_epi(std::span<const SummaryVector> summaries, std::span<const std::size_t> labels,
                  const EpiOptions& options) {
  const std::size_t n = summaries.size();
  if (labels.size() != n) throw ConfigError("summary and label counts differ");
  if (n < 2) throw ConfigError("EPI needs at least 2 documents, got " + std::to_string(n));
  if (options.splits == 0) throw ConfigError("EPI needs at least one split");

  EpiResult result;
  result.k_values = options.k_values;
  if (result.k_values.empty()) {
    for (std::size_t k = 1; k <= 30; ++k) result.k_values.push_back(k);
  }
  result.documents = n;
  result.n_eval = n / 2;
  result.n_neighbors = n - result.n_eval;
  const std::size_t kmax = *std::max_element(result.k_values.begin(), result.k_values.end());
  if (kmax > result.n_neighbors) {
    throw ConfigError("K = " + std::to_string(kmax) + " exceeds the neighbor set size " +
                      std::to_string(result.n_neighbors));
  }

  result.accuracy.assign(result.k_values.size(), std::vector<double>(options.splits));
  Rng rng(options.seed);
  std::vector<std::size_t> perm(n);
  for (std::size_t split = 0; split < options.splits; ++split) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    const std::span<const std::size_t> queries(perm.data(), result.n_eval);
    const std::span<const std::size_t> neighbors(perm.data() + result.n_eval, result.n_neighbors);
    const std::vector<double> acc = knn_accuracy(summaries, labels, queries, neighbors, result.k_values);
    for (std::size_t i = 0; i < acc.size(); ++i) result.accuracy[i][split] = acc[i];
  }

  result.mean.resize(result.k_values.size());
  result.std.resize(result.k_values.size());
  for (std::size_t i = 0; i < result.k_values.size(); ++i) {
    const auto& a = result.accuracy[i];
    result.mean[i] = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    result.std[i] = sample_std(a);
    if (i == 0 || result.mean[i] > result.epi) {
      result.epi = result.mean[i];
      result.best_index = i;
      result.best_k = result.k_values[i];
    }
  }
  return result;
}

TTestResult corrected_resampled_ttest(std::span<const double> a, std::span<const double> b, double n_eval,
                                      double n_neighbors) {
  if (a.size() != b.size()) throw ConfigError("t-test needs paired lists of equal length");
  if (a.size() < 2) throw ConfigError("t-test needs at least 2 paired runs");
  if (!(n_eval > 0.0) || !(n_neighbors > 0.0)) throw ConfigError("t-test needs positive set sizes");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(n - 1);

  TTestResult r;
  r.dof = n - 1;
  if (var == 0.0) {
    if (mean == 0.0) {
      r.indistinguishable = true;
      return r;
    }
    r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
  } else {
    r.t = mean / std::sqrt((1.0 / static_cast<double>(n) + n_eval / n_neighbors) * var);
    const boost::math::students_t dist(static_cast<double>(r.dof));
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  }
  r.significant_05 = r.p_value < 0.05;
  r.significant_10 = r.p_value < 0.10;
  return r;
}

namespace {

// Top `dims` eigenpairs of a symmetric matrix, descending.
void top_eigen(const Eigen::MatrixXd& sym, std::size_t dims, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericError("eigen decomposition failed");
  const Eigen::Index n = sym.rows();
  const auto k = static_cast<Eigen::Index>(dims);
  values.resize(k);
  vectors.resize(n, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    values(i) = solver.eigenvalues()(n - 1 - i);
    vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  const double top = std::max(values(0), 0.0);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(values(i) > 1e-10 * top) || top == 0.0) {
      throw NumericError("data has rank below " + std::to_string(dims) + "; cannot project");
    }
  }
}

void fix_signs(PcaResult& r) {
  for (Eigen::Index k = 0; k < r.components.cols(); ++k) {
    Eigen::Index arg = 0;
    r.components.col(k).cwiseAbs().maxCoeff(&arg);
    if (r.components(arg, k) < 0) {
      r.components.col(k) *= -1.0;
      r.coordinates.col(k) *= -1.0;
    }
  }
}

void check_count(std::size_t n, std::size_t dims) {
  if (dims == 0) throw ConfigError("projection needs at least one dimension");
  if (n < dims + 1) {
    throw ConfigError("projection to " + std::to_string(dims) + " dimensions needs at least " +
                      std::to_string(dims + 1) + " vectors, got " + std::to_string(n));
  }
}

}  // namespace

PcaResult pca_project(const Eigen::MatrixXd& rows, std::size_t dims) {
  const auto n = static_cast<std::size_t>(rows.rows());
  check_count(n, dims);
  if (dims > static_cast<std::size_t>(rows.cols())) throw ConfigError("more components requested than dimensions");
  PcaResult r;
  r.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - r.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  if (rows.cols() <= rows.rows()) {
    top_eigen(centered.transpose() * centered / denom, dims, values, vectors);
    r.components = vectors;
    r.variances = values;
    r.coordinates = centered * r.components;
  } else {
    top_eigen(centered * centered.transpose(), dims, values, vectors);
    r.variances = values / denom;
    r.components.resize(rows.cols(), values.size());
    r.coordinates.resize(rows.rows(), values.size());
    for (Eigen::Index k = 0; k < values.size(); ++k) {
      const double s = std::sqrt(values(k));
      r.components.col(k) = centered.transpose() * vectors.col(k) / s;
      r.coordinates.col(k) = vectors.col(k) * s;
    }
  }
  fix_signs(r);
  return r;
}

PcaResult pca_project(std::span<const SummaryVector> vectors, std::size_t dims) {
  check_count(vectors.size(), dims);
  const std::size_t d = vectors.front().length;
  for (const auto& v : vectors) {
    if (v.space != vectors.front().space || v.length != d) throw ConfigError("summary vectors are not comparable");
  }
  if (vectors.front().space == SummarySpace::kEmbedding) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < vectors.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = vectors[i].dense.transpose();
    return pca_project(rows, dims);
  }

  // Word space: work with the n x n Gram matrix of the sparse rows.
  const auto n = static_cast<Eigen::Index>(vectors.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const auto& x = vectors[static_cast<std::size_t>(a)].sparse;
      const auto& y = vectors[static_cast<std::size_t>(b)].sparse;
      double dot = 0.0;
      for (auto i = x.begin(), j = y.begin(); i != x.end() && j != y.end();) {
        if (i->first < j->first) {
          ++i;
        } else if (j->first < i->first) {
          ++j;
        } else {
          dot += i->second * j->second;
          ++i;
          ++j;
        }
      }
      gram(a, b) = gram(b, a) = dot;
    }
  }
  const Eigen::VectorXd row_mean = gram.rowwise().mean();
  const double all_mean = row_mean.mean();
  Eigen::MatrixXd centered = gram;
  centered.colwise() -= row_mean;
  centered.rowwise() -= row_mean.transpose();
  centered.array() += all_mean;

  Eigen::VectorXd values;
  Eigen::MatrixXd eig;
  top_eigen(centered, dims, values, eig);
  if (static_cast<std::size_t>(d) < dims) throw ConfigError("more components requested than dimensions");

  PcaResult r;
  r.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (const auto& v : vectors) {
    for (const auto& [i, x] : v.sparse) r.mean(static_cast<Eigen::Index>(i)) += x;
  }
  r.mean /= static_cast<double>(n);
  r.variances = values / static_cast<double>(n - 1);
  r.components = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), values.size());
  r.coordinates.resize(n, values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    const double s = std::sqrt(values(k));
    // The eigenvectors are orthogonal to the ones vector, so the mean drops out.
    for (Eigen::Index a = 0; a < n; ++a) {
      for (const auto& [i, x] : vectors[static_cast<std::size_t>(a)].sparse) {
        r.components(static_cast<Eigen::Index>(i), k) += x * eig(a, k);
      }
    }
    r.components.col(k) /= s;
    r.coordinates.col(k) = eig.col(k) * s;
  }
  fix_signs(r);
  return r;
}

std::string deletion_csv(std::span<const DeletionCurve> curves) {
  std::ostringstream out;
  out << "protocol,method,k,accuracy,std,documents,runs\n";
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.accuracy.size(); ++k) {
      out << to_string(c.protocol) << ',' << to_string(c.source) << ',' << k << ','
          << io::format_double(c.accuracy[k]) << ',' << io::format_double(c.std[k]) << ',' << c.documents << ','
          << c.runs << '\n';
    }
  }
  return out.str();
}

std::string epi_csv(std::span<const std::pair<std::string, EpiResult>> rows) {
  std::ostringstream out;
  out << "weighting,K,mean,std\n";
  for (const auto& [name, r] : rows) {
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
      out << csv_field(name) << ',' << r.k_values[i] << ',' << io::format_double(r.mean[i]) << ','
          << io::format_double(r.std[i]) << '\n';
    }
  }
  return out.str();
}

std::string pca_csv(const PcaResult& pca, std::span<const std::string> doc_ids, std::span<const std::string> labels,
                    std::span<const std::string> groups) {
  const auto n = static_cast<std::size_t>(pca.coordinates.rows());
  if (doc_ids.size() != n || labels.size() != n || groups.size() != n) {
    throw ConfigError("PCA export needs one id, label and group per row");
  }
  std::ostringstream out;
  out << "doc_id,x,y,label,group\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double y = pca.coordinates.cols() > 1 ? pca.coordinates(r, 1) : 0.0;
    out << csv_field(doc_ids[i]) << ',' << io::format_double(pca.coordinates(r, 0)) << ',' << io::format_double(y)
        << ',' << csv_field(labels[i]) << ',' << csv_field(groups[i]) << '\n';
  }
  return out.str();
}

}  // namespace lrptext
