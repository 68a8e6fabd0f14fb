#include "lrptext/summary.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "lrptext/binary_io.hpp"
#include "lrptext/error.hpp"

namespace lrptext {

namespace {

constexpr std::pair<Weighting, std::string_view> kWeightingNames[] = {
    {Weighting::kLrp, "lrp"},         {Weighting::kSa, "sa"},       {Weighting::kLrpEw, "lrp_ew"},
    {Weighting::kSaEw, "sa_ew"},      {Weighting::kUniform, "uniform"}, {Weighting::kIdf, "idf"},
    {Weighting::kTfidf, "tfidf"},
};

}  // namespace

std::string_view to_string(SummarySpace space) {
  return space == SummarySpace::kEmbedding ? "embedding" : "bow";
}

std::string_view to_string(Weighting weighting) {
  for (const auto& [w, name] : kWeightingNames) {
    if (w == weighting) return name;
  }
  return "unknown";
}

Weighting parse_weighting(std::string_view name) {
  for (const auto& [w, n] : kWeightingNames) {
    if (n == name) return w;
  }
  throw ConfigError("unknown weighting '" + std::string(name) + "'");
}

double SummaryVector::norm() const {
  if (space == SummarySpace::kEmbedding) return dense.norm();
  double sq = 0.0;
  for (const auto& e : sparse) sq += e.second * e.second;
  return std::sqrt(sq);
}

Eigen::VectorXd SummaryVector::to_dense() const {
  if (space == SummarySpace::kEmbedding) return dense;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(length));
  for (const auto& [i, v] : sparse) d(static_cast<Eigen::Index>(i)) = v;
  return d;
}

SummaryVector summary_word_level(const Eigen::VectorXd& weights, const InputMatrix& input,
                                 Weighting weighting, std::string model_id) {
  if (weights.size() != input.values.cols()) {
    throw ConfigError("word weights have length " + std::to_string(weights.size()) +
                      " but the document has " + std::to_string(input.values.cols()) + " tokens");
  }
  SummaryVector v;
  v.space = SummarySpace::kEmbedding;
  v.weighting = weighting;
  v.model_id = std::move(model_id);
  v.length = input.dim();
  v.dense = input.values * weights;
  return v;
}

SummaryVector summary_elementwise(const RelevanceMap& map, const InputMatrix& input, Weighting weighting) {
  if (map.input_relevance.rows() != input.values.rows() || map.input_relevance.cols() != input.values.cols()) {
    throw ConfigError("relevance map shape does not match the input matrix");
  }
  SummaryVector v;
  v.space = SummarySpace::kEmbedding;
  v.weighting = weighting;
  v.model_id = map.model_id;
  v.length = input.dim();
  v.dense = map.input_relevance.cwiseProduct(input.values).rowwise().sum();
  return v;
}

SummaryVector summary_svm(const FeatureRelevance& relevance, std::span<const std::size_t> present,
                          std::size_t vocab_size, Weighting weighting, std::string model_id) {
  std::map<std::size_t, double> r(relevance.begin(), relevance.end());
  SummaryVector v;
  v.space = SummarySpace::kBow;
  v.weighting = weighting;
  v.model_id = std::move(model_id);
  v.length = vocab_size;
  std::vector<std::size_t> words(present.begin(), present.end());
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (std::size_t w : words) {
    if (w >= vocab_size) throw ConfigError("word index exceeds the vocabulary size");
    auto it = r.find(w);
    if (it == r.end()) throw ConfigError("no relevance given for present word " + std::to_string(w));
    v.sparse.emplace_back(w, it->second);
  }
  return v;
}

Eigen::VectorXd uniform_weights(std::size_t length) {
  return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(length));
}

Eigen::VectorXd idf_weights(std::span<const std::string> tokens, const Vocabulary& vocab) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (auto i = vocab.find(tokens[t])) w(static_cast<Eigen::Index>(t)) = vocab.idf(*i);
  }
  return w;
}

FeatureRelevance binary_presence(const TfidfVector& x) {
  FeatureRelevance r;
  for (const auto& e : x.entries) r.emplace_back(e.first, 1.0);
  return r;
}

FeatureRelevance tfidf_relevance(const TfidfVector& x) { return x.entries; }

std::vector<std::size_t> support(const TfidfVector& x) {
  std::vector<std::size_t> s;
  for (const auto& e : x.entries) s.push_back(e.first);
  return s;
}

SummaryVector normalize(SummaryVector v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("cannot normalize a zero summary vector");
  if (v.space == SummarySpace::kEmbedding) {
    v.dense /= n;
  } else {
    for (auto& e : v.sparse) e.second /= n;
  }
  v.normalized = true;
  return v;
}

void write_summary_table(const std::filesystem::path& path, std::span<const SummaryVector> rows,
                         const SummaryTableInfo& info) {
  std::ostringstream out(std::ios::binary);
  for (const auto& r : rows) {
    if (r.length != info.length) throw ConfigError("summary rows differ in length");
    const Eigen::VectorXd d = r.to_dense();
    io::write_f64s(out, std::span<const double>(d.data(), static_cast<std::size_t>(d.size())));
  }
  io::write_file(path, out.str());

  nlohmann::ordered_json m;
  m["space"] = std::string(to_string(info.space));
  m["weighting"] = std::string(to_string(info.weighting));
  m["model_id"] = info.model_id;
  m["rows"] = rows.size();
  m["length"] = info.length;
  m["normalized"] = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.normalized; });
  m["excluded_zero_vectors"] = info.excluded;
  m["config_hash"] = info.config_hash;
  m["doc_ids"] = info.doc_ids;
  m["labels"] = info.labels;
  auto manifest = path;
  manifest += ".json";
  io::write_file(manifest, m.dump(1) + "\n");
}

std::vector<SummaryVector> read_summary_table(const std::filesystem::path& path, SummaryTableInfo& info) {
  auto manifest_path = path;
  manifest_path += ".json";
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_file(manifest_path));
    info.space = m.at("space").get<std::string>() == "bow" ? SummarySpace::kBow : SummarySpace::kEmbedding;
    info.weighting = parse_weighting(m.at("weighting").get<std::string>());
    info.model_id = m.at("model_id").get<std::string>();
    info.length = m.at("length").get<std::size_t>();
    info.excluded = m.at("excluded_zero_vectors").get<std::size_t>();
    info.config_hash = m.at("config_hash").get<std::string>();
    info.doc_ids = m.at("doc_ids").get<std::vector<std::string>>();
    info.labels = m.at("labels").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  const std::size_t rows = m.at("rows").get<std::size_t>();
  const bool normalized = m.at("normalized").get<bool>();
  std::istringstream in(io::read_file(path), std::ios::binary);
  std::vector<SummaryVector> out(rows);
  Eigen::VectorXd buf(static_cast<Eigen::Index>(info.length));
  for (auto& v : out) {
    io::read_f64s(in, std::span<double>(buf.data(), info.length), "summary table");
    v.space = info.space;
    v.weighting = info.weighting;
    v.model_id = info.model_id;
    v.length = info.length;
    v.normalized = normalized;
    if (info.space == SummarySpace::kEmbedding) {
      v.dense = buf;
    } else {
      for (Eigen::Index i = 0; i < buf.size(); ++i) {
        if (buf(i) != 0.0) v.sparse.emplace_back(static_cast<std::size_t>(i), buf(i));
      }
    }
  }
  return out;
}

}  // namespace lrptext
