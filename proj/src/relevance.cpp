#include "lrptext/relevance.hpp"

#include <map>

#include "json.hpp"
#include "lrptext/binary_io.hpp"
#include "lrptext/error.hpp"

namespace lrptext {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void check_trace(const CnnModel& model, const ForwardTrace& trace, std::size_t target) {
  if (target >= model.hyper.classes) {
    throw ConfigError("target class " + std::to_string(target) + " is out of range [0, " +
                      std::to_string(model.hyper.classes) + ")");
  }
  const auto positions = trace.input.cols() - idx(model.hyper.width) + 1;
  const bool shapes_ok = trace.input.rows() == idx(model.hyper.dim) && positions >= 1 &&
                         trace.conv.rows() == idx(model.hyper.filters) &&
                         trace.conv.cols() == positions &&
                         trace.scores.size() == idx(model.hyper.classes) &&
                         trace.argmax.size() == model.hyper.filters;
  if (!shapes_ok || trace.model_fingerprint != model.fingerprint()) {
    throw ConfigError("forward trace was not produced by this model");
  }
}

}  // namespace

std::string_view to_string(RelevanceMethod method) {
  return method == RelevanceMethod::kLrp ? "lrp" : "sa";
}

RelevanceMethod parse_relevance_method(std::string_view name) {
  if (name == "lrp") return RelevanceMethod::kLrp;
  if (name == "sa") return RelevanceMethod::kSa;
  throw ConfigError("unknown relevance method '" + std::string(name) + "' (expected lrp or sa)");
}

void LrpConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("LRP epsilon must be finite and non-negative");
  }
}

bool RelevanceMap::operator==(const RelevanceMap& o) const {
  return model_id == o.model_id && method == o.method && target_class == o.target_class &&
         start_score == o.start_score && tokens == o.tokens &&
         input_relevance.rows() == o.input_relevance.rows() &&
         input_relevance.cols() == o.input_relevance.cols() && input_relevance == o.input_relevance &&
         word_relevance.size() == o.word_relevance.size() && word_relevance == o.word_relevance &&
         feature_relevance == o.feature_relevance && zero_denominators == o.zero_denominators;
}

CnnLrpLayers lrp_cnn_layers(const CnnModel& model, const ForwardTrace& trace, std::size_t target,
                            const LrpConfig& config) {
  config.validate();
  check_trace(model, trace, target);
  const auto F = idx(model.hyper.filters);
  const auto C = idx(model.hyper.classes);
  const auto D = idx(model.hyper.dim);
  const std::size_t H = model.hyper.width;
  const double eps = config.epsilon;

  CnnLrpLayers out;
  out.output = Eigen::VectorXd::Zero(C);
  out.output(idx(target)) = trace.scores(idx(target));

  // Output layer -> pooled features.
  out.pooled = Eigen::VectorXd::Zero(F);
  for (Eigen::Index k = 0; k < C; ++k) {
    const double rk = out.output(k);
    if (rk == 0.0) continue;
    const double sign = trace.scores(k) >= 0.0 ? 1.0 : -1.0;
    const double share = (model.out_bias(k) + eps * sign) / static_cast<double>(F);
    const Eigen::VectorXd z = trace.pooled.cwiseProduct(model.out_weights.col(k)).array() + share;
    const double denom = z.sum();
    if (denom == 0.0) {
      ++out.zero_denominators;
      continue;
    }
    out.pooled += z * (rk / denom);
  }

  // Max pooling: winner takes all.
  out.conv = Eigen::MatrixXd::Zero(F, trace.conv.cols());
  for (Eigen::Index j = 0; j < F; ++j) out.conv(j, idx(trace.argmax[static_cast<std::size_t>(j)])) = out.pooled(j);

  // Convolution -> input. Only the winning position of each filter carries
  // relevance.
  out.input = Eigen::MatrixXd::Zero(D, trace.input.cols());
  const double hd = static_cast<double>(H) * static_cast<double>(D);
  Eigen::MatrixXd z(D, idx(H));
  for (Eigen::Index j = 0; j < F; ++j) {
    const Eigen::Index s = idx(trace.argmax[static_cast<std::size_t>(j)]);
    const double r = out.conv(j, s);
    if (r == 0.0) continue;
    const double sign = trace.conv(j, s) > 0.0 ? 1.0 : -1.0;
    const double share = (model.conv_bias(j) + eps * sign) / hd;
    for (std::size_t tau = 0; tau < H; ++tau) {
      z.col(idx(tau)) = trace.input.col(s + idx(H - 1 - tau)).cwiseProduct(
                            model.conv_weights[tau].row(j).transpose()).array() + share;
    }
    const double denom = z.sum();
    if (denom == 0.0) {
      ++out.zero_denominators;
      continue;
    }
    for (std::size_t tau = 0; tau < H; ++tau) {
      out.input.col(s + idx(H - 1 - tau)) += z.col(idx(tau)) * (r / denom);
    }
  }
  return out;
}

RelevanceMap lrp_cnn(const CnnModel& model, const ForwardTrace& trace, std::size_t target,
                     const LrpConfig& config) {
  CnnLrpLayers layers = lrp_cnn_layers(model, trace, target, config);
  RelevanceMap map;
  map.model_id = io::hex64(trace.model_fingerprint);
  map.method = RelevanceMethod::kLrp;
  map.target_class = target;
  map.start_score = trace.scores(idx(target));
  map.word_relevance = pool_word_relevance(layers.input);
  map.input_relevance = std::move(layers.input);
  map.zero_denominators = layers.zero_denominators;
  return map;
}

Eigen::MatrixXd cnn_score_gradient(const CnnModel& model, const ForwardTrace& trace, std::size_t target) {
  check_trace(model, trace, target);
  const std::size_t H = model.hyper.width;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(trace.input.rows(), trace.input.cols());
  for (Eigen::Index j = 0; j < idx(model.hyper.filters); ++j) {
    const Eigen::Index s = idx(trace.argmax[static_cast<std::size_t>(j)]);
    if (!(trace.conv_pre(j, s) > 0.0)) continue;
    const double g = model.out_weights(j, idx(target));
    for (std::size_t tau = 0; tau < H; ++tau) {
      grad.col(s + idx(H - 1 - tau)) += g * model.conv_weights[tau].row(j).transpose();
    }
  }
  return grad;
}

RelevanceMap sa_cnn(const CnnModel& model, const ForwardTrace& trace, std::size_t target) {
  const Eigen::MatrixXd grad = cnn_score_gradient(model, trace, target);
  RelevanceMap map;
  map.model_id = io::hex64(trace.model_fingerprint);
  map.method = RelevanceMethod::kSa;
  map.target_class = target;
  map.input_relevance = grad.array().square().matrix();
  map.start_score = map.input_relevance.sum();
  map.word_relevance = pool_word_relevance(map.input_relevance);
  return map;
}

RelevanceMap sa_cnn(const CnnModel& model, const InputMatrix& input, std::size_t target) {
  RelevanceMap map = sa_cnn(model, forward(model, input), target);
  map.tokens = input.tokens;
  return map;
}

FeatureRelevance lrp_svm(const SvmModel& model, const TfidfVector& x, std::size_t target) {
  if (target >= model.classes()) throw ConfigError("target class out of range");
  if (x.empty()) throw ConfigError("cannot decompose the score of an empty document vector");
  const auto c = idx(target);
  const double bias_share = model.bias(c) / static_cast<double>(x.nnz());
  FeatureRelevance r;
  r.reserve(x.nnz());
  for (const auto& [i, v] : x.entries) r.emplace_back(i, model.weights(idx(i), c) * v + bias_share);
  return r;
}

FeatureRelevance sa_svm(const SvmModel& model, const TfidfVector& x, std::size_t target) {
  if (target >= model.classes()) throw ConfigError("target class out of range");
  if (x.empty()) throw ConfigError("cannot compute sensitivities of an empty document vector");
  const auto c = idx(target);
  FeatureRelevance r;
  r.reserve(x.nnz());
  for (const auto& [i, v] : x.entries) {
    const double w = model.weights(idx(i), c);
    r.emplace_back(i, w * w);
  }
  return r;
}

Eigen::VectorXd pool_word_relevance(const Eigen::MatrixXd& input_relevance) {
  return input_relevance.colwise().sum().transpose();
}

Eigen::VectorXd spread_feature_relevance(const FeatureRelevance& features,
                                         std::span<const std::string> tokens, const Vocabulary& vocab) {
  std::vector<std::optional<std::size_t>> ids(tokens.size());
  std::map<std::size_t, double> occurrences;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    ids[t] = vocab.find(tokens[t]);
    if (ids[t]) occurrences[*ids[t]] += 1.0;
  }
  std::map<std::size_t, double> per_feature(features.begin(), features.end());
  Eigen::VectorXd r = Eigen::VectorXd::Zero(idx(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (!ids[t]) continue;
    auto it = per_feature.find(*ids[t]);
    if (it != per_feature.end()) r(idx(t)) = it->second / occurrences[*ids[t]];
  }
  return r;
}

RelevanceMap svm_relevance(const SvmModel& model, const TfidfVector& x,
                           std::span<const std::string> tokens, const Vocabulary& vocab,
                           std::size_t target, RelevanceMethod method) {
  RelevanceMap map;
  map.model_id = io::hex64(svm_fingerprint(model));
  map.method = method;
  map.target_class = target;
  map.tokens.assign(tokens.begin(), tokens.end());
  if (method == RelevanceMethod::kLrp) {
    map.feature_relevance = lrp_svm(model, x, target);
    map.start_score = svm_scores(model, x)(idx(target));
  } else {
    map.feature_relevance = sa_svm(model, x, target);
    map.start_score = model.weights.col(idx(target)).squaredNorm();
  }
  map.word_relevance = spread_feature_relevance(map.feature_relevance, tokens, vocab);
  return map;
}

namespace {

using nlohmann::json;

// Doubles are stored as shortest round-trip decimal strings so non-finite
// values and exact bits survive any JSON reader.
json encode(double v) { return io::format_double(v); }
double decode(const json& j) {
  if (j.is_number()) return j.get<double>();
  return io::parse_double(j.get<std::string>());
}

}  // namespace

std::string relevance_to_json(const RelevanceMap& map, bool include_input_relevance) {
  json j;
  j["model_id"] = map.model_id;
  j["method"] = std::string(to_string(map.method));
  j["target_class"] = map.target_class;
  j["start_score"] = encode(map.start_score);
  j["tokens"] = map.tokens;
  json wr = json::array();
  for (Eigen::Index t = 0; t < map.word_relevance.size(); ++t) wr.push_back(encode(map.word_relevance(t)));
  j["word_relevance"] = std::move(wr);
  json fr = json::array();
  for (const auto& [i, v] : map.feature_relevance) fr.push_back(json::array({i, encode(v)}));
  j["feature_relevance"] = std::move(fr);
  j["zero_denominators"] = map.zero_denominators;
  if (include_input_relevance && map.input_relevance.size() > 0) {
    json cols = json::array();
    for (Eigen::Index t = 0; t < map.input_relevance.cols(); ++t) {
      json col = json::array();
      for (Eigen::Index i = 0; i < map.input_relevance.rows(); ++i) col.push_back(encode(map.input_relevance(i, t)));
      cols.push_back(std::move(col));
    }
    j["input_relevance"] = std::move(cols);
  }
  return j.dump(1) + "\n";
}

RelevanceMap relevance_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed relevance record: ") + e.what());
  }
  try {
    RelevanceMap map;
    map.model_id = j.at("model_id").get<std::string>();
    map.method = parse_relevance_method(j.at("method").get<std::string>());
    map.target_class = j.at("target_class").get<std::size_t>();
    map.start_score = decode(j.at("start_score"));
    map.tokens = j.at("tokens").get<std::vector<std::string>>();
    const auto& wr = j.at("word_relevance");
    map.word_relevance.resize(static_cast<Eigen::Index>(wr.size()));
    for (std::size_t t = 0; t < wr.size(); ++t) map.word_relevance(idx(t)) = decode(wr[t]);
    for (const auto& e : j.at("feature_relevance")) {
      map.feature_relevance.emplace_back(e.at(0).get<std::size_t>(), decode(e.at(1)));
    }
    map.zero_denominators = j.value("zero_denominators", std::size_t{0});
    if (j.contains("input_relevance")) {
      const auto& cols = j["input_relevance"];
      const std::size_t L = cols.size();
      const std::size_t D = L ? cols[0].size() : 0;
      map.input_relevance.resize(idx(D), idx(L));
      for (std::size_t t = 0; t < L; ++t) {
        if (cols[t].size() != D) throw DataError("ragged input_relevance matrix");
        for (std::size_t i = 0; i < D; ++i) map.input_relevance(idx(i), idx(t)) = decode(cols[t][i]);
      }
    }
    return map;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed relevance record: ") + e.what());
  }
}

}  // namespace lrptext
