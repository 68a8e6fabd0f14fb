#include "lrptext/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "lrptext/binary_io.hpp"
#include "lrptext/error.hpp"
#include "lrptext/report.hpp"
#include "lrptext/rng.hpp"

namespace lrptext {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log(const std::string& msg) { std::cerr << "[lrptext] " << msg << std::endl; }

void merge_checked(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(1) + "\n"); }

fs::path stage_dir(const RunConfig& c, std::string_view stage) { return c.output_dir() / stage; }
fs::path model_dir(const RunConfig& c, std::string_view stage) { return c.output_dir() / stage / c.model(); }

// Verifies that a stage manifest exists and was produced by the expected config.
json require_manifest(const fs::path& dir, const std::string& expected_hash, std::string_view producer) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) {
    throw DataError("missing prerequisite " + path.string() + "; run `lrptext " + std::string(producer) + "` first");
  }
  json m = read_json(path);
  const std::string found = m.value("config_hash", "");
  if (found != expected_hash) {
    throw DataError("stale artifact " + path.string() + ": produced by config " + found + ", current config expects " +
                    expected_hash + "; rerun `lrptext " + std::string(producer) + "`");
  }
  return m;
}

std::string sanitize(std::string_view id) {
  std::string s(id);
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s;
}

std::vector<std::string> truncated(const std::vector<std::string>& tokens, std::size_t max_len) {
  return std::vector<std::string>(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(std::min(max_len, tokens.size())));
}

struct LoadedModel {
  bool svm = false;
  CnnModel cnn;
  SvmModel svm_model;
  std::string id;
};

LoadedModel load_model(const RunConfig& config) {
  const fs::path dir = model_dir(config, "models");
  require_manifest(dir, config.train_hash(), "train");
  LoadedModel m;
  m.svm = config.is_svm();
  if (m.svm) {
    m.svm_model = load_svm(dir / "checkpoint.bin");
    m.id = io::hex64(svm_fingerprint(m.svm_model));
  } else {
    m.cnn = load_cnn(dir / "checkpoint.bin");
    m.id = io::hex64(m.cnn.fingerprint());
  }
  return m;
}

std::vector<std::size_t> labels_of(std::span<const TokenizedDocument> docs) {
  std::vector<std::size_t> y;
  for (const auto& d : docs) y.push_back(static_cast<std::size_t>(d.label));
  return y;
}

std::vector<TfidfVector> tfidf_all(std::span<const TokenizedDocument> docs, const Vocabulary& vocab) {
  std::vector<TfidfVector> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(tfidf_vector(lowercase_tokens(d.tokens), vocab));
  return out;
}

std::string group_of(const std::string& category, const json& mapping) {
  if (mapping.contains(category)) return mapping.at(category).get<std::string>();
  return category.substr(0, category.find('.'));
}

}  // namespace

// ---- configuration -----------------------------------------------------------

json RunConfig::defaults() {
  return json{
      {"output_dir", "lrptext_out"},
      {"model", "cnn2"},
      {"data", {{"train_root", ""}, {"test_root", ""}, {"categories", json::array()}, {"max_len", kDefaultMaxLen}}},
      {"embeddings",
       {{"pretrained", ""},
        {"format", "binary"},
        {"cbow",
         {{"dim", 100}, {"window", 5}, {"negatives", 5}, {"epochs", 5}, {"min_count", 1}, {"learning_rate", 0.05},
          {"seed", 1}}}}},
      {"cnn",
       {{"filters", 0}, {"learning_rate", 0.01}, {"batch_size", 50}, {"epochs", 10}, {"l2", 1e-4}, {"dropout", 0.5},
        {"seed", 1}, {"validation_docs", 1000}}},
      {"svm",
       {{"c_grid", {0.01, 0.1, 1.0, 10.0, 100.0}}, {"folds", 10}, {"tolerance", 1e-4}, {"max_epochs", 1000},
        {"seed", 1}}},
      {"relevance", {{"method", "lrp"}, {"epsilon", 0.01}}},
      {"evaluation",
       {{"k_grid", json::array()}, {"splits", 10}, {"seed", 1}, {"deletion_k_max", 50},
        {"deletion_min_length", 100}, {"random_runs", 10}, {"groups", ""}, {"top_k", 30}}},
      {"report", {{"documents", 20}}},
  };
}

RunConfig RunConfig::from_json(const json& user) {
  RunConfig c;
  c.tree = defaults();
  merge_checked(c.tree, user, "");
  const std::string model = c.model();
  if (model != "cnn1" && model != "cnn2" && model != "cnn3" && model != "svm") {
    throw ConfigError("model must be one of cnn1, cnn2, cnn3, svm; got '" + model + "'");
  }
  c.lrp().validate();
  (void)c.method();
  return c;
}

const json& RunConfig::at(std::string_view key) const {
  const json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part(key.substr(start, dot - start));
    if (!node->is_object() || !node->contains(part)) throw ConfigError("missing config key '" + std::string(key) + "'");
    node = &node->at(part);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return *node;
}

fs::path RunConfig::output_dir() const { return get<std::string>("output_dir"); }
std::string RunConfig::model() const { return get<std::string>("model"); }
bool RunConfig::is_svm() const { return model() == "svm"; }

CnnHyper RunConfig::cnn_hyper(std::size_t dim, std::size_t classes) const {
  const std::string m = model();
  if (m == "svm") throw ConfigError("the svm model has no CNN hyperparameters");
  CnnHyper h;
  h.dim = dim;
  h.classes = classes;
  h.width = static_cast<std::size_t>(m.back() - '0');
  h.filters = get<std::size_t>("cnn.filters");
  if (h.filters == 0) h.filters = m == "cnn2" ? 800 : 600;
  return h;
}

CnnTrainOptions RunConfig::cnn_options() const {
  CnnTrainOptions o;
  o.learning_rate = get<double>("cnn.learning_rate");
  o.batch_size = get<std::size_t>("cnn.batch_size");
  o.epochs = get<std::size_t>("cnn.epochs");
  o.l2 = get<double>("cnn.l2");
  o.dropout = get<double>("cnn.dropout");
  o.seed = get<std::uint64_t>("cnn.seed");
  return o;
}

CbowOptions RunConfig::cbow_options() const {
  CbowOptions o;
  o.dim = get<std::size_t>("embeddings.cbow.dim");
  o.window = get<std::size_t>("embeddings.cbow.window");
  o.negatives = get<std::size_t>("embeddings.cbow.negatives");
  o.epochs = get<std::size_t>("embeddings.cbow.epochs");
  o.min_count = get<std::size_t>("embeddings.cbow.min_count");
  o.learning_rate = get<double>("embeddings.cbow.learning_rate");
  o.seed = get<std::uint64_t>("embeddings.cbow.seed");
  return o;
}

SvmTrainOptions RunConfig::svm_options() const {
  SvmTrainOptions o;
  o.tolerance = get<double>("svm.tolerance");
  o.max_epochs = get<std::size_t>("svm.max_epochs");
  o.seed = get<std::uint64_t>("svm.seed");
  return o;
}

LrpConfig RunConfig::lrp() const {
  LrpConfig c;
  c.epsilon = get<double>("relevance.epsilon");
  return c;
}

RelevanceMethod RunConfig::method() const { return parse_relevance_method(get<std::string>("relevance.method")); }

EpiOptions RunConfig::epi_options() const {
  EpiOptions o;
  o.k_values = get<std::vector<std::size_t>>("evaluation.k_grid");
  o.splits = get<std::size_t>("evaluation.splits");
  o.seed = get<std::uint64_t>("evaluation.seed");
  return o;
}

DeletionOptions RunConfig::deletion_options() const {
  DeletionOptions o;
  o.k_max = get<std::size_t>("evaluation.deletion_k_max");
  o.min_length = get<std::size_t>("evaluation.deletion_min_length");
  o.random_runs = get<std::size_t>("evaluation.random_runs");
  o.seed = get<std::uint64_t>("evaluation.seed");
  o.lrp = lrp();
  return o;
}

std::string RunConfig::section_hash(std::initializer_list<std::string_view> sections, std::string_view upstream) const {
  json j;
  for (auto s : sections) j[std::string(s)] = at(s);
  j["upstream"] = std::string(upstream);
  return io::hex64(io::fnv1a(j.dump()));
}

std::string RunConfig::preprocess_hash() const { return section_hash({"data", "embeddings"}); }
std::string RunConfig::train_hash() const {
  return section_hash({"model", is_svm() ? "svm" : "cnn"}, preprocess_hash());
}
std::string RunConfig::explain_hash() const { return section_hash({"relevance"}, train_hash()); }
std::string RunConfig::evaluate_hash() const { return section_hash({"evaluation"}, explain_hash()); }

void apply_override(json& tree, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig load_config(const std::optional<fs::path>& path, std::span<const std::string> overrides) {
  json user = json::object();
  if (path) {
    if (!fs::exists(*path)) throw ConfigError("config file not found: " + path->string());
    try {
      user = json::parse(io::read_file(*path));
    } catch (const json::exception& e) {
      throw ConfigError(path->string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(user, o);
  if (const char* env = std::getenv("LRPTEXT_OUTPUT_DIR"); env && *env) user["output_dir"] = env;
  return RunConfig::from_json(user);
}

// ---- artifacts -----------------------------------------------------------------

std::string corpus_to_tsv(std::span<const TokenizedDocument> docs) {
  std::string out = "#id\tlabel\ttokens\n";
  for (const auto& d : docs) {
    out += d.id;
    out += '\t';
    out += std::to_string(d.label);
    out += '\t';
    for (std::size_t t = 0; t < d.tokens.size(); ++t) {
      if (t) out += ' ';
      out += d.tokens[t];
    }
    out += '\n';
  }
  return out;
}

std::vector<TokenizedDocument> corpus_from_tsv(std::string_view text, Split split) {
  std::vector<TokenizedDocument> docs;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t a = line.find('\t');
    const std::size_t b = a == std::string_view::npos ? a : line.find('\t', a + 1);
    if (b == std::string_view::npos) throw DataError("corpus line " + std::to_string(line_no) + " is malformed");
    TokenizedDocument d;
    d.id = std::string(line.substr(0, a));
    d.label = std::stoi(std::string(line.substr(a + 1, b - a - 1)));
    d.split = split;
    std::string_view rest = line.substr(b + 1);
    while (!rest.empty()) {
      const std::size_t sp = rest.find(' ');
      d.tokens.emplace_back(rest.substr(0, sp));
      if (sp == std::string_view::npos) break;
      rest.remove_prefix(sp + 1);
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<std::string> lowercase_tokens(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lowercase_token(t));
  return out;
}

InputMatrix encode_document(std::span<const std::string> tokens, const EmbeddingTable& table, const Normalizer& norm,
                            std::size_t min_width) {
  const std::size_t L = std::max(tokens.size(), min_width);
  if (L == 0) throw ConfigError("cannot encode an empty document");
  InputMatrix m;
  m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.dim()), static_cast<Eigen::Index>(L));
  m.tokens.assign(tokens.begin(), tokens.end());
  m.tokens.resize(L);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (auto i = table.find(tokens[t])) {
      m.values.col(static_cast<Eigen::Index>(t)) = table.vectors().col(static_cast<Eigen::Index>(*i));
    }
  }
  return apply_normalizer(std::move(m), norm);
}

EncodedInputs::EncodedInputs(const std::vector<TokenizedDocument>& docs, std::vector<std::size_t> rows,
                             const EmbeddingTable& table, const Normalizer& norm, std::size_t min_width,
                             std::size_t max_len)
    : docs_(docs), rows_(std::move(rows)), table_(table), norm_(norm), min_width_(min_width), max_len_(max_len) {}

std::size_t EncodedInputs::label(std::size_t i) const { return static_cast<std::size_t>(docs_[rows_[i]].label); }

InputMatrix EncodedInputs::matrix(std::size_t i) const {
  const auto& tokens = docs_[rows_[i]].tokens;
  const std::size_t n = std::min(tokens.size(), max_len_);
  return encode_document(std::span<const std::string>(tokens.data(), n), table_, norm_, min_width_);
}

std::vector<bool> EncodedInputs::in_vocabulary(std::size_t i) const {
  const auto& tokens = docs_[rows_[i]].tokens;
  const std::size_t n = std::min(tokens.size(), max_len_);
  std::vector<bool> known(std::max(n, min_width_), false);
  for (std::size_t t = 0; t < n; ++t) known[t] = table_.contains(tokens[t]);
  return known;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

// ---- preprocess -------------------------------------------------------------------

void cmd_preprocess(const RunConfig& config) {
  const fs::path train_root = config.get<std::string>("data.train_root");
  const fs::path test_root = config.get<std::string>("data.test_root");
  for (const auto& root : {train_root, test_root}) {
    if (root.empty()) throw ConfigError("data.train_root and data.test_root must be set");
    if (!fs::is_directory(root)) throw ConfigError("dataset root does not exist: " + root.string());
  }
  const auto wanted = config.get<std::vector<std::string>>("data.categories");

  auto select = [&](std::vector<RawDocument> raw) {
    if (wanted.empty()) return raw;
    std::vector<RawDocument> kept;
    for (auto& r : raw) {
      if (std::find(wanted.begin(), wanted.end(), r.category) != wanted.end()) kept.push_back(std::move(r));
    }
    return kept;
  };
  const std::vector<RawDocument> raw_train = select(load_dataset(train_root, Split::kTrain));
  const std::vector<RawDocument> raw_test = select(load_dataset(test_root, Split::kTest));
  const std::vector<std::string> classes = category_names(raw_train);
  for (const auto& w : wanted) {
    if (std::find(classes.begin(), classes.end(), w) == classes.end()) {
      throw ConfigError("category '" + w + "' not found under " + train_root.string());
    }
  }
  if (raw_test.empty()) throw DataError("no test documents for the selected categories under " + test_root.string());

  // Full token sequences; the CNN input is truncated at encoding time.
  PreprocessOptions opts;
  opts.lowercase = false;
  opts.max_len = std::numeric_limits<std::size_t>::max();
  const auto train = preprocess_all(raw_train, classes, opts);
  const auto test = preprocess_all(raw_test, classes, opts);
  log("preprocessed " + std::to_string(train.size()) + " train and " + std::to_string(test.size()) +
      " test documents in " + std::to_string(classes.size()) + " classes");

  const Vocabulary cased = build_vocabulary(train, false);
  std::vector<TokenizedDocument> lowered = train;
  for (auto& d : lowered) d.tokens = lowercase_tokens(d.tokens);
  const Vocabulary lower = build_vocabulary(lowered, true);

  const std::size_t max_len = config.get<std::size_t>("data.max_len");
  if (max_len == 0) throw ConfigError("data.max_len must be positive");
  EmbeddingTable table;
  const std::string pretrained = config.get<std::string>("embeddings.pretrained");
  if (!pretrained.empty()) {
    const std::string fmt = config.get<std::string>("embeddings.format");
    if (fmt != "binary" && fmt != "text") throw ConfigError("embeddings.format must be binary or text");
    std::set<std::string, std::less<>> needed;
    for (const auto* docs : {&train, &test}) {
      for (const auto& d : *docs) needed.insert(d.tokens.begin(), d.tokens.end());
    }
    if (!fs::exists(pretrained)) throw ConfigError("pretrained embeddings not found: " + pretrained);
    table = load_embeddings(pretrained, fmt == "binary" ? VectorFormat::kBinary : VectorFormat::kText,
                            [&](std::string_view w) { return needed.count(w) > 0; });
    log("loaded " + std::to_string(table.size()) + " pretrained vectors of dimension " + std::to_string(table.dim()));
  } else {
    std::vector<std::vector<std::string>> sentences;
    for (const auto& d : train) sentences.push_back(d.tokens);
    CbowOptions cbow = config.cbow_options();
    cbow.on_epoch_end = [](std::size_t epoch, const Eigen::MatrixXd&, const Eigen::MatrixXd&) {
      if (epoch > 0) log("cbow epoch " + std::to_string(epoch) + " done");
    };
    CbowResult r = train_cbow(sentences, cbow);
    table = EmbeddingTable(r.table.words(), r.table.vectors(), EmbeddingProvenance::kTrained);
    log("trained " + std::to_string(table.size()) + " CBOW vectors of dimension " + std::to_string(table.dim()));
  }

  std::vector<std::vector<std::string>> cnn_tokens;
  for (const auto& d : train) {
    if (!d.tokens.empty()) cnn_tokens.push_back(truncated(d.tokens, max_len));
  }
  const Normalizer norm = fit_normalizer(cnn_tokens, table);

  const fs::path dir = stage_dir(config, "preprocess");
  std::string cls;
  for (const auto& c : classes) cls += c + "\n";
  io::write_file(dir / "classes.txt", cls);
  io::write_file(dir / "train.tsv", corpus_to_tsv(train));
  io::write_file(dir / "test.tsv", corpus_to_tsv(test));
  io::write_file(dir / "vocab_cased.tsv", cased.to_tsv());
  io::write_file(dir / "vocab_lower.tsv", lower.to_tsv());
  save_embeddings(table, dir / "embeddings.txt", VectorFormat::kText);
  write_json(dir / "normalizer.json",
             json{{"mean", io::format_double(norm.mean)}, {"std", io::format_double(norm.std)}});

  std::size_t empty_test = 0;
  for (const auto& d : test) empty_test += d.tokens.size() < 2 ? 1 : 0;
  write_json(dir / "manifest.json",
             json{{"stage", "preprocess"},
                  {"config_hash", config.preprocess_hash()},
                  {"train_documents", train.size()},
                  {"test_documents", test.size()},
                  {"test_documents_below_two_tokens", empty_test},
                  {"classes", classes},
                  {"vocabulary_cased", cased.size()},
                  {"vocabulary_lowercased", lower.size()},
                  {"embedding_words", table.size()},
                  {"embedding_dim", table.dim()},
                  {"embedding_source", pretrained.empty() ? "cbow" : "pretrained"}});
  log("wrote " + dir.string());
}

PreparedCorpus load_prepared(const RunConfig& config) {
  const fs::path dir = stage_dir(config, "preprocess");
  require_manifest(dir, config.preprocess_hash(), "preprocess");
  PreparedCorpus p;
  std::istringstream cls(io::read_file(dir / "classes.txt"));
  for (std::string line; std::getline(cls, line);) {
    if (!line.empty()) p.classes.push_back(line);
  }
  p.train = corpus_from_tsv(io::read_file(dir / "train.tsv"), Split::kTrain);
  p.test = corpus_from_tsv(io::read_file(dir / "test.tsv"), Split::kTest);
  p.vocab_cased = Vocabulary::from_tsv(io::read_file(dir / "vocab_cased.tsv"));
  p.vocab_lower = Vocabulary::from_tsv(io::read_file(dir / "vocab_lower.tsv"));
  p.embeddings = load_embeddings(dir / "embeddings.txt", VectorFormat::kText);
  const json n = read_json(dir / "normalizer.json");
  p.normalizer.mean = io::parse_double(n.at("mean").get<std::string>());
  p.normalizer.std = io::parse_double(n.at("std").get<std::string>());
  return p;
}

// ---- train ---------------------------------------------------------------------

void cmd_train(const RunConfig& config) {
  const PreparedCorpus p = load_prepared(config);
  const fs::path dir = model_dir(config, "models");
  json manifest{{"stage", "train"}, {"config_hash", config.train_hash()}, {"model", config.model()}};

  if (config.is_svm()) {
    const auto x_train = tfidf_all(p.train, p.vocab_lower);
    const auto y_train = labels_of(p.train);
    const auto grid = config.get<std::vector<double>>("svm.c_grid");
    const auto folds = config.get<std::size_t>("svm.folds");
    SvmTrainOptions opts = config.svm_options();
    CrossValidationResult cv;
    if (grid.size() == 1) {
      cv.best_reg_c = grid.front();
    } else {
      cv = select_reg_c(x_train, y_train, p.classes.size(), p.vocab_lower.size(), grid, folds, opts);
    }
    opts.reg_c = cv.best_reg_c;
    SvmModel model = train_svm(x_train, y_train, p.classes.size(), p.vocab_lower.size(), opts);
    model.vocab_fingerprint = p.vocab_lower.fingerprint();

    const auto x_test = tfidf_all(p.test, p.vocab_lower);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < x_test.size(); ++i) {
      hits += svm_predict(model, x_test[i]) == static_cast<std::size_t>(p.test[i].label) ? 1 : 0;
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(x_test.size());
    std::string csv = "reg_c,cv_accuracy\n";
    for (const auto& [c, a] : cv.accuracy_by_c) csv += io::format_double(c) + "," + io::format_double(a) + "\n";
    io::write_file(dir / "cv.csv", csv);
    save_svm(model, dir / "checkpoint.bin");
    manifest["reg_c"] = cv.best_reg_c;
    manifest["test_accuracy"] = acc;
    manifest["checkpoint_id"] = io::hex64(svm_fingerprint(model));
    log("svm C=" + io::format_double(cv.best_reg_c) + " test accuracy " + io::format_double(acc));
  } else {
    const CnnHyper hyper = config.cnn_hyper(p.embeddings.dim(), p.classes.size());
    const CnnTrainOptions opts = config.cnn_options();
    const std::size_t max_len = config.get<std::size_t>("data.max_len");

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < p.train.size(); ++i) {
      if (!p.train[i].tokens.empty()) usable.push_back(i);
    }
    const std::size_t n_val = config.get<std::size_t>("cnn.validation_docs");
    if (n_val >= usable.size()) throw ConfigError("cnn.validation_docs must be smaller than the training set");
    Rng rng(opts.seed ^ 0x76616c6964ULL);
    rng.shuffle(usable);
    std::vector<std::size_t> val_rows(usable.begin(), usable.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_rows(usable.begin() + static_cast<std::ptrdiff_t>(n_val), usable.end());
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    const EncodedInputs train(p.train, train_rows, p.embeddings, p.normalizer, hyper.width, max_len);
    const EncodedInputs val(p.train, val_rows, p.embeddings, p.normalizer, hyper.width, max_len);
    log("training " + config.model() + " (H=" + std::to_string(hyper.width) + ", F=" + std::to_string(hyper.filters) +
        ") on " + std::to_string(train.size()) + " documents, validating on " + std::to_string(val.size()));

    const CnnTrainResult r = train_cnn(train, val, hyper, opts);
    const EncodedInputs test(p.test, all_rows(p.test.size()), p.embeddings, p.normalizer, hyper.width, max_len);
    const double acc = accuracy(r.model, test);

    std::string csv = "epoch,train_loss,train_accuracy,val_accuracy\n";
    for (const auto& e : r.log) {
      csv += std::to_string(e.epoch) + "," + io::format_double(e.train_loss) + "," +
             io::format_double(e.train_accuracy) + "," + io::format_double(e.val_accuracy) + "\n";
    }
    io::write_file(dir / "training_log.csv", csv);
    save_cnn(r.model, dir / "checkpoint.bin");
    manifest["filters"] = hyper.filters;
    manifest["width"] = hyper.width;
    manifest["best_epoch"] = r.best_epoch;
    manifest["seed"] = opts.seed;
    manifest["test_accuracy"] = acc;
    manifest["checkpoint_id"] = io::hex64(r.model.fingerprint());
    log(config.model() + " best epoch " + std::to_string(r.best_epoch) + ", test accuracy " + io::format_double(acc) +
        ", checkpoint " + manifest["checkpoint_id"].get<std::string>());
  }
  write_json(dir / "manifest.json", manifest);
}

// ---- explain -------------------------------------------------------------------

namespace {

struct DocumentView {
  std::string id;
  std::vector<std::string> tokens;
};

DocumentView find_document(const PreparedCorpus& p, const ExplainRequest& req) {
  if (req.text_file) {
    if (!fs::exists(*req.text_file)) throw ConfigError("document file not found: " + req.text_file->string());
    const std::string body = strip_header(io::read_file(*req.text_file));
    return {req.text_file->filename().string(), tokenize_and_filter(body, false)};
  }
  for (const auto* docs : {&p.test, &p.train}) {
    for (const auto& d : *docs) {
      if (d.id == req.doc_id) return {d.id, d.tokens};
    }
  }
  throw ConfigError("unknown document id '" + req.doc_id + "'");
}

RelevanceMap explain_tokens(const RunConfig& config, const PreparedCorpus& p, const LoadedModel& m,
                            const std::vector<std::string>& tokens, std::optional<std::size_t> target) {
  const RelevanceMethod method = config.method();
  if (m.svm) {
    const auto lowered = lowercase_tokens(tokens);
    const TfidfVector x = tfidf_vector(lowered, p.vocab_lower);
    if (x.empty()) throw DataError("document has no words in the SVM vocabulary");
    const std::size_t c = target ? *target : svm_predict(m.svm_model, x);
    return svm_relevance(m.svm_model, x, lowered, p.vocab_lower, c, method);
  }
  const std::size_t max_len = config.get<std::size_t>("data.max_len");
  const InputMatrix x = encode_document(truncated(tokens, max_len), p.embeddings, p.normalizer, m.cnn.hyper.width);
  const ForwardTrace trace = forward(m.cnn, x);
  const std::size_t c = target ? *target : argmax_lowest(trace.scores);
  RelevanceMap map = method == RelevanceMethod::kLrp ? lrp_cnn(m.cnn, trace, c, config.lrp()) : sa_cnn(m.cnn, trace, c);
  map.tokens = x.tokens;
  return map;
}

}  // namespace

std::vector<fs::path> cmd_explain(const RunConfig& config, const ExplainRequest& request) {
  const PreparedCorpus p = load_prepared(config);
  const LoadedModel m = load_model(config);
  const DocumentView doc = find_document(p, request);
  if (doc.tokens.empty()) throw DataError("document '" + doc.id + "' has no tokens after preprocessing");
  std::optional<std::size_t> target;
  if (request.target_class) target = class_index(p.classes, *request.target_class);
  const RelevanceMap map = explain_tokens(config, p, m, doc.tokens, target);

  const fs::path dir = model_dir(config, "explain");
  const std::string stem = sanitize(doc.id) + "." + p.classes[map.target_class] + "." +
                           std::string(to_string(map.method));
  const fs::path record = dir / (stem + ".json");
  const fs::path html = dir / (stem + ".html");
  io::write_file(record, relevance_to_json(map));
  io::write_file(html, heatmap_html(map, p.classes[map.target_class]));
  log("explained '" + doc.id + "' for class " + p.classes[map.target_class]);
  return {record, html};
}

// ---- summarize -----------------------------------------------------------------

void cmd_summarize(const RunConfig& config) {
  const PreparedCorpus p = load_prepared(config);
  const LoadedModel m = load_model(config);
  const std::size_t max_len = config.get<std::size_t>("data.max_len");
  const LrpConfig lrp = config.lrp();

  std::vector<Weighting> weightings;
  if (m.svm) {
    weightings = {Weighting::kLrp, Weighting::kSa, Weighting::kUniform, Weighting::kTfidf};
  } else {
    weightings = {Weighting::kLrp, Weighting::kSa, Weighting::kLrpEw, Weighting::kSaEw, Weighting::kUniform,
                  Weighting::kIdf};
  }
  std::map<Weighting, std::vector<SummaryVector>> rows;
  std::map<Weighting, SummaryTableInfo> info;
  for (Weighting w : weightings) {
    info[w].weighting = w;
    info[w].space = m.svm ? SummarySpace::kBow : SummarySpace::kEmbedding;
    info[w].model_id = w == Weighting::kUniform || w == Weighting::kIdf || w == Weighting::kTfidf ? "" : m.id;
    info[w].length = m.svm ? p.vocab_lower.size() : p.embeddings.dim();
    info[w].config_hash = config.explain_hash();
  }
  auto add = [&](Weighting w, SummaryVector v, const TokenizedDocument& d) {
    if (!(v.norm() > 0.0)) {
      ++info[w].excluded;
      return;
    }
    rows[w].push_back(normalize(std::move(v)));
    info[w].doc_ids.push_back(d.id);
    info[w].labels.push_back(static_cast<std::size_t>(d.label));
  };

  std::size_t degenerate = 0;
  for (const auto& d : p.test) {
    if (d.tokens.size() < 2) {
      ++degenerate;
      continue;
    }
    if (m.svm) {
      const auto lowered = lowercase_tokens(d.tokens);
      const TfidfVector x = tfidf_vector(lowered, p.vocab_lower);
      if (x.empty()) {
        for (Weighting w : weightings) ++info[w].excluded;
        continue;
      }
      const std::size_t c = svm_predict(m.svm_model, x);
      const auto present = support(x);
      const std::size_t V = p.vocab_lower.size();
      add(Weighting::kLrp, summary_svm(lrp_svm(m.svm_model, x, c), present, V, Weighting::kLrp, m.id), d);
      add(Weighting::kSa, summary_svm(sa_svm(m.svm_model, x, c), present, V, Weighting::kSa, m.id), d);
      add(Weighting::kUniform, summary_svm(binary_presence(x), present, V, Weighting::kUniform), d);
      add(Weighting::kTfidf, summary_svm(tfidf_relevance(x), present, V, Weighting::kTfidf), d);
    } else {
      const auto tokens = truncated(d.tokens, max_len);
      const InputMatrix x = encode_document(tokens, p.embeddings, p.normalizer, m.cnn.hyper.width);
      const ForwardTrace trace = forward(m.cnn, x);
      const std::size_t c = argmax_lowest(trace.scores);
      const RelevanceMap l = lrp_cnn(m.cnn, trace, c, lrp);
      const RelevanceMap s = sa_cnn(m.cnn, trace, c);
      add(Weighting::kLrp, summary_word_level(l.word_relevance, x, Weighting::kLrp, m.id), d);
      add(Weighting::kSa, summary_word_level(s.word_relevance, x, Weighting::kSa, m.id), d);
      add(Weighting::kLrpEw, summary_elementwise(l, x, Weighting::kLrpEw), d);
      add(Weighting::kSaEw, summary_elementwise(s, x, Weighting::kSaEw), d);
      add(Weighting::kUniform, summary_word_level(uniform_weights(x.length()), x, Weighting::kUniform), d);
      std::vector<std::string> padded = x.tokens;
      add(Weighting::kIdf, summary_word_level(idf_weights(padded, p.vocab_cased), x, Weighting::kIdf), d);
    }
  }

  const fs::path dir = model_dir(config, "summaries");
  json manifest{{"stage", "summarize"},
                {"config_hash", config.explain_hash()},
                {"model_id", m.id},
                {"degenerate_documents_removed", degenerate}};
  for (Weighting w : weightings) {
    write_summary_table(dir / (std::string(to_string(w)) + ".bin"), rows[w], info[w]);
    manifest["tables"].push_back({{"weighting", std::string(to_string(w))},
                                  {"rows", rows[w].size()},
                                  {"excluded_zero_vectors", info[w].excluded}});
    if (info[w].excluded) {
      log(std::string(to_string(w)) + ": excluded " + std::to_string(info[w].excluded) + " zero summary vectors");
    }
  }
  write_json(dir / "manifest.json", manifest);
  log("wrote summaries for " + std::to_string(p.test.size() - degenerate) + " documents to " + dir.string());
}

// ---- evaluate ------------------------------------------------------------------

namespace {

json eval_manifest(const RunConfig& config, std::string_view which) {
  return json{{"stage", "evaluate"},
              {"which", std::string(which)},
              {"config_hash", config.evaluate_hash()},
              {"evaluation", config.at("evaluation")},
              {"relevance", config.at("relevance")}};
}

void evaluate_deletion(const RunConfig& config, const PreparedCorpus& p, const LoadedModel& m, const fs::path& dir) {
  if (m.svm) throw ConfigError("deletion experiments are defined for the CNN models only");
  const DeletionOptions opts = config.deletion_options();
  const EncodedInputs docs(p.test, all_rows(p.test.size()), p.embeddings, p.normalizer, m.cnn.hyper.width,
                           config.get<std::size_t>("data.max_len"));
  const Eigen::VectorXd deleted = deleted_column(p.embeddings.dim(), p.normalizer);
  json manifest = eval_manifest(config, "deletion");
  for (DeletionProtocol protocol : {DeletionProtocol::kDecTrueOnCorrect, DeletionProtocol::kIncTrueOnIncorrect,
                                    DeletionProtocol::kDecPredOnIncorrect}) {
    std::vector<DeletionCurve> curves;
    for (DeletionSource source :
         {DeletionSource::kLrp, DeletionSource::kSa, DeletionSource::kRandom, DeletionSource::kBiasedRandom}) {
      curves.push_back(deletion_experiment(m.cnn, docs, deleted, source, protocol, opts));
    }
    io::write_file(dir / ("deletion_" + std::string(to_string(protocol)) + ".csv"), deletion_csv(curves));
    manifest["documents"][std::string(to_string(protocol))] = curves.front().documents;
    log("deletion " + std::string(to_string(protocol)) + ": " + std::to_string(curves.front().documents) +
        " documents");
  }
  write_json(dir / "manifest_deletion.json", manifest);
}

struct LoadedTables {
  std::vector<std::string> names;
  std::vector<std::vector<SummaryVector>> rows;
  std::vector<SummaryTableInfo> info;
};

// Loads every summary table and restricts all of them to the documents they
// share, so that KNN splits are paired across weightings.
LoadedTables load_tables(const RunConfig& config) {
  const fs::path dir = model_dir(config, "summaries");
  const json manifest = require_manifest(dir, config.explain_hash(), "summarize");
  LoadedTables t;
  for (const auto& entry : manifest.at("tables")) {
    const std::string name = entry.at("weighting").get<std::string>();
    SummaryTableInfo info;
    auto rows = read_summary_table(dir / (name + ".bin"), info);
    t.names.push_back(name);
    t.rows.push_back(std::move(rows));
    t.info.push_back(std::move(info));
  }
  std::set<std::string> shared(t.info.front().doc_ids.begin(), t.info.front().doc_ids.end());
  for (const auto& info : t.info) {
    std::set<std::string> ids(info.doc_ids.begin(), info.doc_ids.end());
    std::set<std::string> both;
    std::set_intersection(shared.begin(), shared.end(), ids.begin(), ids.end(), std::inserter(both, both.end()));
    shared = std::move(both);
  }
  for (std::size_t i = 0; i < t.names.size(); ++i) {
    std::vector<SummaryVector> rows;
    SummaryTableInfo info = t.info[i];
    info.doc_ids.clear();
    info.labels.clear();
    for (std::size_t r = 0; r < t.rows[i].size(); ++r) {
      if (shared.count(t.info[i].doc_ids[r])) {
        rows.push_back(std::move(t.rows[i][r]));
        info.doc_ids.push_back(t.info[i].doc_ids[r]);
        info.labels.push_back(t.info[i].labels[r]);
      }
    }
    t.rows[i] = std::move(rows);
    t.info[i] = std::move(info);
  }
  return t;
}

void evaluate_epi(const RunConfig& config, const fs::path& dir) {
  const LoadedTables t = load_tables(config);
  const EpiOptions opts = config.epi_options();
  std::vector<std::pair<std::string, EpiResult>> results;
  for (std::size_t i = 0; i < t.names.size(); ++i) {
    results.emplace_back(t.names[i], knn_epi(t.rows[i], t.info[i].labels, opts));
    log("EPI " + t.names[i] + " = " + io::format_double(results.back().second.epi) + " at K=" +
        std::to_string(results.back().second.best_k));
  }
  io::write_file(dir / "epi.csv", epi_csv(results));

  std::string summary = "weighting,epi,best_k,std,documents\n";
  for (const auto& [name, r] : results) {
    summary += name + "," + io::format_double(r.epi) + "," + std::to_string(r.best_k) + "," +
               io::format_double(r.std[r.best_index]) + "," + std::to_string(r.documents) + "\n";
  }
  io::write_file(dir / "epi_summary.csv", summary);

  std::string tt = "a,b,t,p_value,significant_05,significant_10,indistinguishable\n";
  for (std::size_t a = 0; a < results.size(); ++a) {
    for (std::size_t b = a + 1; b < results.size(); ++b) {
      const auto& ra = results[a].second;
      const auto& rb = results[b].second;
      const TTestResult r = corrected_resampled_ttest(ra.accuracy[ra.best_index], rb.accuracy[rb.best_index],
                                                      static_cast<double>(ra.n_eval),
                                                      static_cast<double>(ra.n_neighbors));
      tt += results[a].first + "," + results[b].first + "," + io::format_double(r.t) + "," +
            io::format_double(r.p_value) + "," + (r.significant_05 ? "1" : "0") + "," +
            (r.significant_10 ? "1" : "0") + "," + (r.indistinguishable ? "1" : "0") + "\n";
    }
  }
  io::write_file(dir / "ttest.csv", tt);
  json manifest = eval_manifest(config, "epi");
  manifest["k_grid"] = results.front().second.k_values;
  manifest["documents"] = results.front().second.documents;
  write_json(dir / "manifest_epi.json", manifest);
}

void evaluate_pca(const RunConfig& config, const PreparedCorpus& p, const fs::path& dir) {
  const LoadedTables t = load_tables(config);
  json mapping = json::object();
  const std::string groups = config.get<std::string>("evaluation.groups");
  if (!groups.empty()) {
    if (!fs::exists(groups)) throw ConfigError("group mapping file not found: " + groups);
    mapping = read_json(groups);
  }
  for (std::size_t i = 0; i < t.names.size(); ++i) {
    const PcaResult r = pca_project(t.rows[i], 2);
    std::vector<std::string> labels;
    std::vector<std::string> group;
    for (std::size_t l : t.info[i].labels) {
      labels.push_back(p.classes.at(l));
      group.push_back(group_of(p.classes.at(l), mapping));
    }
    io::write_file(dir / ("pca_" + t.names[i] + ".csv"), pca_csv(r, t.info[i].doc_ids, labels, group));
  }
  write_json(dir / "manifest_pca.json", eval_manifest(config, "pca"));
}

void evaluate_topwords(const RunConfig& config, const PreparedCorpus& p, const LoadedModel& m, const fs::path& dir) {
  const RelevanceMethod method = config.method();
  const std::size_t k = config.get<std::size_t>("evaluation.top_k");
  const std::size_t max_len = config.get<std::size_t>("data.max_len");
  std::vector<InputMatrix> inputs;
  std::vector<TfidfVector> vectors;
  for (const auto& d : p.test) {
    if (d.tokens.empty()) continue;
    if (m.svm) {
      vectors.push_back(tfidf_vector(lowercase_tokens(d.tokens), p.vocab_lower));
    } else {
      inputs.push_back(encode_document(truncated(d.tokens, max_len), p.embeddings, p.normalizer, m.cnn.hyper.width));
    }
  }
  for (std::size_t c = 0; c < p.classes.size(); ++c) {
    const std::vector<TopWord> top =
        m.svm ? top_words_svm(m.svm_model, method, vectors, p.vocab_lower, c, k)
              : top_words_cnn(m.cnn, method, inputs, c, k, config.lrp(),
                              [&](std::string_view w) { return p.vocab_cased.find(w).has_value(); });
    io::write_file(dir / "topwords" / (p.classes[c] + "." + std::string(to_string(method)) + ".csv"),
                   top_words_csv(top));
  }
  json manifest = eval_manifest(config, "topwords");
  manifest["aggregation"] = "max";
  write_json(dir / "manifest_topwords.json", manifest);
}

}  // namespace

void cmd_evaluate(const RunConfig& config, std::string_view which) {
  const fs::path dir = model_dir(config, "eval");
  if (which == "epi") {
    evaluate_epi(config, dir);
    return;
  }
  const PreparedCorpus p = load_prepared(config);
  if (which == "pca") {
    evaluate_pca(config, p, dir);
    return;
  }
  const LoadedModel m = load_model(config);
  if (which == "deletion") {
    evaluate_deletion(config, p, m, dir);
  } else if (which == "topwords") {
    evaluate_topwords(config, p, m, dir);
  } else {
    throw ConfigError("unknown evaluation '" + std::string(which) + "' (deletion, epi, pca, topwords)");
  }
}

// ---- report --------------------------------------------------------------------

void cmd_report(const RunConfig& config) {
  const PreparedCorpus p = load_prepared(config);
  const LoadedModel m = load_model(config);
  const std::size_t n = std::min(config.get<std::size_t>("report.documents"), p.test.size());
  const fs::path dir = model_dir(config, "report");
  const std::string method(to_string(config.method()));
  std::string index = "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" + config.model() +
                      " " + method + "</title>\n</head>\n<body style=\"font-family:sans-serif\">\n<ul>\n";
  std::size_t written = 0;
  for (std::size_t i = 0; i < p.test.size() && written < n; ++i) {
    const auto& d = p.test[i];
    if (d.tokens.empty()) continue;
    RelevanceMap map;
    try {
      map = explain_tokens(config, p, m, d.tokens, std::nullopt);
    } catch (const DataError&) {
      continue;  // no vocabulary words for the SVM
    }
    const std::string name = sanitize(d.id) + "." + method + ".html";
    io::write_file(dir / name, heatmap_html(map, p.classes[map.target_class]));
    index += "<li><a href=\"" + name + "\">" + d.id + "</a> &rarr; " + p.classes[map.target_class] + " (true: " +
             p.classes[static_cast<std::size_t>(d.label)] + ")</li>\n";
    ++written;
  }
  index += "</ul>\n</body>\n</html>\n";
  io::write_file(dir / "index.html", index);
  write_json(dir / "manifest.json", json{{"stage", "report"}, {"config_hash", config.explain_hash()},
                                         {"documents", written}});
  log("wrote " + std::to_string(written) + " heatmaps to " + dir.string());
}

}  // namespace lrptext
