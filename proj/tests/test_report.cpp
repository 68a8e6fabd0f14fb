#include "doctest.h"
#include "lrptext/error.hpp"
#include "lrptext/report.hpp"
#include "lrptext/rng.hpp"
#include "support/testing.hpp"

using namespace lrptext;

namespace {

RelevanceMap word_map(std::vector<std::string> tokens, std::vector<double> r) {
  RelevanceMap m;
  m.tokens = std::move(tokens);
  m.word_relevance = Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
  m.start_score = 1.5;
  return m;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("opacity is magnitude over the maximum") {
  const std::vector<double> o = heatmap_opacity((Eigen::VectorXd(4) << 0.5, -2.0, 1.0, 0.0).finished());
  CHECK(o == std::vector<double>{0.25, 1.0, 0.5, 0.0});
  CHECK(heatmap_opacity(Eigen::VectorXd::Zero(3)) == std::vector<double>(3, 0.0));
}

TEST_CASE("heatmap colors and title") {
  const RelevanceMap m = word_map({"the", "shuttle", "launch"}, {0.1, 0.0, 0.4});
  const std::string html = heatmap_html(m, "sci.space");
  CHECK(html.find("rgba(255,0,0,1)\" data-r=\"0.4\">launch<") != std::string::npos);
  CHECK(html.find("rgba(255,0,0,0.25)\" data-r=\"0.1\">the<") != std::string::npos);
  CHECK(html.find("sci.space") != std::string::npos);
  CHECK(html.find("score: 1.5") != std::string::npos);
  CHECK(html == heatmap_html(m, "sci.space"));

  const RelevanceMap neg = word_map({"a", "b"}, {-3.0, 1.5});
  const std::string h2 = heatmap_html(neg, "x");
  CHECK(h2.find("rgba(0,0,255,1)\" data-r=\"-3\">a<") != std::string::npos);
  CHECK(h2.find("rgba(255,0,0,0.5)") != std::string::npos);

  const std::string h3 = heatmap_html(word_map({"a", "b"}, {0.0, 0.0}), "x");
  CHECK(count(h3, ",0)\" data-r=") == 2);
}

TEST_CASE("heatmap escapes tokens and keeps their order") {
  const std::string html = heatmap_html(word_map({"<b>", "x&y", "\"q\""}, {1, 2, 3}), "a<b");
  CHECK(html.find("&lt;b&gt;") < html.find("x&amp;y"));
  CHECK(html.find("x&amp;y") < html.find("&quot;q&quot;"));
  CHECK(html.find("<b>") == std::string::npos);
}

TEST_CASE("top word collector ranks by max relevance then word") {
  TopWordCollector c;
  c.add("beta", 0.5);
  c.add("alpha", 0.5);
  c.add("gamma", 0.1);
  c.add("gamma", 0.9);
  c.add(word_map({"", "gamma"}, {5.0, 0.2}));  // padding column is skipped
  c.add("delta", -0.2);
  CHECK(c.distinct() == 4);
  const auto top = c.top(3, [](std::string_view w) { return w != "alpha"; });
  REQUIRE(top.size() == 3);
  CHECK(top[0].word == "gamma");
  CHECK(top[0].relevance == 0.9);
  CHECK(top[1].word == "alpha");
  CHECK(!top[1].in_train_vocab);
  CHECK(top[2].word == "beta");
  CHECK(c.top(100, [](std::string_view) { return true; }).size() == 4);
}

TEST_CASE("a trained model ranks the planted marker first") {
  Rng rng(3);
  const Eigen::Index D = 6;
  std::vector<std::string> words{"marka", "markb", "markc"};
  for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
  Eigen::MatrixXd vectors = testing::random_matrix(rng, D, static_cast<Eigen::Index>(words.size()));
  vectors.leftCols(3) *= 3.0;  // markers stand out from the filler words
  const EmbeddingTable table(words, vectors, EmbeddingProvenance::kTrained);
  std::vector<InputMatrix> docs;
  std::vector<Eigen::MatrixXd> xs;
  std::vector<std::size_t> ys;
  for (int d = 0; d < 120; ++d) {
    std::vector<std::string> tokens;
    for (int t = 0; t < 12; ++t) tokens.push_back("w" + std::to_string(rng.below(20)));
    tokens[rng.below(12)] = words[static_cast<std::size_t>(d % 3)];
    docs.push_back(assemble_input(tokens, table));
    xs.push_back(docs.back().values);
    ys.push_back(static_cast<std::size_t>(d % 3));
  }
  const InMemoryInputs data(xs, ys);
  CnnTrainOptions o;
  o.learning_rate = 0.1;
  o.batch_size = 10;
  o.epochs = 40;
  o.dropout = 0.0;
  const CnnModel m = train_cnn(data, data, {static_cast<std::size_t>(D), 8, 1, 3}, o).model;
  REQUIRE(accuracy(m, data) == 1.0);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto top = top_words_cnn(m, RelevanceMethod::kLrp, docs, c, 5, {}, [](std::string_view) { return true; });
    CHECK(top.front().word == words[c]);
  }
  CHECK(top_words_cnn(m, RelevanceMethod::kSa, docs, 0, 5, {}, [](std::string_view) { return true; }).size() == 5);
  CHECK(top_words_cnn(m, RelevanceMethod::kLrp, docs, 0, 1000, {}, [](std::string_view) { return true; }).size() == 23);
}

TEST_CASE("svm top words only contain vocabulary words") {
  const Vocabulary vocab({"ball", "goal", "orbit"}, {2, 1, 1}, 3, true);
  SvmModel m;
  m.weights = Eigen::MatrixXd(3, 2);
  m.weights << 0.5, -0.5, 1.0, -1.0, -0.8, 0.8;
  m.bias = Eigen::Vector2d(0.1, -0.1);
  const std::vector<std::string> t1{"goal", "ball", "unseen"}, t2{"orbit", "goal", "goal"};
  const std::vector<TfidfVector> docs{tfidf_vector(t1, vocab), tfidf_vector(t2, vocab)};
  const auto top = top_words_svm(m, RelevanceMethod::kLrp, docs, vocab, 0, 10);
  REQUIRE(top.size() == 3);
  CHECK(top.front().word == "goal");
  for (const auto& w : top) {
    CHECK(vocab.find(w.word).has_value());
    CHECK(w.in_train_vocab);
  }
}

TEST_CASE("class names") {
  const std::vector<std::string> names{"comp.graphics", "sci.space"};
  CHECK(class_index(names, "sci.space") == 1);
  try {
    class_index(names, "rec.autos");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("comp.graphics") != std::string::npos);
  }
}

TEST_CASE("top word CSV") {
  const std::vector<TopWord> w{{"nasa", 0.5, true}, {"x,y", -1.0, false}};
  CHECK(top_words_csv(w) == "rank,word,relevance,in_train_vocab\n1,nasa,0.5,1\n2,\"x,y\",-1,0\n");
}

}  // TEST_SUITE
