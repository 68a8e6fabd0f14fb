// Command-line front end: lrptext <command> --config run.json [--set key=value ...]

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lrptext/error.hpp"
#include "lrptext/pipeline.hpp"

namespace {

int exit_code(const lrptext::Error& e) {
  if (dynamic_cast<const lrptext::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const lrptext::DataError*>(&e)) return 3;
  if (dynamic_cast<const lrptext::NumericError*>(&e)) return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explain and evaluate text classifiers with relevance propagation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string model, method, output_dir;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON run configuration");
    cmd->add_option("--set", overrides, "override a config key, e.g. --set cnn.epochs=5");
    cmd->add_option("--model", model, "cnn1, cnn2, cnn3 or svm (config key: model)");
    cmd->add_option("--method", method, "lrp or sa (config key: relevance.method)");
    cmd->add_option("--output-dir", output_dir, "config key: output_dir");
  };

  auto* preprocess = app.add_subcommand("preprocess", "tokenize the corpus, build vocabularies and embeddings");
  auto* train = app.add_subcommand("train", "train the selected model");
  auto* explain = app.add_subcommand("explain", "relevance record and heatmap for one document");
  auto* summarize = app.add_subcommand("summarize", "summary vectors for every test document");
  auto* evaluate = app.add_subcommand("evaluate", "deletion curves, EPI, PCA or top words");
  auto* report = app.add_subcommand("report", "heatmaps for the first test documents");
  auto* defaults = app.add_subcommand("defaults", "print the default configuration");
  for (auto* cmd : {preprocess, train, explain, summarize, evaluate, report}) add_common(cmd);

  lrptext::ExplainRequest request;
  std::string text_file, target;
  explain->add_option("--doc", request.doc_id, "document id, e.g. sci.med/58043");
  explain->add_option("--file", text_file, "raw document file instead of an id");
  explain->add_option("--target", target, "class name (default: predicted class)");

  std::string which;
  evaluate->add_option("which", which, "deletion, epi, pca or topwords")
      ->required()
      ->check(CLI::IsMember({"deletion", "epi", "pca", "topwords"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (defaults->parsed()) {
      std::cout << lrptext::RunConfig::defaults().dump(2) << "\n";
      return 0;
    }
    if (!model.empty()) overrides.push_back("model=\"" + model + "\"");
    if (!method.empty()) overrides.push_back("relevance.method=\"" + method + "\"");
    if (!output_dir.empty()) overrides.push_back("output_dir=\"" + output_dir + "\"");
    std::optional<std::filesystem::path> path;
    if (!config_path.empty()) path = config_path;
    const lrptext::RunConfig config = lrptext::load_config(path, overrides);

    if (preprocess->parsed()) {
      lrptext::cmd_preprocess(config);
    } else if (train->parsed()) {
      lrptext::cmd_train(config);
    } else if (explain->parsed()) {
      if (!text_file.empty()) request.text_file = text_file;
      if (!target.empty()) request.target_class = target;
      if (request.doc_id.empty() && !request.text_file) throw lrptext::ConfigError("explain needs --doc or --file");
      for (const auto& p : lrptext::cmd_explain(config, request)) std::cout << p.string() << "\n";
    } else if (summarize->parsed()) {
      lrptext::cmd_summarize(config);
    } else if (evaluate->parsed()) {
      lrptext::cmd_evaluate(config, which);
    } else if (report->parsed()) {
      lrptext::cmd_report(config);
    }
  } catch (const lrptext::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
