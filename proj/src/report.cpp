#include "lrptext/report.hpp"

#include <algorithm>
#include <sstream>

#include "lrptext/binary_io.hpp"
#include "lrptext/error.hpp"

namespace lrptext {

namespace {

std::string escape_html(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<double> heatmap_opacity(const Eigen::VectorXd& word_relevance) {
  const double top = word_relevance.size() ? word_relevance.cwiseAbs().maxCoeff() : 0.0;
  std::vector<double> out(static_cast<std::size_t>(word_relevance.size()), 0.0);
  if (top > 0.0) {
    for (Eigen::Index t = 0; t < word_relevance.size(); ++t) {
      out[static_cast<std::size_t>(t)] = std::abs(word_relevance(t)) / top;
    }
  }
  return out;
}

std::string heatmap_html(const RelevanceMap& map, std::string_view class_name) {
  const std::vector<double> opacity = heatmap_opacity(map.word_relevance);
  const std::string title = escape_html(class_name) + " (" + std::string(to_string(map.method)) +
                            ", score " + io::format_double(map.start_score) + ")";
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>" << title << "</title>\n</head>\n"
      << "<body style=\"font-family:sans-serif;line-height:1.8;max-width:60em\">\n"
      << "<p style=\"font-weight:bold\">target: " << escape_html(class_name)
      << " &middot; score: " << io::format_double(map.start_score) << "</p>\n<p>\n";
  for (std::size_t t = 0; t < map.tokens.size(); ++t) {
    const double r = t < opacity.size() ? map.word_relevance(static_cast<Eigen::Index>(t)) : 0.0;
    const double a = t < opacity.size() ? opacity[t] : 0.0;
    const char* rgb = r < 0.0 ? "0,0,255" : "255,0,0";
    out << "<span style=\"background-color:rgba(" << rgb << ',' << io::format_double(a) << ")\" data-r=\""
        << io::format_double(r) << "\">" << escape_html(map.tokens[t]) << "</span>\n";
  }
  out << "</p>\n</body>\n</html>\n";
  return out.str();
}

void TopWordCollector::add(std::string_view word, double relevance) {
  auto it = best_.find(word);
  if (it == best_.end()) {
    best_.emplace(std::string(word), relevance);
  } else {
    it->second = std::max(it->second, relevance);
  }
}

void TopWordCollector::add(const RelevanceMap& map) {
  for (std::size_t t = 0; t < map.tokens.size(); ++t) {
    if (map.tokens[t].empty()) continue;  // padding column
    add(map.tokens[t], map.word_relevance(static_cast<Eigen::Index>(t)));
  }
}

std::vector<TopWord> TopWordCollector::top(std::size_t k,
                                           const std::function<bool(std::string_view)>& in_train_vocab) const {
  std::vector<std::pair<std::string, double>> sorted(best_.begin(), best_.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (sorted.size() > k) sorted.resize(k);
  std::vector<TopWord> out;
  for (auto& [w, r] : sorted) {
    const bool known = in_train_vocab ? in_train_vocab(w) : true;
    out.push_back({std::move(w), r, known});
  }
  return out;
}

std::vector<TopWord> top_words_cnn(const CnnModel& model, RelevanceMethod method, std::span<const InputMatrix> docs,
                                   std::size_t target, std::size_t k, const LrpConfig& lrp,
                                   const std::function<bool(std::string_view)>& in_train_vocab) {
  TopWordCollector collector;
  for (const auto& doc : docs) {
    const ForwardTrace trace = forward(model, doc);
    RelevanceMap map = method == RelevanceMethod::kLrp ? lrp_cnn(model, trace, target, lrp)
                                                       : sa_cnn(model, trace, target);
    map.tokens = doc.tokens;
    collector.add(map);
  }
  return collector.top(k, in_train_vocab);
}

std::vector<TopWord> top_words_svm(const SvmModel& model, RelevanceMethod method, std::span<const TfidfVector> docs,
                                   const Vocabulary& vocab, std::size_t target, std::size_t k) {
  TopWordCollector collector;
  for (const auto& x : docs) {
    if (x.empty()) continue;
    const FeatureRelevance r = method == RelevanceMethod::kLrp ? lrp_svm(model, x, target) : sa_svm(model, x, target);
    for (const auto& [i, v] : r) collector.add(vocab.word(i), v);
  }
  return collector.top(k, {});
}

std::size_t class_index(std::span<const std::string> class_names, std::string_view name) {
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (class_names[i] == name) return i;
  }
  std::string known;
  for (const auto& c : class_names) known += (known.empty() ? "" : ", ") + c;
  throw ConfigError("unknown class '" + std::string(name) + "' (known: " + known + ")");
}

std::string top_words_csv(std::span<const TopWord> words) {
  std::ostringstream out;
  out << "rank,word,relevance,in_train_vocab\n";
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string w = words[i].word;
    if (w.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char c : w) {
        if (c == '"') q += '"';
        q += c;
      }
      w = q + "\"";
    }
    out << i + 1 << ',' << w << ',' << io::format_double(words[i].relevance) << ','
        << (words[i].in_train_vocab ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace lrptext
