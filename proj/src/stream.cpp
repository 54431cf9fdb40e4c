#include "stir/stream.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <memory>
#include <ostream>

#include "json.hpp"

namespace stir {

std::string edit_script_json(std::size_t utt, const Token& t, const StepResult& step) {
  nlohmann::json edits = nlohmann::json::array();
  for (const auto& e : step.edits) {
    nlohmann::json r;
    r["op"] = e.op == LabelEdit::Op::Add ? "add" : "revoke";
    r["index"] = e.index;
    r["tag"] = e.tag ? nlohmann::json(std::string(to_string(*e.tag))) : nlohmann::json(nullptr);
    edits.push_back(std::move(r));
  }
  nlohmann::json j;
  j["utt"] = utt;
  j["index"] = t.index;
  j["word"] = t.word;
  j["edits"] = std::move(edits);
  return j.dump();
}

StreamStats detect_stream(std::istream& in, std::ostream& out, const LmSet& lms,
                          StageClassifier& classifier, const DetectorConfig& config) {
  StreamStats stats;
  std::unique_ptr<Detector> det;
  std::string line;
  auto error = [&](const std::string& msg) {
    ++stats.errors;
    nlohmann::json j;
    j["utt"] = stats.utterances;
    j["line"] = stats.lines;
    j["error"] = msg;
    out << j.dump() << '\n';
    out.flush();
  };
  while (std::getline(in, line)) {
    ++stats.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (det) {
        det.reset();
        ++stats.utterances;
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      error("expected word<TAB>pos");
      continue;
    }
    Token t;
    t.word = line.substr(0, tab);
    t.pos = line.substr(tab + 1);
    if (t.word.empty() || t.pos.empty() || t.pos.find('\t') != std::string::npos) {
      error("expected word<TAB>pos");
      continue;
    }
    std::transform(t.word.begin(), t.word.end(), t.word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (!det) det = std::make_unique<Detector>(lms, classifier, config);
    t.index = det->position();
    const StepResult step = det->consume(t);
    ++stats.words;
    out << edit_script_json(stats.utterances, t, step) << '\n';
    out.flush();
  }
  if (det) ++stats.utterances;
  return stats;
}

}  // namespace stir
