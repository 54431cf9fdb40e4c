#pragma once

#include <iosfwd>
#include <string>

#include "stir/pipeline.hpp"

namespace stir {

struct StreamStats {
  std::size_t lines = 0;
  std::size_t words = 0;
  std::size_t utterances = 0;
  std::size_t errors = 0;
};

/// One output record per consumed word:
///   {"utt":U,"index":I,"word":W,"edits":[{"op":"add"|"revoke","index":J,"tag":T|null}]}
/// A null tag marks the word fluent.
std::string edit_script_json(std::size_t utt, const Token& t, const StepResult& step);

/// Streaming detection over `word<TAB>pos` lines; a blank line ends the
/// utterance. Each word's record is written and flushed before the next line
/// is read. A malformed line yields {"utt":U,"line":L,"error":MSG} and is skipped.
StreamStats detect_stream(std::istream& in, std::ostream& out, const LmSet& lms,
                          StageClassifier& classifier, const DetectorConfig& config = {});

}  // namespace stir
