#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "stir/corpus.hpp"

namespace stir {

/// Parameters of the template-grammar corpus generator.
///
/// `repair_rate` is the probability that an utterance carries a self-repair;
/// `kind_mix` gives the repeat / substitute / delete proportions among them.
struct SynthConfig {
  std::size_t n_utts = 1000;
  std::size_t vocab_size = 120;
  double repair_rate = 0.2;
  std::array<double, 3> kind_mix = {0.6, 0.3, 0.1};  // repeat, substitute, delete
  double interregnum_rate = 0.3;
  double isolated_edit_rate = 0.1;
  std::uint64_t seed = 1;
};

/// Smallest vocab_size the template grammar can fill (two words per class).
std::size_t synth_min_vocab();

std::vector<Utterance> generate_synthetic(const SynthConfig& config);

}  // namespace stir
