#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "stir/dag.hpp"

namespace stir {

enum class Stage : std::uint8_t { Edit, RpStart, RmStart, RpEnd };

inline constexpr std::size_t kStageCount = 4;
inline constexpr std::size_t kWindow = 7;      // rm backtrack and rp_end window
inline constexpr std::size_t kBestScan = 3;    // Best* features look this far back

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view name);

/// Ordered feature names for a stage; the order is the column order of every
/// FeatureVector and dataset of that stage.
const std::vector<std::string>& feature_names(Stage s);

struct FeatureVector {
  Stage stage = Stage::Edit;
  std::vector<double> values;  // booleans as 0/1

  double get(std::string_view name) const;
  std::size_t size() const { return values.size(); }
};

/// Manifest file: "# stir feature manifest v1", a "stage <name>" line, then
/// one feature name per line.
void write_manifest(std::ostream& out, Stage s);
/// Throws std::runtime_error unless the manifest matches feature_names(s).
void check_manifest(std::istream& in, Stage s);
void check_manifest(Stage s, const std::vector<std::string>& names);

/// Edit-term features for w_n, or for w_{n-1} when `revisit` is set.
FeatureVector edit_features(const PrefixDag& dag, std::size_t n, bool revisit);

/// Repair-onset features for w_n. Node n must be valued.
FeatureVector rp_start_features(const PrefixDag& dag, std::size_t n);

/// Reparandum-onset features for candidate c against onset rp.
/// Throws std::out_of_range unless 1 <= rp - c <= 7.
FeatureVector rm_start_features(const PrefixDag& dag, std::size_t rp, std::size_t c);

struct RepairSpan {
  std::size_t rm_start = 0;
  std::size_t rp_start = 0;
};

/// Repair-end features for a candidate end e, or for the zero-length repair
/// outcome (e ignored). Throws std::out_of_range on a window violation.
FeatureVector rp_end_features(const PrefixDag& dag, const RepairSpan& span, std::size_t e,
                              bool zero_length);

/// WML gain at w_n from excising [c, n); the quantity behind the boost features.
double wml_boost(const PrefixDag& dag, Model m, std::size_t n, std::size_t c);

/// Non-edit word indices in [from, to).
std::vector<std::size_t> non_edit_between(const PrefixDag& dag, std::size_t from, std::size_t to);

}  // namespace stir
