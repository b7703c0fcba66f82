#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kfg {

/// Disjoint, exhaustive fold assignment with fold sizes differing by at most
/// one, stratified by class label.
struct FoldSplit {
  int k = 0;
  std::map<std::string, int> assignments;  // video id -> fold
  std::vector<std::vector<std::string>> fold_members() const;
};

/// Shuffles each class with the "folds" stream of `seed` and deals the classes
/// round-robin, continuing the fold pointer across classes so overall sizes
/// stay within one of each other.
FoldSplit kfold_split(const std::vector<std::pair<std::string, int>>& id_labels, int k,
                      uint64_t seed);

}  // namespace kfg
