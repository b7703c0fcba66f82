#include "kfg/folds.hpp"

#include <algorithm>
#include <stdexcept>

#include "kfg/rng.hpp"

namespace kfg {

std::vector<std::vector<std::string>> FoldSplit::fold_members() const {
  std::vector<std::vector<std::string>> folds(static_cast<size_t>(k));
  for (const auto& [id, fold] : assignments) folds[static_cast<size_t>(fold)].push_back(id);
  return folds;
}

FoldSplit kfold_split(const std::vector<std::pair<std::string, int>>& id_labels, int k,
                      uint64_t seed) {
  if (k < 1) throw std::invalid_argument("kfold_split: k must be >= 1");
  if (static_cast<size_t>(k) > id_labels.size()) {
    throw std::invalid_argument("kfold_split: more folds than videos");
  }

  std::map<int, std::vector<std::string>> by_class;
  for (const auto& [id, label] : id_labels) by_class[label].push_back(id);

  RngStream rng(seed, "folds");
  FoldSplit split;
  split.k = k;
  int pointer = 0;
  for (auto& [label, ids] : by_class) {
    std::sort(ids.begin(), ids.end());  // input order must not matter
    for (size_t i = ids.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i)));
      std::swap(ids[i - 1], ids[j]);
    }
    for (const auto& id : ids) {
      if (!split.assignments.emplace(id, pointer).second) {
        throw std::invalid_argument("kfold_split: duplicate video id '" + id + "'");
      }
      pointer = (pointer + 1) % k;
    }
  }
  return split;
}

}  // namespace kfg
