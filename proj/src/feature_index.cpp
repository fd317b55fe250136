#include "adresp/feature_index.hpp"

#include <algorithm>

#include "adresp/errors.hpp"

namespace adresp {

namespace {

struct KeyLess {
  bool operator()(const FeatureKey& k, std::pair<Dimension, std::string_view> p) const {
    if (k.dimension != p.first) return k.dimension < p.first;
    return std::string_view(k.level) < p.second;
  }
};

}  // namespace

FeatureIndex::FeatureIndex(std::vector<FeatureKey> keys) : keys_(std::move(keys)) {
  std::sort(keys_.begin(), keys_.end());
  keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
  if (keys_.size() > kMaxFeatures) {
    throw DomainError("feature index holds " + std::to_string(keys_.size()) +
                      " features, limit is " + std::to_string(kMaxFeatures));
  }
}

std::optional<std::uint32_t> FeatureIndex::find(Dimension d,
                                                std::string_view level) const noexcept {
  auto it = std::lower_bound(keys_.begin(), keys_.end(), std::pair{d, level}, KeyLess{});
  if (it == keys_.end() || it->dimension != d || it->level != level) return std::nullopt;
  return static_cast<std::uint32_t>(it - keys_.begin()) + 1;
}

const FeatureKey& FeatureIndex::key(std::uint32_t index) const {
  if (index == 0 || index > keys_.size()) {
    throw std::out_of_range("feature index " + std::to_string(index) + " out of range");
  }
  return keys_[index - 1];
}

std::size_t FeatureIndex::count(Dimension d) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      keys_.begin(), keys_.end(), [d](const FeatureKey& k) { return k.dimension == d; }));
}

std::vector<std::uint32_t> FeatureIndex::encode(const Impression& imp) const {
  std::vector<std::uint32_t> active;
  active.reserve(kNumDimensions);
  for (Dimension d : kAllDimensions) {
    if (auto idx = find(d, imp.level(d))) active.push_back(*idx);
  }
  return active;
}

}  // namespace adresp
