#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adresp/impression.hpp"

namespace adresp {

struct FeatureKey {
  Dimension dimension{};
  std::string level;

  auto operator<=>(const FeatureKey&) const = default;
  bool operator==(const FeatureKey&) const = default;
};

/// Bijection between (dimension, level) pairs and dense coefficient indices.
/// Index 0 is the intercept; features occupy 1..size() in canonical
/// (dimension, level) order, so the active indices of any impression come out
/// strictly increasing.
class FeatureIndex {
 public:
  static constexpr std::size_t kMaxFeatures = 999;

  FeatureIndex() = default;

  /// Sorts and de-duplicates the keys. Throws DomainError above kMaxFeatures.
  explicit FeatureIndex(std::vector<FeatureKey> keys);

  /// Number of non-intercept features.
  std::size_t size() const noexcept { return keys_.size(); }
  /// Number of coefficient columns including the intercept.
  std::size_t n_columns() const noexcept { return keys_.size() + 1; }

  std::optional<std::uint32_t> find(Dimension d, std::string_view level) const noexcept;
  std::optional<std::uint32_t> find(const FeatureKey& key) const noexcept {
    return find(key.dimension, key.level);
  }

  /// Key for a dense index in [1, size()].
  const FeatureKey& key(std::uint32_t index) const;
  const std::vector<FeatureKey>& keys() const noexcept { return keys_; }

  std::size_t count(Dimension d) const noexcept;

  /// Sorted dense indices of the features an impression activates.
  std::vector<std::uint32_t> encode(const Impression& imp) const;

  bool operator==(const FeatureIndex&) const = default;

 private:
  std::vector<FeatureKey> keys_;
};

}  // namespace adresp
