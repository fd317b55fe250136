#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace adresp {

/// The seven categorical feature dimensions of an impression. The enumerator
/// order is the canonical order used everywhere a sum over dimensions is
/// taken, so that every scoring path accumulates in the same sequence.
enum class Dimension : std::uint8_t {
  exchange = 0,
  hour,
  day,
  ad_format,
  ad_size,
  domain,
  zip,
};

inline constexpr std::size_t kNumDimensions = 7;

inline constexpr std::array<Dimension, kNumDimensions> kAllDimensions = {
    Dimension::exchange, Dimension::hour,   Dimension::day, Dimension::ad_format,
    Dimension::ad_size,  Dimension::domain, Dimension::zip};

/// Low-cardinality dimensions that are always included in a model.
inline constexpr std::array<Dimension, 5> kSmallDimensions = {
    Dimension::exchange, Dimension::hour, Dimension::day, Dimension::ad_format,
    Dimension::ad_size};

std::string_view dimension_name(Dimension d) noexcept;
std::optional<Dimension> parse_dimension(std::string_view name) noexcept;

inline constexpr std::string_view kUnknownZip = "unknown";

struct Impression {
  std::string exchange;
  int hour = 0;  // 0..23
  int day = 0;   // 0..6
  std::string ad_format;
  std::string ad_size;
  std::string domain;
  std::string zip;
  std::string campaign;
  bool clicked = false;
  std::int64_t timestamp = 0;

  /// Level value of the impression along one dimension (hour and day are
  /// rendered in decimal).
  std::string level(Dimension d) const;

  bool operator==(const Impression&) const = default;
};

/// Lower-cases a host name and drops scheme, credentials, port, path, query and
/// fragment. Subdomains are kept: "finance.yahoo.com" stays distinct from
/// "yahoo.com", while "google.com/finance" becomes "google.com".
std::string normalize_domain(std::string_view raw);

/// Returns the 5-digit ZIP, or "unknown" for an empty/unknown value. ZIP+4
/// is truncated to its first five digits. Anything else yields nullopt.
std::optional<std::string> normalize_zip(std::string_view raw);

/// Checks the range and format invariants of an impression.
bool is_well_formed(const Impression& imp) noexcept;

}  // namespace adresp
