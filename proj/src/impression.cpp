#include "adresp/impression.hpp"

#include <algorithm>
#include <cctype>

namespace adresp {

namespace {

constexpr std::array<std::string_view, kNumDimensions> kNames = {
    "exchange", "hour", "day", "ad_format", "ad_size", "domain", "zip"};

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

std::string_view dimension_name(Dimension d) noexcept {
  return kNames[static_cast<std::size_t>(d)];
}

std::optional<Dimension> parse_dimension(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Dimension>(i);
  }
  return std::nullopt;
}

std::string Impression::level(Dimension d) const {
  switch (d) {
    case Dimension::exchange: return exchange;
    case Dimension::hour: return std::to_string(hour);
    case Dimension::day: return std::to_string(day);
    case Dimension::ad_format: return ad_format;
    case Dimension::ad_size: return ad_size;
    case Dimension::domain: return domain;
    case Dimension::zip: return zip;
  }
  return {};
}

std::string normalize_domain(std::string_view raw) {
  std::string_view s = raw;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);

  if (auto scheme = s.find("://"); scheme != std::string_view::npos) {
    s.remove_prefix(scheme + 3);
  }
  if (auto end = s.find_first_of("/?#"); end != std::string_view::npos) {
    s = s.substr(0, end);
  }
  if (auto at = s.rfind('@'); at != std::string_view::npos) {
    s.remove_prefix(at + 1);
  }
  if (auto colon = s.find(':'); colon != std::string_view::npos) {
    s = s.substr(0, colon);
  }
  while (!s.empty() && s.back() == '.') s.remove_suffix(1);

  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<std::string> normalize_zip(std::string_view raw) {
  while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.front()))) raw.remove_prefix(1);
  while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.back()))) raw.remove_suffix(1);
  if (raw.empty() || raw == kUnknownZip) return std::string(kUnknownZip);
  if (raw.size() == 5 && all_digits(raw)) return std::string(raw);
  if (raw.size() == 10 && raw[5] == '-' && all_digits(raw.substr(0, 5)) &&
      all_digits(raw.substr(6))) {
    return std::string(raw.substr(0, 5));
  }
  return std::nullopt;
}

bool is_well_formed(const Impression& imp) noexcept {
  if (imp.hour < 0 || imp.hour > 23) return false;
  if (imp.day < 0 || imp.day > 6) return false;
  if (imp.campaign.empty() || imp.domain.empty()) return false;
  if (imp.zip != kUnknownZip && !(imp.zip.size() == 5 && all_digits(imp.zip))) return false;
  return true;
}

}  // namespace adresp
