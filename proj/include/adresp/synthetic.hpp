#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adresp/impression.hpp"

namespace adresp::synthetic {

/// Click-log generator with planted campaign affinities. Background traffic
/// draws domains and ZIPs from Zipf laws and everything else uniformly; a
/// campaign's clicks lean toward its planted domains and preferred hours.
struct Config {
  std::size_t n_campaigns = 8;
  std::size_t clicks_per_campaign = 250;
  std::size_t n_domains = 80;
  std::size_t n_zips = 60;
  std::size_t n_exchanges = 4;
  std::size_t n_formats = 3;
  std::size_t n_sizes = 5;
  double zipf_exponent = 1.0;

  std::size_t planted_domains = 5;  // per campaign
  double domain_affinity = 0.5;     // P(click lands on a planted domain)
  std::size_t preferred_hours = 4;  // per campaign
  double hour_affinity = 0.0;       // P(click falls in a preferred hour)

  std::int64_t t_begin = 0;
  std::int64_t t_end = 14 * 86'400;
  std::uint64_t seed = 0;
};

struct Truth {
  std::map<std::string, std::vector<std::string>> planted_domains;
  std::map<std::string, std::vector<int>> preferred_hours;
};

struct Data {
  std::vector<Impression> clicks;  // clicked=true, shuffled, timestamps uniform
  Truth truth;
};

std::string campaign_name(std::size_t i);
std::string domain_name(std::size_t i);
std::string zip_name(std::size_t i);

Data generate_clicks(const Config& config);

/// Unclicked background impressions (no campaign affinity), e.g. a scoring
/// batch. The campaign field is left empty.
std::vector<Impression> generate_impressions(const Config& config, std::size_t n,
                                             std::uint64_t seed);

}  // namespace adresp::synthetic
