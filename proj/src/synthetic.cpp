#include "adresp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace adresp::synthetic {

namespace {

std::discrete_distribution<std::size_t> zipf(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
  return {w.begin(), w.end()};
}

struct Sampler {
  const Config& cfg;
  std::mt19937_64 rng;
  std::discrete_distribution<std::size_t> domains, zips;

  Sampler(const Config& c, std::uint64_t seed)
      : cfg(c), rng(seed), domains(zipf(c.n_domains, c.zipf_exponent)),
        zips(zipf(c.n_zips, c.zipf_exponent)) {}

  std::size_t uniform(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  Impression background() {
    Impression imp;
    imp.exchange = "ex" + std::to_string(uniform(cfg.n_exchanges));
    imp.hour = static_cast<int>(uniform(24));
    imp.day = static_cast<int>(uniform(7));
    imp.ad_format = "fmt" + std::to_string(uniform(cfg.n_formats));
    imp.ad_size = "size" + std::to_string(uniform(cfg.n_sizes));
    imp.domain = domain_name(domains(rng));
    imp.zip = zip_name(zips(rng));
    imp.timestamp = std::uniform_int_distribution<std::int64_t>(cfg.t_begin, cfg.t_end)(rng);
    return imp;
  }
};

void check(const Config& c) {
  if (c.n_domains == 0 || c.n_zips == 0 || c.n_exchanges == 0 || c.n_formats == 0 ||
      c.n_sizes == 0) {
    throw std::invalid_argument("every dimension needs at least one level");
  }
  if (c.planted_domains > c.n_domains) throw std::invalid_argument("too many planted domains");
  if (c.preferred_hours > 24) throw std::invalid_argument("too many preferred hours");
  if (c.domain_affinity < 0 || c.domain_affinity > 1 || c.hour_affinity < 0 || c.hour_affinity > 1) {
    throw std::invalid_argument("affinities are probabilities");
  }
  if ((c.domain_affinity > 0 && c.planted_domains == 0) ||
      (c.hour_affinity > 0 && c.preferred_hours == 0)) {
    throw std::invalid_argument("affinity without planted levels");
  }
  if (c.t_end < c.t_begin) throw std::invalid_argument("t_end < t_begin");
}

}  // namespace

std::string campaign_name(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "camp%03zu", i);
  return buf;
}

std::string domain_name(std::size_t i) { return "site" + std::to_string(i) + ".com"; }

std::string zip_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", (10000 + i * 7) % 100000);
  return buf;
}

Data generate_clicks(const Config& config) {
  check(config);
  Sampler s(config, config.seed);
  Data data;

  // Planted domains are spread over the whole vocabulary, so some sit in the
  // Zipf tail where only the campaign's own clicks make them frequent.
  std::vector<std::size_t> order(config.n_domains);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), s.rng);
  std::vector<int> hours(24);
  std::iota(hours.begin(), hours.end(), 0);

  for (std::size_t c = 0; c < config.n_campaigns; ++c) {
    const auto name = campaign_name(c);
    std::vector<std::string> planted;
    for (std::size_t j = 0; j < config.planted_domains; ++j) {
      planted.push_back(domain_name(order[(c * config.planted_domains + j) % config.n_domains]));
    }
    std::shuffle(hours.begin(), hours.end(), s.rng);
    std::vector<int> preferred(hours.begin(),
                               hours.begin() + static_cast<std::ptrdiff_t>(config.preferred_hours));
    std::sort(preferred.begin(), preferred.end());

    std::bernoulli_distribution on_domain(config.domain_affinity), on_hour(config.hour_affinity);
    for (std::size_t i = 0; i < config.clicks_per_campaign; ++i) {
      auto imp = s.background();
      if (on_domain(s.rng)) imp.domain = planted[s.uniform(planted.size())];
      if (on_hour(s.rng)) imp.hour = preferred[s.uniform(preferred.size())];
      imp.campaign = name;
      imp.clicked = true;
      data.clicks.push_back(std::move(imp));
    }
    data.truth.planted_domains[name] = std::move(planted);
    data.truth.preferred_hours[name] = std::move(preferred);
  }
  std::shuffle(data.clicks.begin(), data.clicks.end(), s.rng);
  return data;
}

std::vector<Impression> generate_impressions(const Config& config, std::size_t n, std::uint64_t seed) {
  check(config);
  Sampler s(config, seed);
  std::vector<Impression> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(s.background());
  return out;
}

}  // namespace adresp::synthetic
