#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rentpas/error.hpp"
#include "rentpas/listings.hpp"

namespace rentpas {

enum class Planted : std::int8_t { None = 0, Over = 1, Under = -1 };

// Stand-in for scraped data. Log price is a nonlinear function of the listing
// features (neighborhood premium interacts with unit size) plus Gaussian noise.
// round(2% of n) rows skip the noise and get their base price doubled or halved.
struct SyntheticFixture {
  std::vector<Listing> listings;
  std::vector<Planted> planted;     // hidden ground truth, parallel to listings
  std::vector<double> base_price;   // pre-noise price, parallel to listings

  std::size_t planted_count() const {
    return static_cast<std::size_t>(
        std::count_if(planted.begin(), planted.end(), [](Planted p) { return p != Planted::None; }));
  }
};

inline constexpr double kPlantedFraction = 0.02;
inline constexpr double kSyntheticNoiseSd = 0.10;

namespace detail {

struct Neighborhood {
  const char* name;
  double premium;  // log-price offset
  double weight;   // sampling weight
};

inline constexpr std::array<Neighborhood, 16> kNeighborhoods{{
    {"Upper West Side", 0.15, 14}, {"Upper East Side", 0.12, 12}, {"Midtown", 0.25, 9},
    {"Chelsea", 0.30, 7},          {"Tribeca", 0.55, 4},          {"Soho", 0.45, 4},
    {"East Village", 0.10, 7},     {"West Village", 0.35, 5},     {"Financial District", 0.20, 7},
    {"Hell's Kitchen", 0.05, 6},   {"Murray Hill", 0.00, 6},      {"Yorkville", -0.05, 5},
    {"East Harlem", -0.35, 5},     {"Central Harlem", -0.30, 4},  {"Hamilton Heights", -0.40, 3},
    {"Washington Heights", -0.45, 4},
}};

struct RentalKind {
  const char* name;
  double premium;
  double weight;
};

inline constexpr std::array<RentalKind, 4> kRentalKinds{{
    {"rental unit", 0.0, 70}, {"condo", 0.12, 18}, {"co-op", -0.05, 9}, {"townhouse", 0.30, 3}}};

inline constexpr std::array<const char*, 12> kStreets{
    "Broome Street", "Broadway",         "Fifth Ave",       "West End Avenue", "Amsterdam Avenue",
    "East 86th Street", "West 72nd Street", "Lexington Avenue", "Greenwich Street", "Avenue A",
    "Riverside Drive",  "Madison Avenue"};

inline double synthetic_log_base(int beds, double baths, const Neighborhood& hood, const RentalKind& kind) {
  // diminishing returns in bedrooms; premium neighborhoods scale steeper with size
  const double size = std::log1p(static_cast<double>(beds));
  return 7.75 + hood.premium + kind.premium + size * (0.45 + 0.6 * std::max(hood.premium, 0.0)) +
         0.18 * (baths - 1.0) - 0.25 * (beds == 0 && hood.premium < 0 ? 1.0 : 0.0);
}

}  // namespace detail

inline SyntheticFixture synthesize_fixture(std::uint64_t seed, std::size_t n) {
  if (n < 1) throw Error(ErrorKind::EmptyDataset, "synthesize_fixture requires n >= 1");
  std::mt19937_64 rng(seed);
  std::vector<double> hood_w, kind_w;
  for (const auto& h : detail::kNeighborhoods) hood_w.push_back(h.weight);
  for (const auto& k : detail::kRentalKinds) kind_w.push_back(k.weight);
  std::discrete_distribution<int> hood_dist(hood_w.begin(), hood_w.end());
  std::discrete_distribution<int> kind_dist(kind_w.begin(), kind_w.end());
  std::discrete_distribution<int> beds_dist({17, 34, 29, 14, 4, 1.5, 0.5});
  std::uniform_int_distribution<int> extra_bath(0, 2);
  std::uniform_int_distribution<int> street_dist(0, static_cast<int>(detail::kStreets.size()) - 1);
  std::uniform_int_distribution<int> number_dist(1, 899);
  std::uniform_int_distribution<int> unit_dist(1, 30);
  std::normal_distribution<double> noise(0.0, kSyntheticNoiseSd);

  SyntheticFixture out;
  out.listings.reserve(n);
  std::vector<double> noise_draw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& hood = detail::kNeighborhoods[static_cast<std::size_t>(hood_dist(rng))];
    const auto& kind = detail::kRentalKinds[static_cast<std::size_t>(kind_dist(rng))];
    Listing l;
    l.id = static_cast<std::int64_t>(i);
    l.beds = beds_dist(rng);
    l.baths = std::max(1.0, 1.0 + 0.5 * std::floor(l.beds * 0.8) + 0.5 * extra_bath(rng) - 0.5);
    l.location = hood.name;
    l.rental_type = kind.name;
    l.street = detail::kStreets[static_cast<std::size_t>(street_dist(rng))];
    l.address = std::to_string(number_dist(rng)) + " " + *l.street + " #" + std::to_string(unit_dist(rng));
    out.base_price.push_back(std::exp(detail::synthetic_log_base(l.beds, l.baths, hood, kind)));
    noise_draw[i] = noise(rng);
    out.listings.push_back(std::move(l));
  }

  const auto n_planted = static_cast<std::size_t>(std::llround(kPlantedFraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  out.planted.assign(n, Planted::None);
  for (std::size_t j = 0; j < n_planted; ++j) out.planted[order[j]] = j % 2 ? Planted::Under : Planted::Over;

  for (std::size_t i = 0; i < n; ++i) {
    auto& price = out.listings[i].price;
    switch (out.planted[i]) {
      case Planted::Over: price = 2.0 * out.base_price[i]; break;
      case Planted::Under: price = 0.5 * out.base_price[i]; break;
      case Planted::None: price = out.base_price[i] * std::exp(noise_draw[i]); break;
    }
  }
  return out;
}

}  // namespace rentpas
