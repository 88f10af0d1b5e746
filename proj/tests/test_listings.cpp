#include <gtest/gtest.h>

#include <random>

#include "rentpas/listings.hpp"
#include "rentpas/synth.hpp"

using namespace rentpas;

namespace {

template <class F>
ErrorKind error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an rentpas::Error";
  return ErrorKind::MalformedSnapshot;
}

Listing make(std::int64_t id, double price, int beds, std::string location, std::string street = "") {
  Listing l;
  l.id = id;
  l.price = price;
  l.beds = beds;
  l.baths = 1.0;
  l.location = std::move(location);
  l.rental_type = "rental unit";
  if (!street.empty()) l.street = street;
  return l;
}

}  // namespace

TEST(ParsePrice, Grammar) {
  EXPECT_EQ(parse_price("$3,495"), 3495);
  EXPECT_EQ(parse_price("1650"), 1650);
  EXPECT_EQ(parse_price("  $2,100/month "), 2100);
  EXPECT_EQ(parse_price("$1,234.50"), 1234.5);
  EXPECT_EQ(error_of([] { parse_price("$0"); }), ErrorKind::NonPositivePrice);
  EXPECT_EQ(error_of([] { parse_price("-$5"); }), ErrorKind::NonPositivePrice);
  EXPECT_EQ(error_of([] { parse_price("Price on request"); }), ErrorKind::NonNumericPrice);
  EXPECT_EQ(error_of([] { parse_price(""); }), ErrorKind::NonNumericPrice);
  EXPECT_EQ(error_of([] { parse_price("12abc"); }), ErrorKind::NonNumericPrice);
}

TEST(ParsePrice, FormatRoundTripOnIntegers) {
  for (std::int64_t v : {1LL, 9LL, 999LL, 1000LL, 3495LL, 100000LL, 1234567LL, 10000000LL})
    EXPECT_EQ(parse_price(format_price(v)), static_cast<double>(v)) << format_price(v);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> dist(1, 10'000'000);
  for (int i = 0; i < 20000; ++i) {
    const auto v = dist(rng);
    ASSERT_EQ(parse_price(format_price(v)), static_cast<double>(v));
  }
  EXPECT_EQ(format_price(3495), "$3,495");
}

TEST(ParseDetails, Grammar) {
  EXPECT_EQ(parse_details("2 Beds | 2 Baths"), (Details{2, 2.0, false}));
  EXPECT_EQ(parse_details("Studio | 1 Bath"), (Details{0, 1.0, false}));
  EXPECT_EQ(parse_details("3 beds | 2.5 baths"), (Details{3, 2.5, false}));
  EXPECT_EQ(parse_details("1 Bed"), (Details{1, 1.0, true}));
  EXPECT_EQ(parse_details("STUDIO"), (Details{0, 1.0, true}));
  EXPECT_EQ(error_of([] { parse_details("Loft | 1 Bath"); }), ErrorKind::UnparseableDetails);
  EXPECT_EQ(error_of([] { parse_details(""); }), ErrorKind::UnparseableDetails);
}

TEST(ParseStreet, StripsNumberAndUnit) {
  EXPECT_EQ(parse_street("558 Broome Street #7"), "Broome Street");
  EXPECT_EQ(parse_street("Fifth Ave"), "Fifth Ave");
  EXPECT_EQ(parse_street("#4B"), std::nullopt);
  EXPECT_EQ(parse_street("  12  West   72nd Street  "), "West 72nd Street");
  EXPECT_EQ(parse_street(""), std::nullopt);
}

TEST(ParseTitle, SplitsTypeAndLocation) {
  auto t = parse_title("Rental Unit in Upper West Side");
  ASSERT_TRUE(t);
  EXPECT_EQ(t->rental_type, "rental unit");
  EXPECT_EQ(t->location, "Upper West Side");
  EXPECT_EQ(parse_title("rental unit in  upper west side ")->location, "Upper West Side");
  EXPECT_FALSE(parse_title("Somewhere nice"));
}

TEST(Ingest, BundledFixture) {
  auto res = ingest_csv(std::string(RENTPAS_TEST_DATA) + "/listings_raw_12.csv", SchemaMode::Raw);
  EXPECT_EQ(res.listings.size(), 10u);
  EXPECT_EQ(res.report.rows_read, 12);
  EXPECT_EQ(res.report.rows_dropped, 2);
  const auto reasons = res.report.reason_counts();
  EXPECT_EQ(reasons.at("NonNumericPrice"), 1);
  EXPECT_EQ(reasons.at("UnparseableDetails"), 1);
  EXPECT_EQ(res.report.drops[0].row, 4);
  EXPECT_EQ(res.report.drops[1].row, 10);
  EXPECT_EQ(res.report.baths_imputed, 1);

  EXPECT_EQ(res.listings.front().id, 0);
  EXPECT_EQ(res.listings.back().id, 11);
  const auto& broome = res.listings[5];
  EXPECT_EQ(broome.id, 6);
  EXPECT_EQ(broome.location, "Upper West Side");
  EXPECT_EQ(broome.street, "Broome Street");
  EXPECT_EQ(broome.price, 1650);
  EXPECT_EQ(broome.beds, 0);
  for (const auto& l : res.listings) EXPECT_TRUE(satisfies_invariants(l));

  nlohmann::json j = res.report;
  EXPECT_EQ(j["rows_dropped"], 2);
  EXPECT_EQ(j["reason_counts"]["NonNumericPrice"], 1);
}

TEST(Ingest, HeaderOnlyAndMissingColumns) {
  auto res = ingest_text("title,address,price,details,listing_by\n", SchemaMode::Raw);
  EXPECT_TRUE(res.listings.empty());
  EXPECT_EQ(res.report.rows_dropped, 0);

  try {
    ingest_text("price,beds,baths,location,rental_type,address\n", SchemaMode::Processed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingColumns);
    EXPECT_NE(std::string(e.what()).find("street"), std::string::npos);
  }
  EXPECT_EQ(error_of([] { ingest_text("title,address,details,listing_by\nx,y,z,w\n", SchemaMode::Raw); }),
            ErrorKind::MissingColumns);
  EXPECT_EQ(error_of([] { ingest_csv("/nonexistent/file.csv", SchemaMode::Raw); }), ErrorKind::FileUnreadable);
}

TEST(Ingest, ProcessedRoundTrip) {
  auto fx = synthesize_fixture(3, 50);
  auto text = write_listings_csv(fx.listings);
  auto back = ingest_text(text, SchemaMode::Processed);
  ASSERT_EQ(back.listings.size(), fx.listings.size());
  for (std::size_t i = 0; i < fx.listings.size(); ++i) EXPECT_EQ(back.listings[i], fx.listings[i]);
}

// Random malformed rows never produce a listing that breaks the invariants.
TEST(Ingest, NeverEmitsInvalidListings) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> prices{"$3,495", "0", "-12", "", "abc", "$1e400", "nan", "$12,000/month", "7"};
  const std::vector<std::string> beds{"2", "-1", "21", "0", "", "x", "3.5", "20"};
  const std::vector<std::string> baths{"1", "0", "-2", "", "21", "1.5", "inf", "20"};
  const std::vector<std::string> locs{"Chelsea", "", "   ", "soho", "\"Hell's Kitchen\""};
  std::uniform_int_distribution<int> u(0, 1000);
  std::string text = "price,beds,baths,location,rental_type,street,address\n";
  for (int i = 0; i < 3000; ++i) {
    text += prices[u(rng) % prices.size()] == "$3,495" ? "\"$3,495\"" : prices[u(rng) % prices.size()];
    text += "," + beds[u(rng) % beds.size()] + "," + baths[u(rng) % baths.size()] + "," +
            locs[u(rng) % locs.size()] + ",condo,,1 Main St\n";
  }
  auto res = ingest_text(text, SchemaMode::Processed);
  EXPECT_EQ(res.report.rows_read, 3000);
  EXPECT_EQ(res.report.rows_kept + res.report.rows_dropped, 3000);
  EXPECT_GT(res.report.rows_kept, 0);
  for (const auto& l : res.listings) {
    ASSERT_TRUE(satisfies_invariants(l));
    ASSERT_GT(l.price, 0);
    ASSERT_FALSE(l.location.empty());
  }
}

TEST(BedroomSummary, SingleListing) {
  auto s = summarize_by_bedrooms({make(0, 2000, 1, "Chelsea")});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].min, 2000);
  EXPECT_EQ(s[0].max, 2000);
  EXPECT_EQ(s[0].median, 2000);
  EXPECT_EQ(s[0].mean, 2000);
  EXPECT_FALSE(s[0].std_dev);
  EXPECT_EQ(s[0].count, 1);
  EXPECT_EQ(error_of([] { summarize_by_bedrooms({}); }), ErrorKind::EmptyDataset);
}

TEST(BedroomSummary, StatisticsAndConservation) {
  std::vector<Listing> ls{make(0, 1000, 0, "A"), make(1, 3000, 0, "A"), make(2, 2000, 0, "A"),
                          make(3, 5000, 2, "B"), make(4, 4000, 2, "B"), make(5, 9000, 1, "C")};
  auto s = summarize_by_bedrooms(ls);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].bedrooms, 0);
  EXPECT_EQ(s[1].bedrooms, 1);
  EXPECT_EQ(s[2].bedrooms, 2);
  EXPECT_EQ(s[0].median, 2000);
  EXPECT_EQ(s[2].median, 4500);
  ASSERT_TRUE(s[0].std_dev);
  EXPECT_DOUBLE_EQ(*s[0].std_dev, 1000.0);  // sample std of 1000,2000,3000
  std::int64_t total = 0;
  for (const auto& r : s) {
    EXPECT_LE(r.min, r.median);
    EXPECT_LE(r.median, r.max);
    EXPECT_EQ(r.std_dev.has_value(), r.count >= 2);
    total += r.count;
  }
  EXPECT_EQ(total, 6);

  auto fx = synthesize_fixture(5, 777);
  total = 0;
  for (const auto& r : summarize_by_bedrooms(fx.listings)) total += r.count;
  EXPECT_EQ(total, 777);
}

TEST(TopCounts, OrderingAndTies) {
  std::vector<Listing> chelsea{make(0, 1, 0, "Chelsea"), make(1, 1, 0, "Chelsea"), make(2, 1, 0, "Chelsea")};
  auto t = top_counts(chelsea, CountKey::Location, 10);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], (std::pair<std::string, std::int64_t>{"Chelsea", 3}));

  std::vector<Listing> tie{make(0, 1, 0, "Soho"), make(1, 1, 0, "Chelsea"), make(2, 1, 0, "Midtown"),
                           make(3, 1, 0, "Midtown")};
  t = top_counts(tie, CountKey::Location, 3);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].first, "Midtown");
  EXPECT_EQ(t[1].first, "Chelsea");
  EXPECT_EQ(t[2].first, "Soho");

  auto fx = synthesize_fixture(9, 2000);
  auto streets = top_counts(fx.listings, CountKey::Street, 10);
  for (std::size_t i = 1; i < streets.size(); ++i) EXPECT_GE(streets[i - 1].second, streets[i].second);
  EXPECT_EQ(error_of([] { top_counts({}, CountKey::Street, 3); }), ErrorKind::EmptyDataset);
  EXPECT_EQ(error_of([&] { top_counts(chelsea, CountKey::Street, 0); }), ErrorKind::BadK);
}

TEST(Synthesize, DeterministicWithPlantedAnomalies) {
  auto a = synthesize_fixture(7, 100);
  auto b = synthesize_fixture(7, 100);
  EXPECT_EQ(a.listings, b.listings);
  EXPECT_EQ(a.planted, b.planted);

  auto big = synthesize_fixture(7, 5000);
  EXPECT_EQ(big.planted_count(), 100u);
  std::size_t over = 0, under = 0;
  for (std::size_t i = 0; i < big.listings.size(); ++i) {
    const auto& l = big.listings[i];
    EXPECT_TRUE(satisfies_invariants(l));
    if (big.planted[i] == Planted::Over) {
      ++over;
      EXPECT_EQ(l.price, 2.0 * big.base_price[i]);
    } else if (big.planted[i] == Planted::Under) {
      ++under;
      EXPECT_EQ(l.price, 0.5 * big.base_price[i]);
    }
  }
  EXPECT_EQ(over, 50u);
  EXPECT_EQ(under, 50u);
  EXPECT_NE(synthesize_fixture(8, 100).listings, a.listings);
}

TEST(Ingest, ProcessedIdColumnRoundTripsGappedIds) {
  const auto res = ingest_csv(std::string(RENTPAS_TEST_DATA) + "/listings_raw_12.csv", SchemaMode::Raw);
  const auto back = ingest_text(write_listings_csv(res.listings), SchemaMode::Processed);
  EXPECT_EQ(back.listings, res.listings);
  EXPECT_EQ(back.report.rows_dropped, 0);
}

TEST(Ingest, MalformedAndDuplicateIdsDropped) {
  const std::string text =
      "id,price,beds,baths,location,rental_type,street,address\n"
      "7,2000,1,1,Chelsea,rental unit,,1 A St\n"
      "x,2000,1,1,Chelsea,rental unit,,1 A St\n"
      "7,2100,1,1,Chelsea,rental unit,,2 A St\n";
  const auto res = ingest_text(text, SchemaMode::Processed);
  ASSERT_EQ(res.listings.size(), 1u);
  EXPECT_EQ(res.listings[0].id, 7);
  const auto reasons = res.report.reason_counts();
  EXPECT_EQ(reasons.at("MalformedId"), 1);
  EXPECT_EQ(reasons.at("DuplicateId"), 1);
}
