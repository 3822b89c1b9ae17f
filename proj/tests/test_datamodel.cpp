#include <regionow/datamodel.hpp>

#include <gtest/gtest.h>

#include <random>

namespace regionow {
namespace {

CountryPanel two_region_panel(int first_year, int last_year) {
  CountryPanel p;
  p.country_code = "AA";
  p.region_ids = {"AA1", "AA2"};
  p.timeline = {QuarterIndex(first_year, 1), QuarterIndex(last_year, 4)};
  p.national_quarterly_growth.assign(static_cast<std::size_t>(p.timeline.size()), 0.5);
  p.annual_growth.resize(2);
  for (int y = first_year + 1; y <= last_year; ++y) {
    p.annual_growth[0][y] = 1.0;
    p.annual_growth[1][y] = 2.0;
  }
  p.weights = Eigen::Vector2d(0.7, 0.3);
  return p;
}

TEST(QuarterIndex, RejectsInvalidQuarter) {
  EXPECT_THROW(QuarterIndex(2001, 0), DomainError);
  EXPECT_THROW(QuarterIndex(2001, 5), DomainError);
}

TEST(QuarterIndex, OrderingIsLexicographic) {
  EXPECT_LT(QuarterIndex(2001, 4), QuarterIndex(2002, 1));
  EXPECT_LT(QuarterIndex(2001, 1), QuarterIndex(2001, 2));
  EXPECT_EQ(QuarterIndex(2010, 3), QuarterIndex(2010, 3));
}

TEST(QuarterIndex, AdvancingByFourKeepsQuarter) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> year(-50, 3000), quarter(1, 4);
  for (int k = 0; k < 1000; ++k) {
    const QuarterIndex q(year(rng), quarter(rng));
    const QuarterIndex n = q + 4;
    EXPECT_EQ(n.year(), q.year() + 1);
    EXPECT_EQ(n.quarter(), q.quarter());
    EXPECT_EQ(n - q, 4);
    EXPECT_EQ((q - 4) + 4, q);
  }
}

TEST(QuarterIndex, StepsAcrossYearBoundary) {
  EXPECT_EQ(QuarterIndex(2001, 4) + 1, QuarterIndex(2002, 1));
  EXPECT_EQ(QuarterIndex(2002, 1) - 1, QuarterIndex(2001, 4));
  EXPECT_EQ(QuarterIndex(2002, 1).str(), "2002Q1");
}

TEST(Vintage, PublicationLagOfTwoYears) {
  const auto p = two_region_panel(2001, 2021);
  const auto v = make_vintage(p, 2016);
  EXPECT_EQ(v.annual_cutoff_year, 2014);
  EXPECT_EQ(v.quarterly_cutoff, QuarterIndex(2016, 4));
  EXPECT_EQ(v.target_year, 2016);

  const auto v21 = make_vintage(p, 2021);
  EXPECT_EQ(v21.annual_cutoff_year, 2019);
  EXPECT_EQ(v21.quarterly_cutoff, QuarterIndex(2021, 4));
}

TEST(Vintage, TargetOutsideTimelineIsRangeError) {
  const auto p = two_region_panel(2001, 2021);
  EXPECT_THROW(make_vintage(p, 2023), RangeError);
  EXPECT_THROW(make_vintage(p, 2002), RangeError);  // cutoff 2000 precedes the panel
}

TEST(Vintage, HidesAnnualDataAfterCutoff) {
  const auto p = two_region_panel(2001, 2021);
  const auto v = make_vintage(p, 2016);
  EXPECT_TRUE(v.annual(0, 2014).has_value());
  EXPECT_FALSE(v.annual(0, 2015).has_value());
  EXPECT_FALSE(v.annual(1, 2016).has_value());
  EXPECT_EQ(v.timeline().last, QuarterIndex(2016, 4));
}

TEST(Vintage, VisibleSetIsStrictSubsetBeforeLastYear) {
  const auto p = two_region_panel(2001, 2021);
  std::size_t full = 0;
  for (const auto& m : p.annual_growth) full += m.size();
  for (int target = 2003; target <= 2021; ++target) {
    const auto v = make_vintage(p, target);
    std::size_t visible = 0;
    for (int i = 0; i < 2; ++i)
      for (int y = 2001; y <= 2021; ++y) visible += v.annual(i, y).has_value();
    EXPECT_LT(visible, full) << target;
  }
}

TEST(CountryPanel, ValidateChecksInvariants) {
  auto p = two_region_panel(2001, 2005);
  EXPECT_NO_THROW(p.validate());

  auto single = p;
  single.region_ids.pop_back();
  single.annual_growth.pop_back();
  single.weights = Eigen::VectorXd::Ones(1);
  EXPECT_THROW(single.validate(), ConfigError);

  auto bad_weights = p;
  bad_weights.weights = Eigen::Vector2d(0.7, 0.4);
  EXPECT_THROW(bad_weights.validate(), ConfigError);

  auto short_national = p;
  short_national.national_quarterly_growth.pop_back();
  EXPECT_THROW(short_national.validate(), ConfigError);

  auto outside = p;
  outside.annual_growth[0][2007] = 1.0;
  EXPECT_THROW(outside.validate(), ConfigError);
}

TEST(ModelConfig, DefaultsMatchPriorSetup) {
  ModelConfig c;
  EXPECT_EQ(c.lags, 7);
  EXPECT_DOUBLE_EQ(c.shock_prior.shape, 3.0);
  EXPECT_DOUBLE_EQ(c.shock_prior.scale, 0.3);
  EXPECT_DOUBLE_EQ(c.me_prior.shape, 100.0);
  EXPECT_DOUBLE_EQ(c.me_prior.scale, 0.01);
  EXPECT_DOUBLE_EQ(c.cs_prior.shape, 5.0);
  EXPECT_DOUBLE_EQ(c.cs_prior.scale, 0.05);
  EXPECT_EQ(c.n_burn, 2000);
  EXPECT_EQ(c.n_draws, 3000);
  EXPECT_EQ(c.max_stationarity_retries, 100);
}

TEST(ModelConfig, ValidateRejectsShortLagsAndBadPriors) {
  ModelConfig c;
  c.lags = 6;
  EXPECT_THROW(c.validate(5), ConfigError);
  c = ModelConfig{};
  c.q_observed = 0;
  EXPECT_THROW(c.validate(5), ConfigError);
  c = ModelConfig{};
  c.me_prior.scale = 0.0;
  EXPECT_THROW(c.validate(5), ConfigError);
}

TEST(ModelConfig, TooManyFactorsOnlyWarns) {
  ModelConfig c;
  c.q_latent = 4;
  EXPECT_TRUE(c.validate(9).empty());
  const auto w = c.validate(3);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("exceeds"), std::string::npos);
}

}  // namespace
}  // namespace regionow
