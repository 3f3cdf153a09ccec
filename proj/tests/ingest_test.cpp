#include "bactree/ingest.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bactree/bar.hpp"

using namespace bactree;

namespace {

Dataset stewart_from(const std::string& text) {
  std::istringstream in(text);
  return parse_stewart(in, "fixture");
}

Dataset wang_from(const std::string& text) {
  std::istringstream in(text);
  return parse_wang(in, "fixture");
}

bool has_warning(const Dataset& ds, const std::string& needle) {
  for (const auto& w : ds.warnings)
    if (w.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(ParseStewart, LineHundredExample) {
  const auto ds = stewart_from("1.  103.  51.  6.  5.  0.0348970  0.0368848  3.  0.  2.  0.\n");
  ASSERT_EQ(ds.trees.size(), 1u);
  const auto& tree = ds.trees.at(1);
  const CellRecord* r = tree.find(CellLabel(103));
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->tree_id, 1);
  EXPECT_EQ(r->generation, 6);
  EXPECT_EQ(r->pole, PoleType::O);
  EXPECT_DOUBLE_EQ(*r->growth_rate, 0.0348970);
  EXPECT_EQ(*r->mother_label, CellLabel(51));
  EXPECT_EQ(*r->mother_generation, 5);
  EXPECT_DOUBLE_EQ(*r->mother_growth_rate, 0.0368848);
  EXPECT_EQ(*r->consec_old, 3);
  EXPECT_EQ(*r->consec_new, 0);
  EXPECT_EQ(*r->mother_consec_old, 2);
  EXPECT_EQ(*r->mother_consec_new, 0);
  EXPECT_FALSE(has_warning(ds, "mother of cell"));
  // Our consecutive-pole arithmetic agrees with the recorded columns.
  EXPECT_EQ(consecutive_poles(*r->label).count, *r->consec_old);
  EXPECT_EQ(consecutive_poles(*r->mother_label).count, *r->mother_consec_old);
}

TEST(ParseStewart, SentinelAndEmpty) {
  const auto ds = stewart_from("1. 103. 51. 6. 5. -1. 0.0368848 3. 0. 2. 0.\n");
  const auto* r = ds.trees.at(1).find(CellLabel(103));
  EXPECT_FALSE(r->growth_rate.has_value());
  EXPECT_FALSE(r->observed());

  const auto empty = stewart_from("");
  EXPECT_TRUE(empty.trees.empty());
  EXPECT_EQ(empty.record_count(), 0u);
  EXPECT_TRUE(has_warning(empty, "published data set has 22732"));
}

TEST(ParseStewart, Errors) {
  try {
    stewart_from("1. 2. 1. 1. 0. 0.03 0.03 0. 0. 0. 0.\n1. 3. 1. 1. 0. abc 0.03 0. 0. 0. 0.\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(stewart_from("1. 2. 1.\n"), ParseError);
  const auto ds = stewart_from("1. 103. 50. 6. 5. 0.03 0.03 3. 0. 2. 0.\n");
  EXPECT_TRUE(has_warning(ds, "mother of cell 103 should be 51"));
}

TEST(ParseStewart, GenerationOneTypeUnknown) {
  const auto ds = stewart_from("1. 1. -1. 0. -1. 0.03 -1. -1. -1. -1. -1.\n1. 3. 1. 1. 0. 0.03 0.03 -1. -1. -1. -1.\n");
  EXPECT_EQ(ds.trees.at(1).find(CellLabel(3))->pole, PoleType::Unknown);
  EXPECT_EQ(ds.trees.at(1).find(CellLabel(1))->pole, PoleType::Unknown);
}

TEST(ParseWang, LineHundredExample) {
  const auto ds = wang_from("1.  50.  49.  0.0337894  0.0303264  0.  1.  49.  0.\n");
  const auto& tree = ds.trees.at(1);
  const CellRecord* r = tree.comb(50, PoleType::N);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->pole, PoleType::N);
  EXPECT_EQ(r->generation, 50);
  EXPECT_EQ(*r->mother_generation, 49);
  EXPECT_DOUBLE_EQ(*r->growth_rate, 0.0337894);
  EXPECT_DOUBLE_EQ(*r->mother_growth_rate, 0.0303264);
  EXPECT_EQ(*r->mother_consec_old, 49);
  ASSERT_TRUE(r->label);
  EXPECT_EQ(r->label->value(), (CellLabel::value_type{1} << 51) - 2);
  EXPECT_EQ(mother(*r->label).value(), (CellLabel::value_type{1} << 50) - 1);
  // No mother record in the table: the column supplies the mother's rate.
  EXPECT_DOUBLE_EQ(*tree.mother_rate(*r), 0.0303264);
}

TEST(ParseWang, SentinelIntegrityAndDeepGenerations) {
  const auto ds = wang_from("1. 50. 49. -1. 0.0303264 0. 1. 49. 0.\n");
  EXPECT_FALSE(ds.trees.at(1).comb(50, PoleType::N)->growth_rate);

  EXPECT_THROW(wang_from("1. 5. 4. 0.03 0.03 5. 1. 4. 0.\n"), IntegrityError);

  const auto short_run = wang_from("1. 5. 4. 0.03 0.03 3. 0. 4. 0.\n");
  EXPECT_TRUE(has_warning(short_run, "has only 3 consecutive old poles"));

  const auto deep = wang_from("7. 302. 301. 0.03 0.031 302. 0. 301. 0.\n7. 301. 300. 0.031 0.03 301. 0. 300. 0.\n");
  const auto& t = deep.trees.at(7);
  const auto* r = t.spine(302);
  ASSERT_NE(r, nullptr);
  EXPECT_FALSE(r->label);  // beyond 128 bits: represented by its comb position
  EXPECT_EQ(t.mother_of(*r), t.spine(301));
  EXPECT_DOUBLE_EQ(*t.mother_rate(*r), 0.031);
}

TEST(ParseWang, CountMismatchIsOnlyAWarning) {
  const auto ds = wang_from("1. 1. 0. 0.03 -1. 1. 0. -1. -1.\n");
  EXPECT_EQ(ds.record_count(), 1u);
  EXPECT_TRUE(has_warning(ds, "published data set has 45255 in 224"));
}

TEST(Serialize, TableRoundTripProperty) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimulationConfig cfg;
    cfg.params = {0.03, 0.1, 0.028, 0.1, 0.005, 0.2};
    cfg.generations = 30;
    cfg.trees = 3;
    cfg.missing_prob = 0.2;
    cfg.seed = seed;
    const auto comb = simulate_comb(cfg);
    std::ostringstream a;
    write_wang(a, comb);
    std::istringstream in(a.str());
    const auto back = parse_wang(in);
    std::ostringstream b;
    write_wang(b, back);
    EXPECT_EQ(a.str(), b.str());
    ASSERT_EQ(back.record_count(), comb.record_count());
    for (const auto& [id, t] : comb.trees) {
      const auto& u = back.trees.at(id);
      for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(t.records()[i].growth_rate, u.records()[i].growth_rate);
        EXPECT_EQ(t.records()[i].pole, u.records()[i].pole);
        EXPECT_EQ(t.records()[i].label, u.records()[i].label);
      }
    }

    cfg.generations = 5;
    const auto full = simulate_full_tree(cfg);
    std::ostringstream c;
    write_stewart(c, full);
    std::istringstream in2(c.str());
    const auto full_back = parse_stewart(in2);
    std::ostringstream d;
    write_stewart(d, full_back);
    EXPECT_EQ(c.str(), d.str());
    for (const auto& w : full_back.warnings) EXPECT_NE(w.find("published"), std::string::npos) << w;
  }
}

TEST(Serialize, TextExcerptNormalizesWhitespaceOnly) {
  const std::string line = "1. 103. 51. 6. 5. 0.034897 0.0368848 3. 0. 2. 0.\n";
  std::ostringstream out;
  write_stewart(out, stewart_from(line));
  EXPECT_EQ(out.str(), line);
}

TEST(Serialize, JsonRoundTrip) {
  SimulationConfig cfg;
  cfg.params = {0.03, 0.1, 0.028, 0.1, 0.005, 0.0};
  cfg.generations = 130;  // crosses the 128-bit label limit
  cfg.trees = 2;
  cfg.missing_prob = 0.1;
  auto ds = simulate_comb(cfg);
  ds.trees.at(1).set_outlier(3, true);
  const auto j = to_json(ds);
  const auto back = dataset_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_TRUE(back.trees.at(1).records()[3].outlier);
  EXPECT_FALSE(back.trees.at(1).spine(130)->label);
}

TEST(FitGrowthRate, Examples) {
  LengthSeries s;
  s.times = {0, 10, 20, 30};
  for (double t : s.times) s.lengths.push_back(2.5 * std::exp(0.03 * t));
  EXPECT_NEAR(*fit_growth_rate(s), 0.03, 1e-15);

  LengthSeries flat{{0, 1, 2, 3}, {2, 2, 2, 2}, true};
  EXPECT_EQ(*fit_growth_rate(flat), 0.0);

  LengthSeries negative{{0, 1, 2}, {2, -1, 3}, true};
  EXPECT_FALSE(fit_growth_rate(negative));
  LengthSeries partial{{0, 1, 2}, {2, 2.1, 2.2}, false};
  EXPECT_FALSE(fit_growth_rate(partial));
  LengthSeries two{{0, 1}, {2, 2.1}, true};
  EXPECT_FALSE(fit_growth_rate(two));
}

TEST(FitGrowthRate, ScaleInvarianceAndTimeEquivariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    LengthSeries s;
    double t = 0;
    for (int i = 0; i < 12; ++i) {
      t += u(rng);
      s.times.push_back(t);
      s.lengths.push_back(u(rng) * std::exp(0.02 * t));
    }
    const double tau = *fit_growth_rate(s);
    LengthSeries scaled = s;
    for (auto& l : scaled.lengths) l *= 3.7;
    EXPECT_NEAR(*fit_growth_rate(scaled), tau, 1e-12);
    LengthSeries seconds = s;
    for (auto& x : seconds.times) x *= 60.0;
    EXPECT_NEAR(*fit_growth_rate(seconds), tau / 60.0, 1e-14);
  }
}

TEST(LengthCsv, GroupsByCell) {
  std::istringstream in("cell_id,time_minutes,length\na,0,2\na,10,2.5\nb,0,3\na,20,3.1\nb,5,3.2,0\n");
  const auto cells = read_length_csv(in);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells.at("a").times.size(), 3u);
  EXPECT_TRUE(cells.at("a").complete_life);
  EXPECT_FALSE(cells.at("b").complete_life);
  std::istringstream bad("a,0\n");
  EXPECT_THROW(read_length_csv(bad), ParseError);
}
