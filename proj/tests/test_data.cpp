#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "probest/data.hpp"
#include "probest/error.hpp"
#include "probest/rng.hpp"

namespace fs = std::filesystem;
using namespace probest;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "probest_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST(Split, SizesFollowFloorsWithRemainderToTrain) {
  const auto s = split(100, {0.7, 0.15, 0.15}, 1);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.val.size(), 15u);
  EXPECT_EQ(s.test.size(), 15u);
}

TEST(Split, DegenerateAllTrain) {
  const auto s = split(10, {1.0, 0.0, 0.0}, 3);
  EXPECT_EQ(s.train.size(), 10u);
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(Split, DeterministicUnderSeed) {
  EXPECT_EQ(split(5, {0.6, 0.2, 0.2}, 7), split(5, {0.6, 0.2, 0.2}, 7));
  EXPECT_NE(split(1000, {0.6, 0.2, 0.2}, 7), split(1000, {0.6, 0.2, 0.2}, 8));
}

TEST(Split, RejectsBadFractions) {
  EXPECT_THROW(split(10, {0.5, 0.6, -0.1}, 0), InvalidArgument);
  EXPECT_THROW(split(10, {0.5, 0.2, 0.2}, 0), InvalidArgument);
  EXPECT_THROW(split(2, {0.4, 0.3, 0.3}, 0), InvalidArgument);
}

TEST(SplitProperty, IsAPartitionOfAllIndices) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.below(500);
    const double a = 0.05 + 0.4 * rng.uniform();
    const double b = 0.05 + 0.4 * rng.uniform();
    const auto s = split(n, {1.0 - a - b, a, b}, rng.next());
    std::set<std::size_t> seen;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      EXPECT_FALSE(part->empty());
      for (auto i : *part) {
        ASSERT_LT(i, n);
        ASSERT_TRUE(seen.insert(i).second) << "index " << i << " appears twice";
      }
    }
    EXPECT_EQ(seen.size(), n);
  }
}

TEST(Dataset, RejectsInvalidContents) {
  FeatureMatrix x(2, 1);
  x << 0.0, 1.0;
  EXPECT_THROW(LabeledDataset(x, {0, 2}), InvalidArgument);
  EXPECT_THROW(LabeledDataset(x, {0}), InvalidArgument);
  EXPECT_THROW(LabeledDataset(x, {0, 1}, std::vector<double>{0.5, 1.5}), InvalidArgument);
  const LabeledDataset ok(x, {0, 1});
  EXPECT_FALSE(ok.has_truth());
  EXPECT_THROW(ok.truth_probs(), InvalidState);
}

TEST(Dataset, SubsetKeepsRowsInOrder) {
  FeatureMatrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  const LabeledDataset d(x, {0, 1, 1}, std::vector<double>{0.1, 0.2, 0.3});
  const std::vector<std::size_t> idx{2, 0};
  const auto s = d.subset(idx);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.row(0)[1], 6.0);
  EXPECT_EQ(s.outcomes()[1], 0);
  EXPECT_EQ(s.truth_probs()[0], 0.3);
}

TEST(PredictionsCsv, RoundTrip) {
  const auto path = temp_file("pred.csv");
  PredictionSet p{{0.2, 0.8}, {0, 1}, std::nullopt};
  save_predictions(p, path);
  const auto q = load_predictions(path);
  EXPECT_EQ(q.probs, p.probs);
  EXPECT_EQ(q.outcomes, p.outcomes);
  EXPECT_FALSE(q.truth.has_value());
}

TEST(PredictionsCsvProperty, RoundTripWithinTolerance) {
  Rng rng(5);
  const auto path = temp_file("pred_prop.csv");
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    PredictionSet p;
    p.truth.emplace();
    for (std::size_t i = 0; i < n; ++i) {
      p.probs.push_back(rng.uniform());
      p.outcomes.push_back(rng.bernoulli(0.5) ? 1 : 0);
      p.truth->push_back(rng.uniform());
    }
    save_predictions(p, path);
    const auto q = load_predictions(path);
    ASSERT_EQ(q.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(q.probs[i], p.probs[i], 1e-10);
      EXPECT_NEAR((*q.truth)[i], (*p.truth)[i], 1e-10);
      EXPECT_EQ(q.outcomes[i], p.outcomes[i]);
    }
  }
}

TEST(PredictionsCsv, OutOfRangeProbabilityNamesLine) {
  const auto path = temp_file("bad.csv");
  write(path, "prob,outcome\n0.2,0\n1.5,1\n");
  try {
    load_predictions(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(PredictionsCsv, BadOutcomeNamesLine) {
  const auto path = temp_file("bad_outcome.csv");
  write(path, "prob,outcome\n0.2,3\n");
  try {
    load_predictions(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(PredictionsCsv, EmptyFileHasNoRecords) {
  const auto path = temp_file("empty.csv");
  write(path, "");
  try {
    load_predictions(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("no records"), std::string::npos);
  }
  write(path, "prob,outcome\n");
  EXPECT_THROW(load_predictions(path), ParseError);
}

TEST(DatasetCsv, RoundTripWithTruthAndLatent) {
  FeatureMatrix x(3, 2);
  x << 0.1, -2.5, 1e-300, 3.0, 7.25, 0.0;
  const LabeledDataset d(x, {1, 0, 1}, std::vector<double>{0.3, 0.6, 1.0},
                         std::vector<double>{30, 60, 100});
  const auto path = temp_file("data.csv");
  save_dataset(d, path);
  const auto e = load_dataset(path);
  EXPECT_EQ(e.features(), d.features());
  EXPECT_TRUE(std::equal(e.outcomes().begin(), e.outcomes().end(), d.outcomes().begin()));
  EXPECT_TRUE(std::equal(e.truth_probs().begin(), e.truth_probs().end(), d.truth_probs().begin()));
  EXPECT_TRUE(std::equal(e.latent().begin(), e.latent().end(), d.latent().begin()));
}

TEST(DatasetCsv, RaggedRowIsParseError) {
  const auto path = temp_file("ragged.csv");
  write(path, "f0,f1,outcome\n0.1,0.2,1\n0.3,1\n");
  EXPECT_THROW(load_dataset(path), ParseError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}
