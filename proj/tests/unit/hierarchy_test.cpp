#include <gtest/gtest.h>

#include <random>

#include "atp/error.hpp"
#include "atp/hierarchy.hpp"
#include "synthetic.hpp"

namespace atp {
namespace {

using Edges = std::vector<std::pair<std::string, std::string>>;

TEST(TypeHierarchy, DepthsAndMaxDepth) {
  const auto h = TypeHierarchy::load(ATP_TEST_DATA "/toy_hierarchy.tsv");
  EXPECT_EQ(h.size(), 11u);
  EXPECT_EQ(h.depth("dbo:Agent"), 1);
  EXPECT_EQ(h.depth("dbo:Gymnast"), 4);
  EXPECT_EQ(h.max_depth(), 7);
  EXPECT_EQ(h.parent("dbo:Gymnast"), "dbo:Athlete");
  EXPECT_FALSE(h.parent("dbo:Agent").has_value());
  EXPECT_FALSE(h.depth("dbo:Unknown").has_value());
}

TEST(TypeHierarchy, AncestryAndPaths) {
  const auto h = TypeHierarchy::from_edges(testing::example_edges());
  EXPECT_TRUE(h.is_ancestor("dbo:Agent", "dbo:Gymnast"));
  EXPECT_FALSE(h.is_ancestor("dbo:Gymnast", "dbo:Agent"));
  EXPECT_FALSE(h.is_ancestor("dbo:Gymnast", "dbo:Gymnast"));
  EXPECT_TRUE(h.on_same_path("dbo:Gymnast", "dbo:Person"));
  EXPECT_TRUE(h.on_same_path("dbo:Person", "dbo:Gymnast"));
  EXPECT_FALSE(h.on_same_path("dbo:Horse", "dbo:Gymnast"));
  EXPECT_FALSE(h.on_same_path("dbo:Unknown", "dbo:Gymnast"));
  EXPECT_EQ(h.path_distance("dbo:Agent", "dbo:Gymnast"), 3);
  EXPECT_FALSE(h.path_distance("dbo:Horse", "dbo:Gymnast").has_value());
}

TEST(LenientGain, ImmediateParentAtDepthSeven) {
  const auto h = TypeHierarchy::from_edges(testing::example_edges());
  ASSERT_EQ(h.max_depth(), 7);
  const std::vector<std::string> gold{"dbo:Gymnast"};
  EXPECT_NEAR(h.lenient_gain("dbo:Athlete", gold), 1.0 - 1.0 / 7.0, 1e-12);
  EXPECT_NEAR(h.lenient_gain("dbo:Athlete", gold), 0.8571, 1e-4);
  EXPECT_NEAR(h.lenient_gain("dbo:Person", gold), 1.0 - 2.0 / 7.0, 1e-12);
  EXPECT_NEAR(h.lenient_gain("dbo:Agent", gold), 1.0 - 3.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(h.lenient_gain("dbo:Gymnast", gold), 1.0);
  EXPECT_DOUBLE_EQ(h.lenient_gain("dbo:Horse", gold), 0.0);
}

TEST(LenientGain, DescendantOfGoldGetsCredit) {
  const auto h = TypeHierarchy::from_edges(testing::example_edges());
  const std::vector<std::string> gold{"dbo:Person"};
  EXPECT_NEAR(h.lenient_gain("dbo:Gymnast", gold), 1.0 - 2.0 / 7.0, 1e-12);
}

TEST(LenientGain, ClosestGoldTypeWins) {
  const auto h = TypeHierarchy::from_edges(testing::example_edges());
  const std::vector<std::string> gold{"dbo:Agent", "dbo:Athlete"};
  EXPECT_NEAR(h.lenient_gain("dbo:Gymnast", gold), 1.0 - 1.0 / 7.0, 1e-12);
}

TEST(LenientGain, UnknownTypes) {
  const auto h = TypeHierarchy::from_edges(testing::example_edges());
  const std::vector<std::string> gold{"dbo:Gymnast"};
  EXPECT_DOUBLE_EQ(h.lenient_gain("dbo:Unknown", gold), 0.0);
  const std::vector<std::string> unknown_gold{"dbo:Unknown"};
  EXPECT_DOUBLE_EQ(h.lenient_gain("dbo:Unknown", unknown_gold), 1.0);
}

TEST(LenientGain, OneIffExactMatch) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto edges = testing::random_edges(rng, 2 + rng() % 15);
    const auto h = TypeHierarchy::from_edges(edges);
    std::vector<std::string> gold;
    for (int g = 0; g < 1 + static_cast<int>(rng() % 3); ++g) gold.push_back(edges[rng() % edges.size()].first);
    for (const auto& [t, parent] : edges) {
      const double gain = h.lenient_gain(t, gold);
      const bool exact = std::find(gold.begin(), gold.end(), t) != gold.end();
      EXPECT_EQ(gain == 1.0, exact) << t;
      EXPECT_GE(gain, 0.0);
      EXPECT_LE(gain, 1.0);
    }
  }
}

TEST(TypeHierarchy, Errors) {
  EXPECT_THROW(TypeHierarchy::from_edges(Edges{{"A", "B"}, {"B", "A"}}), ValidationError);
  EXPECT_THROW(TypeHierarchy::from_edges(Edges{{"A", "A"}}), ValidationError);
  EXPECT_THROW(TypeHierarchy::from_edges(Edges{{"A", "ROOT"}, {"B", "Missing"}}), ValidationError);
  EXPECT_THROW(TypeHierarchy::from_edges(Edges{{"A", "ROOT"}, {"B", "ROOT"}, {"C", "A"}, {"C", "B"}}),
               ValidationError);
  EXPECT_THROW(TypeHierarchy::parse("A\tB\tC\n"), ParseError);
  EXPECT_THROW(TypeHierarchy::parse("just-one-column\n"), ParseError);
}

TEST(TypeHierarchy, DepthsTsvExport) {
  const auto h = TypeHierarchy::from_edges(Edges{{"A", "ROOT"}, {"B", "A"}});
  EXPECT_EQ(h.depths_tsv(), "A\t1\tROOT\nB\t2\tA\n");
}

TEST(TypeHierarchy, CopyKeepsData) {
  const auto h = TypeHierarchy::from_edges(testing::example_edges());
  TypeHierarchy copy = h;
  EXPECT_EQ(copy.max_depth(), 7);
  EXPECT_EQ(copy.depth("dbo:Gymnast"), 4);
}

}  // namespace
}  // namespace atp
