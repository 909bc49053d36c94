#include <gtest/gtest.h>

#include <random>

#include "prism/confusion.hpp"
#include "support/equivalence.hpp"

using namespace prism;

namespace {

MetadataTable labelled(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string src = "id,label,prediction\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    src += "r" + std::to_string(i) + "," + pairs[i].first + "," + pairs[i].second + "\n";
  }
  return ingest_table(src, {{"label", ColumnKind::label}, {"prediction", ColumnKind::prediction}});
}

std::vector<std::vector<std::uint64_t>> cells(const ConfusionMatrix& m) {
  std::vector<std::vector<std::uint64_t>> out(m.size(), std::vector<std::uint64_t>(m.size()));
  for (std::size_t a = 0; a < m.size(); ++a) {
    for (std::size_t b = 0; b < m.size(); ++b) out[a][b] = m.at(a, b);
  }
  return out;
}

const char* kAnimals =
    "root\n"
    "  animal\n"
    "    cat\n"
    "    dog\n"
    "  vehicle\n"
    "    car\n";

}  // namespace

TEST(Confusion, ManualExample) {
  auto t = labelled({{"a", "a"}, {"a", "b"}, {"b", "b"}, {"b", "b"}});
  auto m = confusion_matrix(t, "label", "prediction");
  EXPECT_EQ(m.classes, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(cells(m), (std::vector<std::vector<std::uint64_t>>{{1, 1}, {0, 2}}));
}

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  auto t = labelled({{"x", "x"}, {"y", "y"}, {"x", "x"}, {"z", "z"}});
  EXPECT_EQ(cells(confusion_matrix(t, "label", "prediction")),
            (std::vector<std::vector<std::uint64_t>>{{2, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
}

TEST(Confusion, EmptySubsetKeepsClasses) {
  auto t = labelled({{"a", "a"}, {"a", "b"}, {"b", "b"}});
  std::vector<std::size_t> none;
  auto m = confusion_matrix(t, "label", "prediction", std::span<const std::size_t>(none));
  EXPECT_EQ(m.classes, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(m.total(), 0u);
}

TEST(Confusion, SubsetRestrictsCounts) {
  auto t = labelled({{"a", "a"}, {"a", "b"}, {"b", "b"}, {"b", "b"}});
  std::vector<std::size_t> wrong = {1};
  auto m = confusion_matrix(t, "label", "prediction", std::span<const std::size_t>(wrong));
  EXPECT_EQ(cells(m), (std::vector<std::vector<std::uint64_t>>{{0, 1}, {0, 0}}));
}

TEST(Confusion, ColumnErrors) {
  auto t = ingest_table("id,label,prediction,score\n1,a,a,0.5\n2,b,a,0.7\n");
  try {
    confusion_matrix(t, "label", "nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownColumn);
  }
  try {
    confusion_matrix(t, "label", "score");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonCategorical);
  }
}

TEST(Hierarchy, ParsesIndentedTextAndJson) {
  auto h = LabelHierarchy::parse(kAnimals);
  auto j = LabelHierarchy::parse(R"({"name":"root","children":[{"name":"animal","children":[{"name":"cat"},{"name":"dog"}]},
                                    {"name":"vehicle","children":[{"name":"car"}]}]})");
  EXPECT_EQ(h.nodes().size(), 6u);
  EXPECT_EQ(j.nodes().size(), 6u);
  for (std::size_t i = 0; i < h.nodes().size(); ++i) EXPECT_EQ(h.node(i).name, j.node(i).name);
}

TEST(Hierarchy, MalformedInputs) {
  for (const char* bad : {"a\nb\n", "a\n\tb\n", "a\n  b\n  b\n", "", "{\"children\":[]}"}) {
    try {
      LabelHierarchy::parse(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedHierarchy) << bad;
    }
  }
}

TEST(Hierarchy, CatPredictedAsDog) {
  auto t = labelled({{"cat", "dog"}});
  auto h = hierarchical_confusion(t, "label", "prediction", LabelHierarchy::parse(kAnimals));
  ASSERT_EQ(h.nodes.size(), 3u);
  EXPECT_EQ(h.nodes[0].node, "root");
  const auto* root = h.find("root");
  EXPECT_EQ(root->children, (std::vector<std::string>{"animal", "vehicle"}));
  EXPECT_EQ(root->at(0, 0), 1u);
  EXPECT_EQ(root->total(), 1u);
  const auto* animal = h.find("animal");
  EXPECT_EQ(animal->children, (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(animal->at(0, 1), 1u);
  EXPECT_EQ(animal->total(), 1u);
  // Both leaves lie outside vehicle's subtree: nothing is counted there.
  EXPECT_EQ(h.find("vehicle")->total(), 0u);
}

TEST(Hierarchy, CrossSubtreeErrorUsesOutsideSlot) {
  auto t = labelled({{"cat", "car"}});
  auto h = hierarchical_confusion(t, "label", "prediction", LabelHierarchy::parse(kAnimals));
  const auto* animal = h.find("animal");
  EXPECT_EQ(animal->at(0, animal->outside()), 1u);
  const auto* vehicle = h.find("vehicle");
  EXPECT_EQ(vehicle->at(vehicle->outside(), 0), 1u);
  EXPECT_EQ(h.find("root")->at(0, 1), 1u);
}

TEST(Hierarchy, FlatRootEqualsFlatMatrix) {
  std::mt19937_64 rng(3);
  auto raw = prism::testing::random_table(rng, 300, 5);
  auto t = raw.ingest();
  auto flat = confusion_matrix(t, "label", "prediction");
  std::string text = "all\n";
  for (const auto& c : flat.classes) text += "  " + c + "\n";
  auto h = hierarchical_confusion(t, "label", "prediction", LabelHierarchy::parse(text));
  ASSERT_EQ(h.nodes.size(), 1u);
  const auto& root = h.nodes[0];
  EXPECT_EQ(root.children, flat.classes);
  for (std::size_t a = 0; a < flat.size(); ++a) {
    for (std::size_t b = 0; b < flat.size(); ++b) EXPECT_EQ(root.at(a, b), flat.at(a, b));
    EXPECT_EQ(root.at(a, root.outside()), 0u);
  }
}

TEST(Hierarchy, UnknownClassNamesValue) {
  auto t = labelled({{"cat", "boat"}});
  try {
    hierarchical_confusion(t, "label", "prediction", LabelHierarchy::parse(kAnimals));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownClass);
    EXPECT_NE(std::string(e.what()).find("boat"), std::string::npos);
  }
}

// Total = scored rows; row sums = label counts; column sums = prediction counts.
TEST(ConfusionProperty, MarginsMatchCounts) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto raw = prism::testing::random_table(rng, 1 + rng() % 500, 2 + rng() % 5);
    auto t = raw.ingest();
    auto m = confusion_matrix(t, "label", "prediction");
    std::map<std::string, std::uint64_t> labels, preds;
    std::uint64_t scored = 0;
    for (auto& row : raw.rows) {
      if (!row[3] || !row[4]) continue;
      ++scored;
      ++labels[*row[3]];
      ++preds[*row[4]];
    }
    ASSERT_EQ(m.total(), scored);
    for (std::size_t a = 0; a < m.size(); ++a) {
      std::uint64_t rs = 0, cs = 0;
      for (std::size_t b = 0; b < m.size(); ++b) {
        rs += m.at(a, b);
        cs += m.at(b, a);
      }
      ASSERT_EQ(rs, labels[m.classes[a]]);
      ASSERT_EQ(cs, preds[m.classes[a]]);
    }
  }
}

// Each internal node's (child_a, child_b) cell is the sum of flat cells over
// the leaves under child_a and child_b.
TEST(ConfusionProperty, HierarchyCellsSumFlatCells) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto raw = prism::testing::random_table(rng, 1 + rng() % 400, 2 + rng() % 6);
    auto t = raw.ingest();
    auto flat = confusion_matrix(t, "label", "prediction");
    if (flat.classes.empty()) continue;
    auto tree = prism::testing::random_tree(rng, flat.classes);
    auto h = hierarchical_confusion(t, "label", "prediction", LabelHierarchy::parse(prism::testing::indented(tree)));
    std::function<void(const prism::testing::Tree&)> visit = [&](const prism::testing::Tree& node) {
      if (node.children.empty()) return;
      const auto* nc = h.find(node.name);
      ASSERT_NE(nc, nullptr);
      for (std::size_t a = 0; a < node.children.size(); ++a) {
        for (std::size_t b = 0; b < node.children.size(); ++b) {
          std::set<std::string> la, lb;
          prism::testing::collect_leaves(node.children[a], la);
          prism::testing::collect_leaves(node.children[b], lb);
          std::uint64_t sum = 0;
          for (auto& x : la) {
            for (auto& y : lb) sum += flat.at(*flat.index_of(x), *flat.index_of(y));
          }
          ASSERT_EQ(nc->at(a, b), sum) << node.name;
        }
      }
      for (const auto& c : node.children) visit(c);
    };
    visit(tree);
  }
}

TEST(ConfusionProperty, MatchesFullScanOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    auto raw = prism::testing::random_table(rng, 1 + rng() % 1000, 2 + rng() % 5);
    auto t = raw.ingest();
    auto a = prism::testing::check_confusion(rng, raw, t);
    ASSERT_TRUE(a.empty()) << a;
    auto b = prism::testing::check_hierarchy(rng, raw, t);
    ASSERT_TRUE(b.empty()) << b;
  }
}
