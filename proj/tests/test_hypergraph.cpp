#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hypertab/hypergraph.hpp"
#include "test_util.hpp"

namespace hypertab::graph {
namespace {

using table::Format;
using table::Table;

Table demo() { return table::parse_table("name,country\nBob,Canada\nAnn,US\n", Format::kDelimitedGrid); }

std::vector<const Hyperedge*> edges_of(const Hypergraph& g, EdgeKind kind) {
  std::vector<const Hyperedge*> out;
  for (const auto& e : g.edges) {
    if (e.kind == kind) out.push_back(&e);
  }
  return out;
}

TEST(BuildHypergraph, FlatTwoByTwo) {
  const Hypergraph g = build_hypergraph(demo());
  EXPECT_EQ(g.nodes.size(), 4u);
  ASSERT_EQ(g.edges.size(), 4u);
  const auto cols = edges_of(g, EdgeKind::kColumn);
  const auto rows = edges_of(g, EdgeKind::kRow);
  ASSERT_EQ(cols.size(), 2u);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(cols[0]->label, "name");
  EXPECT_EQ(cols[1]->label, "country");
  for (const auto* e : rows) EXPECT_EQ(e->label, "");
  for (const auto& e : g.edges) EXPECT_EQ(e.members.size(), 2u);
}

TEST(BuildHypergraph, SingleCell) {
  const Hypergraph g = build_hypergraph(Table::flat({"x"}, {{"7"}}));
  ASSERT_EQ(g.nodes.size(), 1u);
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(edges_of(g, EdgeKind::kColumn).size(), 1u);
  EXPECT_EQ(edges_of(g, EdgeKind::kRow).size(), 1u);
  for (const auto& e : g.edges) EXPECT_EQ(e.members, std::vector<std::uint32_t>{0});
}

TEST(BuildHypergraph, DepthTwoHeader) {
  const Table t = table::parse_table("columns:\n  2020\n    Q1\n    Q2\n---\n1,2\n3,4\n5,6\n", Format::kNestedHeader);
  const Hypergraph g = build_hypergraph(t);
  const auto cols = edges_of(g, EdgeKind::kColumn);
  const auto branches = edges_of(g, EdgeKind::kHeaderBranch);
  ASSERT_EQ(cols.size(), 2u);
  EXPECT_EQ(cols[0]->label, "Q1");
  EXPECT_EQ(cols[1]->label, "Q2");
  EXPECT_EQ(cols[0]->members.size(), 3u);
  EXPECT_EQ(cols[1]->members.size(), 3u);
  ASSERT_EQ(branches.size(), 1u);
  EXPECT_EQ(branches[0]->label, "2020");
  EXPECT_EQ(branches[0]->members.size(), 6u);
  EXPECT_EQ(edges_of(g, EdgeKind::kRow).size(), 3u);
}

TEST(BuildHypergraph, RowHeaderTreeFollowsTheColumnRule) {
  const Table t = table::parse_table(
      "columns:\n  a\n  b\nrows:\n  north\n    oslo\n    bergen\n  south\n---\n1,2\n3,4\n5,6\n",
      Format::kNestedHeader);
  const Hypergraph g = build_hypergraph(t);
  const auto rows = edges_of(g, EdgeKind::kRow);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0]->label, "oslo");
  EXPECT_EQ(rows[2]->label, "south");
  const auto branches = edges_of(g, EdgeKind::kHeaderBranch);
  ASSERT_EQ(branches.size(), 1u);
  EXPECT_EQ(branches[0]->label, "north");
  EXPECT_EQ(branches[0]->members.size(), 4u);
}

TEST(BuildHypergraph, DumpGolden) {
  EXPECT_EQ(dump(build_hypergraph(demo())),
            "nodes 4\n"
            "v0 cell=2 \"Bob\"\n"
            "v1 cell=3 \"Canada\"\n"
            "v2 cell=4 \"Ann\"\n"
            "v3 cell=5 \"US\"\n"
            "edges 4\n"
            "e0 column \"name\" {\"Ann\", \"Bob\"}\n"
            "e1 column \"country\" {\"Canada\", \"US\"}\n"
            "e2 row \"\" {\"Bob\", \"Canada\"}\n"
            "e3 row \"\" {\"Ann\", \"US\"}\n");
}

// Same hypergraph with node ids relabelled and both lists shuffled.
Hypergraph relabel(const Hypergraph& g, std::mt19937_64& rng) {
  std::vector<std::uint32_t> to(g.nodes.size());
  for (std::uint32_t i = 0; i < to.size(); ++i) to[i] = i;
  std::shuffle(to.begin(), to.end(), rng);
  Hypergraph h;
  h.nodes.resize(g.nodes.size());
  for (const auto& n : g.nodes) {
    h.nodes[to[n.node_id]] = n;
    h.nodes[to[n.node_id]].node_id = to[n.node_id];
  }
  h.edges = g.edges;
  std::shuffle(h.edges.begin(), h.edges.end(), rng);
  for (std::uint32_t i = 0; i < h.edges.size(); ++i) {
    h.edges[i].edge_id = i;
    for (auto& m : h.edges[i].members) m = to[m];
    std::sort(h.edges[i].members.begin(), h.edges[i].members.end());
  }
  return h;
}

TEST(CanonicalForm, IndependentOfLabels) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 30; ++i) {
    const Hypergraph g = build_hypergraph(i % 2 ? testing::random_flat(rng, 5, 5, false)
                                                : testing::random_hierarchical(rng, true));
    EXPECT_EQ(canonical_form(relabel(g, rng)), canonical_form(g));
  }
}

TEST(CanonicalForm, AllPermutationsOfThreeByThree) {
  const Table t = Table::flat({"a", "b", "c"}, {{"1", "2", "3"}, {"4", "5", "6"}, {"7", "8", "9"}});
  const auto ref = canonical_form(build_hypergraph(t));
  std::vector<std::size_t> rp{0, 1, 2};
  int count = 0;
  do {
    std::vector<std::size_t> cp{0, 1, 2};
    do {
      EXPECT_EQ(canonical_form(build_hypergraph(table::permute_table(t, {rp, cp}))), ref);
      ++count;
    } while (std::next_permutation(cp.begin(), cp.end()));
  } while (std::next_permutation(rp.begin(), rp.end()));
  EXPECT_EQ(count, 36);
}

TEST(CanonicalForm, OneCellDifference) {
  const Table a = Table::flat({"a", "b"}, {{"1", "2"}, {"3", "4"}});
  const Table b = Table::flat({"a", "b"}, {{"1", "2"}, {"3", "5"}});
  EXPECT_NE(canonical_form(build_hypergraph(a)), canonical_form(build_hypergraph(b)));
}

TEST(CanonicalForm, DistinguishesStructureWithEqualTexts) {
  // Same multiset of texts, but the pairing of values into rows differs.
  const Table a = Table::flat({"a", "b"}, {{"1", "2"}, {"3", "4"}});
  const Table b = Table::flat({"a", "b"}, {{"1", "4"}, {"3", "2"}});
  EXPECT_NE(canonical_form(build_hypergraph(a)), canonical_form(build_hypergraph(b)));
}

TEST(Incidence, TwoByTwo) {
  const auto inc = incidence(build_hypergraph(demo()));
  for (const auto& e : inc.node_edges) EXPECT_EQ(e.size(), 2u);
}

TEST(Incidence, Singleton) {
  const auto inc = incidence(build_hypergraph(Table::flat({"x"}, {{"7"}})));
  ASSERT_EQ(inc.node_edges.size(), 1u);
  EXPECT_EQ(inc.node_edges[0].size(), 2u);
  for (const auto& m : inc.edge_nodes) EXPECT_EQ(m.size(), 1u);
}

TEST(IncidenceProperty, BothDirectionsAgree) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Hypergraph g =
        build_hypergraph(i % 4 ? testing::random_flat(rng, 6, 6, false) : testing::random_hierarchical(rng, i % 8 == 0));
    const auto inc = incidence(g);
    std::set<std::pair<std::uint32_t, std::uint32_t>> from_nodes, from_edges;
    for (std::uint32_t v = 0; v < inc.node_edges.size(); ++v) {
      for (auto e : inc.node_edges[v]) from_nodes.insert({v, e});
    }
    for (std::uint32_t e = 0; e < inc.edge_nodes.size(); ++e) {
      for (auto v : inc.edge_nodes[e]) from_edges.insert({v, e});
    }
    EXPECT_EQ(from_nodes, from_edges);
    // And both agree with the member lists of the hypergraph itself.
    std::set<std::pair<std::uint32_t, std::uint32_t>> members;
    for (const auto& e : g.edges) {
      for (auto v : e.members) members.insert({v, e.edge_id});
    }
    EXPECT_EQ(members, from_edges);
  }
}

TEST(HypergraphProperty, FlatCounts) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Table t = testing::random_flat(rng, 6, 6, false);
    const Hypergraph g = build_hypergraph(t);
    EXPECT_EQ(g.nodes.size(), t.n_rows() * t.n_cols());
    EXPECT_EQ(edges_of(g, EdgeKind::kRow).size(), t.n_rows());
    EXPECT_EQ(edges_of(g, EdgeKind::kColumn).size(), t.n_cols());
    EXPECT_TRUE(edges_of(g, EdgeKind::kHeaderBranch).empty());
    const auto inc = incidence(g);
    for (std::uint32_t v = 0; v < g.nodes.size(); ++v) {
      int rows = 0, cols = 0;
      for (auto e : inc.node_edges[v]) {
        rows += g.edges[e].kind == EdgeKind::kRow;
        cols += g.edges[e].kind == EdgeKind::kColumn;
      }
      EXPECT_GE(rows, 1);
      EXPECT_GE(cols, 1);
    }
  }
}

TEST(HypergraphProperty, BranchMembersAreUnionOfChildren) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const Table t = testing::random_hierarchical(rng, i % 2);
    const Hypergraph g = build_hypergraph(t);
    std::map<std::uint32_t, const Hyperedge*> by_cell;
    for (const auto& e : g.edges) {
      EXPECT_FALSE(e.members.empty());
      for (auto v : e.members) EXPECT_LT(v, g.nodes.size());
      if (e.source) by_cell[e.source->value] = &e;
    }
    for (const auto& e : g.edges) {
      if (e.kind != EdgeKind::kHeaderBranch) continue;
      std::set<std::uint32_t> uni;
      for (auto child : t.cell(*e.source).children) {
        const auto* c = by_cell.at(child.value);
        uni.insert(c->members.begin(), c->members.end());
      }
      EXPECT_EQ(std::vector<std::uint32_t>(uni.begin(), uni.end()), e.members);
    }
  }
}

TEST(HypergraphProperty, PermutationIsomorphismIncludingHierarchies) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Table t = i % 2 ? testing::random_flat(rng, 6, 6, false) : testing::random_hierarchical(rng, i % 4 == 0);
    const Table p = table::permute_table(t, table::random_permutation(t, rng));
    EXPECT_EQ(canonical_form(build_hypergraph(p)), canonical_form(build_hypergraph(t)));
  }
}

}  // namespace
}  // namespace hypertab::graph
