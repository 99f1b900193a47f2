#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "hypertab/table.hpp"
#include "test_util.hpp"

namespace hypertab::table {
namespace {

using testing::error_code_of;

const char* kDemo = "name,country\nBob,Canada\nAnn,US\n";

const char* kQuarters =
    "columns:\n"
    "  2020\n"
    "    Q1\n"
    "    Q2\n"
    "---\n"
    "1,2\n"
    "3,4\n"
    "5,6\n";

TEST(ParseTable, FlatGrid) {
  const Table t = parse_table(kDemo, Format::kDelimitedGrid);
  EXPECT_EQ(t.n_rows(), 2u);
  EXPECT_EQ(t.n_cols(), 2u);
  EXPECT_TRUE(t.row_header_roots().empty());
  ASSERT_EQ(t.column_header_roots().size(), 2u);
  EXPECT_EQ(t.column_leaves().size(), 2u);
  std::size_t leaves = 0;
  for (const auto& c : t.cells()) {
    if (c.kind == CellKind::kLeaf) ++leaves;
    EXPECT_EQ(c.kind == CellKind::kLeaf, c.children.empty());
  }
  EXPECT_EQ(leaves, 2u + 4u);  // header leaves plus body leaves
  EXPECT_EQ(t.body_text(1, 1), "US");
  EXPECT_FALSE(t.is_hierarchical());
}

TEST(ParseTable, CellIdsAreUnique) {
  const Table t = parse_table(kQuarters, Format::kNestedHeader);
  std::set<std::uint32_t> ids;
  for (const auto& c : t.cells()) EXPECT_TRUE(ids.insert(c.id.value).second);
}

TEST(ParseTable, NestedHeaderTree) {
  const Table t = parse_table(kQuarters, Format::kNestedHeader);
  ASSERT_EQ(t.column_header_roots().size(), 1u);
  const Cell& top = t.cell(t.column_header_roots()[0]);
  EXPECT_EQ(top.text, "2020");
  EXPECT_EQ(top.kind, CellKind::kBranch);
  ASSERT_EQ(top.children.size(), 2u);
  EXPECT_EQ(t.cell(top.children[0]).text, "Q1");
  EXPECT_EQ(t.cell(top.children[1]).text, "Q2");
  // The children are the header leaves of columns 0 and 1.
  EXPECT_EQ(t.column_leaves(), top.children);
  EXPECT_EQ(t.column_name(1), "2020 > Q2");
  EXPECT_EQ(t.n_rows(), 3u);
  EXPECT_TRUE(t.is_hierarchical());
}

TEST(ParseTable, RowHeaderTreeAndTitle) {
  const Table t = parse_table(
      "title: sales\n"
      "columns:\n"
      "  Q1\n"
      "  Q2\n"
      "rows:\n"
      "  north\n"
      "    oslo\n"
      "    bergen\n"
      "---\n"
      "1,2\n"
      "3,4\n",
      Format::kNestedHeader);
  ASSERT_TRUE(t.title().has_value());
  EXPECT_EQ(*t.title(), "sales");
  EXPECT_EQ(t.row_path(1), (std::vector<std::string>{"north", "bergen"}));
}

TEST(ParseTable, RaggedGridNamesTheRow) {
  try {
    parse_table("a,b,c\n1,2,3\n4,5\n", Format::kDelimitedGrid);
    FAIL() << "expected a parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(ParseTable, DuplicateHeaderPath) {
  EXPECT_EQ(error_code_of([] { parse_table("a,a\n1,2\n", Format::kDelimitedGrid); }), ErrorCode::kParse);
  EXPECT_EQ(error_code_of([] {
              parse_table("columns:\n  g\n    x\n    x\n---\n1,2\n", Format::kNestedHeader);
            }),
            ErrorCode::kParse);
}

TEST(ParseTable, EmptyDocument) {
  EXPECT_EQ(error_code_of([] { parse_table("", Format::kDelimitedGrid); }), ErrorCode::kEmptyInput);
  EXPECT_EQ(error_code_of([] { parse_table("  \n\n", Format::kNestedHeader); }), ErrorCode::kEmptyInput);
}

TEST(ParseTable, NestedFormatErrors) {
  EXPECT_EQ(error_code_of([] { parse_table("columns:\n  a\n1\n", Format::kNestedHeader); }), ErrorCode::kParse);
  EXPECT_EQ(error_code_of([] { parse_table("---\n1\n", Format::kNestedHeader); }), ErrorCode::kParse);
  EXPECT_EQ(error_code_of([] { parse_table("columns:\n  a\n       b\n---\n1\n", Format::kNestedHeader); }),
            ErrorCode::kParse);
  // Two leaves, three body columns.
  EXPECT_EQ(error_code_of([] { parse_table("columns:\n  a\n  b\n---\n1,2,3\n", Format::kNestedHeader); }),
            ErrorCode::kParse);
}

TEST(ParseTable, QuotingAndTabs) {
  const Table t = parse_table("k,v\n\"a, b\",\"say \"\"hi\"\"\"\n", Format::kDelimitedGrid);
  EXPECT_EQ(t.body_text(0, 0), "a, b");
  EXPECT_EQ(t.body_text(0, 1), "say \"hi\"");
  const Table tabs = parse_table("k\tv\n1\t2\n", Format::kDelimitedGrid);
  EXPECT_EQ(tabs.n_cols(), 2u);
  EXPECT_EQ(tabs.body_text(0, 1), "2");
}

TEST(ParseTable, EmptyCellsStayLeaves) {
  const Table t = parse_table("a,b\n1,\n,2\n", Format::kDelimitedGrid);
  EXPECT_EQ(t.n_rows(), 2u);
  EXPECT_EQ(t.body_text(0, 1), "");
  EXPECT_EQ(t.cell(t.body(1, 0)).kind, CellKind::kLeaf);
}

TEST(SerializeTable, Demo) {
  EXPECT_EQ(serialize_table(parse_table(kDemo, Format::kDelimitedGrid)),
            "col : name | country\nrow 0 : Bob | Canada\nrow 1 : Ann | US");
}

TEST(SerializeTable, SingleCell) {
  EXPECT_EQ(serialize_table(Table::flat({"x"}, {{"7"}})), "col : x\nrow 0 : 7");
}

TEST(SerializeTable, NonIdentityPermutationsChangeText) {
  const Table t = Table::flat({"a", "b"}, {{"1", "2"}, {"3", "4"}});
  const std::string base = serialize_table(t);
  for (const auto& rp : std::vector<std::vector<std::size_t>>{{0, 1}, {1, 0}}) {
    for (const auto& cp : std::vector<std::vector<std::size_t>>{{0, 1}, {1, 0}}) {
      const Permutation p{rp, cp};
      const std::string s = serialize_table(permute_table(t, p));
      if (p.is_identity()) EXPECT_EQ(s, base);
      else EXPECT_NE(s, base);
    }
  }
}

TEST(PermuteTable, Identity) {
  const Table t = parse_table(kDemo, Format::kDelimitedGrid);
  EXPECT_EQ(permute_table(t, Permutation::identity(2, 2)), t);
}

TEST(PermuteTable, SwapRows) {
  const Table t = parse_table(kDemo, Format::kDelimitedGrid);
  const Table s = permute_table(t, Permutation{{1, 0}, {0, 1}});
  EXPECT_EQ(s.body_text(0, 0), "Ann");
  EXPECT_EQ(s.body_text(0, 1), "US");
  EXPECT_EQ(s.body_text(1, 0), "Bob");
  EXPECT_EQ(s.body_text(1, 1), "Canada");
  EXPECT_EQ(s.column_name(0), "name");
  // Cell ids move with their cells.
  EXPECT_EQ(s.body(0, 0), t.body(1, 0));
}

TEST(PermuteTable, InverseRestores) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Table t = i % 2 ? testing::random_flat(rng, 6, 6) : testing::random_hierarchical(rng, true);
    const Permutation p = random_permutation(t, rng);
    EXPECT_EQ(permute_table(permute_table(t, p), p.inverse()), t);
  }
}

TEST(PermuteTable, SizeMismatch) {
  const Table t = parse_table(kDemo, Format::kDelimitedGrid);
  EXPECT_EQ(error_code_of([&] { permute_table(t, Permutation{{0, 1, 2}, {0, 1}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([&] { permute_table(t, Permutation{{0, 0}, {0, 1}}); }), ErrorCode::kInvalidArgument);
}

TEST(PermuteTable, HierarchyOnlyAllowsSiblingMoves) {
  // Columns: g0 > {a0, a1}, g1 > {b0}. Moving b0 between a0 and a1 splits g0.
  std::vector<HeaderNode> cols{{"g0", {{"a0", {}}, {"a1", {}}}}, {"g1", {{"b0", {}}}}};
  const Table t = TableBuilder::build(cols, {}, {{"1", "2", "3"}}, std::nullopt);
  EXPECT_TRUE(is_allowed_permutation(t, Permutation{{0}, {2, 0, 1}}));
  EXPECT_TRUE(is_allowed_permutation(t, Permutation{{0}, {1, 0, 2}}));
  EXPECT_FALSE(is_allowed_permutation(t, Permutation{{0}, {0, 2, 1}}));
  EXPECT_EQ(error_code_of([&] { permute_table(t, Permutation{{0}, {0, 2, 1}}); }), ErrorCode::kInvalidArgument);
}

TEST(PermuteTable, RandomDrawCoversAllFlatPermutations) {
  const Table t = Table::flat({"a", "b"}, {{"1", "2"}, {"3", "4"}});
  std::mt19937_64 rng(11);
  std::map<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>, int> seen;
  for (int i = 0; i < 4000; ++i) {
    const auto p = random_permutation(t, rng);
    ++seen[{p.row_perm, p.col_perm}];
  }
  ASSERT_EQ(seen.size(), 4u);
  // Each of the four outcomes has probability 1/4; 4 sigma is about 110.
  for (const auto& [k, n] : seen) EXPECT_NEAR(n, 1000, 110);
}

// Multiset of texts under each column header leaf (keyed by leaf cell id) and
// the set of row multisets.
std::map<std::uint32_t, std::multiset<std::string>> column_texts(const Table& t) {
  std::map<std::uint32_t, std::multiset<std::string>> out;
  const auto leaves = t.column_leaves();
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    for (std::size_t r = 0; r < t.n_rows(); ++r) out[leaves[c].value].insert(t.body_text(r, c));
  }
  return out;
}

std::multiset<std::multiset<std::string>> row_texts(const Table& t) {
  std::multiset<std::multiset<std::string>> out;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    std::multiset<std::string> row;
    for (std::size_t c = 0; c < t.n_cols(); ++c) row.insert(t.body_text(r, c));
    out.insert(row);
  }
  return out;
}

TEST(PermuteTableProperty, PreservesColumnAndRowMultisets) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Table t = i % 3 == 0 ? testing::random_hierarchical(rng, i % 2) : testing::random_flat(rng, 6, 6, false);
    const Table p = permute_table(t, random_permutation(t, rng));
    EXPECT_EQ(column_texts(p), column_texts(t));
    EXPECT_EQ(row_texts(p), row_texts(t));
  }
}

// Position of every column leaf, then check that each internal header's
// descendant leaves occupy consecutive positions.
bool contiguous(const Table& t, const std::vector<CellId>& roots, const std::vector<CellId>& leaves) {
  std::map<std::uint32_t, std::size_t> pos;
  for (std::size_t i = 0; i < leaves.size(); ++i) pos[leaves[i].value] = i;
  bool ok = true;
  std::function<std::vector<std::size_t>(CellId)> walk = [&](CellId id) {
    const Cell& c = t.cell(id);
    if (c.children.empty()) return std::vector<std::size_t>{pos.at(id.value)};
    std::vector<std::size_t> all;
    for (CellId ch : c.children) {
      const auto sub = walk(ch);
      all.insert(all.end(), sub.begin(), sub.end());
    }
    std::sort(all.begin(), all.end());
    if (all.empty() || all.back() - all.front() + 1 != all.size()) ok = false;
    return all;
  };
  for (CellId r : roots) walk(r);
  return ok;
}

TEST(PermuteTableProperty, HeaderSlicesStayContiguous) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const Table t = testing::random_hierarchical(rng, true);
    const Table p = permute_table(t, random_permutation(t, rng));
    EXPECT_TRUE(contiguous(p, p.column_header_roots(), p.column_leaves()));
    EXPECT_TRUE(contiguous(p, p.row_header_roots(), p.row_leaves()));
  }
}

TEST(RoundTrip, FlatTablesThroughEveryWriter) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const Table t = testing::random_flat(rng, 6, 6, false);
    EXPECT_EQ(parse_serialized(serialize_table(t)), t);
    EXPECT_EQ(parse_table(write_delimited(t), Format::kDelimitedGrid), t);
    EXPECT_EQ(parse_table(write_nested(t), Format::kNestedHeader), t);
  }
}

TEST(RoundTrip, HierarchicalNestedDocument) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 50; ++i) {
    const Table t = testing::random_hierarchical(rng, i % 2);
    EXPECT_EQ(parse_table(write_nested(t), Format::kNestedHeader), t);
  }
  const Table q = parse_table(kQuarters, Format::kNestedHeader);
  EXPECT_EQ(error_code_of([&] { write_delimited(q); }), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace hypertab::table
