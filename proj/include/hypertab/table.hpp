#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace hypertab::table {

struct CellId {
  std::uint32_t value = 0;
  auto operator<=>(const CellId&) const = default;
};

enum class CellKind { kLeaf, kBranch };

struct Cell {
  CellId id;
  std::string text;
  CellKind kind = CellKind::kLeaf;
  std::vector<CellId> children;  // empty iff kind == kLeaf

  bool operator==(const Cell&) const = default;
};

enum class Format { kDelimitedGrid, kNestedHeader };

// Row/column reordering in gather form: row `i` of the permuted table is row
// `row_perm[i]` of the source table (same for columns).
struct Permutation {
  std::vector<std::size_t> row_perm;
  std::vector<std::size_t> col_perm;

  static Permutation identity(std::size_t n_rows, std::size_t n_cols);
  Permutation inverse() const;
  bool is_identity() const;
  bool operator==(const Permutation&) const = default;
};

// A table is a header forest over columns (and optionally rows) plus a body
// grid of leaf cells. Column `c` of the body sits under the `c`-th column
// header leaf in depth-first order; the same holds for rows when a row header
// forest is present. Immutable once built.
class Table {
 public:
  Table() = default;

  // Flat table: one header leaf per column, no row headers.
  static Table flat(const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows,
                    std::optional<std::string> title = std::nullopt);

  const std::vector<Cell>& cells() const { return cells_; }
  const Cell& cell(CellId id) const;
  const std::vector<CellId>& column_header_roots() const { return col_roots_; }
  const std::vector<CellId>& row_header_roots() const { return row_roots_; }
  const std::optional<std::string>& title() const { return title_; }

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  CellId body(std::size_t row, std::size_t col) const;
  const std::string& body_text(std::size_t row, std::size_t col) const;

  // Header leaves in body order.
  std::vector<CellId> column_leaves() const;
  std::vector<CellId> row_leaves() const;

  // Texts from the root down to the header leaf of column/row `i`.
  std::vector<std::string> column_path(std::size_t col) const;
  std::vector<std::string> row_path(std::size_t row) const;
  // Column path joined by " > "; the name questions refer to.
  std::string column_name(std::size_t col) const;

  // True when any header tree has depth > 1 or row headers exist.
  bool is_hierarchical() const;

  bool operator==(const Table&) const = default;

 private:
  friend class TableBuilder;
  friend Table permute_table(const Table&, const Permutation&);

  std::vector<Cell> cells_;
  std::vector<CellId> col_roots_;
  std::vector<CellId> row_roots_;
  std::vector<CellId> body_;  // row-major, n_rows_ x n_cols_
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::optional<std::string> title_;
};

// Header tree node used to assemble hierarchical tables.
struct HeaderNode {
  std::string text;
  std::vector<HeaderNode> children;
};

class TableBuilder {
 public:
  // Validates shape and duplicate sibling paths, throws Error(kParse) on
  // violations.
  static Table build(const std::vector<HeaderNode>& column_roots,
                     const std::vector<HeaderNode>& row_roots,
                     const std::vector<std::vector<std::string>>& body,
                     std::optional<std::string> title);
};

Table parse_table(std::string_view source, Format format);

// Reader for the output of serialize_table on tables without row headers.
Table parse_serialized(std::string_view source);

std::string serialize_table(const Table& t);

// Delimited-grid writer (comma separated, quoted where needed). Only tables
// without row headers and with single-level column headers can be written.
std::string write_delimited(const Table& t);
// Nested-header document writer; accepts any table.
std::string write_nested(const Table& t);

// Throws Error(kInvalidArgument) if sizes mismatch or, for hierarchical
// headers, if the permutation does not come from reordering siblings.
Table permute_table(const Table& t, const Permutation& p);

// Uniform draw over the permutations allowed for `t`: any row/column order
// for flat axes, sibling reorders at every level for header trees.
Permutation random_permutation(const Table& t, std::mt19937_64& rng);

bool is_allowed_permutation(const Table& t, const Permutation& p);

}  // namespace hypertab::table
