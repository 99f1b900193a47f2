#include "hypertab/table.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "hypertab/error.hpp"
#include "hypertab/random.hpp"

namespace hypertab::table {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  });
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

struct GridRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

char detect_separator(std::string_view text) {
  const auto nl = text.find('\n');
  const auto first = text.substr(0, nl);
  return first.find('\t') != std::string_view::npos ? '\t' : ',';
}

// Delimited records with double-quote quoting ("" escapes a quote; quoted
// fields may span lines). Fully blank lines are skipped.
std::vector<GridRecord> read_records(std::string_view text, char sep,
                                     std::size_t first_line) {
  std::vector<GridRecord> records;
  std::size_t i = 0;
  std::size_t line = first_line;
  while (i < text.size()) {
    // Skip blank lines between records.
    const auto nl = text.find('\n', i);
    const auto raw = text.substr(i, nl == std::string_view::npos ? std::string_view::npos : nl - i);
    if (is_blank(raw)) {
      if (nl == std::string_view::npos) break;
      i = nl + 1;
      ++line;
      continue;
    }
    GridRecord rec;
    rec.line = line;
    std::string field;
    bool in_quotes = false;
    bool done = false;
    while (!done) {
      if (i >= text.size()) {
        if (in_quotes) fail(ErrorCode::kParse, "unterminated quoted field starting on line " + std::to_string(rec.line));
        rec.fields.push_back(std::move(field));
        done = true;
        break;
      }
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      if (c == '"' && field.empty()) {
        in_quotes = true;
        ++i;
      } else if (c == sep) {
        rec.fields.push_back(std::move(field));
        field.clear();
        ++i;
      } else if (c == '\r' && (i + 1 >= text.size() || text[i + 1] == '\n')) {
        ++i;
      } else if (c == '\n') {
        rec.fields.push_back(std::move(field));
        ++i;
        ++line;
        done = true;
      } else {
        field.push_back(c);
        ++i;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string quote_field(const std::string& s, char sep) {
  const bool needs = s.find_first_of(std::string{sep, '"', '\n', '\r'}) != std::string::npos;
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Leaf count of every cell's subtree.
std::size_t leaf_count(const std::vector<Cell>& cells, CellId id) {
  const Cell& c = cells[id.value];
  if (c.kind == CellKind::kLeaf) return 1;
  std::size_t n = 0;
  for (CellId ch : c.children) n += leaf_count(cells, ch);
  return n;
}

void collect_leaves(const std::vector<Cell>& cells, CellId id, std::vector<CellId>& out) {
  const Cell& c = cells[id.value];
  if (c.kind == CellKind::kLeaf) {
    out.push_back(id);
    return;
  }
  for (CellId ch : c.children) collect_leaves(cells, ch, out);
}

bool find_path(const std::vector<Cell>& cells, CellId at, CellId target,
               std::vector<std::string>& path) {
  const Cell& c = cells[at.value];
  path.push_back(c.text);
  if (at == target) return true;
  for (CellId ch : c.children) {
    if (find_path(cells, ch, target, path)) return true;
  }
  path.pop_back();
  return false;
}

// Reorders a header forest so that its leaves follow `order` (old leaf
// indices, listed in new position order). `first_leaf` is the old index of the
// forest's first leaf. Returns false when `order` is not produced by sibling
// reordering alone.
bool reorder_forest(std::vector<Cell>& cells, std::vector<CellId>& roots,
                    std::span<const std::size_t> order, std::size_t first_leaf) {
  std::vector<std::size_t> start(roots.size());
  std::vector<std::size_t> count(roots.size());
  std::size_t acc = first_leaf;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    start[i] = acc;
    count[i] = leaf_count(cells, roots[i]);
    acc += count[i];
  }
  std::vector<CellId> new_roots;
  std::size_t pos = 0;
  while (pos < order.size()) {
    const std::size_t old = order[pos];
    std::size_t owner = roots.size();
    for (std::size_t i = 0; i < roots.size(); ++i) {
      if (old >= start[i] && old < start[i] + count[i]) {
        owner = i;
        break;
      }
    }
    if (owner == roots.size() || pos + count[owner] > order.size()) return false;
    const auto block = order.subspan(pos, count[owner]);
    for (std::size_t v : block) {
      if (v < start[owner] || v >= start[owner] + count[owner]) return false;
    }
    Cell& cell = cells[roots[owner].value];
    if (cell.kind == CellKind::kBranch) {
      if (!reorder_forest(cells, cell.children, block, start[owner])) return false;
    }
    new_roots.push_back(roots[owner]);
    pos += count[owner];
  }
  roots = std::move(new_roots);
  return true;
}

bool is_bijection(const std::vector<std::size_t>& p, std::size_t n) {
  if (p.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t v : p) {
    if (v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

void draw_forest(const std::vector<Cell>& cells, std::vector<CellId> roots,
                 std::mt19937_64& rng, std::vector<CellId>& leaf_order) {
  shuffle(std::span<CellId>(roots), rng);
  for (CellId r : roots) {
    const Cell& c = cells[r.value];
    if (c.kind == CellKind::kLeaf) leaf_order.push_back(r);
    else draw_forest(cells, c.children, rng, leaf_order);
  }
}

std::vector<std::size_t> draw_axis(const std::vector<Cell>& cells,
                                   const std::vector<CellId>& roots,
                                   const std::vector<CellId>& leaves,
                                   std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  if (roots.empty()) {
    shuffle(std::span<std::size_t>(perm), rng);
    return perm;
  }
  std::vector<CellId> order;
  draw_forest(cells, roots, rng, order);
  for (std::size_t i = 0; i < n; ++i) {
    perm[i] = static_cast<std::size_t>(std::find(leaves.begin(), leaves.end(), order[i]) - leaves.begin());
  }
  return perm;
}

}  // namespace

// ---------------------------------------------------------------------------
// Permutation

Permutation Permutation::identity(std::size_t n_rows, std::size_t n_cols) {
  Permutation p;
  p.row_perm.resize(n_rows);
  p.col_perm.resize(n_cols);
  std::iota(p.row_perm.begin(), p.row_perm.end(), 0);
  std::iota(p.col_perm.begin(), p.col_perm.end(), 0);
  return p;
}

Permutation Permutation::inverse() const {
  Permutation inv;
  inv.row_perm.resize(row_perm.size());
  inv.col_perm.resize(col_perm.size());
  for (std::size_t i = 0; i < row_perm.size(); ++i) inv.row_perm[row_perm[i]] = i;
  for (std::size_t i = 0; i < col_perm.size(); ++i) inv.col_perm[col_perm[i]] = i;
  return inv;
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < row_perm.size(); ++i)
    if (row_perm[i] != i) return false;
  for (std::size_t i = 0; i < col_perm.size(); ++i)
    if (col_perm[i] != i) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Table

Table Table::flat(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows,
                  std::optional<std::string> title) {
  std::vector<HeaderNode> cols;
  cols.reserve(header.size());
  for (const auto& h : header) cols.push_back(HeaderNode{h, {}});
  return TableBuilder::build(cols, {}, rows, std::move(title));
}

const Cell& Table::cell(CellId id) const {
  if (id.value >= cells_.size()) fail(ErrorCode::kInvalidArgument, "cell id out of range");
  return cells_[id.value];
}

CellId Table::body(std::size_t row, std::size_t col) const {
  if (row >= n_rows_ || col >= n_cols_) fail(ErrorCode::kInvalidArgument, "body position out of range");
  return body_[row * n_cols_ + col];
}

const std::string& Table::body_text(std::size_t row, std::size_t col) const {
  return cells_[body(row, col).value].text;
}

std::vector<CellId> Table::column_leaves() const {
  std::vector<CellId> out;
  for (CellId r : col_roots_) collect_leaves(cells_, r, out);
  return out;
}

std::vector<CellId> Table::row_leaves() const {
  std::vector<CellId> out;
  for (CellId r : row_roots_) collect_leaves(cells_, r, out);
  return out;
}

std::vector<std::string> Table::column_path(std::size_t col) const {
  const auto leaves = column_leaves();
  if (col >= leaves.size()) fail(ErrorCode::kInvalidArgument, "column out of range");
  std::vector<std::string> path;
  for (CellId r : col_roots_) {
    if (find_path(cells_, r, leaves[col], path)) break;
  }
  return path;
}

std::vector<std::string> Table::row_path(std::size_t row) const {
  if (row_roots_.empty()) return {};
  const auto leaves = row_leaves();
  if (row >= leaves.size()) fail(ErrorCode::kInvalidArgument, "row out of range");
  std::vector<std::string> path;
  for (CellId r : row_roots_) {
    if (find_path(cells_, r, leaves[row], path)) break;
  }
  return path;
}

std::string Table::column_name(std::size_t col) const {
  return join(column_path(col), " > ");
}

bool Table::is_hierarchical() const {
  if (!row_roots_.empty()) return true;
  return std::any_of(col_roots_.begin(), col_roots_.end(), [&](CellId id) {
    return cells_[id.value].kind == CellKind::kBranch;
  });
}

// ---------------------------------------------------------------------------
// Builder

Table TableBuilder::build(const std::vector<HeaderNode>& column_roots,
                          const std::vector<HeaderNode>& row_roots,
                          const std::vector<std::vector<std::string>>& body,
                          std::optional<std::string> title) {
  Table t;
  t.title_ = std::move(title);

  std::function<CellId(const HeaderNode&, std::vector<std::string>&)> add_header;
  const auto check_siblings = [](const std::vector<HeaderNode>& siblings,
                                 const std::vector<std::string>& prefix) {
    std::set<std::string> seen;
    for (const auto& s : siblings) {
      if (!seen.insert(s.text).second) {
        auto path = prefix;
        path.push_back(s.text);
        fail(ErrorCode::kParse, "duplicate header path '" + join(path, " > ") + "'");
      }
    }
  };
  add_header = [&](const HeaderNode& node, std::vector<std::string>& prefix) -> CellId {
    const CellId id{static_cast<std::uint32_t>(t.cells_.size())};
    t.cells_.push_back(Cell{id, node.text, node.children.empty() ? CellKind::kLeaf : CellKind::kBranch, {}});
    prefix.push_back(node.text);
    check_siblings(node.children, prefix);
    std::vector<CellId> kids;
    for (const auto& ch : node.children) kids.push_back(add_header(ch, prefix));
    prefix.pop_back();
    t.cells_[id.value].children = std::move(kids);
    return id;
  };

  std::vector<std::string> prefix;
  check_siblings(column_roots, prefix);
  for (const auto& r : column_roots) t.col_roots_.push_back(add_header(r, prefix));
  check_siblings(row_roots, prefix);
  for (const auto& r : row_roots) t.row_roots_.push_back(add_header(r, prefix));

  const std::size_t n_cols = t.column_leaves().size();
  if (n_cols == 0) fail(ErrorCode::kParse, "table has no columns");
  if (body.empty()) fail(ErrorCode::kParse, "table has no body rows");
  if (!row_roots.empty() && t.row_leaves().size() != body.size()) {
    fail(ErrorCode::kParse, "row header has " + std::to_string(t.row_leaves().size()) +
                                " leaves but body has " + std::to_string(body.size()) + " rows");
  }
  for (std::size_t r = 0; r < body.size(); ++r) {
    if (body[r].size() != n_cols) {
      fail(ErrorCode::kParse, "ragged body row " + std::to_string(r) + ": expected " +
                                  std::to_string(n_cols) + " cells, got " + std::to_string(body[r].size()));
    }
    for (const auto& text : body[r]) {
      const CellId id{static_cast<std::uint32_t>(t.cells_.size())};
      t.cells_.push_back(Cell{id, text, CellKind::kLeaf, {}});
      t.body_.push_back(id);
    }
  }
  t.n_rows_ = body.size();
  t.n_cols_ = n_cols;
  return t;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

Table parse_delimited(std::string_view source) {
  const char sep = detect_separator(source);
  auto records = read_records(source, sep, 1);
  if (records.empty()) fail(ErrorCode::kEmptyInput, "empty table document");
  const auto& header = records.front().fields;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].fields.size() != header.size()) {
      fail(ErrorCode::kParse, "ragged row " + std::to_string(i) + " (line " + std::to_string(records[i].line) +
                                  "): expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(records[i].fields.size()));
    }
    rows.push_back(std::move(records[i].fields));
  }
  return Table::flat(header, rows);
}

std::vector<HeaderNode> parse_tree(const std::vector<std::pair<std::size_t, std::string_view>>& entries,
                                   const char* section) {
  // entries: (line number, raw line)
  std::vector<HeaderNode> roots;
  if (entries.empty()) return roots;
  std::vector<std::vector<HeaderNode>*> stack;  // stack[d] = sibling list at depth d
  stack.push_back(&roots);
  std::optional<std::size_t> base;
  std::size_t prev_depth = 0;
  for (const auto& [line_no, raw] : entries) {
    std::size_t indent = 0;
    while (indent < raw.size() && raw[indent] == ' ') ++indent;
    if (indent < raw.size() && raw[indent] == '\t') {
      fail(ErrorCode::kParse, std::string(section) + " line " + std::to_string(line_no) + ": tabs are not allowed in indentation");
    }
    if (!base) base = indent;
    if (indent < *base || (indent - *base) % 2 != 0) {
      fail(ErrorCode::kParse, std::string(section) + " line " + std::to_string(line_no) + ": indentation must be a multiple of two spaces");
    }
    const std::size_t depth = (indent - *base) / 2;
    if (depth > 0 && (depth > prev_depth + 1 || stack.size() < depth + 1)) {
      fail(ErrorCode::kParse, std::string(section) + " line " + std::to_string(line_no) + ": header indented more than one level below its parent");
    }
    stack.resize(depth + 1);
    stack[depth]->push_back(HeaderNode{std::string(trim(raw)), {}});
    stack.push_back(&stack[depth]->back().children);
    prev_depth = depth;
  }
  return roots;
}

Table parse_nested(std::string_view source) {
  if (is_blank(source)) fail(ErrorCode::kEmptyInput, "empty table document");
  const auto lines = split_lines(source);
  std::optional<std::string> title;
  enum class Section { kNone, kColumns, kRows } section = Section::kNone;
  std::vector<std::pair<std::size_t, std::string_view>> col_entries;
  std::vector<std::pair<std::size_t, std::string_view>> row_entries;
  std::size_t body_start = lines.size();
  bool seen_columns = false;
  std::size_t offset = 0;  // byte offset of the body
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    const auto t = trim(line);
    if (t == "---") {
      body_start = i + 1;
      offset = static_cast<std::size_t>(lines[i].data() - source.data()) + lines[i].size();
      if (offset < source.size() && source[offset] == '\r') ++offset;
      if (offset < source.size() && source[offset] == '\n') ++offset;
      break;
    }
    if (t.empty() || t.front() == '#') continue;
    if (section == Section::kNone || line.front() != ' ') {
      if (t.starts_with("title:")) {
        title = std::string(trim(t.substr(6)));
        section = Section::kNone;
        continue;
      }
      if (t == "columns:") {
        section = Section::kColumns;
        seen_columns = true;
        continue;
      }
      if (t == "rows:") {
        section = Section::kRows;
        continue;
      }
    }
    if (section == Section::kColumns) col_entries.emplace_back(i + 1, line);
    else if (section == Section::kRows) row_entries.emplace_back(i + 1, line);
    else fail(ErrorCode::kParse, "line " + std::to_string(i + 1) + ": expected 'title:', 'columns:', 'rows:' or '---'");
  }
  if (!seen_columns) fail(ErrorCode::kParse, "nested-header document lacks a 'columns:' section");
  if (body_start == lines.size() && offset == 0) fail(ErrorCode::kParse, "nested-header document lacks the '---' body separator");

  auto cols = parse_tree(col_entries, "columns");
  auto rows = parse_tree(row_entries, "rows");
  const auto body_text = source.substr(std::min(offset, source.size()));
  auto records = read_records(body_text, detect_separator(body_text), body_start + 1);
  std::vector<std::vector<std::string>> body;
  for (auto& r : records) body.push_back(std::move(r.fields));
  return TableBuilder::build(cols, rows, body, std::move(title));
}

std::vector<std::string> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, p - start));
    start = p + sep.size();
  }
  return out;
}

}  // namespace

Table parse_table(std::string_view source, Format format) {
  if (is_blank(source)) fail(ErrorCode::kEmptyInput, "empty table document");
  switch (format) {
    case Format::kDelimitedGrid:
      return parse_delimited(source);
    case Format::kNestedHeader:
      return parse_nested(source);
  }
  fail(ErrorCode::kInvalidArgument, "unknown table format");
}

Table parse_serialized(std::string_view source) {
  if (is_blank(source)) fail(ErrorCode::kEmptyInput, "empty serialized table");
  auto lines = split_lines(source);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::size_t i = 0;
  std::optional<std::string> title;
  if (i < lines.size() && lines[i].starts_with("title : ")) {
    title = std::string(lines[i].substr(8));
    ++i;
  }
  if (i >= lines.size() || !lines[i].starts_with("col : ")) {
    fail(ErrorCode::kParse, "serialized table must start with a 'col : ' line");
  }
  const auto header = split_on(lines[i].substr(6), " | ");
  ++i;
  std::vector<std::vector<std::string>> rows;
  for (; i < lines.size(); ++i) {
    const std::string prefix = "row " + std::to_string(rows.size()) + " : ";
    if (!lines[i].starts_with(prefix)) {
      fail(ErrorCode::kParse, "line " + std::to_string(i + 1) + ": expected '" + prefix + "'");
    }
    rows.push_back(split_on(lines[i].substr(prefix.size()), " | "));
  }
  return Table::flat(header, rows, std::move(title));
}

// ---------------------------------------------------------------------------
// Writers

std::string serialize_table(const Table& t) {
  std::string out;
  if (t.title()) out += "title : " + *t.title() + "\n";
  std::vector<std::string> heads;
  for (std::size_t c = 0; c < t.n_cols(); ++c) heads.push_back(t.column_name(c));
  out += "col : " + join(heads, " | ");
  const bool row_headers = !t.row_header_roots().empty();
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    out += "\nrow " + std::to_string(r) + " : ";
    if (row_headers) out += join(t.row_path(r), " > ") + " : ";
    std::vector<std::string> cells;
    for (std::size_t c = 0; c < t.n_cols(); ++c) cells.push_back(t.body_text(r, c));
    out += join(cells, " | ");
  }
  return out;
}

std::string write_delimited(const Table& t) {
  if (t.is_hierarchical()) {
    fail(ErrorCode::kInvalidArgument, "delimited grids cannot hold hierarchical headers; use the nested-header format");
  }
  std::ostringstream os;
  for (std::size_t c = 0; c < t.n_cols(); ++c) {
    if (c) os << ',';
    os << quote_field(t.cell(t.column_leaves()[c]).text, ',');
  }
  os << '\n';
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      if (c) os << ',';
      os << quote_field(t.body_text(r, c), ',');
    }
    os << '\n';
  }
  return os.str();
}

std::string write_nested(const Table& t) {
  std::ostringstream os;
  if (t.title()) os << "title: " << *t.title() << '\n';
  std::function<void(CellId, int)> emit = [&](CellId id, int depth) {
    const Cell& c = t.cell(id);
    os << std::string(2 * depth + 2, ' ') << c.text << '\n';
    for (CellId ch : c.children) emit(ch, depth + 1);
  };
  os << "columns:\n";
  for (CellId r : t.column_header_roots()) emit(r, 0);
  if (!t.row_header_roots().empty()) {
    os << "rows:\n";
    for (CellId r : t.row_header_roots()) emit(r, 0);
  }
  os << "---\n";
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      if (c) os << ',';
      os << quote_field(t.body_text(r, c), ',');
    }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Permutations

Table permute_table(const Table& t, const Permutation& p) {
  if (!is_bijection(p.row_perm, t.n_rows()) || !is_bijection(p.col_perm, t.n_cols())) {
    fail(ErrorCode::kInvalidArgument,
         "permutation size mismatch: table is " + std::to_string(t.n_rows()) + "x" + std::to_string(t.n_cols()) +
             ", permutation is " + std::to_string(p.row_perm.size()) + "x" + std::to_string(p.col_perm.size()) +
             " (or not a bijection)");
  }
  Table out = t;
  if (!reorder_forest(out.cells_, out.col_roots_, p.col_perm, 0)) {
    fail(ErrorCode::kInvalidArgument, "column permutation breaks the column header hierarchy");
  }
  if (!out.row_roots_.empty() && !reorder_forest(out.cells_, out.row_roots_, p.row_perm, 0)) {
    fail(ErrorCode::kInvalidArgument, "row permutation breaks the row header hierarchy");
  }
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      out.body_[r * t.n_cols() + c] = t.body_[p.row_perm[r] * t.n_cols() + p.col_perm[c]];
    }
  }
  return out;
}

bool is_allowed_permutation(const Table& t, const Permutation& p) {
  if (!is_bijection(p.row_perm, t.n_rows()) || !is_bijection(p.col_perm, t.n_cols())) return false;
  auto cells = t.cells();
  auto cols = t.column_header_roots();
  auto rows = t.row_header_roots();
  if (!reorder_forest(cells, cols, p.col_perm, 0)) return false;
  return rows.empty() || reorder_forest(cells, rows, p.row_perm, 0);
}

Permutation random_permutation(const Table& t, std::mt19937_64& rng) {
  Permutation p;
  p.row_perm = draw_axis(t.cells(), t.row_header_roots(), t.row_leaves(), t.n_rows(), rng);
  p.col_perm = draw_axis(t.cells(), t.column_header_roots(), t.column_leaves(), t.n_cols(), rng);
  return p;
}

}  // namespace hypertab::table
