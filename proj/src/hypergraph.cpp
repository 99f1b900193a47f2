#include "hypertab/hypergraph.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

#include "hypertab/random.hpp"

namespace hypertab::graph {

using table::Cell;
using table::CellId;
using table::CellKind;
using table::Table;

const char* edge_kind_name(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::kColumn: return "column";
    case EdgeKind::kRow: return "row";
    case EdgeKind::kHeaderBranch: return "header-branch";
  }
  return "?";
}

Hypergraph build_hypergraph(const Table& t) {
  Hypergraph g;
  const std::size_t n_rows = t.n_rows();
  const std::size_t n_cols = t.n_cols();
  g.nodes.reserve(n_rows * n_cols);
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      const CellId id = t.body(r, c);
      g.nodes.push_back(Node{static_cast<std::uint32_t>(g.nodes.size()), id, t.cell(id).text});
    }
  }
  const auto node_at = [&](std::size_t r, std::size_t c) {
    return static_cast<std::uint32_t>(r * n_cols + c);
  };
  const auto add_edge = [&](EdgeKind kind, std::string label, std::vector<std::uint32_t> members,
                            std::optional<CellId> source) {
    std::sort(members.begin(), members.end());
    g.edges.push_back(Hyperedge{static_cast<std::uint32_t>(g.edges.size()), kind, std::move(label),
                                std::move(members), source});
  };

  const auto col_leaves = t.column_leaves();
  for (std::size_t c = 0; c < n_cols; ++c) {
    std::vector<std::uint32_t> members;
    for (std::size_t r = 0; r < n_rows; ++r) members.push_back(node_at(r, c));
    add_edge(EdgeKind::kColumn, t.cell(col_leaves[c]).text, std::move(members), col_leaves[c]);
  }
  const auto row_leaves = t.row_leaves();
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::vector<std::uint32_t> members;
    for (std::size_t c = 0; c < n_cols; ++c) members.push_back(node_at(r, c));
    if (row_leaves.empty()) add_edge(EdgeKind::kRow, "", std::move(members), std::nullopt);
    else add_edge(EdgeKind::kRow, t.cell(row_leaves[r]).text, std::move(members), row_leaves[r]);
  }

  // Branch header cells cover a contiguous slice of leaves on their axis.
  const auto add_branches = [&](const std::vector<CellId>& roots, bool column_axis) {
    std::size_t next_leaf = 0;
    std::function<std::pair<std::size_t, std::size_t>(CellId)> visit =
        [&](CellId id) -> std::pair<std::size_t, std::size_t> {
      const Cell& cell = t.cell(id);
      if (cell.kind == CellKind::kLeaf) {
        const std::size_t at = next_leaf++;
        return {at, at + 1};
      }
      // Reserve this edge's slot so branch edges come out in pre-order.
      const std::size_t slot = g.edges.size();
      g.edges.push_back(Hyperedge{});
      std::size_t lo = SIZE_MAX, hi = 0;
      for (CellId ch : cell.children) {
        const auto [a, b] = visit(ch);
        lo = std::min(lo, a);
        hi = std::max(hi, b);
      }
      std::vector<std::uint32_t> members;
      for (std::size_t i = lo; i < hi; ++i) {
        if (column_axis) {
          for (std::size_t r = 0; r < n_rows; ++r) members.push_back(node_at(r, i));
        } else {
          for (std::size_t c = 0; c < n_cols; ++c) members.push_back(node_at(i, c));
        }
      }
      std::sort(members.begin(), members.end());
      g.edges[slot] = Hyperedge{static_cast<std::uint32_t>(slot), EdgeKind::kHeaderBranch, cell.text,
                                std::move(members), id};
      return {lo, hi};
    };
    for (CellId r : roots) visit(r);
  };
  add_branches(t.column_header_roots(), true);
  add_branches(t.row_header_roots(), false);
  return g;
}

namespace {

// Length-prefixed pieces keep the signature unambiguous for arbitrary text.
void put(std::string& out, const std::string& s) {
  out += std::to_string(s.size());
  out += ':';
  out += s;
}

std::string edge_signature(const Hypergraph& g, const Hyperedge& e) {
  std::vector<std::string> texts;
  texts.reserve(e.members.size());
  for (auto m : e.members) texts.push_back(g.nodes[m].text);
  std::sort(texts.begin(), texts.end());
  std::string sig;
  put(sig, edge_kind_name(e.kind));
  put(sig, e.label);
  sig += '[';
  for (const auto& s : texts) put(sig, s);
  sig += ']';
  return sig;
}

}  // namespace

CanonicalForm canonical_form(const Hypergraph& g) {
  std::vector<std::string> edge_sigs;
  edge_sigs.reserve(g.edges.size());
  for (const auto& e : g.edges) edge_sigs.push_back(edge_signature(g, e));

  std::vector<std::vector<std::string>> incident(g.nodes.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    for (auto m : g.edges[i].members) incident[m].push_back(edge_sigs[i]);
  }
  std::vector<std::string> node_sigs;
  node_sigs.reserve(g.nodes.size());
  for (std::size_t v = 0; v < g.nodes.size(); ++v) {
    auto& inc = incident[v];
    std::sort(inc.begin(), inc.end());
    std::string sig;
    put(sig, g.nodes[v].text);
    sig += '{';
    for (const auto& s : inc) put(sig, s);
    sig += '}';
    node_sigs.push_back(std::move(sig));
  }
  std::sort(edge_sigs.begin(), edge_sigs.end());
  std::sort(node_sigs.begin(), node_sigs.end());

  std::uint64_t h1 = 14695981039346656037ULL;
  std::uint64_t h2 = 0x84222325cbf29ce4ULL;
  const auto mix = [&](const std::string& s) {
    h1 = fnv1a(s.data(), s.size(), h1);
    h1 = fnv1a("\x1e", 1, h1);
    h2 = fnv1a(s.data(), s.size(), h2 ^ 0x9e3779b97f4a7c15ULL);
  };
  mix("E");
  for (const auto& s : edge_sigs) mix(s);
  mix("V");
  for (const auto& s : node_sigs) mix(s);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(h1),
                static_cast<unsigned long long>(h2));
  return CanonicalForm{buf};
}

Incidence incidence(const Hypergraph& g) {
  Incidence inc;
  inc.node_edges.resize(g.nodes.size());
  inc.edge_nodes.resize(g.edges.size());
  for (const auto& e : g.edges) {
    inc.edge_nodes[e.edge_id] = e.members;
    for (auto m : e.members) inc.node_edges[m].push_back(e.edge_id);
  }
  for (auto& v : inc.node_edges) std::sort(v.begin(), v.end());
  return inc;
}

std::string dump(const Hypergraph& g) {
  std::ostringstream os;
  os << "nodes " << g.nodes.size() << '\n';
  for (const auto& n : g.nodes) os << "v" << n.node_id << " cell=" << n.cell_id.value << " \"" << n.text << "\"\n";
  os << "edges " << g.edges.size() << '\n';
  for (const auto& e : g.edges) {
    std::vector<std::string> texts;
    for (auto m : e.members) texts.push_back(g.nodes[m].text);
    std::sort(texts.begin(), texts.end());
    os << "e" << e.edge_id << ' ' << edge_kind_name(e.kind) << " \"" << e.label << "\" {";
    for (std::size_t i = 0; i < texts.size(); ++i) os << (i ? ", " : "") << '"' << texts[i] << '"';
    os << "}\n";
  }
  return os.str();
}

}  // namespace hypertab::graph
