#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hypertab/table.hpp"

namespace hypertab::graph {

enum class EdgeKind { kColumn, kRow, kHeaderBranch };

const char* edge_kind_name(EdgeKind kind);

struct Node {
  std::uint32_t node_id = 0;
  table::CellId cell_id;
  std::string text;
};

struct Hyperedge {
  std::uint32_t edge_id = 0;
  EdgeKind kind = EdgeKind::kColumn;
  std::string label;                   // empty for unlabeled row edges
  std::vector<std::uint32_t> members;  // node ids, sorted ascending, non-empty
  // Header cell behind the edge; absent for unlabeled row edges.
  std::optional<table::CellId> source;
};

// Nodes are the body leaf cells in row-major order. Edges are listed as
// column edges (column order), row edges (row order), then header-branch
// edges (column tree pre-order, then row tree pre-order).
struct Hypergraph {
  std::vector<Node> nodes;
  std::vector<Hyperedge> edges;
};

struct CanonicalForm {
  std::string digest;
  bool operator==(const CanonicalForm&) const = default;
};

struct Incidence {
  std::vector<std::vector<std::uint32_t>> node_edges;  // sorted edge ids
  std::vector<std::vector<std::uint32_t>> edge_nodes;  // sorted node ids
};

Hypergraph build_hypergraph(const table::Table& t);

// Digest over the multiset of edge signatures (kind, label, member texts) and
// the multiset of per-node incident-signature lists. Independent of node and
// edge ids and of list order.
CanonicalForm canonical_form(const Hypergraph& g);

Incidence incidence(const Hypergraph& g);

// Line-oriented debug dump: nodes, then edges with sorted member texts.
std::string dump(const Hypergraph& g);

}  // namespace hypertab::graph
