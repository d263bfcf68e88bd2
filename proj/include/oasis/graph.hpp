#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace oasis {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    double p_base = 0.0;  // baseline exposure weight, simplex per consumer
    double alpha = 1.0;   // relationship strength, > 0
};

// Directed marketplace graph. Immutable after construction; the edge array is
// sorted by (src, dst) and two index arrays give O(degree) access to the
// outgoing (children) and incoming (parents) edges of a node.
class MarketplaceGraph {
  public:
    MarketplaceGraph() = default;

    // Takes an arbitrary edge list; sorts it, builds the indices and rejects
    // self-loops and duplicate (src, dst) pairs.
    MarketplaceGraph(NodeId n_nodes, std::vector<Edge> edges, std::vector<std::int32_t> cluster_of);

    NodeId n_nodes() const { return n_nodes_; }
    std::size_t n_edges() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(EdgeId e) const { return edges_[e]; }
    std::int32_t cluster_of(NodeId v) const { return cluster_of_[v]; }
    const std::vector<std::int32_t>& clusters() const { return cluster_of_; }

    // Outgoing edge ids of i (children side), ascending by dst.
    std::span<const EdgeId> out_edges(NodeId i) const {
        return {by_src_.data() + src_off_[i], by_src_.data() + src_off_[i + 1]};
    }
    // Incoming edge ids of j (parents side), ascending by src.
    std::span<const EdgeId> in_edges(NodeId j) const {
        return {by_dst_.data() + dst_off_[j], by_dst_.data() + dst_off_[j + 1]};
    }
    std::size_t out_degree(NodeId i) const { return src_off_[i + 1] - src_off_[i]; }
    std::size_t in_degree(NodeId j) const { return dst_off_[j + 1] - dst_off_[j]; }

    // Edge id of (src, dst), or -1 if absent.
    std::int64_t find_edge(NodeId src, NodeId dst) const;

    double mean_in_degree() const;

    // Mutable attribute access for the attribute-generation pass; the graph
    // is treated as immutable everywhere else.
    void set_edge_attrs(EdgeId e, double p_base, double alpha) {
        edges_[e].p_base = p_base;
        edges_[e].alpha = alpha;
    }

  private:
    NodeId n_nodes_ = 0;
    std::vector<Edge> edges_;               // sorted by (src, dst)
    std::vector<std::uint64_t> src_off_;    // CSR offsets into by_src_
    std::vector<EdgeId> by_src_;            // edge ids grouped by src
    std::vector<std::uint64_t> dst_off_;    // CSR offsets into by_dst_
    std::vector<EdgeId> by_dst_;            // edge ids grouped by dst
    std::vector<std::int32_t> cluster_of_;  // per-node cluster label
};

// Per-arm edge weights, aligned with the graph's edge array. Arm 0 is the
// control and must equal p_base edge-for-edge.
struct TreatmentSet {
    int n_arms = 0;
    std::vector<std::vector<double>> weights;  // [arm][edge]

    double p(int arm, EdgeId e) const { return weights[arm][e]; }
};

struct Violation {
    enum class Kind {
        SimplexSum,     // consumer's incoming weights do not sum to 1
        SelfLoop,
        DuplicateEdge,
        NonPositiveAlpha,
        ArmZeroMismatch,  // arm 0 differs from p_base
        IndexMismatch,    // parent/child indices disagree on the edge set
    };
    Kind kind;
    NodeId node = 0;   // consumer for SimplexSum, src otherwise
    NodeId other = 0;  // dst where applicable
    int arm = -1;
    double magnitude = 0.0;
    std::string describe() const;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Union of per-cluster Barabasi-Albert graphs and a global Erdos-Renyi
// overlay, directedized by replacing each undirected edge with both arcs.
// p_base and alpha are left at defaults (filled later by the attribute pass).
MarketplaceGraph generate_clustered_graph(int n_clusters, int cluster_size, double d_ba,
                                          double ba_power, double d_er, std::uint64_t seed);

ValidationReport validate(const MarketplaceGraph& graph, const TreatmentSet& treatments);

// TSV serialization. Reals are written with 17 significant digits so that a
// round trip reproduces every double bit-for-bit.
void save_graph(const MarketplaceGraph& graph, const std::filesystem::path& edge_path,
                const std::filesystem::path& node_path);
void save_treatments(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                     const std::filesystem::path& path);
MarketplaceGraph load_graph(const std::filesystem::path& edge_path,
                            const std::filesystem::path& node_path);
TreatmentSet load_treatments(const MarketplaceGraph& graph, const std::filesystem::path& path);

// Directory-level convenience: graph.tsv + nodes.tsv + treatments.tsv.
void save(const MarketplaceGraph& graph, const TreatmentSet& treatments,
          const std::filesystem::path& dir);
std::pair<MarketplaceGraph, TreatmentSet> load(const std::filesystem::path& dir);

}  // namespace oasis
