#include "oasis/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>
#include <utility>

#include "oasis/error.hpp"
#include "oasis/rng.hpp"
#include "oasis/tsv.hpp"

namespace oasis {

namespace {

// Fenwick tree over attachment weights; supports prefix sums and sampling a
// node with probability proportional to its weight.
class WeightTree {
  public:
    explicit WeightTree(int n) : n_(n), tree_(n + 1, 0.0), weight_(n, 0.0) {}

    void set(int i, double w) {
        add_(i, w - weight_[i]);
        weight_[i] = w;
    }
    double weight(int i) const { return weight_[i]; }
    double total() const { return prefix_(n_); }

    // Largest-prefix search: smallest i with prefix_sum(i+1) > x.
    int sample(double x) const {
        int pos = 0;
        int step = 1;
        while ((step << 1) <= n_) step <<= 1;
        for (; step > 0; step >>= 1) {
            if (pos + step <= n_ && tree_[pos + step] <= x) {
                pos += step;
                x -= tree_[pos];
            }
        }
        return std::min(pos, n_ - 1);
    }

  private:
    void add_(int i, double delta) {
        for (int k = i + 1; k <= n_; k += k & -k) tree_[k] += delta;
    }
    double prefix_(int i) const {
        double s = 0.0;
        for (int k = i; k > 0; k -= k & -k) s += tree_[k];
        return s;
    }
    int n_;
    std::vector<double> tree_;
    std::vector<double> weight_;
};

struct PairHash {
    std::size_t operator()(const std::pair<NodeId, NodeId>& p) const {
        return (static_cast<std::size_t>(p.first) << 32) ^ p.second;
    }
};

// Barabasi-Albert cluster with non-linear attachment: node t connects each of
// its `stubs` stubs to a distinct existing node with probability proportional
// to (degree + 1)^power. The +1 keeps degree-0 seeds reachable.
void grow_ba_cluster(NodeId base, int size, int stubs, double power, Rng rng,
                     std::vector<std::pair<NodeId, NodeId>>& undirected) {
    WeightTree tree(size);
    std::vector<int> degree(size, 0);
    for (int v = 0; v < stubs; ++v) tree.set(v, 1.0);  // seeds, degree 0

    std::vector<int> chosen;
    chosen.reserve(stubs);
    for (int t = stubs; t < size; ++t) {
        chosen.clear();
        for (int s = 0; s < stubs; ++s) {
            const double total = tree.total();
            if (total <= 0.0) break;
            int target = tree.sample(rng.uniform01() * total);
            if (tree.weight(target) == 0.0) {
                // Fell past the last weighted slot through rounding; take the
                // nearest weighted node below.
                while (target > 0 && tree.weight(target) == 0.0) --target;
                if (tree.weight(target) == 0.0) break;
            }
            chosen.push_back(target);
            tree.set(target, 0.0);  // without replacement within one node
        }
        for (int c : chosen) {
            undirected.emplace_back(base + std::min(c, t), base + std::max(c, t));
            degree[c] += 1;
            tree.set(c, std::pow(degree[c] + 1.0, power));
        }
        degree[t] = static_cast<int>(chosen.size());
        tree.set(t, std::pow(degree[t] + 1.0, power));
    }
}

// G(n, p) via geometric skips over the lexicographic pair sequence.
void overlay_erdos_renyi(NodeId n, double p, Rng rng,
                         std::vector<std::pair<NodeId, NodeId>>& undirected) {
    if (p <= 0.0) return;
    if (p >= 1.0) {
        for (NodeId i = 0; i < n; ++i)
            for (NodeId j = i + 1; j < n; ++j) undirected.emplace_back(i, j);
        return;
    }
    const double log1mp = std::log1p(-p);
    const std::uint64_t n_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    // Pair k -> (i, j): row sizes n-1, n-2, ...
    std::uint64_t k = 0;
    NodeId i = 0;
    std::uint64_t row_start = 0;   // index of pair (i, i+1)
    std::uint64_t row_len = n - 1; // pairs in row i
    for (;;) {
        const double u = rng.uniform01_open();
        k += 1 + static_cast<std::uint64_t>(std::floor(std::log(u) / log1mp));
        if (k > n_pairs) break;
        while (k - 1 >= row_start + row_len) {
            row_start += row_len;
            --row_len;
            ++i;
        }
        const NodeId j = i + 1 + static_cast<NodeId>((k - 1) - row_start);
        undirected.emplace_back(i, j);
    }
}

}  // namespace

MarketplaceGraph::MarketplaceGraph(NodeId n_nodes, std::vector<Edge> edges,
                                   std::vector<std::int32_t> cluster_of)
    : n_nodes_(n_nodes), edges_(std::move(edges)), cluster_of_(std::move(cluster_of)) {
    if (cluster_of_.size() != n_nodes_)
        throw ParameterError("cluster label count does not match node count");
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (edges_[e].src >= n_nodes_ || edges_[e].dst >= n_nodes_)
            throw ParameterError("edge endpoint out of range");
        if (edges_[e].src == edges_[e].dst)
            throw ParameterError("self-loop at node " + std::to_string(edges_[e].src));
        if (e > 0 && edges_[e].src == edges_[e - 1].src && edges_[e].dst == edges_[e - 1].dst)
            throw ParameterError("duplicate edge " + std::to_string(edges_[e].src) + "->" +
                                 std::to_string(edges_[e].dst));
    }

    src_off_.assign(n_nodes_ + 1, 0);
    dst_off_.assign(n_nodes_ + 1, 0);
    for (const Edge& e : edges_) {
        ++src_off_[e.src + 1];
        ++dst_off_[e.dst + 1];
    }
    for (NodeId v = 0; v < n_nodes_; ++v) {
        src_off_[v + 1] += src_off_[v];
        dst_off_[v + 1] += dst_off_[v];
    }
    by_src_.resize(edges_.size());
    by_dst_.resize(edges_.size());
    std::vector<std::uint64_t> cur_src(src_off_.begin(), src_off_.end() - 1);
    std::vector<std::uint64_t> cur_dst(dst_off_.begin(), dst_off_.end() - 1);
    for (EdgeId e = 0; e < edges_.size(); ++e) {
        by_src_[cur_src[edges_[e].src]++] = e;  // already (src, dst) sorted
        by_dst_[cur_dst[edges_[e].dst]++] = e;  // ascending src within dst
    }
}

std::int64_t MarketplaceGraph::find_edge(NodeId src, NodeId dst) const {
    const auto lo = edges_.begin() + static_cast<std::ptrdiff_t>(src_off_[src]);
    const auto hi = edges_.begin() + static_cast<std::ptrdiff_t>(src_off_[src + 1]);
    const auto it = std::lower_bound(lo, hi, dst,
                                     [](const Edge& e, NodeId d) { return e.dst < d; });
    if (it == hi || it->dst != dst) return -1;
    return it - edges_.begin();
}

double MarketplaceGraph::mean_in_degree() const {
    return n_nodes_ == 0 ? 0.0 : static_cast<double>(edges_.size()) / n_nodes_;
}

MarketplaceGraph generate_clustered_graph(int n_clusters, int cluster_size, double d_ba,
                                          double ba_power, double d_er, std::uint64_t seed) {
    if (n_clusters < 1) throw ParameterError("n_clusters must be >= 1");
    if (cluster_size < 2) throw ParameterError("cluster_size must be >= 2");
    if (d_ba < 1.0) throw ParameterError("d_ba must be >= 1");
    if (d_er < 0.0) throw ParameterError("d_er must be >= 0");
    const int stubs = static_cast<int>(std::ceil(d_ba / 2.0));
    if (stubs >= cluster_size)
        throw ParameterError("cluster_size must exceed ceil(d_ba/2)");

    const NodeId n = static_cast<NodeId>(n_clusters) * static_cast<NodeId>(cluster_size);
    Rng rng(seed);

    std::vector<std::pair<NodeId, NodeId>> undirected;
    undirected.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(d_ba + d_er) / 2);
    for (int c = 0; c < n_clusters; ++c)
        grow_ba_cluster(static_cast<NodeId>(c) * cluster_size, cluster_size, stubs, ba_power,
                        rng.split(2 + static_cast<std::uint64_t>(c)), undirected);

    std::unordered_set<std::pair<NodeId, NodeId>, PairHash> seen(undirected.begin(),
                                                                 undirected.end());
    std::vector<std::pair<NodeId, NodeId>> er;
    overlay_erdos_renyi(n, n > 1 ? d_er / (n - 1.0) : 0.0, rng.split(1), er);
    for (const auto& e : er)
        if (seen.insert(e).second) undirected.push_back(e);

    std::vector<Edge> edges;
    edges.reserve(undirected.size() * 2);
    for (const auto& [i, j] : undirected) {
        edges.push_back({i, j, 0.0, 1.0});
        edges.push_back({j, i, 0.0, 1.0});
    }

    std::vector<std::int32_t> clusters(n);
    for (NodeId v = 0; v < n; ++v) clusters[v] = static_cast<std::int32_t>(v / cluster_size);
    return MarketplaceGraph(n, std::move(edges), std::move(clusters));
}

std::string Violation::describe() const {
    char buf[160];
    switch (kind) {
        case Kind::SimplexSum:
            std::snprintf(buf, sizeof(buf),
                          "SimplexViolation: consumer %u arm %d incoming sum off by %.3e", node,
                          arm, magnitude);
            break;
        case Kind::SelfLoop:
            std::snprintf(buf, sizeof(buf), "SelfLoop: node %u", node);
            break;
        case Kind::DuplicateEdge:
            std::snprintf(buf, sizeof(buf), "DuplicateEdge: %u->%u", node, other);
            break;
        case Kind::NonPositiveAlpha:
            std::snprintf(buf, sizeof(buf), "NonPositiveAlpha: edge %u->%u alpha=%.3e", node,
                          other, magnitude);
            break;
        case Kind::ArmZeroMismatch:
            std::snprintf(buf, sizeof(buf), "ArmZeroMismatch: edge %u->%u differs by %.3e", node,
                          other, magnitude);
            break;
        case Kind::IndexMismatch:
            std::snprintf(buf, sizeof(buf), "IndexMismatch: node %u", node);
            break;
    }
    return buf;
}

ValidationReport validate(const MarketplaceGraph& graph, const TreatmentSet& treatments) {
    ValidationReport report;
    const double tol = 1e-9;

    for (EdgeId e = 0; e < graph.n_edges(); ++e) {
        const Edge& ed = graph.edge(e);
        if (!(ed.alpha > 0.0))
            report.violations.push_back(
                {Violation::Kind::NonPositiveAlpha, ed.src, ed.dst, -1, ed.alpha});
    }

    // p_base simplex (reported as arm -1), then each treatment arm.
    for (NodeId j = 0; j < graph.n_nodes(); ++j) {
        if (graph.in_degree(j) == 0) continue;  // vacuous constraint
        double s = 0.0;
        for (EdgeId e : graph.in_edges(j)) s += graph.edge(e).p_base;
        if (std::abs(s - 1.0) > tol)
            report.violations.push_back({Violation::Kind::SimplexSum, j, 0, -1, s - 1.0});
        for (int r = 0; r < treatments.n_arms; ++r) {
            double sr = 0.0;
            for (EdgeId e : graph.in_edges(j)) sr += treatments.p(r, e);
            if (std::abs(sr - 1.0) > tol)
                report.violations.push_back({Violation::Kind::SimplexSum, j, 0, r, sr - 1.0});
        }
    }

    if (treatments.n_arms > 0) {
        for (EdgeId e = 0; e < graph.n_edges(); ++e) {
            const double diff = treatments.p(0, e) - graph.edge(e).p_base;
            if (diff != 0.0)
                report.violations.push_back({Violation::Kind::ArmZeroMismatch, graph.edge(e).src,
                                             graph.edge(e).dst, 0, diff});
        }
    }
    return report;
}

void save_graph(const MarketplaceGraph& graph, const std::filesystem::path& edge_path,
                const std::filesystem::path& node_path) {
    tsv::Writer ew(edge_path);
    ew.line("src\tdst\tp_base\talpha");
    for (const Edge& e : graph.edges())
        ew.line(std::to_string(e.src) + "\t" + std::to_string(e.dst) + "\t" +
                tsv::fmt17(e.p_base) + "\t" + tsv::fmt17(e.alpha));
    ew.close();

    tsv::Writer nw(node_path);
    nw.line("node\tcluster");
    for (NodeId v = 0; v < graph.n_nodes(); ++v)
        nw.line(std::to_string(v) + "\t" + std::to_string(graph.cluster_of(v)));
    nw.close();
}

void save_treatments(const MarketplaceGraph& graph, const TreatmentSet& treatments,
                     const std::filesystem::path& path) {
    tsv::Writer w(path);
    w.line("src\tdst\tarm\tp");
    for (int r = 0; r < treatments.n_arms; ++r)
        for (EdgeId e = 0; e < graph.n_edges(); ++e)
            w.line(std::to_string(graph.edge(e).src) + "\t" + std::to_string(graph.edge(e).dst) +
                   "\t" + std::to_string(r) + "\t" + tsv::fmt17(treatments.p(r, e)));
    w.close();
}

MarketplaceGraph load_graph(const std::filesystem::path& edge_path,
                            const std::filesystem::path& node_path) {
    std::vector<std::int32_t> clusters;
    {
        tsv::Reader r(node_path);
        r.expect_header("node\tcluster");
        std::string line;
        while (r.next(line)) {
            const auto f = tsv::split_tabs(line);
            if (f.size() != 2) r.fail("expected 2 fields");
            const auto node = tsv::parse_int(f[0], r.path(), r.lineno());
            if (node != static_cast<std::int64_t>(clusters.size()))
                r.fail("nodes must be listed densely in ascending order");
            clusters.push_back(
                static_cast<std::int32_t>(tsv::parse_int(f[1], r.path(), r.lineno())));
        }
    }
    const NodeId n_nodes = static_cast<NodeId>(clusters.size());

    std::vector<Edge> edges;
    {
        tsv::Reader r(edge_path);
        r.expect_header("src\tdst\tp_base\talpha");
        std::string line;
        std::unordered_set<std::pair<NodeId, NodeId>, PairHash> seen;
        while (r.next(line)) {
            const auto f = tsv::split_tabs(line);
            if (f.size() != 4) r.fail("expected 4 fields");
            Edge e;
            const auto src = tsv::parse_int(f[0], r.path(), r.lineno());
            const auto dst = tsv::parse_int(f[1], r.path(), r.lineno());
            if (src < 0 || src >= n_nodes || dst < 0 || dst >= n_nodes)
                r.fail("edge endpoint out of range");
            e.src = static_cast<NodeId>(src);
            e.dst = static_cast<NodeId>(dst);
            if (e.src == e.dst) r.fail("self-loop at node " + std::to_string(src));
            if (!seen.insert({e.src, e.dst}).second)
                r.fail("duplicate edge " + std::to_string(src) + "->" + std::to_string(dst));
            e.p_base = tsv::parse_double(f[2], r.path(), r.lineno());
            e.alpha = tsv::parse_double(f[3], r.path(), r.lineno());
            edges.push_back(e);
        }
    }
    return MarketplaceGraph(n_nodes, std::move(edges), std::move(clusters));
}

TreatmentSet load_treatments(const MarketplaceGraph& graph, const std::filesystem::path& path) {
    TreatmentSet ts;
    constexpr double kUnset = -1.0;
    tsv::Reader r(path);
    r.expect_header("src\tdst\tarm\tp");
    std::string line;
    while (r.next(line)) {
        const auto f = tsv::split_tabs(line);
        if (f.size() != 4) r.fail("expected 4 fields");
        const auto src = tsv::parse_int(f[0], r.path(), r.lineno());
        const auto dst = tsv::parse_int(f[1], r.path(), r.lineno());
        const auto arm = tsv::parse_int(f[2], r.path(), r.lineno());
        const double p = tsv::parse_double(f[3], r.path(), r.lineno());
        if (arm < 0 || arm > 255) r.fail("arm out of range");
        const std::int64_t e = src >= 0 && src < graph.n_nodes() && dst >= 0 &&
                                       dst < graph.n_nodes()
                                   ? graph.find_edge(static_cast<NodeId>(src),
                                                     static_cast<NodeId>(dst))
                                   : -1;
        if (e < 0)
            r.fail("unknown edge " + std::to_string(src) + "->" + std::to_string(dst));
        while (ts.n_arms <= arm) {
            ts.weights.emplace_back(graph.n_edges(), kUnset);
            ++ts.n_arms;
        }
        if (ts.weights[arm][static_cast<EdgeId>(e)] != kUnset)
            r.fail("duplicate entry for edge " + std::to_string(src) + "->" +
                   std::to_string(dst) + " arm " + std::to_string(arm));
        ts.weights[arm][static_cast<EdgeId>(e)] = p;
    }
    for (int arm = 0; arm < ts.n_arms; ++arm)
        for (EdgeId e = 0; e < graph.n_edges(); ++e)
            if (ts.weights[arm][e] == kUnset)
                throw ParseError(path.string() + ": arm " + std::to_string(arm) +
                                 " missing weight for edge " +
                                 std::to_string(graph.edge(e).src) + "->" +
                                 std::to_string(graph.edge(e).dst));
    return ts;
}

void save(const MarketplaceGraph& graph, const TreatmentSet& treatments,
          const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_graph(graph, dir / "graph.tsv", dir / "nodes.tsv");
    save_treatments(graph, treatments, dir / "treatments.tsv");
}

std::pair<MarketplaceGraph, TreatmentSet> load(const std::filesystem::path& dir) {
    MarketplaceGraph g = load_graph(dir / "graph.tsv", dir / "nodes.tsv");
    TreatmentSet t = load_treatments(g, dir / "treatments.tsv");
    return {std::move(g), std::move(t)};
}

}  // namespace oasis
