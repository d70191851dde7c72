#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "gpert/analysis.hpp"
#include "gpert/error.hpp"

namespace gpert {

std::size_t ClusterLabeling::noise_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
}

double ClusterLabeling::noise_fraction() const {
  return labels.empty() ? 0.0 : static_cast<double>(noise_count()) / static_cast<double>(labels.size());
}

std::vector<std::size_t> ClusterLabeling::cluster_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels)
    if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

namespace {

struct Edge {
  std::size_t a;
  std::size_t b;
  double w;
};

struct LinkageNode {
  std::size_t left;
  std::size_t right;
  double distance;
  std::size_t size;
};

// Condensed-tree edge; child is a point index when child_is_cluster is false.
struct CondensedEdge {
  std::size_t parent;
  std::size_t child;
  double lambda;
  std::size_t child_size;
  bool child_is_cluster;
};

constexpr double kMinDistance = 1e-12;

double lambda_of(double distance) { return 1.0 / std::max(distance, kMinDistance); }

std::vector<double> cosine_distances(const std::vector<std::vector<double>>& unit) {
  const std::size_t m = unit.size();
  std::vector<double> dist(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < unit[i].size(); ++c) dot += unit[i][c] * unit[j][c];
      const double d = std::max(0.0, 1.0 - dot);
      dist[i * m + j] = d;
      dist[j * m + i] = d;
    }
  }
  return dist;
}

std::vector<double> core_distances(const std::vector<double>& dist, std::size_t m, std::size_t k) {
  std::vector<double> core(m);
  std::vector<double> row(m);
  const std::size_t kth = std::min(k, m) - 1;
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(dist.begin() + static_cast<std::ptrdiff_t>(i * m), dist.begin() + static_cast<std::ptrdiff_t>((i + 1) * m),
              row.begin());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kth), row.end());
    core[i] = row[kth];
  }
  return core;
}

// Prim over the dense mutual-reachability graph.
std::vector<Edge> mutual_reachability_mst(const std::vector<double>& dist, const std::vector<double>& core) {
  const std::size_t m = core.size();
  auto mr = [&](std::size_t i, std::size_t j) { return std::max({core[i], core[j], dist[i * m + j]}); };
  std::vector<bool> in_tree(m, false);
  std::vector<double> key(m, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> parent(m, 0);
  std::vector<Edge> edges;
  edges.reserve(m - 1);
  in_tree[0] = true;
  for (std::size_t j = 1; j < m; ++j) key[j] = mr(0, j);
  for (std::size_t step = 1; step < m; ++step) {
    std::size_t best = m;
    for (std::size_t j = 0; j < m; ++j)
      if (!in_tree[j] && (best == m || key[j] < key[best])) best = j;
    in_tree[best] = true;
    edges.push_back({std::min(parent[best], best), std::max(parent[best], best), key[best]});
    for (std::size_t j = 0; j < m; ++j) {
      if (in_tree[j]) continue;
      const double w = mr(best, j);
      if (w < key[j]) {
        key[j] = w;
        parent[j] = best;
      }
    }
  }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.w != y.w) return x.w < y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });
  return edges;
}

// Nodes m .. 2m-2; node m+i merges along sorted edge i.
std::vector<LinkageNode> single_linkage(const std::vector<Edge>& edges, std::size_t m) {
  std::vector<std::size_t> uf_parent(2 * m - 1);
  std::iota(uf_parent.begin(), uf_parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (uf_parent[x] != x) {
      uf_parent[x] = uf_parent[uf_parent[x]];
      x = uf_parent[x];
    }
    return x;
  };
  std::vector<std::size_t> sizes(2 * m - 1, 1);
  std::vector<LinkageNode> nodes;
  nodes.reserve(m - 1);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::size_t ra = find(edges[i].a);
    const std::size_t rb = find(edges[i].b);
    const std::size_t id = m + i;
    sizes[id] = sizes[ra] + sizes[rb];
    uf_parent[ra] = id;
    uf_parent[rb] = id;
    nodes.push_back({ra, rb, edges[i].w, sizes[id]});
  }
  return nodes;
}

std::vector<CondensedEdge> condense(const std::vector<LinkageNode>& nodes, std::size_t m, std::size_t min_size,
                                    std::size_t& cluster_count) {
  auto node_size = [&](std::size_t id) { return id < m ? std::size_t{1} : nodes[id - m].size; };
  auto leaves_of = [&](std::size_t id) {
    std::vector<std::size_t> out;
    std::vector<std::size_t> stack{id};
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      if (x < m) {
        out.push_back(x);
      } else {
        stack.push_back(nodes[x - m].left);
        stack.push_back(nodes[x - m].right);
      }
    }
    return out;
  };

  const std::size_t root = 2 * m - 2;
  std::vector<std::size_t> label(2 * m - 1, 0);
  std::vector<CondensedEdge> out;
  cluster_count = 1;
  std::deque<std::size_t> queue{root};
  while (!queue.empty()) {
    const std::size_t node = queue.front();
    queue.pop_front();
    if (node < m) continue;
    const auto& n = nodes[node - m];
    const double lambda = lambda_of(n.distance);
    const std::size_t ls = node_size(n.left), rs = node_size(n.right);
    const std::size_t parent = label[node];
    auto fall_out = [&](std::size_t child) {
      for (std::size_t p : leaves_of(child)) out.push_back({parent, p, lambda, 1, false});
    };
    if (ls >= min_size && rs >= min_size) {
      for (std::size_t child : {n.left, n.right}) {
        label[child] = cluster_count++;
        out.push_back({parent, label[child], lambda, node_size(child), true});
        queue.push_back(child);
      }
    } else if (ls < min_size && rs < min_size) {
      fall_out(n.left);
      fall_out(n.right);
    } else if (ls < min_size) {
      fall_out(n.left);
      label[n.right] = parent;
      queue.push_back(n.right);
    } else {
      fall_out(n.right);
      label[n.left] = parent;
      queue.push_back(n.left);
    }
  }
  return out;
}

// Labels over the valid (non-zero) points; empty when the hierarchy never
// splits into two clusters.
std::vector<int> select_clusters(const std::vector<CondensedEdge>& tree, std::size_t cluster_count, std::size_t m) {
  std::vector<double> birth(cluster_count, 0.0);
  std::vector<std::size_t> parent_of(cluster_count, 0);
  std::vector<std::vector<std::size_t>> children(cluster_count);
  std::vector<std::size_t> point_parent(m, 0);
  for (const auto& e : tree) {
    if (e.child_is_cluster) {
      birth[e.child] = e.lambda;
      parent_of[e.child] = e.parent;
      children[e.parent].push_back(e.child);
    } else {
      point_parent[e.child] = e.parent;
    }
  }
  if (cluster_count == 1) return {};

  std::vector<double> stability(cluster_count, 0.0);
  for (const auto& e : tree)
    stability[e.parent] += (e.lambda - birth[e.parent]) * static_cast<double>(e.child_size);

  std::vector<bool> selected(cluster_count, false);
  auto deselect_below = [&](std::size_t c) {
    std::vector<std::size_t> stack(children[c].begin(), children[c].end());
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      selected[x] = false;
      stack.insert(stack.end(), children[x].begin(), children[x].end());
    }
  };
  // Children always carry larger ids than their parent; the root (0) is never
  // selected.
  for (std::size_t c = cluster_count - 1; c >= 1; --c) {
    double child_sum = 0.0;
    for (std::size_t ch : children[c]) child_sum += stability[ch];
    if (!children[c].empty() && child_sum > stability[c]) {
      stability[c] = child_sum;
    } else {
      selected[c] = true;
      deselect_below(c);
    }
  }

  std::vector<int> labels(m, -1);
  for (std::size_t p = 0; p < m; ++p) {
    std::size_t c = point_parent[p];
    while (c != 0 && !selected[c]) c = parent_of[c];
    if (c != 0) labels[p] = static_cast<int>(c);
  }
  return labels;
}

}  // namespace

ClusterLabeling hdbscan_cluster(const Matrix& points, const HdbscanOptions& options) {
  const std::size_t n = points.rows();
  const std::size_t min_size = options.min_cluster_size;
  if (min_size < 2) throw Error("hdbscan: min_cluster_size must be at least 2");
  if (n < min_size)
    throw Error("hdbscan: " + std::to_string(n) + " points is fewer than min_cluster_size " + std::to_string(min_size));

  std::vector<std::size_t> valid;
  std::vector<std::vector<double>> unit;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = points.row(r);
    double ss = 0.0;
    for (double x : row) ss += x * x;
    const double norm = std::sqrt(ss);
    if (!(norm >= options.zero_norm_tolerance)) {
      if (options.zero_norm == ZeroNormPolicy::Error)
        throw Error("hdbscan: zero-norm point " + std::to_string(r) + " under cosine metric");
      continue;
    }
    std::vector<double> u(row.begin(), row.end());
    for (double& x : u) x /= norm;
    unit.push_back(std::move(u));
    valid.push_back(r);
  }

  ClusterLabeling result;
  result.labels.assign(n, -1);
  const std::size_t m = valid.size();
  if (m < min_size) return result;

  const auto dist = cosine_distances(unit);
  const auto core = core_distances(dist, m, options.min_samples.value_or(min_size));
  const auto mst = mutual_reachability_mst(dist, core);
  const auto linkage = single_linkage(mst, m);
  std::size_t cluster_count = 0;
  const auto tree = condense(linkage, m, min_size, cluster_count);
  auto raw = select_clusters(tree, cluster_count, m);
  if (raw.empty() || std::all_of(raw.begin(), raw.end(), [](int l) { return l < 0; })) {
    // No split into two clusters of min_cluster_size: one cluster of everything.
    raw.assign(m, 0);
  }

  // Renumber by each cluster's lowest point index.
  std::vector<int> renumber;
  std::vector<int> seen_raw;
  for (std::size_t p = 0; p < m; ++p) {
    const int l = raw[p];
    if (l < 0) continue;
    auto it = std::find(seen_raw.begin(), seen_raw.end(), l);
    int id;
    if (it == seen_raw.end()) {
      id = static_cast<int>(seen_raw.size());
      seen_raw.push_back(l);
    } else {
      id = static_cast<int>(it - seen_raw.begin());
    }
    result.labels[valid[p]] = id;
  }
  result.k = static_cast<int>(seen_raw.size());
  return result;
}

}  // namespace gpert
