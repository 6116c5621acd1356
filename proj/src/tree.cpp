#include "latree/tree.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <string>

#include "latree/error.hpp"

namespace latree {

namespace {

[[noreturn]] void unknown(NodeId id) {
  throw Error(ErrorKind::UnknownNode, "node " + std::to_string(id) + " is not in the tree");
}

void insert_sorted(std::vector<NodeId>& v, NodeId x) {
  v.insert(std::lower_bound(v.begin(), v.end(), x), x);
}

void erase_sorted(std::vector<NodeId>& v, NodeId x) {
  auto it = std::lower_bound(v.begin(), v.end(), x);
  if (it != v.end() && *it == x) v.erase(it);
}

// Parent pointers of a BFS from `root`, plus the visiting order.
struct Rooted {
  std::vector<NodeId> order;
  std::map<NodeId, NodeId> parent;
};

Rooted bfs(const LatentTree& tree, NodeId root) {
  Rooted r;
  r.parent[root] = root;
  std::deque<NodeId> queue{root};
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    r.order.push_back(u);
    for (NodeId w : tree.neighbors(u)) {
      if (r.parent.count(w)) continue;
      r.parent[w] = u;
      queue.push_back(w);
    }
  }
  return r;
}

}  // namespace

const LatentTree::NodeData& LatentTree::data(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) unknown(id);
  return it->second;
}

void LatentTree::add_node(NodeId id, std::string label) {
  auto& node = nodes_[id];
  if (!label.empty()) node.label = std::move(label);
}

void LatentTree::add_edge(NodeId a, NodeId b, std::optional<double> length) {
  if (a == b) throw Error(ErrorKind::InvalidTree, "self loop on " + std::to_string(a));
  add_node(a);
  add_node(b);
  if (has_edge(a, b)) {
    if (length) lengths_[Edge(a, b)] = *length;
    return;
  }
  insert_sorted(nodes_[a].neighbors, b);
  insert_sorted(nodes_[b].neighbors, a);
  ++edge_count_;
  if (length) lengths_[Edge(a, b)] = *length;
}

void LatentTree::remove_edge(NodeId a, NodeId b) {
  if (!has_edge(a, b)) {
    throw Error(ErrorKind::NoSuchEdge, std::to_string(a) + "-" + std::to_string(b));
  }
  erase_sorted(nodes_[a].neighbors, b);
  erase_sorted(nodes_[b].neighbors, a);
  lengths_.erase(Edge(a, b));
  --edge_count_;
}

void LatentTree::remove_node(NodeId id) {
  const auto nbrs = data(id).neighbors;
  for (NodeId w : nbrs) remove_edge(id, w);
  nodes_.erase(id);
}

void LatentTree::set_length(NodeId a, NodeId b, double length) {
  if (!has_edge(a, b)) {
    throw Error(ErrorKind::NoSuchEdge, std::to_string(a) + "-" + std::to_string(b));
  }
  lengths_[Edge(a, b)] = length;
}

void LatentTree::set_label(NodeId id, std::string label) {
  if (!has_node(id)) unknown(id);
  nodes_[id].label = std::move(label);
}

bool LatentTree::has_edge(NodeId a, NodeId b) const {
  auto it = nodes_.find(a);
  if (it == nodes_.end()) return false;
  return std::binary_search(it->second.neighbors.begin(), it->second.neighbors.end(), b);
}

NodeKind LatentTree::kind(NodeId id) const {
  data(id);
  return kind_of(id);
}

const std::string& LatentTree::label(NodeId id) const { return data(id).label; }

std::string LatentTree::display_name(NodeId id) const {
  const auto& l = label(id);
  if (!l.empty()) return l;
  return is_hidden(id) ? "h" + std::to_string(-id) : std::to_string(id);
}

const std::vector<NodeId>& LatentTree::neighbors(NodeId id) const { return data(id).neighbors; }

std::optional<double> LatentTree::length(NodeId a, NodeId b) const {
  auto it = lengths_.find(Edge(a, b));
  if (it == lengths_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeId> LatentTree::nodes() const {
  std::vector<NodeId> out;
  out.reserve(nodes_.size());
  for (const auto& [id, _] : nodes_) out.push_back(id);
  return out;
}

std::vector<NodeId> LatentTree::observed() const {
  std::vector<NodeId> out;
  for (const auto& [id, _] : nodes_)
    if (is_observed(id)) out.push_back(id);
  return out;
}

std::vector<NodeId> LatentTree::hidden() const {
  std::vector<NodeId> out;
  for (const auto& [id, _] : nodes_)
    if (is_hidden(id)) out.push_back(id);
  return out;
}

std::size_t LatentTree::hidden_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& kv) { return is_hidden(kv.first); }));
}

std::vector<Edge> LatentTree::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (const auto& [id, node] : nodes_)
    for (NodeId w : node.neighbors)
      if (id < w) out.emplace_back(id, w);
  return out;
}

NodeId LatentTree::fresh_hidden_id() const {
  if (nodes_.empty() || nodes_.begin()->first >= 0) return -1;
  return nodes_.begin()->first - 1;
}

bool LatentTree::is_tree() const {
  if (nodes_.empty()) return true;
  if (edge_count_ + 1 != nodes_.size()) return false;
  return bfs(*this, nodes_.begin()->first).order.size() == nodes_.size();
}

void LatentTree::validate() const {
  if (!is_tree()) {
    throw Error(ErrorKind::InvalidTree, std::to_string(nodes_.size()) + " nodes, " +
                                            std::to_string(edge_count_) + " edges, not a single tree");
  }
}

std::vector<Step> path(const LatentTree& tree, NodeId i, NodeId j) {
  if (!tree.has_node(i)) unknown(i);
  if (!tree.has_node(j)) unknown(j);
  if (i == j) return {};
  const Rooted r = bfs(tree, j);
  if (!r.parent.count(i)) throw Error(ErrorKind::InvalidTree, "nodes are disconnected");
  std::vector<Step> steps;
  for (NodeId u = i; u != j; u = r.parent.at(u)) steps.emplace_back(u, r.parent.at(u));
  return steps;
}

std::size_t hop_distance(const LatentTree& tree, NodeId i, NodeId j) { return path(tree, i, j).size(); }

double path_length(const LatentTree& tree, NodeId i, NodeId j) {
  double total = 0.0;
  for (const auto& [a, b] : path(tree, i, j)) {
    auto len = tree.length(a, b);
    if (!len) throw Error(ErrorKind::InvalidTree, "edge without length on path");
    total += *len;
  }
  return total;
}

std::map<NodeId, std::size_t> hops_from(const LatentTree& tree, NodeId source) {
  const Rooted r = bfs(tree, source);
  std::map<NodeId, std::size_t> hops;
  hops[source] = 0;
  for (NodeId u : r.order)
    if (u != source) hops[u] = hops[r.parent.at(u)] + 1;
  return hops;
}

std::size_t effective_depth(const LatentTree& tree) {
  std::map<NodeId, std::size_t> dist;
  std::deque<NodeId> queue;
  for (NodeId v : tree.observed()) {
    dist[v] = 0;
    queue.push_back(v);
  }
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    for (NodeId w : tree.neighbors(u)) {
      if (dist.count(w)) continue;
      dist[w] = dist[u] + 1;
      queue.push_back(w);
    }
  }
  std::size_t depth = 0;
  for (NodeId h : tree.hidden()) depth = std::max(depth, dist.count(h) ? dist[h] : 0);
  return depth;
}

std::size_t diameter(const LatentTree& tree) {
  if (tree.node_count() < 2) return 0;
  auto far = [&](NodeId from) {
    auto hops = hops_from(tree, from);
    return *std::max_element(hops.begin(), hops.end(),
                             [](const auto& a, const auto& b) { return a.second < b.second; });
  };
  const auto [end, _] = far(tree.nodes().front());
  return far(end).second;
}

std::size_t max_degree(const LatentTree& tree) {
  std::size_t best = 0;
  for (NodeId u : tree.nodes()) best = std::max(best, tree.degree(u));
  return best;
}

std::set<NodeId> leaves(const LatentTree& tree) {
  std::set<NodeId> out;
  for (NodeId u : tree.nodes())
    if (tree.degree(u) == 1) out.insert(u);
  return out;
}

bool is_minimal(const LatentTree& tree) {
  for (NodeId h : tree.hidden())
    if (tree.degree(h) < 3) return false;
  return true;
}

LatentTree contract_edge(const LatentTree& tree, NodeId keep, NodeId drop) {
  if (!tree.has_edge(keep, drop)) {
    throw Error(ErrorKind::NoSuchEdge, std::to_string(keep) + "-" + std::to_string(drop));
  }
  if (!is_hidden(drop)) {
    throw Error(ErrorKind::InvalidTree, "only hidden nodes can be contracted away");
  }
  LatentTree out = tree;
  const auto base = tree.length(keep, drop);
  for (NodeId z : tree.neighbors(drop)) {
    if (z == keep) continue;
    std::optional<double> len;
    if (auto dz = tree.length(drop, z); dz && base) len = *dz + *base;
    out.add_edge(keep, z, len);
  }
  out.remove_node(drop);
  return out;
}

SplitSet split_set(const LatentTree& tree) {
  SplitSet out;
  out.observed = tree.observed();
  out.edge_count = tree.edge_count();
  if (out.observed.empty() || tree.node_count() < 2) return out;
  std::map<NodeId, std::size_t> bit;
  for (std::size_t k = 0; k < out.observed.size(); ++k) bit[out.observed[k]] = k;

  const Rooted r = bfs(tree, out.observed.front());
  const std::size_t m = out.observed.size();
  std::map<NodeId, std::vector<bool>> below;
  for (auto it = r.order.rbegin(); it != r.order.rend(); ++it) {
    const NodeId u = *it;
    auto& mine = below[u];
    mine.resize(m, false);
    if (is_observed(u)) mine[bit[u]] = true;
    for (NodeId w : tree.neighbors(u)) {
      if (w == r.parent.at(u)) continue;
      const auto& child = below[w];
      for (std::size_t k = 0; k < m; ++k)
        if (child[k]) mine[k] = true;
    }
  }
  for (NodeId u : r.order) {
    if (u == r.order.front()) continue;
    std::vector<bool> s = below[u];
    const auto count = static_cast<std::size_t>(std::count(s.begin(), s.end(), true));
    if (count == 0 || count == m) continue;  // empty block: no split
    if (s[0]) s.flip();
    out.splits.push_back(std::move(s));
  }
  std::sort(out.splits.begin(), out.splits.end());
  return out;
}

std::size_t robinson_foulds(const LatentTree& a, const LatentTree& b) {
  if (a.observed() != b.observed()) throw Error(ErrorKind::LabelMismatch, "observed node sets differ");
  const SplitSet sa = split_set(a);
  const SplitSet sb = split_set(b);
  std::size_t shared = 0;
  auto i = sa.splits.begin();
  auto j = sb.splits.begin();
  while (i != sa.splits.end() && j != sb.splits.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++shared;
      ++i;
      ++j;
    }
  }
  return sa.splits.size() + sb.splits.size() - 2 * shared;
}

namespace {

// AHU-style canonical encoding of the tree rooted at `root`, with observed ids
// kept and hidden nodes anonymous.
std::string canonical_form(const LatentTree& tree, NodeId root) {
  const Rooted r = bfs(tree, root);
  std::map<NodeId, std::string> code;
  for (auto it = r.order.rbegin(); it != r.order.rend(); ++it) {
    const NodeId u = *it;
    std::vector<std::string> kids;
    for (NodeId w : tree.neighbors(u)) {
      if (w == r.parent.at(u) && u != root) continue;
      kids.push_back(std::move(code[w]));
    }
    std::sort(kids.begin(), kids.end());
    std::string s = "(" + (is_hidden(u) ? std::string("h") : std::to_string(u));
    for (auto& k : kids) s += k;
    s += ")";
    code[u] = std::move(s);
  }
  return code[root];
}

}  // namespace

bool trees_equal_up_to_hidden_relabel(const LatentTree& a, const LatentTree& b) {
  const auto obs = a.observed();
  if (obs != b.observed()) throw Error(ErrorKind::LabelMismatch, "observed node sets differ");
  if (a.node_count() != b.node_count() || a.edge_count() != b.edge_count()) return false;
  if (obs.empty()) return a.node_count() == 0;
  return canonical_form(a, obs.front()) == canonical_form(b, obs.front());
}

DistanceMatrix path_distances(const LatentTree& tree, const std::vector<NodeId>& ids) {
  DistanceMatrix out(ids);
  for (std::size_t a = 0; a < ids.size(); ++a) {
    const Rooted r = bfs(tree, ids[a]);
    std::map<NodeId, double> dist;
    dist[ids[a]] = 0.0;
    for (NodeId u : r.order) {
      if (u == ids[a]) continue;
      const NodeId p = r.parent.at(u);
      auto len = tree.length(p, u);
      if (!len) throw Error(ErrorKind::InvalidTree, "edge without length");
      dist[u] = dist[p] + *len;
    }
    for (std::size_t b = 0; b < ids.size(); ++b) {
      auto it = dist.find(ids[b]);
      if (it == dist.end()) unknown(ids[b]);
      out.d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = it->second;
    }
  }
  return out;
}

LatentTree canonicalize_hidden(const LatentTree& tree) {
  if (tree.node_count() == 0) return tree;
  const auto obs = tree.observed();
  const NodeId root = obs.empty() ? tree.nodes().front() : obs.front();
  const Rooted r = bfs(tree, root);
  std::map<NodeId, NodeId> rename;
  NodeId next = -1;
  for (NodeId u : r.order) rename[u] = is_hidden(u) ? next-- : u;
  LatentTree out;
  for (NodeId u : tree.nodes()) out.add_node(rename.at(u), tree.label(u));
  for (const Edge& e : tree.edges()) out.add_edge(rename.at(e.u), rename.at(e.v), tree.length(e.u, e.v));
  return out;
}

}  // namespace latree
