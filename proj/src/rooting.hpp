#pragma once

#include <deque>
#include <map>
#include <vector>

#include "latree/tree.hpp"

namespace latree::detail {

// Breadth-first orientation of a tree; positions index `order`.
struct Rooting {
  NodeId root = 0;
  std::vector<NodeId> order;
  std::vector<int> parent;                 // -1 for the root
  std::vector<std::vector<int>> children;  // by position
  std::map<NodeId, int> pos;
};

inline Rooting root_tree(const LatentTree& tree, NodeId root) {
  Rooting r;
  r.root = root;
  std::deque<NodeId> queue{root};
  r.pos[root] = 0;
  r.order.push_back(root);
  r.parent.push_back(-1);
  r.children.emplace_back();
  std::size_t head = 0;
  while (head < r.order.size()) {
    const NodeId u = r.order[head];
    const int pu = static_cast<int>(head);
    ++head;
    for (NodeId w : tree.neighbors(u)) {
      if (r.pos.count(w)) continue;
      const int pw = static_cast<int>(r.order.size());
      r.pos[w] = pw;
      r.order.push_back(w);
      r.parent.push_back(pu);
      r.children.emplace_back();
      r.children[static_cast<std::size_t>(pu)].push_back(pw);
    }
  }
  return r;
}

}  // namespace latree::detail
