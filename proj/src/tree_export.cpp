#include <sstream>

#include "decomp/simulator.hpp"
#include "json.hpp"

namespace decomp {
namespace {

nlohmann::ordered_json node_json(const DecompositionTree& tree, std::size_t id) {
  const TreeNode& node = tree.node(id);
  nlohmann::ordered_json out;
  out["id"] = id;
  out["level"] = node.level;
  out["children"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < node.child_count; ++c) {
    out["children"].push_back(node_json(tree, node.first_child + c));
  }
  return out;
}

}  // namespace

TreeFormat parse_tree_format(std::string_view token) {
  if (token == "json") return TreeFormat::json;
  if (token == "dot") return TreeFormat::dot;
  throw UsageError("unknown tree format '" + std::string(token) + "' (expected json or dot)");
}

std::string export_tree(const DecompositionTree& tree, TreeFormat format) {
  if (format == TreeFormat::json) return node_json(tree, 0).dump();

  std::ostringstream dot;
  dot << "digraph decomposition {\n";
  for (std::size_t id = 0; id < tree.size(); ++id) {
    dot << "  " << id << " [label=\"" << id << "\", level=" << tree.node(id).level << "];\n";
  }
  for (std::size_t id = 1; id < tree.size(); ++id) {
    dot << "  " << tree.node(id).parent << " -> " << id << ";\n";
  }
  dot << "}\n";
  return dot.str();
}

}  // namespace decomp
