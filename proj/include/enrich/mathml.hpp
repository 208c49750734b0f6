#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace enrich {

using NodeId = std::size_t;

enum class Markup { presentation, content };

struct MathNode {
	std::string element;
	std::string text; // leaf text; empty for internal nodes
	std::vector<NodeId> children;
	std::optional<NodeId> parent;

	bool operator==(const MathNode &o) const {
		return element == o.element && text == o.text && children == o.children &&
			   parent == o.parent;
	}
};

// Ordered labeled tree for one MathML expression. Nodes are stored in
// preorder, so the subtree of node v occupies the index range
// [v, v + subtree_size(v)). Immutable after construction.
class MathTree {
public:
	static MathTree leaf(std::string element, std::string text = "");
	static MathTree branch(std::string element, std::vector<MathTree> children);

	NodeId root() const { return 0; }
	std::size_t size() const { return nodes_.size(); }
	const MathNode &node(NodeId id) const { return nodes_[id]; }
	std::size_t subtree_size(NodeId id) const { return sizes_[id]; }
	const std::vector<MathNode> &nodes() const { return nodes_; }

	bool operator==(const MathTree &o) const { return nodes_ == o.nodes_; }

private:
	friend MathTree make_tree(std::vector<MathNode> nodes);
	void compute_sizes();

	std::vector<MathNode> nodes_;
	std::vector<std::size_t> sizes_;
};

// internal constructor from a preorder node array; validates link consistency
MathTree make_tree(std::vector<MathNode> nodes);

struct ParseOptions {
	// extra element names allowed beyond the built-in whitelist
	std::set<std::string> extra_elements;
};

MathTree parse(const std::string &xml_text, Markup kind,
			   const ParseOptions &opts = {});
std::string serialize(const MathTree &tree);
std::size_t node_count(const MathTree &tree);

const std::set<std::string> &presentation_elements();
const std::set<std::string> &content_elements();

// U+2061, the invisible function-application operator
inline const char *function_application_text() { return "\xe2\x81\xa1"; }

} // namespace enrich
