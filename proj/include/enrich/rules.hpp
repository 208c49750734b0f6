#pragma once

#include "enrich/alignment.hpp"
#include "enrich/corpus.hpp"
#include "enrich/mathml.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace enrich {

// Tree pattern whose frontier may contain variables $1..$n. Stored in
// preorder like MathTree.
struct PatternNode {
	bool is_var = false;
	int var = 0; // 1-based
	std::string element;
	std::string text;
	std::vector<std::size_t> children;
};

struct RulePattern {
	std::vector<PatternNode> nodes;

	int max_var() const;
	std::string to_string() const;
	static RulePattern parse(const std::string &text);

	// copy of the subtree at `root`, with the subtrees listed in `var_nodes`
	// replaced by variables
	static RulePattern from_subtree(const MathTree &tree, NodeId root,
									const std::map<NodeId, int> &var_nodes);

	// match against the subtree at `root`; on success bindings[k-1] holds the
	// tree node bound to $k
	bool match(const MathTree &tree, NodeId root,
			   std::vector<NodeId> &bindings) const;

	// build a tree substituting var_values[k-1] for $k
	MathTree instantiate(const std::vector<MathTree> &var_values) const;

	bool operator==(const RulePattern &o) const;
};

struct TranslationRule {
	RulePattern lhs; // presentation side
	RulePattern rhs; // content side
	int count = 0;
	double probability = 0.0;
};

// arity-level decomposition at a presentation parent: each child group is
// translated independently and the results recombine per the template
struct SegmentationRule {
	std::string parent_element;
	int arity = 0;
	std::vector<std::vector<int>> split; // child index groups
	RulePattern recombination;			 // content-side template over $1..$n
	int count = 0;
	double probability = 0.0;
};

struct RuleSet {
	std::vector<TranslationRule> translation_rules;
	std::vector<SegmentationRule> segmentation_rules;

	bool operator==(const RuleSet &o) const;
};

RuleSet extract_rules(const Corpus &corpus,
					  const std::map<std::string, Alignment> &alignments);

struct RuleMatch {
	const TranslationRule *rule;
	std::vector<NodeId> bindings;
};

// all translation rules matching the subtree at `node`, most probable first
std::vector<RuleMatch> match_rules(const RuleSet &rules, const MathTree &tree,
								   NodeId node);

// convenience form over a standalone subtree
std::vector<std::pair<TranslationRule, double>> rule_lookup(
	const RuleSet &rules, const MathTree &presentation_subtree);

std::vector<const SegmentationRule *> match_segmentation(
	const RuleSet &rules, const std::string &element, int arity);

void save_rules(const RuleSet &rules, const std::filesystem::path &path);
RuleSet load_rules(const std::filesystem::path &path);

} // namespace enrich
