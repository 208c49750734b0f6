#pragma once

#include "enrich/decoder.hpp"
#include "enrich/mathml.hpp"

#include <map>
#include <string>
#include <vector>

namespace enrich {

struct EditCostModel {
	double insert_cost = 1.0;
	double delete_cost = 1.0;
	double relabel_cost = 1.0; // relabeling identical labels costs 0
};

// exact ordered-tree edit distance (Zhang-Shasha keyroot DP); a node's label
// is its element name plus leaf text
double tree_edit_distance(const MathTree &a, const MathTree &b,
						  const EditCostModel &costs = {});

// edit distance normalized by the larger tree's node count
double tedr(const MathTree &generated, const MathTree &reference);

struct EvalReport {
	struct Example {
		std::string id;
		double tedr;
		bool failed;
	};
	std::vector<Example> per_example;
	double mean_tedr = 0.0;
	std::size_t failures = 0;
};

EvalReport evaluate_corpus(const std::vector<CorpusTranslation> &outputs,
						   const std::map<std::string, MathTree> &references);

} // namespace enrich
