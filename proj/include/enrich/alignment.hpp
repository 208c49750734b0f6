#pragma once

#include "enrich/mathml.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace enrich {

// preorder token sequence; leaf tokens are "element:text", internal nodes
// just "element"; token_nodes[i] is the tree node the i-th token came from
struct TokenSeq {
	std::vector<std::string> tokens;
	std::vector<NodeId> token_nodes;
};

TokenSeq linearize(const MathTree &tree);

inline const char *null_token() { return "<NULL>"; }

// lexical model t(content-token | presentation-token); rows sum to 1
struct TranslationTable {
	std::map<std::string, std::map<std::string, double>> t;

	double prob(const std::string &p, const std::string &c) const {
		auto row = t.find(p);
		if (row == t.end()) return 0.0;
		auto cell = row->second.find(c);
		return cell == row->second.end() ? 0.0 : cell->second;
	}
};

struct AlignmentLink {
	// presentation token index, or npos when linked to NULL
	static constexpr std::size_t npos = static_cast<std::size_t>(-1);
	std::size_t presentation;
	std::size_t content;
};

struct Alignment {
	std::vector<AlignmentLink> links; // one per content token, in order
};

using TokenPair = std::pair<TokenSeq, TokenSeq>;

// called after each EM iteration with the updated table and the corpus
// log-likelihood under it
using EmObserver =
	std::function<void(int iteration, const TranslationTable &, double)>;

TranslationTable train_ibm1(const std::vector<TokenPair> &pairs, int iterations,
							const EmObserver &observer = nullptr);

Alignment align_best(const TokenPair &pair, const TranslationTable &table);

double corpus_log_likelihood(const std::vector<TokenPair> &pairs,
							 const TranslationTable &table);

void save_table(const TranslationTable &table,
				const std::filesystem::path &path);
TranslationTable load_table(const std::filesystem::path &path);

} // namespace enrich
