#pragma once

#include "enrich/corpus.hpp"
#include "enrich/disambig.hpp"
#include "enrich/mathml.hpp"
#include "enrich/rules.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace enrich {

struct RuleApplication {
	NodeId at;				 // presentation node the step covers
	std::string rule;		 // serialized rule, or a fallback marker
	double log_probability;	 // 0 for fallbacks
};

struct Derivation {
	std::vector<RuleApplication> steps;
	// covered_by[v] = index into steps of the application covering node v
	std::vector<std::size_t> covered_by;
	double log_score = 0.0;
	std::map<NodeId, std::string> mi_overrides;
};

struct TranslationContext {
	std::string category;
	std::string description;
};

struct TranslationResult {
	MathTree content;
	Derivation derivation;
};

TranslationResult translate(const MathTree &presentation, const RuleSet &rules,
							const DisambigModel *model,
							const TranslationContext &context = {});

struct CorpusTranslation {
	std::string id;
	std::optional<MathTree> content; // empty when translation failed
	double log_score = 0.0;
	std::string error;
};

std::vector<CorpusTranslation> translate_corpus(const Corpus &corpus,
												const RuleSet &rules,
												const DisambigModel *model);

} // namespace enrich
