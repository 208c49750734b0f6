#pragma once

#include "enrich/alignment.hpp"
#include "enrich/corpus.hpp"
#include "enrich/mathml.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace enrich {

struct MiOccurrence {
	std::string example_id;
	NodeId node = 0;
	std::string name;
	std::string parent_element;
	bool preceded_by_mo = false;
	bool followed_by_mo = false;
	bool followed_by_function_application = false;
	bool only_child = false;
	std::string category;
	std::vector<std::string> description_tokens;
};

// mi occurrences of one example, in preorder
std::vector<MiOccurrence> find_mi_occurrences(const std::string &example_id,
											  const MathTree &presentation,
											  const std::string &category,
											  const std::string &description);

// content leaf aligned to the given presentation node, when there is one
std::optional<std::string> aligned_content(const MathTree &content,
										   const Alignment &alignment,
										   NodeId presentation_node);

struct AmbiguityEntry {
	// candidate -> training count, insertion-ordered by first sighting
	std::vector<std::pair<std::string, int>> candidates;

	int count_of(const std::string &candidate) const;
	bool has(const std::string &candidate) const;
};

struct AmbiguityTable {
	std::map<std::string, AmbiguityEntry> names; // only names with >= 2 candidates
};

AmbiguityTable collect_ambiguities(
	const Corpus &corpus, const std::map<std::string, Alignment> &alignments);

using SparseVec = std::vector<std::pair<int, double>>; // sorted by index

struct FeatureVocab {
	std::map<std::string, int> index;
	std::vector<std::string> names;
	std::vector<bool> is_text; // text-feature mask, parallel to names

	int intern(const std::string &name);
	std::optional<int> find(const std::string &name) const;
};

enum class FeatureMode { train, infer };

// All features are conjoined with the candidate identity. Text features
// (category relation + description n-grams) carry the "t:" prefix so
// ablation is an index mask rather than a separate vocabulary.
SparseVec extract_features(const MiOccurrence &occ, const std::string &candidate,
						   FeatureVocab &vocab, FeatureMode mode);
// infer-mode extraction against a frozen vocabulary
SparseVec extract_features(const MiOccurrence &occ, const std::string &candidate,
						   const FeatureVocab &vocab);

enum class CategoryRelation { same, contains, not_contains };
CategoryRelation category_relation(const std::string &category,
								   const std::string &candidate);

struct Instance {
	SparseVec features;
	int label = 0; // +1 / -1
	std::string example_id;
	NodeId node = 0;
	std::string candidate;
};

std::vector<Instance> build_instances(
	const Corpus &corpus, const std::map<std::string, Alignment> &alignments,
	const AmbiguityTable &table, FeatureVocab &vocab);

struct SvmConfig {
	double C = 1.0;
	int epochs = 20;
	std::uint64_t seed = 1;
};

struct DisambigModel {
	std::vector<double> weights;
	double bias = 0.0;
	FeatureVocab vocab;
	AmbiguityTable table;
	std::map<std::string, std::string> most_frequent;
	SvmConfig config;
	bool with_text = true;
	std::vector<double> epoch_objectives; // hinge objective of the averaged
										  // iterate after each epoch
};

DisambigModel train(const std::vector<Instance> &instances,
					const FeatureVocab &vocab, const AmbiguityTable &table,
					const SvmConfig &config, bool with_text = true);

struct Prediction {
	std::string candidate;
	double score;
};

// candidates ranked by decreasing decision value
std::vector<Prediction> predict(const DisambigModel &model,
								const MiOccurrence &occ);

std::map<std::string, std::string> most_frequent_baseline(
	const AmbiguityTable &table);

struct GoldOccurrence {
	MiOccurrence occurrence;
	std::string gold;
};

double accuracy(const std::function<std::string(const MiOccurrence &)> &top1,
				const std::vector<GoldOccurrence> &held_out);

struct CrossValSystem {
	std::vector<double> per_fold;
	double mean = 0.0;
};

struct CrossValReport {
	int k = 0;
	std::uint64_t seed = 0;
	SvmConfig config;
	CrossValSystem with_text;
	CrossValSystem without_text;
	CrossValSystem most_frequent;
};

CrossValReport cross_validate(const Corpus &corpus, int k, std::uint64_t seed,
							  const SvmConfig &config, int em_iterations = 10);

void save_model(const DisambigModel &model, const std::filesystem::path &path);
DisambigModel load_model(const std::filesystem::path &path);

void save_gold_occurrences(const std::vector<GoldOccurrence> &occs,
						   const std::filesystem::path &path);
std::vector<GoldOccurrence> load_gold_occurrences(
	const std::filesystem::path &path);

} // namespace enrich
