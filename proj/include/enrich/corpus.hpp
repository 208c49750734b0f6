#pragma once

#include "enrich/mathml.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace enrich {

struct ParallelExample {
	std::string id;
	MathTree presentation;
	MathTree content;
	std::string category;
	std::string description;
};

struct Corpus {
	std::vector<ParallelExample> examples;

	std::size_t size() const { return examples.size(); }
};

struct FoldSplit {
	int k = 0;
	std::map<std::string, int> assignments; // example id -> fold index
};

Corpus load_corpus(const std::filesystem::path &path);
void save_corpus(const Corpus &corpus, const std::filesystem::path &path);

FoldSplit split_folds(const Corpus &corpus, int k, std::uint64_t seed);

std::vector<std::string> tokenize_text(const std::string &text);
std::vector<std::string> ngrams(const std::vector<std::string> &tokens, int n);

struct SyntheticCandidate {
	std::string content;
	std::string cue_phrase;
	double weight = 1.0;
};

struct SyntheticIdentifier {
	std::string name;
	std::vector<SyntheticCandidate> candidates;
	std::vector<std::string> categories;
};

struct SyntheticSpec {
	std::vector<SyntheticIdentifier> identifiers;
	int examples_per_identifier = 0;
};

SyntheticSpec load_synthetic_spec(const std::filesystem::path &path);
Corpus generate_synthetic_corpus(const SyntheticSpec &spec, std::uint64_t seed);

// write-then-rename so rerun artifacts are replaced atomically
void write_file_atomic(const std::filesystem::path &path,
					   const std::string &contents);
std::string read_file(const std::filesystem::path &path);

} // namespace enrich
