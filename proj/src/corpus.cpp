#include "enrich/corpus.hpp"
#include "enrich/errors.hpp"
#include "enrich/rng.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace enrich {

using nlohmann::json;

std::string read_file(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw IoError("cannot open " + path.string());
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

void write_file_atomic(const std::filesystem::path &path,
					   const std::string &contents) {
	std::filesystem::path tmp = path;
	tmp += ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
		if (!out) throw IoError("cannot write " + tmp.string());
		out << contents;
	}
	std::filesystem::rename(tmp, path);
}

Corpus load_corpus(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw IoError("corpus not found: " + path.string());
	Corpus corpus;
	std::set<std::string> seen;
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty()) continue;
		try {
			json rec = json::parse(line);
			ParallelExample ex{
				rec.at("id").get<std::string>(),
				parse(rec.at("presentation").get<std::string>(),
					  Markup::presentation),
				parse(rec.at("content").get<std::string>(), Markup::content),
				rec.value("category", std::string()),
				rec.value("description", std::string())};
			if (!seen.insert(ex.id).second)
				throw DuplicateId("duplicate example id '" + ex.id + "' at line " +
								  std::to_string(line_no));
			corpus.examples.push_back(std::move(ex));
		} catch (const DuplicateId &) {
			throw;
		} catch (const std::exception &e) {
			throw RecordParseError("line " + std::to_string(line_no) + ": " +
								   e.what());
		}
	}
	return corpus;
}

void save_corpus(const Corpus &corpus, const std::filesystem::path &path) {
	std::string out;
	for (const ParallelExample &ex : corpus.examples) {
		json rec = {{"id", ex.id},
					{"presentation", serialize(ex.presentation)},
					{"content", serialize(ex.content)},
					{"category", ex.category},
					{"description", ex.description}};
		out += rec.dump();
		out += '\n';
	}
	write_file_atomic(path, out);
}

FoldSplit split_folds(const Corpus &corpus, int k, std::uint64_t seed) {
	if (k < 2) throw TooFewExamples("fold count must be >= 2");
	if (corpus.size() < static_cast<std::size_t>(k))
		throw TooFewExamples("corpus of " + std::to_string(corpus.size()) +
							 " examples cannot be split into " +
							 std::to_string(k) + " folds");
	std::vector<std::size_t> order(corpus.size());
	std::iota(order.begin(), order.end(), 0);
	rng r(seed);
	r.shuffle(order);
	FoldSplit split;
	split.k = k;
	for (std::size_t pos = 0; pos < order.size(); ++pos)
		split.assignments[corpus.examples[order[pos]].id] =
			static_cast<int>(pos % static_cast<std::size_t>(k));
	return split;
}

std::vector<std::string> tokenize_text(const std::string &text) {
	// lowercase, split on any ASCII non-alphanumeric; multi-byte UTF-8
	// sequences are kept as token characters
	std::vector<std::string> tokens;
	std::string cur;
	for (unsigned char c : text) {
		if (c < 0x80 && !std::isalnum(c)) {
			if (!cur.empty()) tokens.push_back(std::move(cur));
			cur.clear();
		} else {
			cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
		}
	}
	if (!cur.empty()) tokens.push_back(std::move(cur));
	return tokens;
}

std::vector<std::string> ngrams(const std::vector<std::string> &tokens, int n) {
	std::vector<std::string> out;
	if (n < 1 || tokens.size() < static_cast<std::size_t>(n)) return out;
	for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
		std::string g = tokens[i];
		for (std::size_t j = 1; j < static_cast<std::size_t>(n); ++j)
			g += " " + tokens[i + j];
		out.push_back(std::move(g));
	}
	return out;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path &path) {
	json doc;
	try {
		doc = json::parse(read_file(path));
	} catch (const std::exception &e) {
		throw FormatError("synthetic spec " + path.string() + ": " + e.what());
	}
	SyntheticSpec spec;
	spec.examples_per_identifier = doc.value("examples_per_identifier", 0);
	for (const json &ident : doc.value("identifiers", json::array())) {
		SyntheticIdentifier si;
		si.name = ident.at("name").get<std::string>();
		for (const json &cand : ident.at("candidates")) {
			si.candidates.push_back(
				SyntheticCandidate{cand.at("content").get<std::string>(),
								   cand.value("cue_phrase", std::string()),
								   cand.value("weight", 1.0)});
		}
		for (const json &cat : ident.value("categories", json::array()))
			si.categories.push_back(cat.get<std::string>());
		spec.identifiers.push_back(std::move(si));
	}
	return spec;
}

namespace {

const char *k_filler[] = {"we",	  "consider", "denotes", "function",
						  "value", "term",	   "defined", "given",
						  "above", "follows"};
const char *k_args[] = {"x", "t", "z"};
const char *k_indices[] = {"i", "j", "k"};

} // namespace

Corpus generate_synthetic_corpus(const SyntheticSpec &spec, std::uint64_t seed) {
	if (spec.identifiers.empty() || spec.examples_per_identifier <= 0)
		throw EmptySpec("synthetic spec needs identifiers and a positive "
						"examples_per_identifier");
	rng r(seed);
	Corpus corpus;
	for (std::size_t ident_idx = 0; ident_idx < spec.identifiers.size();
		 ++ident_idx) {
		const SyntheticIdentifier &ident = spec.identifiers[ident_idx];
		if (ident.candidates.empty())
			throw EmptySpec("identifier '" + ident.name + "' has no candidates");
		std::vector<double> weights;
		for (const SyntheticCandidate &c : ident.candidates)
			weights.push_back(c.weight);
		for (int i = 0; i < spec.examples_per_identifier; ++i) {
			const SyntheticCandidate &cand =
				ident.candidates[r.weighted(weights)];
			std::string category =
				ident.categories.empty()
					? std::string()
					: ident.categories[r.below(ident.categories.size())];

			// the shape roll is independent of the candidate so that layout
			// tokens never become a proxy for one particular meaning
			double shape = r.real();
			MathTree presentation = MathTree::leaf("mi");
			MathTree content = MathTree::leaf("ci");
			if (shape < 0.2) {
				std::string arg = k_args[r.below(3)];
				std::vector<MathTree> inner;
				inner.push_back(MathTree::leaf("mo", "("));
				inner.push_back(MathTree::leaf("mi", arg));
				inner.push_back(MathTree::leaf("mo", ")"));
				std::vector<MathTree> row;
				row.push_back(MathTree::leaf("mi", ident.name));
				row.push_back(
					MathTree::leaf("mo", function_application_text()));
				row.push_back(MathTree::branch("mrow", std::move(inner)));
				presentation = MathTree::branch("mrow", std::move(row));
				std::vector<MathTree> app;
				app.push_back(MathTree::leaf("ci", cand.content));
				app.push_back(MathTree::leaf("ci", arg));
				content = MathTree::branch("apply", std::move(app));
			} else if (shape < 0.4) {
				// subscripted variant for structural variety
				std::string idx = k_indices[r.below(3)];
				std::vector<MathTree> sub;
				sub.push_back(MathTree::leaf("mi", ident.name));
				sub.push_back(MathTree::leaf("mi", idx));
				std::vector<MathTree> row;
				row.push_back(MathTree::branch("msub", std::move(sub)));
				presentation = MathTree::branch("mrow", std::move(row));
				std::vector<MathTree> app;
				app.push_back(MathTree::leaf("selector"));
				app.push_back(MathTree::leaf("ci", cand.content));
				app.push_back(MathTree::leaf("ci", idx));
				content = MathTree::branch("apply", std::move(app));
			} else {
				std::vector<MathTree> row;
				row.push_back(MathTree::leaf("mi", ident.name));
				presentation = MathTree::branch("mrow", std::move(row));
				content = MathTree::leaf("ci", cand.content);
			}

			std::string description = std::string(k_filler[r.below(10)]) + " " +
									  cand.cue_phrase + " " +
									  k_filler[r.below(10)];
			corpus.examples.push_back(ParallelExample{
				"syn-" + std::to_string(ident_idx) + "-" + std::to_string(i),
				std::move(presentation), std::move(content), category,
				description});
		}
	}
	return corpus;
}

} // namespace enrich
