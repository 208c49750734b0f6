#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "enrich/alignment.hpp"
#include "enrich/corpus.hpp"
#include "enrich/decoder.hpp"
#include "enrich/disambig.hpp"
#include "enrich/errors.hpp"
#include "enrich/eval.hpp"
#include "enrich/mathml.hpp"
#include "enrich/rng.hpp"
#include "enrich/rules.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

using namespace enrich;

namespace {

void verdict(const std::string &name, bool pass) {
	std::cout << (pass ? "PASS" : "FAIL") << ": " << name << std::endl;
	CHECK_MESSAGE(pass, name);
}

// ------------------------------------------------- independent TED oracle
// exact ordered-forest edit distance by direct recursion over tree lists,
// structurally unrelated to the keyroot DP under test

using Forest = std::vector<std::pair<const MathTree *, NodeId>>;

std::string label_of(const MathTree &t, NodeId v) {
	return t.node(v).element + "\x1f" + t.node(v).text;
}

Forest replace_last_by_children(Forest f) {
	auto [t, v] = f.back();
	f.pop_back();
	for (NodeId c : t->node(v).children) f.emplace_back(t, c);
	return f;
}

double oracle_forest(const Forest &a, const Forest &b);

double oracle_forest(const Forest &a, const Forest &b) {
	if (a.empty() && b.empty()) return 0.0;
	double best = 1e300;
	if (!a.empty())
		best = std::min(best, 1.0 + oracle_forest(replace_last_by_children(a), b));
	if (!b.empty())
		best = std::min(best, 1.0 + oracle_forest(a, replace_last_by_children(b)));
	if (!a.empty() && !b.empty()) {
		auto [ta, va] = a.back();
		auto [tb, vb] = b.back();
		Forest ca, cb;
		for (NodeId c : ta->node(va).children) ca.emplace_back(ta, c);
		for (NodeId c : tb->node(vb).children) cb.emplace_back(tb, c);
		Forest ra = a, rb = b;
		ra.pop_back();
		rb.pop_back();
		double relabel = label_of(*ta, va) == label_of(*tb, vb) ? 0.0 : 1.0;
		best = std::min(best,
						relabel + oracle_forest(ca, cb) + oracle_forest(ra, rb));
	}
	return best;
}

double oracle_ted(const MathTree &a, const MathTree &b) {
	return oracle_forest({{&a, a.root()}}, {{&b, b.root()}});
}

MathTree random_content_tree(rng &r, int max_nodes) {
	static const char *leaves[] = {"ci", "cn", "selector", "plus"};
	static const char *texts[] = {"a", "b", "x", ""};
	if (max_nodes <= 1 || r.real() < 0.45) {
		const char *el = leaves[r.below(4)];
		std::string text =
			(std::string(el) == "ci" || std::string(el) == "cn")
				? texts[r.below(4)]
				: "";
		return MathTree::leaf(el, text);
	}
	int budget = max_nodes - 1;
	std::vector<MathTree> children;
	while (budget > 0 && (children.empty() || r.real() < 0.55)) {
		int take = 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(budget)));
		MathTree child = random_content_tree(r, take);
		budget -= static_cast<int>(child.size());
		children.push_back(std::move(child));
	}
	return MathTree::branch("apply", std::move(children));
}

// ------------------------------------------------------- synthetic corpora

SyntheticSpec trend_spec() {
	// five ambiguous identifiers, skewed priors, informative cue phrases
	SyntheticSpec spec;
	struct Row {
		const char *name;
		const char *cat;
		const char *c1, *cue1;
		const char *c2, *cue2;
		const char *c3, *cue3;
	};
	const Row rows[] = {
		{"σ", "ElementaryFunctions", "Weierstrass Sigma",
		 "weierstrass elliptic function", "Divisor Sigma",
		 "sum of positive divisors", "σ", "population standard deviation"},
		{"d", "NumberTheory", "Differential", "exterior derivative operator",
		 "Divisor Count", "number of divisors", "d", "distance between points"},
		{"Γ", "GammaBetaErf", "Euler Gamma", "euler gamma function extends",
		 "Incomplete Gamma", "incomplete upper gamma", "Γ",
		 "christoffel symbol connection"},
		{"φ", "NumberTheory", "Euler Phi", "euler totient counts coprime",
		 "Golden Ratio", "golden ratio constant", "φ", "generic angle variable"},
		{"B", "Polynomials", "Bernoulli B", "bernoulli numbers polynomial",
		 "Bell Number", "bell partition count", "B", "magnetic field strength"}};
	for (const Row &row : rows) {
		SyntheticIdentifier ident;
		ident.name = row.name;
		ident.candidates = {{row.c1, row.cue1, 0.6},
							{row.c2, row.cue2, 0.25},
							{row.c3, row.cue3, 0.15}};
		ident.categories = {row.cat};
		spec.identifiers.push_back(std::move(ident));
	}
	spec.examples_per_identifier = 200;
	return spec;
}

std::map<std::string, Alignment> align_all(const Corpus &corpus, int iterations,
										   TranslationTable *out = nullptr) {
	std::vector<TokenPair> pairs;
	for (const ParallelExample &ex : corpus.examples)
		pairs.emplace_back(linearize(ex.presentation), linearize(ex.content));
	TranslationTable table = train_ibm1(pairs, iterations);
	std::map<std::string, Alignment> alignments;
	for (std::size_t i = 0; i < corpus.size(); ++i)
		alignments[corpus.examples[i].id] = align_best(pairs[i], table);
	if (out) *out = std::move(table);
	return alignments;
}

// ------------------------------------------------- decoder derivation oracle

std::vector<double> cross_sum(const std::vector<double> &a,
							  const std::vector<double> &b) {
	std::vector<double> out;
	out.reserve(a.size() * b.size());
	for (double x : a)
		for (double y : b) out.push_back(x + y);
	return out;
}

// every complete derivation score at node v, mirroring the decoder's
// semantics (fallback only where nothing matches) without any memoized max
std::vector<double> enumerate_derivations(const MathTree &tree,
										  const RuleSet &rules, NodeId v) {
	std::vector<double> options;
	for (const RuleMatch &m : match_rules(rules, tree, v)) {
		std::vector<double> combos{std::log(m.rule->probability)};
		for (NodeId b : m.bindings)
			combos = cross_sum(combos, enumerate_derivations(tree, rules, b));
		options.insert(options.end(), combos.begin(), combos.end());
	}
	const MathNode &n = tree.node(v);
	if (!n.children.empty()) {
		for (const SegmentationRule *s : match_segmentation(
				 rules, n.element, static_cast<int>(n.children.size()))) {
			if (s->recombination.max_var() > static_cast<int>(s->split.size()))
				continue;
			bool singleton = true;
			for (const std::vector<int> &g : s->split)
				singleton = singleton && g.size() == 1;
			if (!singleton) continue;
			std::vector<double> combos{std::log(s->probability)};
			for (const std::vector<int> &g : s->split)
				combos = cross_sum(
					combos,
					enumerate_derivations(
						tree, rules,
						n.children[static_cast<std::size_t>(g[0])]));
			options.insert(options.end(), combos.begin(), combos.end());
		}
	}
	if (!options.empty()) return options;
	if (n.children.empty()) return {0.0};
	std::vector<double> combos{0.0};
	for (NodeId c : n.children)
		combos = cross_sum(combos, enumerate_derivations(tree, rules, c));
	return combos;
}

MathTree random_presentation_tree(rng &r, int max_nodes) {
	static const char *names[] = {"a", "b"};
	if (max_nodes <= 1 || r.real() < 0.4) {
		switch (r.below(4)) {
			case 0: return MathTree::leaf("mi", "a");
			case 1: return MathTree::leaf("mi", "b");
			case 2: return MathTree::leaf("mn", "1");
			default: return MathTree::leaf("mo", "+");
		}
	}
	(void)names;
	int budget = max_nodes - 1;
	std::vector<MathTree> children;
	while (budget > 0 && (children.empty() || (children.size() < 3 && r.real() < 0.6))) {
		int take = 1 + static_cast<int>(r.below(static_cast<std::uint64_t>(budget)));
		MathTree child = random_presentation_tree(r, take);
		budget -= static_cast<int>(child.size());
		children.push_back(std::move(child));
	}
	if (children.size() == 2 && r.real() < 0.35)
		return MathTree::branch("msub", std::move(children));
	return MathTree::branch("mrow", std::move(children));
}

RuleSet random_rules(rng &r) {
	static const std::pair<const char *, const char *> pool[] = {
		{"mi:\"a\"", "ci:\"a\""},
		{"mi:\"a\"", "ci:\"alpha\""},
		{"mi:\"b\"", "ci:\"b\""},
		{"mi:\"b\"", "ci:\"beta\""},
		{"mn:\"1\"", "cn:\"1\""},
		{"mo:\"+\"", "plus"},
		{"mrow($1)", "$1"},
		{"mrow($1,$2)", "apply($1,$2)"},
		{"mrow($1,$2,$3)", "apply($1,$2,$3)"},
		{"msub($1,$2)", "apply(selector,$1,$2)"},
		{"mrow(mi:\"a\",$1)", "apply(ci:\"a\",$1)"},
	};
	RuleSet rules;
	std::map<std::string, int> lhs_totals;
	for (const auto &[lhs, rhs] : pool) {
		if (r.real() < 0.4) continue;
		TranslationRule rule;
		rule.lhs = RulePattern::parse(lhs);
		rule.rhs = RulePattern::parse(rhs);
		rule.count = 1 + static_cast<int>(r.below(4));
		rules.translation_rules.push_back(std::move(rule));
		lhs_totals[lhs] += rules.translation_rules.back().count;
	}
	for (TranslationRule &rule : rules.translation_rules)
		rule.probability = static_cast<double>(rule.count) /
						   lhs_totals.at(rule.lhs.to_string());
	if (r.real() < 0.5) {
		SegmentationRule seg;
		seg.parent_element = "mrow";
		seg.arity = 2;
		seg.split = {{0}, {1}};
		seg.recombination = RulePattern::parse("apply($1,$2)");
		seg.count = 1;
		seg.probability = static_cast<double>(r.below(9) + 1) / 10.0;
		rules.segmentation_rules.push_back(std::move(seg));
	}
	return rules;
}

// ---------------------------------------------------------- CLI harness

std::filesystem::path work_dir() {
	auto p = std::filesystem::temp_directory_path() / "enrich-acceptance";
	std::filesystem::create_directories(p);
	return p;
}

bool run_cli(const std::string &args) {
	std::string cmd = std::string(ENRICH_CLI_PATH) + " " + args +
					  " > /dev/null 2>&1";
	return std::system(cmd.c_str()) == 0;
}

std::string spec_json() {
	// mirrors trend_spec() but smaller, as a file for the CLI round
	return R"({
  "examples_per_identifier": 40,
  "identifiers": [
    {"name": "σ", "categories": ["ElementaryFunctions"], "candidates": [
      {"content": "Weierstrass Sigma", "cue_phrase": "weierstrass elliptic function", "weight": 0.6},
      {"content": "Divisor Sigma", "cue_phrase": "sum of positive divisors", "weight": 0.25},
      {"content": "σ", "cue_phrase": "population standard deviation", "weight": 0.15}
    ]},
    {"name": "d", "categories": ["NumberTheory"], "candidates": [
      {"content": "Differential", "cue_phrase": "exterior derivative operator", "weight": 0.6},
      {"content": "Divisor Count", "cue_phrase": "number of divisors", "weight": 0.4}
    ]}
  ]
})";
}

} // namespace

TEST_CASE("acceptance: tree edit distance matches the brute-force oracle") {
	rng r(4011);
	bool pass = true;
	int checked = 0;
	while (checked < 500) {
		MathTree a = random_content_tree(r, 1 + static_cast<int>(r.below(4)));
		MathTree b = random_content_tree(r, 1 + static_cast<int>(r.below(4)));
		if (node_count(a) + node_count(b) > 6) continue;
		++checked;
		double dp = tree_edit_distance(a, b);
		double oracle = oracle_ted(a, b);
		if (dp != oracle) {
			pass = false;
			MESSAGE("mismatch: " << serialize(a) << " vs " << serialize(b)
								 << " dp=" << dp << " oracle=" << oracle);
		}
	}
	verdict("tree edit distance equals brute-force oracle on 500 pairs", pass);
}

TEST_CASE("acceptance: TEDR is distance over max node count") {
	rng r(4012);
	bool pass = true;
	static const char *labels[] = {"x", "y", "z", "w"};
	for (int i = 0; i < 100; ++i) {
		MathTree a = MathTree::leaf("ci", labels[r.below(4)]);
		MathTree b = MathTree::leaf("ci", labels[r.below(4)]);
		double expect = a == b ? 0.0 : 1.0; // distance / max(1, 1)
		pass = pass && tedr(a, b) == expect;
	}
	// the normalization denominator is the larger tree
	MathTree big = MathTree::branch(
		"apply", {MathTree::leaf("ci", "x"), MathTree::leaf("ci", "y")});
	pass = pass && tedr(MathTree::leaf("ci", "x"), big) ==
					   tree_edit_distance(MathTree::leaf("ci", "x"), big) /
						   static_cast<double>(node_count(big));
	verdict("TEDR equals edit distance over max node count", pass);
}

TEST_CASE("acceptance: EM invariants hold") {
	bool pass = true;
	std::vector<TokenPair> pairs;
	auto seq = [](std::vector<std::string> tokens) {
		TokenSeq s;
		s.tokens = std::move(tokens);
		for (std::size_t i = 0; i < s.tokens.size(); ++i)
			s.token_nodes.push_back(i);
		return s;
	};
	pairs.emplace_back(seq({"mrow", "mi:a", "mo:+", "mi:b"}),
					   seq({"apply", "plus", "ci:a", "ci:b"}));
	pairs.emplace_back(seq({"mrow", "mi:a"}), seq({"ci:a"}));
	pairs.emplace_back(seq({"mrow", "mi:b"}), seq({"ci:b"}));
	pairs.emplace_back(seq({"msub", "mi:a", "mi:b"}),
					   seq({"apply", "selector", "ci:a", "ci:b"}));
	double prev_ll = -1e300;
	train_ibm1(pairs, 20,
			   [&](int, const TranslationTable &table, double ll) {
				   for (const auto &[p, row] : table.t) {
					   double sum = 0.0;
					   for (const auto &[c, v] : row) sum += v;
					   pass = pass && std::abs(sum - 1.0) <= 1e-9;
				   }
				   pass = pass && ll >= prev_ll - 1e-9;
				   prev_ll = ll;
			   });
	// deterministic co-occurrence corpus drives t to 1
	std::vector<TokenPair> forced;
	for (int i = 0; i < 4; ++i) forced.emplace_back(seq({"mi:w"}), seq({"ci:w"}));
	TranslationTable t = train_ibm1(forced, 10);
	pass = pass && std::abs(t.prob("mi:w", "ci:w") - 1.0) <= 1e-9;
	verdict("EM row-stochastic, non-decreasing likelihood, forced t=1", pass);
}

TEST_CASE("acceptance: rule probabilities are relative frequencies") {
	bool pass = true;
	// hand-built 2+2 ambiguous corpus, aligned by its own EM run
	Corpus sigma;
	for (int i = 0; i < 2; ++i)
		sigma.examples.push_back(
			ParallelExample{"ws" + std::to_string(i), MathTree::leaf("mi", "σ"),
							MathTree::leaf("ci", "Weierstrass Sigma"), "", ""});
	for (int i = 0; i < 2; ++i)
		sigma.examples.push_back(ParallelExample{"id" + std::to_string(i),
												 MathTree::leaf("mi", "σ"),
												 MathTree::leaf("ci", "σ"), "",
												 ""});
	RuleSet sigma_rules = extract_rules(sigma, align_all(sigma, 10));
	pass = pass && sigma_rules.translation_rules.size() == 2;
	for (const TranslationRule &r : sigma_rules.translation_rules)
		pass = pass && r.probability == 0.5;

	// per-lhs normalization on a large extracted rule set
	Corpus corpus = generate_synthetic_corpus(trend_spec(), 91);
	RuleSet rules = extract_rules(corpus, align_all(corpus, 10));
	std::map<std::string, double> mass;
	for (const TranslationRule &r : rules.translation_rules)
		mass[r.lhs.to_string()] += r.probability;
	for (const auto &[lhs, m] : mass) pass = pass && std::abs(m - 1.0) <= 1e-9;
	verdict("rule probabilities: 0.5/0.5 on 2+2 corpus, per-lhs sums 1", pass);
}

TEST_CASE("acceptance: one positive and n-1 negatives per occurrence") {
	bool pass = true;
	Corpus corpus = generate_synthetic_corpus(trend_spec(), 92);
	std::map<std::string, Alignment> alignments = align_all(corpus, 10);
	AmbiguityTable table = collect_ambiguities(corpus, alignments);
	FeatureVocab vocab;
	std::vector<Instance> instances =
		build_instances(corpus, alignments, table, vocab);
	pass = pass && !instances.empty();
	std::map<std::pair<std::string, NodeId>, std::pair<int, int>> groups;
	std::map<std::pair<std::string, NodeId>, std::string> names;
	for (const Instance &inst : instances) {
		auto &g = groups[{inst.example_id, inst.node}];
		(inst.label == 1 ? g.first : g.second) += 1;
	}
	for (const ParallelExample &ex : corpus.examples)
		for (const MiOccurrence &occ : find_mi_occurrences(
				 ex.id, ex.presentation, ex.category, ex.description))
			if (table.names.count(occ.name)) names[{ex.id, occ.node}] = occ.name;
	for (const auto &[key, g] : groups) {
		auto it = names.find(key);
		pass = pass && it != names.end();
		if (it == names.end()) continue;
		int n = static_cast<int>(table.names.at(it->second).candidates.size());
		pass = pass && g.first == 1 && g.second == n - 1;
	}
	verdict("instances: exactly 1 positive and n-1 negatives per occurrence",
			pass);
}

TEST_CASE("acceptance: cross-validated accuracy ordering") {
	Corpus corpus = generate_synthetic_corpus(trend_spec(), 93);
	SvmConfig cfg;
	cfg.epochs = 15;
	cfg.seed = 29;
	CrossValReport report = cross_validate(corpus, 10, 29, cfg, 10);
	std::cout << "  with_text=" << report.with_text.mean
			  << " without_text=" << report.without_text.mean
			  << " most_frequent=" << report.most_frequent.mean << "\n";
	bool pass = report.with_text.mean >= report.most_frequent.mean + 0.05 &&
				report.without_text.mean >= report.most_frequent.mean;
	verdict("10-fold ordering: with_text beats most_frequent by >= 5 points, "
			"without_text >= most_frequent",
			pass);
}

TEST_CASE("acceptance: disambiguation lowers corpus TEDR") {
	Corpus corpus = generate_synthetic_corpus(trend_spec(), 94);
	std::map<std::string, Alignment> alignments = align_all(corpus, 10);
	RuleSet rules = extract_rules(corpus, alignments);
	AmbiguityTable table = collect_ambiguities(corpus, alignments);
	FeatureVocab vocab;
	std::vector<Instance> instances =
		build_instances(corpus, alignments, table, vocab);
	SvmConfig cfg;
	cfg.epochs = 15;
	cfg.seed = 31;
	DisambigModel model = train(instances, vocab, table, cfg);

	std::map<std::string, MathTree> references;
	for (const ParallelExample &ex : corpus.examples)
		references.emplace(ex.id, ex.content);
	EvalReport with = evaluate_corpus(translate_corpus(corpus, rules, &model),
									  references);
	EvalReport without = evaluate_corpus(translate_corpus(corpus, rules, nullptr),
										 references);
	std::cout << "  tedr with=" << with.mean_tedr
			  << " without=" << without.mean_tedr << "\n";
	bool pass = with.mean_tedr <= without.mean_tedr - 0.002;
	verdict("mean TEDR with disambiguation <= without - 0.002", pass);
}

TEST_CASE("acceptance: decoder score matches exhaustive enumeration") {
	rng r(4018);
	bool pass = true;
	for (int trial = 0; trial < 250; ++trial) {
		MathTree pres = random_presentation_tree(r, 8);
		if (node_count(pres) > 8) continue;
		RuleSet rules = random_rules(r);
		TranslationResult result = translate(pres, rules, nullptr);
		std::vector<double> all =
			enumerate_derivations(pres, rules, pres.root());
		double best = -1e300;
		for (double v : all) best = std::max(best, v);
		if (std::abs(result.derivation.log_score - best) > 1e-9) {
			pass = false;
			MESSAGE("decoder " << result.derivation.log_score << " vs oracle "
							   << best << " on " << serialize(pres));
		}
	}
	verdict("decoder DP equals exhaustive derivation maximum", pass);
}

TEST_CASE("acceptance: CLI reruns are byte-identical") {
	namespace fs = std::filesystem;
	fs::path dir = work_dir();
	fs::path spec = dir / "spec.json";
	write_file_atomic(spec, spec_json());

	auto p = [&](const std::string &name) { return (dir / name).string(); };
	bool pass = true;
	for (const char *round : {"1", "2"}) {
		std::string s = round;
		pass = pass &&
			   run_cli("gen-synthetic --synthetic-spec " + spec.string() +
					   " --out " + p("corpus" + s + ".jsonl") + " --seed 5");
		pass = pass &&
			   run_cli("train --corpus " + p("corpus" + s + ".jsonl") +
					   " --rules " + p("rules" + s + ".jsonl") + " --model " +
					   p("model" + s + ".json") + " --table " +
					   p("table" + s + ".tsv") + " --occurrences " +
					   p("occ" + s + ".jsonl") + " --seed 7 --epochs 10");
		pass = pass &&
			   run_cli("translate --corpus " + p("corpus" + s + ".jsonl") +
					   " --rules " + p("rules" + s + ".jsonl") + " --model " +
					   p("model" + s + ".json") + " --out " +
					   p("out" + s + ".jsonl"));
		pass = pass &&
			   run_cli("evaluate --out " + p("out" + s + ".jsonl") +
					   " --corpus " + p("corpus" + s + ".jsonl") + " --report " +
					   p("report" + s + ".json") + " --model " +
					   p("model" + s + ".json") + " --occurrences " +
					   p("occ" + s + ".jsonl"));
		pass = pass &&
			   run_cli("crossval --corpus " + p("corpus" + s + ".jsonl") +
					   " --folds 10 --seed 7 --epochs 5 --report " +
					   p("cv" + s + ".json"));
	}
	REQUIRE_MESSAGE(pass, "a CLI command exited nonzero");
	for (const char *base :
		 {"corpus", "rules", "model", "table", "occ", "out", "report", "cv"}) {
		std::string b = base;
		std::string ext = b == "table" ? ".tsv"
						  : (b == "model" || b == "report" || b == "cv")
							  ? ".json"
							  : ".jsonl";
		bool same = read_file(dir / (b + "1" + ext)) ==
					read_file(dir / (b + "2" + ext));
		if (!same) MESSAGE("artifact differs across reruns: " << b);
		pass = pass && same;
	}
	verdict("every CLI artifact is byte-identical across reruns", pass);
}
