#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "enrich/decoder.hpp"
#include "enrich/errors.hpp"

#include <cmath>

using namespace enrich;

namespace {

TranslationRule make_rule(const std::string &lhs, const std::string &rhs,
						  double probability) {
	TranslationRule r;
	r.lhs = RulePattern::parse(lhs);
	r.rhs = RulePattern::parse(rhs);
	r.count = 1;
	r.probability = probability;
	return r;
}

MathTree argument_presentation() {
	return MathTree::branch(
		"mrow", {MathTree::branch(
					"msub", {MathTree::leaf("mi", "S"),
							 MathTree::branch("msub",
											  {MathTree::leaf("mi", "j"),
											   MathTree::leaf("mi", "i")})})});
}

MathTree argument_content() {
	return MathTree::branch(
		"apply",
		{MathTree::leaf("selector"), MathTree::leaf("ci", "S"),
		 MathTree::branch("apply",
						  {MathTree::leaf("selector"), MathTree::leaf("ci", "j"),
						   MathTree::leaf("ci", "i")})});
}

// small ambiguous-corpus model: cue phrases decide between the two sigmas
DisambigModel sigma_model() {
	Corpus corpus;
	std::map<std::string, Alignment> als;
	auto add = [&](const std::string &gold, const std::string &desc) {
		std::string id = "m" + std::to_string(corpus.size());
		corpus.examples.push_back(ParallelExample{
			id, MathTree::branch("mrow", {MathTree::leaf("mi", "σ")}),
			MathTree::leaf("ci", gold), "", desc});
		Alignment a;
		a.links.push_back(AlignmentLink{1, 0});
		als[id] = a;
	};
	for (int i = 0; i < 8; ++i) {
		add("Weierstrass Sigma", "the weierstrass elliptic function");
		add("Divisor Sigma", "the sum of divisors function");
	}
	AmbiguityTable table = collect_ambiguities(corpus, als);
	FeatureVocab vocab;
	std::vector<Instance> instances = build_instances(corpus, als, table, vocab);
	SvmConfig cfg;
	cfg.epochs = 30;
	cfg.seed = 17;
	return train(instances, vocab, table, cfg);
}

} // namespace

TEST_CASE("single lexical rule translates a leaf") {
	RuleSet rules;
	rules.translation_rules.push_back(make_rule("mi:\"w\"", "ci:\"w\"", 1.0));
	TranslationResult r = translate(MathTree::leaf("mi", "w"), rules, nullptr);
	CHECK(r.content == MathTree::leaf("ci", "w"));
	CHECK(r.derivation.log_score == 0.0);
	REQUIRE(r.derivation.steps.size() == 1);
	CHECK(r.derivation.steps[0].rule == "mi:\"w\" -> ci:\"w\"");
}

TEST_CASE("generalized rules decode the argument tree") {
	RuleSet rules;
	rules.translation_rules.push_back(make_rule("mrow($1)", "$1", 1.0));
	rules.translation_rules.push_back(
		make_rule("msub($1,$2)", "apply(selector,$1,$2)", 1.0));
	for (const char *n : {"S", "j", "i"})
		rules.translation_rules.push_back(make_rule(
			std::string("mi:\"") + n + "\"", std::string("ci:\"") + n + "\"",
			1.0));
	TranslationResult r = translate(argument_presentation(), rules, nullptr);
	CHECK(r.content == argument_content());
	CHECK(r.derivation.log_score == doctest::Approx(0.0));
	// every presentation node is covered by some step
	CHECK(r.derivation.covered_by.size() == argument_presentation().size());
	for (std::size_t cover : r.derivation.covered_by)
		CHECK(cover < r.derivation.steps.size());
}

TEST_CASE("the most probable rule wins without a model") {
	RuleSet rules;
	rules.translation_rules.push_back(
		make_rule("mi:\"σ\"", "ci:\"Weierstrass Sigma\"", 0.7));
	rules.translation_rules.push_back(
		make_rule("mi:\"σ\"", "ci:\"Divisor Sigma\"", 0.3));
	TranslationResult r = translate(MathTree::leaf("mi", "σ"), rules, nullptr);
	CHECK(r.content == MathTree::leaf("ci", "Weierstrass Sigma"));
	CHECK(r.derivation.log_score == doctest::Approx(std::log(0.7)));
}

TEST_CASE("log score is the sum over the derivation") {
	RuleSet rules;
	rules.translation_rules.push_back(make_rule("mrow($1,$2)", "apply($1,$2)", 0.5));
	rules.translation_rules.push_back(make_rule("mi:\"a\"", "ci:\"a\"", 0.25));
	rules.translation_rules.push_back(make_rule("mi:\"b\"", "ci:\"b\"", 0.125));
	MathTree pres = MathTree::branch(
		"mrow", {MathTree::leaf("mi", "a"), MathTree::leaf("mi", "b")});
	TranslationResult r = translate(pres, rules, nullptr);
	CHECK(r.derivation.log_score ==
		  doctest::Approx(std::log(0.5) + std::log(0.25) + std::log(0.125)));
}

TEST_CASE("fallback translation is structure preserving") {
	RuleSet empty;
	SUBCASE("mi leaf") {
		TranslationResult r = translate(MathTree::leaf("mi", "w"), empty, nullptr);
		CHECK(r.content == MathTree::leaf("ci", "w"));
		CHECK(r.derivation.log_score == 0.0);
		CHECK(r.derivation.steps[0].rule == "fallback-leaf");
	}
	SUBCASE("mn leaf becomes cn") {
		TranslationResult r = translate(MathTree::leaf("mn", "42"), empty, nullptr);
		CHECK(r.content == MathTree::leaf("cn", "42"));
	}
	SUBCASE("internal node becomes a generic apply") {
		MathTree pres = MathTree::branch(
			"msub", {MathTree::leaf("mi", "S"), MathTree::leaf("mi", "i")});
		TranslationResult r = translate(pres, empty, nullptr);
		CHECK(r.content ==
			  MathTree::branch("apply", {MathTree::leaf("ci", "msub"),
										 MathTree::leaf("ci", "S"),
										 MathTree::leaf("ci", "i")}));
		CHECK(r.derivation.log_score == 0.0);
	}
}

TEST_CASE("partial rule coverage still uses the rules that match") {
	RuleSet rules;
	rules.translation_rules.push_back(
		make_rule("msub($1,$2)", "apply(selector,$1,$2)", 1.0));
	MathTree pres = MathTree::branch(
		"msub", {MathTree::leaf("mi", "S"), MathTree::leaf("mi", "i")});
	TranslationResult r = translate(pres, rules, nullptr);
	// the msub rule fires, the unseen leaves fall back to identity
	CHECK(r.content ==
		  MathTree::branch("apply", {MathTree::leaf("selector"),
									 MathTree::leaf("ci", "S"),
									 MathTree::leaf("ci", "i")}));
}

TEST_CASE("segmentation rules recombine child translations") {
	RuleSet rules;
	rules.translation_rules.push_back(make_rule("mi:\"a\"", "ci:\"a\"", 1.0));
	rules.translation_rules.push_back(make_rule("mi:\"b\"", "ci:\"b\"", 1.0));
	SegmentationRule seg;
	seg.parent_element = "mrow";
	seg.arity = 2;
	seg.split = {{0}, {1}};
	seg.recombination = RulePattern::parse("apply($1,$2)");
	seg.count = 1;
	seg.probability = 1.0;
	rules.segmentation_rules.push_back(seg);
	MathTree pres = MathTree::branch(
		"mrow", {MathTree::leaf("mi", "a"), MathTree::leaf("mi", "b")});
	TranslationResult r = translate(pres, rules, nullptr);
	CHECK(r.content == MathTree::branch("apply", {MathTree::leaf("ci", "a"),
												  MathTree::leaf("ci", "b")}));
}

TEST_CASE("the disambiguator overrides the rule preference") {
	DisambigModel model = sigma_model();
	RuleSet rules;
	rules.translation_rules.push_back(make_rule("mrow($1)", "$1", 1.0));
	rules.translation_rules.push_back(
		make_rule("mi:\"σ\"", "ci:\"Weierstrass Sigma\"", 0.8));
	rules.translation_rules.push_back(
		make_rule("mi:\"σ\"", "ci:\"Divisor Sigma\"", 0.2));
	MathTree pres = MathTree::branch("mrow", {MathTree::leaf("mi", "σ")});

	TranslationContext divisor_ctx{"", "the sum of divisors function"};
	TranslationResult with = translate(pres, rules, &model, divisor_ctx);
	CHECK(with.content == MathTree::leaf("ci", "Divisor Sigma"));
	REQUIRE(with.derivation.mi_overrides.size() == 1);
	CHECK(with.derivation.mi_overrides.begin()->second == "Divisor Sigma");

	// without the model, the higher-probability rule decides
	TranslationResult without = translate(pres, rules, nullptr);
	CHECK(without.content == MathTree::leaf("ci", "Weierstrass Sigma"));

	// the opposite context flips the override
	TranslationContext weier_ctx{"", "the weierstrass elliptic function"};
	TranslationResult w = translate(pres, rules, &model, weier_ctx);
	CHECK(w.content == MathTree::leaf("ci", "Weierstrass Sigma"));
}

TEST_CASE("overrides cannot be bypassed by a lexical whole-tree rule") {
	DisambigModel model = sigma_model();
	RuleSet rules;
	// a fully lexical rule that would rewrite the whole mrow in one step
	rules.translation_rules.push_back(
		make_rule("mrow(mi:\"σ\")", "ci:\"Weierstrass Sigma\"", 1.0));
	rules.translation_rules.push_back(make_rule("mrow($1)", "$1", 0.5));
	MathTree pres = MathTree::branch("mrow", {MathTree::leaf("mi", "σ")});
	TranslationContext ctx{"", "the sum of divisors function"};
	TranslationResult r = translate(pres, rules, &model, ctx);
	CHECK(r.content == MathTree::leaf("ci", "Divisor Sigma"));
}

TEST_CASE("identifiers outside the ambiguity table are left to the rules") {
	DisambigModel model = sigma_model();
	RuleSet rules;
	rules.translation_rules.push_back(make_rule("mi:\"w\"", "ci:\"w\"", 1.0));
	TranslationResult r = translate(MathTree::leaf("mi", "w"), rules, &model);
	CHECK(r.content == MathTree::leaf("ci", "w"));
	CHECK(r.derivation.mi_overrides.empty());
}

TEST_CASE("translation is deterministic") {
	RuleSet rules;
	rules.translation_rules.push_back(make_rule("mrow($1)", "$1", 1.0));
	rules.translation_rules.push_back(
		make_rule("msub($1,$2)", "apply(selector,$1,$2)", 1.0));
	MathTree pres = argument_presentation();
	TranslationResult a = translate(pres, rules, nullptr);
	TranslationResult b = translate(pres, rules, nullptr);
	CHECK(a.content == b.content);
	CHECK(a.derivation.log_score == b.derivation.log_score);
}

TEST_CASE("translate_corpus reports one row per example") {
	Corpus corpus;
	corpus.examples.push_back(ParallelExample{
		"a", MathTree::leaf("mi", "w"), MathTree::leaf("ci", "w"), "", ""});
	corpus.examples.push_back(ParallelExample{
		"b", MathTree::leaf("mn", "3"), MathTree::leaf("cn", "3"), "", ""});
	RuleSet rules;
	rules.translation_rules.push_back(make_rule("mi:\"w\"", "ci:\"w\"", 1.0));
	std::vector<CorpusTranslation> out = translate_corpus(corpus, rules, nullptr);
	REQUIRE(out.size() == 2);
	CHECK(out[0].id == "a");
	REQUIRE(out[0].content.has_value());
	CHECK(*out[0].content == MathTree::leaf("ci", "w"));
	CHECK(out[0].error.empty());
	REQUIRE(out[1].content.has_value());
	CHECK(*out[1].content == MathTree::leaf("cn", "3"));
}
