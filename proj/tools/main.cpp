#include "enrich/corpus.hpp"
#include "enrich/decoder.hpp"
#include "enrich/disambig.hpp"
#include "enrich/errors.hpp"
#include "enrich/eval.hpp"
#include "enrich/rules.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

using namespace enrich;
using nlohmann::json;

namespace {

struct RunConfig {
	std::string corpus;
	std::string rules;
	std::string model;
	std::string table;
	std::string occurrences;
	std::string out;
	std::string report;
	std::string synthetic_spec;
	int folds = 10;
	std::uint64_t seed = 1;
	int iterations = 10;
	double svm_c = 1.0;
	int epochs = 20;
	bool no_text_features = false;
	bool no_disambig = false;
};

json config_provenance(const RunConfig &cfg) {
	return {{"seed", cfg.seed},
			{"iterations", cfg.iterations},
			{"svm_c", cfg.svm_c},
			{"epochs", cfg.epochs},
			{"folds", cfg.folds},
			{"no_text_features", cfg.no_text_features},
			{"no_disambig", cfg.no_disambig}};
}

std::map<std::string, Alignment> align_corpus(const Corpus &corpus,
											  int iterations,
											  TranslationTable *table_out) {
	std::vector<TokenPair> pairs;
	for (const ParallelExample &ex : corpus.examples)
		pairs.emplace_back(linearize(ex.presentation), linearize(ex.content));
	TranslationTable table = train_ibm1(pairs, iterations);
	std::map<std::string, Alignment> alignments;
	for (std::size_t i = 0; i < corpus.size(); ++i)
		alignments[corpus.examples[i].id] = align_best(pairs[i], table);
	if (table_out) *table_out = std::move(table);
	return alignments;
}

int cmd_gen_synthetic(const RunConfig &cfg) {
	SyntheticSpec spec = load_synthetic_spec(cfg.synthetic_spec);
	Corpus corpus = generate_synthetic_corpus(spec, cfg.seed);
	save_corpus(corpus, cfg.out);
	std::cout << "wrote " << corpus.size() << " examples to " << cfg.out
			  << " (seed " << cfg.seed << ")\n";
	return 0;
}

int cmd_train(const RunConfig &cfg) {
	Corpus corpus = load_corpus(cfg.corpus);
	if (corpus.size() == 0) throw EmptyTrainingSet("corpus is empty");
	TranslationTable table;
	std::map<std::string, Alignment> alignments =
		align_corpus(corpus, cfg.iterations, &table);
	if (!cfg.table.empty()) save_table(table, cfg.table);

	RuleSet rules = extract_rules(corpus, alignments);
	save_rules(rules, cfg.rules);

	AmbiguityTable ambiguities = collect_ambiguities(corpus, alignments);
	FeatureVocab vocab;
	std::vector<Instance> instances =
		build_instances(corpus, alignments, ambiguities, vocab);

	SvmConfig svm{cfg.svm_c, cfg.epochs, cfg.seed};
	DisambigModel model;
	double train_acc = 1.0;
	if (!instances.empty()) {
		model = train(instances, vocab, ambiguities, svm, !cfg.no_text_features);
	} else {
		model.config = svm;
		model.with_text = !cfg.no_text_features;
	}

	std::vector<GoldOccurrence> gold;
	for (const ParallelExample &ex : corpus.examples) {
		for (const MiOccurrence &occ : find_mi_occurrences(
				 ex.id, ex.presentation, ex.category, ex.description)) {
			if (!ambiguities.names.count(occ.name)) continue;
			auto g = aligned_content(ex.content, alignments.at(ex.id), occ.node);
			if (g) gold.push_back(GoldOccurrence{occ, *g});
		}
	}
	if (!gold.empty())
		train_acc = accuracy(
			[&](const MiOccurrence &o) { return predict(model, o)[0].candidate; },
			gold);
	if (!cfg.occurrences.empty()) save_gold_occurrences(gold, cfg.occurrences);
	save_model(model, cfg.model);

	std::cout << "rules: " << rules.translation_rules.size() << " translation, "
			  << rules.segmentation_rules.size() << " segmentation\n"
			  << "ambiguous names: " << ambiguities.names.size() << "\n"
			  << "training accuracy: " << train_acc << "\n";
	return 0;
}

int cmd_translate(const RunConfig &cfg) {
	Corpus corpus = load_corpus(cfg.corpus);
	RuleSet rules = load_rules(cfg.rules);
	std::optional<DisambigModel> model;
	if (!cfg.no_disambig && !cfg.model.empty()) model = load_model(cfg.model);

	std::vector<CorpusTranslation> outputs =
		translate_corpus(corpus, rules, model ? &*model : nullptr);
	std::string text;
	for (const CorpusTranslation &t : outputs) {
		json rec = {{"id", t.id},
					{"content", t.content ? serialize(*t.content) : ""},
					{"score", t.content ? std::exp(t.log_score) : 0.0},
					{"failed", !t.content.has_value()}};
		text += rec.dump();
		text += '\n';
	}
	write_file_atomic(cfg.out, text);
	std::cout << "translated " << outputs.size() << " expressions to "
			  << cfg.out << "\n";
	return 0;
}

std::vector<CorpusTranslation> load_outputs(const std::string &path) {
	std::vector<CorpusTranslation> out;
	std::istringstream in(read_file(path));
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty()) continue;
		try {
			json rec = json::parse(line);
			CorpusTranslation t;
			t.id = rec.at("id").get<std::string>();
			if (!rec.value("failed", false))
				t.content = parse(rec.at("content").get<std::string>(),
								  Markup::content);
			t.log_score = std::log(std::max(rec.value("score", 1.0), 1e-300));
			out.push_back(std::move(t));
		} catch (const std::exception &e) {
			throw FormatError("output line " + std::to_string(line_no) + ": " +
							  e.what());
		}
	}
	return out;
}

int cmd_evaluate(const RunConfig &cfg) {
	std::vector<CorpusTranslation> outputs = load_outputs(cfg.out);
	Corpus refs = load_corpus(cfg.corpus);
	std::map<std::string, MathTree> references;
	for (const ParallelExample &ex : refs.examples)
		references.emplace(ex.id, ex.content);
	EvalReport report = evaluate_corpus(outputs, references);

	json per = json::array();
	for (const EvalReport::Example &ex : report.per_example)
		per.push_back({{"id", ex.id}, {"tedr", ex.tedr}, {"failed", ex.failed}});
	json doc = {{"per_example", per},
				{"mean_tedr", report.mean_tedr},
				{"n", report.per_example.size()},
				{"failures", report.failures},
				{"config", config_provenance(cfg)}};

	if (!cfg.model.empty() && !cfg.occurrences.empty()) {
		DisambigModel model = load_model(cfg.model);
		std::vector<GoldOccurrence> gold = load_gold_occurrences(cfg.occurrences);
		double acc = accuracy(
			[&](const MiOccurrence &o) { return predict(model, o)[0].candidate; },
			gold);
		doc["disambiguation_accuracy"] = acc;
		doc["disambiguation_n"] = gold.size();
	}
	write_file_atomic(cfg.report, doc.dump(2) + "\n");
	std::cout << "mean TEDR: " << report.mean_tedr << " over "
			  << report.per_example.size() << " expressions ("
			  << report.failures << " failed)\n";
	return 0;
}

int cmd_crossval(const RunConfig &cfg) {
	Corpus corpus = load_corpus(cfg.corpus);
	SvmConfig svm{cfg.svm_c, cfg.epochs, cfg.seed};
	CrossValReport report =
		cross_validate(corpus, cfg.folds, cfg.seed, svm, cfg.iterations);

	auto system_json = [](const CrossValSystem &sys) {
		return json{{"per_fold", sys.per_fold}, {"mean", sys.mean}};
	};
	json doc = {{"k", report.k},
				{"seed", report.seed},
				{"config", config_provenance(cfg)},
				{"with_text", system_json(report.with_text)},
				{"without_text", system_json(report.without_text)},
				{"most_frequent", system_json(report.most_frequent)}};
	write_file_atomic(cfg.report, doc.dump(2) + "\n");
	std::cout << "mean accuracy  with_text: " << report.with_text.mean
			  << "  without_text: " << report.without_text.mean
			  << "  most_frequent: " << report.most_frequent.mean << "\n";
	return 0;
}

// optional JSON config file; explicitly passed flags win
void apply_config_file(const std::string &path, CLI::App *cmd, RunConfig &cfg) {
	json doc;
	try {
		doc = json::parse(read_file(path));
	} catch (const std::exception &e) {
		throw FormatError("config " + path + ": " + e.what());
	}
	auto set_str = [&](const char *key, std::string &field, const char *flag) {
		CLI::Option *opt = cmd->get_option_no_throw(flag);
		if (doc.contains(key) && (!opt || opt->count() == 0))
			field = doc[key].get<std::string>();
	};
	auto set_num = [&](const char *key, auto &field, const char *flag) {
		CLI::Option *opt = cmd->get_option_no_throw(flag);
		if (doc.contains(key) && (!opt || opt->count() == 0))
			field = doc[key].get<std::decay_t<decltype(field)>>();
	};
	set_str("corpus", cfg.corpus, "--corpus");
	set_str("rules", cfg.rules, "--rules");
	set_str("model", cfg.model, "--model");
	set_str("table", cfg.table, "--table");
	set_str("occurrences", cfg.occurrences, "--occurrences");
	set_str("out", cfg.out, "--out");
	set_str("report", cfg.report, "--report");
	set_str("synthetic_spec", cfg.synthetic_spec, "--synthetic-spec");
	set_num("folds", cfg.folds, "--folds");
	set_num("seed", cfg.seed, "--seed");
	set_num("iterations", cfg.iterations, "--iterations");
	set_num("svm_c", cfg.svm_c, "--svm-c");
	set_num("epochs", cfg.epochs, "--epochs");
	set_num("no_text_features", cfg.no_text_features, "--no-text-features");
	set_num("no_disambig", cfg.no_disambig, "--no-disambig");
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"Presentation-to-Content MathML enrichment pipeline"};
	app.require_subcommand(1);
	RunConfig cfg;
	std::string config_file;

	auto add_common = [&](CLI::App *cmd) {
		cmd->add_option("--config", config_file, "JSON config file; flags win");
		cmd->add_option("--seed", cfg.seed, "random seed");
		return cmd;
	};

	CLI::App *train_cmd = add_common(app.add_subcommand(
		"train", "extract rules and train the disambiguation model"));
	train_cmd->add_option("--corpus", cfg.corpus, "training corpus (JSON lines)");
	train_cmd->add_option("--rules", cfg.rules, "rule file to write");
	train_cmd->add_option("--model", cfg.model, "model file to write");
	train_cmd->add_option("--table", cfg.table, "translation table to write");
	train_cmd->add_option("--occurrences", cfg.occurrences,
						  "gold occurrence dump to write");
	train_cmd->add_option("--iterations", cfg.iterations, "EM iterations");
	train_cmd->add_option("--svm-c", cfg.svm_c, "SVM regularization C");
	train_cmd->add_option("--epochs", cfg.epochs, "SVM training epochs");
	train_cmd->add_flag("--no-text-features", cfg.no_text_features,
						"train without category/n-gram features");

	CLI::App *translate_cmd = add_common(app.add_subcommand(
		"translate", "translate Presentation MathML to Content MathML"));
	translate_cmd->add_option("--corpus", cfg.corpus, "input corpus");
	translate_cmd->add_option("--rules", cfg.rules, "rule file");
	translate_cmd->add_option("--model", cfg.model, "disambiguation model");
	translate_cmd->add_flag("--no-disambig", cfg.no_disambig,
							"rule probabilities only");
	translate_cmd->add_option("--out", cfg.out, "output file to write");

	CLI::App *evaluate_cmd = add_common(
		app.add_subcommand("evaluate", "score translations against references"));
	evaluate_cmd->add_option("--out", cfg.out, "generated translations");
	evaluate_cmd->add_option("--corpus", cfg.corpus, "reference corpus");
	evaluate_cmd->add_option("--report", cfg.report, "report file to write");
	evaluate_cmd->add_option("--model", cfg.model,
							 "model for the accuracy report");
	evaluate_cmd->add_option("--occurrences", cfg.occurrences,
							 "gold occurrences for the accuracy report");

	CLI::App *crossval_cmd = add_common(app.add_subcommand(
		"crossval", "k-fold three-system disambiguation comparison"));
	crossval_cmd->add_option("--corpus", cfg.corpus, "corpus");
	crossval_cmd->add_option("--folds", cfg.folds, "fold count");
	crossval_cmd->add_option("--iterations", cfg.iterations, "EM iterations");
	crossval_cmd->add_option("--svm-c", cfg.svm_c, "SVM regularization C");
	crossval_cmd->add_option("--epochs", cfg.epochs, "SVM training epochs");
	crossval_cmd->add_option("--report", cfg.report, "report file to write");

	CLI::App *gen_cmd = add_common(app.add_subcommand(
		"gen-synthetic", "generate a synthetic ambiguous corpus"));
	gen_cmd->add_option("--synthetic-spec", cfg.synthetic_spec,
						"synthetic spec (JSON)");
	gen_cmd->add_option("--out", cfg.out, "corpus file to write");

	CLI11_PARSE(app, argc, argv);

	try {
		CLI::App *cmd = app.get_subcommands().front();
		if (!config_file.empty()) apply_config_file(config_file, cmd, cfg);
		if (const char *env = std::getenv("MATHML_ENRICH_SEED"))
			cfg.seed = std::strtoull(env, nullptr, 10);

		if (cmd == train_cmd) return cmd_train(cfg);
		if (cmd == translate_cmd) return cmd_translate(cfg);
		if (cmd == evaluate_cmd) return cmd_evaluate(cfg);
		if (cmd == crossval_cmd) return cmd_crossval(cfg);
		if (cmd == gen_cmd) return cmd_gen_synthetic(cfg);
	} catch (const error &e) {
		std::cerr << e.what() << "\n";
		return 1;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
	return 0;
}
