#include "enrich/disambig.hpp"
#include "enrich/errors.hpp"
#include "enrich/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace enrich {

using nlohmann::json;

// ------------------------------------------------------------- occurrences

std::vector<MiOccurrence> find_mi_occurrences(const std::string &example_id,
											  const MathTree &presentation,
											  const std::string &category,
											  const std::string &description) {
	std::vector<MiOccurrence> out;
	std::vector<std::string> tokens = tokenize_text(description);
	for (NodeId id = 0; id < presentation.size(); ++id) {
		const MathNode &n = presentation.node(id);
		if (n.element != "mi" || !n.children.empty()) continue;
		MiOccurrence occ;
		occ.example_id = example_id;
		occ.node = id;
		occ.name = n.text;
		occ.category = category;
		occ.description_tokens = tokens;
		occ.only_child = true;
		if (n.parent) {
			const MathNode &parent = presentation.node(*n.parent);
			occ.parent_element = parent.element;
			occ.only_child = parent.children.size() == 1;
			auto pos = std::find(parent.children.begin(), parent.children.end(), id);
			std::size_t i = static_cast<std::size_t>(pos - parent.children.begin());
			if (i > 0) {
				const MathNode &prev = presentation.node(parent.children[i - 1]);
				occ.preceded_by_mo = prev.element == "mo";
			}
			if (i + 1 < parent.children.size()) {
				const MathNode &next = presentation.node(parent.children[i + 1]);
				occ.followed_by_mo = next.element == "mo";
				occ.followed_by_function_application =
					next.element == "mo" && next.text == function_application_text();
			}
		}
		out.push_back(std::move(occ));
	}
	return out;
}

std::optional<std::string> aligned_content(const MathTree &content,
										   const Alignment &alignment,
										   NodeId presentation_node) {
	for (const AlignmentLink &l : alignment.links) {
		if (l.presentation != presentation_node) continue;
		const MathNode &n = content.node(l.content);
		if (n.element == "ci" && n.children.empty()) return n.text;
	}
	return std::nullopt;
}

// --------------------------------------------------------- ambiguity table

int AmbiguityEntry::count_of(const std::string &candidate) const {
	for (const auto &[c, n] : candidates)
		if (c == candidate) return n;
	return 0;
}

bool AmbiguityEntry::has(const std::string &candidate) const {
	for (const auto &[c, n] : candidates)
		if (c == candidate) return true;
	return false;
}

AmbiguityTable collect_ambiguities(
	const Corpus &corpus, const std::map<std::string, Alignment> &alignments) {
	std::map<std::string, AmbiguityEntry> all;
	for (const ParallelExample &ex : corpus.examples) {
		auto al = alignments.find(ex.id);
		if (al == alignments.end())
			throw MissingAlignment("no alignment for example '" + ex.id + "'");
		for (const MiOccurrence &occ : find_mi_occurrences(
				 ex.id, ex.presentation, ex.category, ex.description)) {
			auto gold = aligned_content(ex.content, al->second, occ.node);
			if (!gold) continue;
			AmbiguityEntry &entry = all[occ.name];
			bool found = false;
			for (auto &[c, n] : entry.candidates) {
				if (c == *gold) {
					++n;
					found = true;
				}
			}
			if (!found) entry.candidates.emplace_back(*gold, 1);
		}
	}
	AmbiguityTable table;
	for (auto &[name, entry] : all)
		if (entry.candidates.size() >= 2) table.names[name] = std::move(entry);
	return table;
}

// ----------------------------------------------------------------- features

int FeatureVocab::intern(const std::string &name) {
	auto it = index.find(name);
	if (it != index.end()) return it->second;
	int id = static_cast<int>(names.size());
	index[name] = id;
	names.push_back(name);
	is_text.push_back(name.rfind("t:", 0) == 0);
	return id;
}

std::optional<int> FeatureVocab::find(const std::string &name) const {
	auto it = index.find(name);
	if (it == index.end()) return std::nullopt;
	return it->second;
}

namespace {

// split camelCase and hyphenated compounds before tokenizing
std::vector<std::string> relation_tokens(const std::string &s) {
	std::string spaced;
	for (std::size_t i = 0; i < s.size(); ++i) {
		unsigned char c = static_cast<unsigned char>(s[i]);
		if (i > 0 && std::isupper(c) &&
			std::islower(static_cast<unsigned char>(s[i - 1])))
			spaced += ' ';
		spaced += s[i];
	}
	return tokenize_text(spaced);
}

std::vector<std::string> feature_names(const MiOccurrence &occ,
									   const std::string &candidate) {
	std::vector<std::string> out;
	const std::string cj = "|c=" + candidate;
	out.push_back("c:cand" + cj);
	out.push_back("p:name=" + occ.name + cj);
	out.push_back("p:parent=" + occ.parent_element + cj);
	if (occ.only_child) out.push_back("p:only_child" + cj);
	if (occ.preceded_by_mo) out.push_back("p:prec_mo" + cj);
	if (occ.followed_by_mo) out.push_back("p:foll_mo" + cj);
	if (occ.followed_by_function_application) out.push_back("p:foll_fa" + cj);
	if (!occ.category.empty()) {
		const char *rel = "not_contains";
		switch (category_relation(occ.category, candidate)) {
			case CategoryRelation::same: rel = "same"; break;
			case CategoryRelation::contains: rel = "contains"; break;
			case CategoryRelation::not_contains: break;
		}
		out.push_back(std::string("t:cat=") + rel + cj);
	}
	for (int n = 1; n <= 3; ++n) {
		for (const std::string &g : ngrams(occ.description_tokens, n))
			out.push_back("t:" + std::to_string(n) + "g=" + g + cj);
	}
	std::sort(out.begin(), out.end());
	out.erase(std::unique(out.begin(), out.end()), out.end());
	return out;
}

} // namespace

CategoryRelation category_relation(const std::string &category,
								   const std::string &candidate) {
	std::vector<std::string> cat = relation_tokens(category);
	std::vector<std::string> cand = relation_tokens(candidate);
	std::set<std::string> cat_set(cat.begin(), cat.end());
	std::set<std::string> cand_set(cand.begin(), cand.end());
	if (!cat_set.empty() && cat_set == cand_set) return CategoryRelation::same;
	for (const std::string &t : cand_set)
		if (cat_set.count(t)) return CategoryRelation::contains;
	return CategoryRelation::not_contains;
}

SparseVec extract_features(const MiOccurrence &occ, const std::string &candidate,
						   FeatureVocab &vocab, FeatureMode mode) {
	SparseVec vec;
	for (const std::string &name : feature_names(occ, candidate)) {
		if (mode == FeatureMode::train) {
			vec.emplace_back(vocab.intern(name), 1.0);
		} else if (auto id = vocab.find(name)) {
			vec.emplace_back(*id, 1.0);
		}
	}
	std::sort(vec.begin(), vec.end());
	return vec;
}

SparseVec extract_features(const MiOccurrence &occ, const std::string &candidate,
						   const FeatureVocab &vocab) {
	SparseVec vec;
	for (const std::string &name : feature_names(occ, candidate))
		if (auto id = vocab.find(name)) vec.emplace_back(*id, 1.0);
	std::sort(vec.begin(), vec.end());
	return vec;
}

// ---------------------------------------------------------------- instances

std::vector<Instance> build_instances(
	const Corpus &corpus, const std::map<std::string, Alignment> &alignments,
	const AmbiguityTable &table, FeatureVocab &vocab) {
	std::vector<Instance> out;
	for (const ParallelExample &ex : corpus.examples) {
		auto al = alignments.find(ex.id);
		if (al == alignments.end())
			throw MissingAlignment("no alignment for example '" + ex.id + "'");
		for (const MiOccurrence &occ : find_mi_occurrences(
				 ex.id, ex.presentation, ex.category, ex.description)) {
			auto entry = table.names.find(occ.name);
			if (entry == table.names.end()) continue;
			auto gold = aligned_content(ex.content, al->second, occ.node);
			if (!gold) continue;
			if (!entry->second.has(*gold))
				throw GoldCandidateMissing("gold '" + *gold + "' for mi '" +
										   occ.name + "' in example '" + ex.id +
										   "' is not a known candidate");
			for (const auto &[cand, cnt] : entry->second.candidates) {
				Instance inst;
				inst.features =
					extract_features(occ, cand, vocab, FeatureMode::train);
				inst.label = cand == *gold ? 1 : -1;
				inst.example_id = ex.id;
				inst.node = occ.node;
				inst.candidate = cand;
				out.push_back(std::move(inst));
			}
		}
	}
	return out;
}

// ----------------------------------------------------------------- training

namespace {

double dot(const std::vector<double> &w, const SparseVec &x) {
	double s = 0.0;
	for (const auto &[i, v] : x) s += w[static_cast<std::size_t>(i)] * v;
	return s;
}

double hinge_objective(const std::vector<double> &w, double b, double lambda,
					   const std::vector<const SparseVec *> &xs,
					   const std::vector<int> &ys) {
	double norm2 = 0.0;
	for (double v : w) norm2 += v * v;
	double loss = 0.0;
	for (std::size_t i = 0; i < xs.size(); ++i)
		loss += std::max(0.0, 1.0 - ys[i] * (dot(w, *xs[i]) + b));
	return 0.5 * lambda * norm2 + loss / static_cast<double>(xs.size());
}

} // namespace

DisambigModel train(const std::vector<Instance> &instances,
					const FeatureVocab &vocab, const AmbiguityTable &table,
					const SvmConfig &config, bool with_text) {
	if (instances.empty()) throw EmptyTrainingSet("no training instances");
	bool has_pos = false, has_neg = false;
	for (const Instance &inst : instances) {
		has_pos = has_pos || inst.label > 0;
		has_neg = has_neg || inst.label < 0;
	}
	if (!has_pos || !has_neg)
		throw DegenerateTrainingSet("training data contains a single class");

	const std::size_t n = instances.size();
	const std::size_t dim = vocab.names.size();
	const double lambda = 1.0 / (config.C * static_cast<double>(n));

	// text features are masked (not retrained out of the vocabulary) so the
	// presentation-feature indices stay identical across ablations
	std::vector<SparseVec> masked;
	std::vector<const SparseVec *> xs(n);
	std::vector<int> ys(n);
	if (!with_text) masked.reserve(n);
	for (std::size_t i = 0; i < n; ++i) {
		ys[i] = instances[i].label;
		if (with_text) {
			xs[i] = &instances[i].features;
		} else {
			SparseVec v;
			for (const auto &[idx, val] : instances[i].features)
				if (!vocab.is_text[static_cast<std::size_t>(idx)])
					v.emplace_back(idx, val);
			masked.push_back(std::move(v));
			xs[i] = &masked.back();
		}
	}

	// Pegasos-style subgradient descent with per-epoch shuffling, projection
	// onto the 1/sqrt(lambda) ball, and Polyak averaging
	std::vector<double> w(dim, 0.0), wavg(dim, 0.0);
	double b = 0.0, bavg = 0.0;
	std::size_t t = 0;
	std::vector<std::size_t> order(n);
	for (std::size_t i = 0; i < n; ++i) order[i] = i;

	DisambigModel model;
	for (int epoch = 1; epoch <= config.epochs; ++epoch) {
		rng r(config.seed + static_cast<std::uint64_t>(epoch) * 0x9e3779b9ull);
		r.shuffle(order);
		for (std::size_t idx : order) {
			++t;
			const double eta =
				1.0 / (lambda * (static_cast<double>(t) + static_cast<double>(n)));
			const double y = ys[idx];
			const bool violated = y * (dot(w, *xs[idx]) + b) < 1.0;
			const double scale = 1.0 - eta * lambda;
			for (double &v : w) v *= scale;
			if (violated) {
				for (const auto &[i, v] : *xs[idx])
					w[static_cast<std::size_t>(i)] += eta * y * v;
				b += eta * y * 0.1;
			}
			double norm2 = 0.0;
			for (double v : w) norm2 += v * v;
			const double radius2 = 1.0 / lambda;
			if (norm2 > radius2) {
				const double shrink = std::sqrt(radius2 / norm2);
				for (double &v : w) v *= shrink;
			}
			const double a = 1.0 / static_cast<double>(t);
			for (std::size_t i = 0; i < dim; ++i)
				wavg[i] += (w[i] - wavg[i]) * a;
			bavg += (b - bavg) * a;
		}
		model.epoch_objectives.push_back(
			hinge_objective(wavg, bavg, lambda, xs, ys));
	}

	model.weights = std::move(wavg);
	model.bias = bavg;
	model.vocab = vocab;
	model.table = table;
	model.most_frequent = most_frequent_baseline(table);
	model.config = config;
	model.with_text = with_text;
	return model;
}

std::vector<Prediction> predict(const DisambigModel &model,
								const MiOccurrence &occ) {
	auto entry = model.table.names.find(occ.name);
	if (entry == model.table.names.end())
		throw UnknownIdentifier("mi '" + occ.name +
								"' has no ambiguity entry in the model");
	std::vector<std::pair<Prediction, int>> scored;
	for (const auto &[cand, cnt] : entry->second.candidates) {
		SparseVec x = extract_features(occ, cand, model.vocab);
		double s = model.bias;
		for (const auto &[i, v] : x) {
			if (!model.with_text && model.vocab.is_text[static_cast<std::size_t>(i)])
				continue;
			s += model.weights[static_cast<std::size_t>(i)] * v;
		}
		scored.push_back({Prediction{cand, s}, cnt});
	}
	std::stable_sort(scored.begin(), scored.end(),
					 [](const auto &a, const auto &b) {
						 if (a.first.score != b.first.score)
							 return a.first.score > b.first.score;
						 if (a.second != b.second) return a.second > b.second;
						 return a.first.candidate < b.first.candidate;
					 });
	std::vector<Prediction> out;
	for (auto &[p, cnt] : scored) out.push_back(std::move(p));
	return out;
}

std::map<std::string, std::string> most_frequent_baseline(
	const AmbiguityTable &table) {
	std::map<std::string, std::string> out;
	for (const auto &[name, entry] : table.names) {
		std::string best;
		int best_count = -1;
		for (const auto &[cand, cnt] : entry.candidates) {
			if (cnt > best_count || (cnt == best_count && cand < best)) {
				best = cand;
				best_count = cnt;
			}
		}
		out[name] = best;
	}
	return out;
}

double accuracy(const std::function<std::string(const MiOccurrence &)> &top1,
				const std::vector<GoldOccurrence> &held_out) {
	if (held_out.empty()) throw EmptyEvalSet("no held-out occurrences");
	std::size_t correct = 0;
	for (const GoldOccurrence &g : held_out)
		if (top1(g.occurrence) == g.gold) ++correct;
	return static_cast<double>(correct) / static_cast<double>(held_out.size());
}

// ----------------------------------------------------------- cross-validate

CrossValReport cross_validate(const Corpus &corpus, int k, std::uint64_t seed,
							  const SvmConfig &config, int em_iterations) {
	// alignment is a corpus-level preprocessing step; folds partition the
	// classifier's training data
	std::vector<TokenPair> pairs;
	for (const ParallelExample &ex : corpus.examples)
		pairs.emplace_back(linearize(ex.presentation), linearize(ex.content));
	TranslationTable ttable = train_ibm1(pairs, em_iterations);
	std::map<std::string, Alignment> alignments;
	for (std::size_t i = 0; i < corpus.size(); ++i)
		alignments[corpus.examples[i].id] = align_best(pairs[i], ttable);

	FoldSplit folds = split_folds(corpus, k, seed);

	CrossValReport report;
	report.k = k;
	report.seed = seed;
	report.config = config;
	for (int fold = 0; fold < k; ++fold) {
		Corpus train_part, test_part;
		for (const ParallelExample &ex : corpus.examples) {
			(folds.assignments.at(ex.id) == fold ? test_part : train_part)
				.examples.push_back(ex);
		}
		AmbiguityTable table = collect_ambiguities(train_part, alignments);
		FeatureVocab vocab;
		std::vector<Instance> instances =
			build_instances(train_part, alignments, table, vocab);
		std::map<std::string, std::string> baseline =
			most_frequent_baseline(table);

		std::vector<GoldOccurrence> held_out;
		for (const ParallelExample &ex : test_part.examples) {
			const Alignment &al = alignments.at(ex.id);
			for (const MiOccurrence &occ : find_mi_occurrences(
					 ex.id, ex.presentation, ex.category, ex.description)) {
				if (!table.names.count(occ.name)) continue;
				auto gold = aligned_content(ex.content, al, occ.node);
				if (!gold) continue;
				held_out.push_back(GoldOccurrence{occ, *gold});
			}
		}
		if (held_out.empty()) {
			// fold without any ambiguous occurrence scores as fully correct
			report.with_text.per_fold.push_back(1.0);
			report.without_text.per_fold.push_back(1.0);
			report.most_frequent.per_fold.push_back(1.0);
			continue;
		}
		double baseline_acc = accuracy(
			[&](const MiOccurrence &o) { return baseline.at(o.name); },
			held_out);
		if (instances.empty()) {
			// nothing to train on: every system degrades to the baseline
			report.with_text.per_fold.push_back(baseline_acc);
			report.without_text.per_fold.push_back(baseline_acc);
			report.most_frequent.per_fold.push_back(baseline_acc);
			continue;
		}

		SvmConfig fold_config = config;
		fold_config.seed = config.seed + static_cast<std::uint64_t>(fold);
		DisambigModel with_text =
			train(instances, vocab, table, fold_config, true);
		DisambigModel without_text =
			train(instances, vocab, table, fold_config, false);
		report.with_text.per_fold.push_back(accuracy(
			[&](const MiOccurrence &o) { return predict(with_text, o)[0].candidate; },
			held_out));
		report.without_text.per_fold.push_back(accuracy(
			[&](const MiOccurrence &o) {
				return predict(without_text, o)[0].candidate;
			},
			held_out));
		report.most_frequent.per_fold.push_back(baseline_acc);
	}
	auto mean = [](CrossValSystem &sys) {
		double s = 0.0;
		for (double v : sys.per_fold) s += v;
		sys.mean = sys.per_fold.empty() ? 0.0 : s / sys.per_fold.size();
	};
	mean(report.with_text);
	mean(report.without_text);
	mean(report.most_frequent);
	return report;
}

// -------------------------------------------------------------- persistence

void save_model(const DisambigModel &model, const std::filesystem::path &path) {
	json weights = json::array();
	for (std::size_t i = 0; i < model.weights.size(); ++i)
		if (model.weights[i] != 0.0)
			weights.push_back(json::array({i, model.weights[i]}));
	json table = json::object();
	for (const auto &[name, entry] : model.table.names) {
		json cands = json::array();
		for (const auto &[c, n] : entry.candidates)
			cands.push_back(json::array({c, n}));
		table[name] = cands;
	}
	json doc = {{"vocabulary", model.vocab.names},
				{"weights", weights},
				{"bias", model.bias},
				{"ambiguity_table", table},
				{"most_frequent", model.most_frequent},
				{"config",
				 {{"C", model.config.C},
				  {"epochs", model.config.epochs},
				  {"seed", model.config.seed}}},
				{"with_text", model.with_text},
				{"epoch_objectives", model.epoch_objectives}};
	write_file_atomic(path, doc.dump(2) + "\n");
}

DisambigModel load_model(const std::filesystem::path &path) {
	json doc;
	try {
		doc = json::parse(read_file(path));
	} catch (const std::exception &e) {
		throw FormatError("model " + path.string() + ": " + e.what());
	}
	DisambigModel model;
	for (const json &name : doc.at("vocabulary")) {
		model.vocab.intern(name.get<std::string>());
	}
	model.weights.assign(model.vocab.names.size(), 0.0);
	for (const json &pair : doc.at("weights"))
		model.weights.at(pair.at(0).get<std::size_t>()) =
			pair.at(1).get<double>();
	model.bias = doc.at("bias").get<double>();
	for (auto &[name, cands] : doc.at("ambiguity_table").items()) {
		AmbiguityEntry entry;
		for (const json &c : cands)
			entry.candidates.emplace_back(c.at(0).get<std::string>(),
										  c.at(1).get<int>());
		model.table.names[name] = std::move(entry);
	}
	model.most_frequent =
		doc.at("most_frequent").get<std::map<std::string, std::string>>();
	model.config.C = doc.at("config").at("C").get<double>();
	model.config.epochs = doc.at("config").at("epochs").get<int>();
	model.config.seed = doc.at("config").at("seed").get<std::uint64_t>();
	model.with_text = doc.value("with_text", true);
	model.epoch_objectives =
		doc.value("epoch_objectives", std::vector<double>());
	return model;
}

void save_gold_occurrences(const std::vector<GoldOccurrence> &occs,
						   const std::filesystem::path &path) {
	std::string out;
	for (const GoldOccurrence &g : occs) {
		const MiOccurrence &o = g.occurrence;
		json rec = {{"id", o.example_id},
					{"node", o.node},
					{"name", o.name},
					{"parent", o.parent_element},
					{"preceded_by_mo", o.preceded_by_mo},
					{"followed_by_mo", o.followed_by_mo},
					{"followed_by_fa", o.followed_by_function_application},
					{"only_child", o.only_child},
					{"category", o.category},
					{"description_tokens", o.description_tokens},
					{"gold", g.gold}};
		out += rec.dump();
		out += '\n';
	}
	write_file_atomic(path, out);
}

std::vector<GoldOccurrence> load_gold_occurrences(
	const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw IoError("cannot open occurrences " + path.string());
	std::vector<GoldOccurrence> out;
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty()) continue;
		try {
			json rec = json::parse(line);
			GoldOccurrence g;
			g.occurrence.example_id = rec.at("id").get<std::string>();
			g.occurrence.node = rec.at("node").get<NodeId>();
			g.occurrence.name = rec.at("name").get<std::string>();
			g.occurrence.parent_element = rec.at("parent").get<std::string>();
			g.occurrence.preceded_by_mo = rec.at("preceded_by_mo").get<bool>();
			g.occurrence.followed_by_mo = rec.at("followed_by_mo").get<bool>();
			g.occurrence.followed_by_function_application =
				rec.at("followed_by_fa").get<bool>();
			g.occurrence.only_child = rec.at("only_child").get<bool>();
			g.occurrence.category = rec.at("category").get<std::string>();
			g.occurrence.description_tokens =
				rec.at("description_tokens").get<std::vector<std::string>>();
			g.gold = rec.at("gold").get<std::string>();
			out.push_back(std::move(g));
		} catch (const std::exception &e) {
			throw FormatError("occurrences line " + std::to_string(line_no) +
							  ": " + e.what());
		}
	}
	return out;
}

} // namespace enrich
