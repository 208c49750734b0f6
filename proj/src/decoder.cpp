#include "enrich/decoder.hpp"
#include "enrich/errors.hpp"

#include <algorithm>
#include <cmath>

namespace enrich {

namespace {

struct Step {
	NodeId at;
	std::string rule;
	double log_probability;
	std::vector<NodeId> covered;
};

struct Partial {
	MathTree tree;
	double logp;
	std::vector<Step> steps;
	int fallbacks = 0; // tie-break: prefer derivations the rules explain
};

bool improves(const Partial &cand, const Partial &best) {
	if (cand.logp != best.logp) return cand.logp > best.logp;
	return cand.fallbacks < best.fallbacks;
}

// nodes of subtree(a) not inside any bound variable subtree
std::vector<NodeId> lexical_cover(const MathTree &t, NodeId a,
								  const std::vector<NodeId> &bindings) {
	std::vector<NodeId> out;
	NodeId end = a + t.subtree_size(a);
	for (NodeId v = a; v < end; ++v) {
		bool inside = false;
		for (NodeId b : bindings)
			inside = inside || (v >= b && v < b + t.subtree_size(b));
		if (!inside) out.push_back(v);
	}
	return out;
}

// probability of the leaf rule mi[name] -> ci[candidate], 0 when absent
double leaf_rule_probability(const RuleSet &rules, const std::string &name,
							 const std::string &candidate,
							 std::string *rule_str = nullptr) {
	double best = 0.0;
	for (const TranslationRule &r : rules.translation_rules) {
		if (r.lhs.nodes.size() != 1 || r.rhs.nodes.size() != 1) continue;
		const PatternNode &l = r.lhs.nodes[0];
		const PatternNode &rr = r.rhs.nodes[0];
		if (l.is_var || rr.is_var) continue;
		if (l.element != "mi" || l.text != name) continue;
		if (rr.element != "ci" || rr.text != candidate) continue;
		if (r.probability > best) {
			best = r.probability;
			if (rule_str)
				*rule_str = r.lhs.to_string() + " -> " + r.rhs.to_string();
		}
	}
	return best;
}

class decoder {
public:
	decoder(const MathTree &tree, const RuleSet &rules,
			const DisambigModel *model, const TranslationContext &context)
		: tree_(tree), rules_(rules) {
		if (model) compute_overrides(*model, context);
		memo_.resize(tree.size());
	}

	TranslationResult run() {
		Partial best = solve(tree_.root());
		Derivation d;
		d.log_score = best.logp;
		d.mi_overrides = overrides_;
		d.covered_by.assign(tree_.size(), 0);
		for (const Step &s : best.steps) {
			std::size_t idx = d.steps.size();
			d.steps.push_back(
				RuleApplication{s.at, s.rule, s.log_probability});
			for (NodeId v : s.covered) d.covered_by[v] = idx;
		}
		return TranslationResult{best.tree, std::move(d)};
	}

private:
	void compute_overrides(const DisambigModel &model,
						   const TranslationContext &context) {
		for (const MiOccurrence &occ : find_mi_occurrences(
				 "", tree_, context.category, context.description)) {
			if (!model.table.names.count(occ.name)) continue;
			std::vector<Prediction> ranked = predict(model, occ);
			// the disambiguator "accepts" a candidate when its decision
			// value is positive
			std::vector<Prediction> admitted;
			for (const Prediction &p : ranked)
				if (p.score > 0.0) admitted.push_back(p);
			std::string chosen;
			if (admitted.empty()) {
				continue; // nothing accepted: leave the choice to the rules
			} else if (admitted.size() == 1) {
				chosen = admitted[0].candidate;
			} else {
				// two or more accepted: higher rule probability wins, the
				// classifier score breaks probability ties
				double best_p = -1.0, best_s = 0.0;
				for (const Prediction &p : admitted) {
					double rp = leaf_rule_probability(rules_, occ.name,
													  p.candidate);
					if (rp > best_p ||
						(rp == best_p && p.score > best_s)) {
						best_p = rp;
						best_s = p.score;
						chosen = p.candidate;
					}
				}
			}
			overrides_[occ.node] = chosen;
		}
	}

	// a matched rule may not lexically rewrite an overridden mi; such nodes
	// must sit under a variable so the override stays in force
	bool respects_overrides(NodeId a, const std::vector<NodeId> &bindings) {
		if (overrides_.empty()) return true;
		for (NodeId v : lexical_cover(tree_, a, bindings))
			if (overrides_.count(v)) return false;
		return true;
	}

	Partial solve(NodeId v) {
		if (memo_[v]) return *memo_[v];
		Partial result = compute(v);
		memo_[v] = result;
		return result;
	}

	Partial compute(NodeId v) {
		auto ov = overrides_.find(v);
		if (ov != overrides_.end()) return solve_override(v, ov->second);

		const MathNode &n = tree_.node(v);
		std::optional<Partial> best;

		for (const RuleMatch &m : match_rules(rules_, tree_, v)) {
			if (!respects_overrides(v, m.bindings)) continue;
			double logp = std::log(m.rule->probability);
			std::vector<MathTree> values;
			std::vector<Step> steps;
			int fallbacks = 0;
			for (NodeId b : m.bindings) {
				Partial sub = solve(b);
				logp += sub.logp;
				fallbacks += sub.fallbacks;
				values.push_back(sub.tree);
				steps.insert(steps.end(), sub.steps.begin(), sub.steps.end());
			}
			steps.push_back(Step{v,
								 m.rule->lhs.to_string() + " -> " +
									 m.rule->rhs.to_string(),
								 std::log(m.rule->probability),
								 lexical_cover(tree_, v, m.bindings)});
			Partial cand{m.rule->rhs.instantiate(values), logp,
						 std::move(steps), fallbacks};
			if (!best || improves(cand, *best)) best = std::move(cand);
		}

		if (!n.children.empty()) {
			for (const SegmentationRule *s : match_segmentation(
					 rules_, n.element, static_cast<int>(n.children.size()))) {
				if (s->recombination.max_var() >
					static_cast<int>(s->split.size()))
					continue;
				double logp = std::log(s->probability);
				std::vector<MathTree> units;
				std::vector<Step> steps;
				int fallbacks = 0;
				bool ok = true;
				for (const std::vector<int> &group : s->split) {
					if (group.size() != 1) {
						ok = false; // extraction only emits singleton groups
						break;
					}
					Partial sub = solve(n.children[static_cast<std::size_t>(group[0])]);
					logp += sub.logp;
					fallbacks += sub.fallbacks;
					units.push_back(sub.tree);
					steps.insert(steps.end(), sub.steps.begin(),
								 sub.steps.end());
				}
				if (!ok) continue;
				steps.push_back(Step{v,
									 "seg " + n.element + "/" +
										 std::to_string(s->arity) + " -> " +
										 s->recombination.to_string(),
									 std::log(s->probability),
									 {v}});
				Partial cand{s->recombination.instantiate(units), logp,
							 std::move(steps), fallbacks};
				if (!best || improves(cand, *best)) best = std::move(cand);
			}
		}

		if (best) return *best;
		return fallback(v);
	}

	Partial solve_override(NodeId v, const std::string &chosen) {
		const MathNode &n = tree_.node(v);
		std::string rule_str = "override-fallback";
		double p = leaf_rule_probability(rules_, n.text, chosen, &rule_str);
		double logp = p > 0.0 ? std::log(p) : 0.0;
		return Partial{MathTree::leaf("ci", chosen), logp,
					   {Step{v, rule_str, logp, {v}}}};
	}

	Partial fallback(NodeId v) {
		const MathNode &n = tree_.node(v);
		if (n.children.empty()) {
			// identity leaf mapping
			std::string element = n.element == "mn" ? "cn" : "ci";
			return Partial{MathTree::leaf(element, n.text), 0.0,
						   {Step{v, "fallback-leaf", 0.0, {v}}}, 1};
		}
		// generic apply-construction for unmatched internal nodes
		std::vector<MathTree> children;
		children.push_back(MathTree::leaf("ci", n.element));
		double logp = 0.0;
		int fallbacks = 1;
		std::vector<Step> steps;
		for (NodeId c : n.children) {
			Partial sub = solve(c);
			logp += sub.logp;
			fallbacks += sub.fallbacks;
			children.push_back(sub.tree);
			steps.insert(steps.end(), sub.steps.begin(), sub.steps.end());
		}
		steps.push_back(Step{v, "fallback-apply", 0.0, {v}});
		return Partial{MathTree::branch("apply", std::move(children)), logp,
					   std::move(steps), fallbacks};
	}

	const MathTree &tree_;
	const RuleSet &rules_;
	std::map<NodeId, std::string> overrides_;
	std::vector<std::optional<Partial>> memo_;
};

} // namespace

TranslationResult translate(const MathTree &presentation, const RuleSet &rules,
							const DisambigModel *model,
							const TranslationContext &context) {
	return decoder(presentation, rules, model, context).run();
}

std::vector<CorpusTranslation> translate_corpus(const Corpus &corpus,
												const RuleSet &rules,
												const DisambigModel *model) {
	std::vector<CorpusTranslation> out;
	for (const ParallelExample &ex : corpus.examples) {
		CorpusTranslation t;
		t.id = ex.id;
		try {
			TranslationResult r =
				translate(ex.presentation, rules, model,
						  TranslationContext{ex.category, ex.description});
			t.content = std::move(r.content);
			t.log_score = r.derivation.log_score;
		} catch (const std::exception &e) {
			t.error = e.what();
		}
		out.push_back(std::move(t));
	}
	return out;
}

} // namespace enrich
