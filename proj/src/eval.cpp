#include "enrich/eval.hpp"
#include "enrich/errors.hpp"

#include <algorithm>
#include <set>
#include <vector>

namespace enrich {

namespace {

struct annotated_tree {
	// postorder arrays, per Zhang-Shasha
	std::vector<std::string> labels;
	std::vector<std::size_t> lmd; // leftmost leaf descendant, postorder index
	std::vector<std::size_t> keyroots;
};

void postorder(const MathTree &t, NodeId v, annotated_tree &out,
			   std::vector<std::size_t> &lmd_of) {
	const MathNode &n = t.node(v);
	std::size_t first_leaf = 0;
	for (std::size_t i = 0; i < n.children.size(); ++i) {
		postorder(t, n.children[i], out, lmd_of);
		if (i == 0) first_leaf = lmd_of[n.children[0]];
	}
	std::size_t idx = out.labels.size();
	out.labels.push_back(n.element + "\x1f" + n.text);
	out.lmd.push_back(n.children.empty() ? idx : first_leaf);
	lmd_of[v] = out.lmd.back();
}

annotated_tree annotate(const MathTree &t) {
	annotated_tree out;
	std::vector<std::size_t> lmd_of(t.size());
	postorder(t, t.root(), out, lmd_of);
	// keyroots: nodes with no ancestor sharing their leftmost leaf
	std::set<std::size_t> seen;
	for (std::size_t i = out.labels.size(); i-- > 0;) {
		if (!seen.count(out.lmd[i])) {
			out.keyroots.push_back(i);
			seen.insert(out.lmd[i]);
		}
	}
	std::sort(out.keyroots.begin(), out.keyroots.end());
	return out;
}

} // namespace

double tree_edit_distance(const MathTree &a, const MathTree &b,
						  const EditCostModel &costs) {
	annotated_tree A = annotate(a);
	annotated_tree B = annotate(b);
	const std::size_t na = A.labels.size(), nb = B.labels.size();
	std::vector<std::vector<double>> td(na, std::vector<double>(nb, 0.0));

	auto relabel = [&](std::size_t i, std::size_t j) {
		return A.labels[i] == B.labels[j] ? 0.0 : costs.relabel_cost;
	};

	for (std::size_t ki : A.keyroots) {
		for (std::size_t kj : B.keyroots) {
			const std::size_t ioff = A.lmd[ki];
			const std::size_t joff = B.lmd[kj];
			const std::size_t m = ki - ioff + 2;
			const std::size_t n = kj - joff + 2;
			std::vector<std::vector<double>> fd(m, std::vector<double>(n, 0.0));
			for (std::size_t i = 1; i < m; ++i)
				fd[i][0] = fd[i - 1][0] + costs.delete_cost;
			for (std::size_t j = 1; j < n; ++j)
				fd[0][j] = fd[0][j - 1] + costs.insert_cost;
			for (std::size_t i = 1; i < m; ++i) {
				for (std::size_t j = 1; j < n; ++j) {
					const std::size_t ai = ioff + i - 1;
					const std::size_t bj = joff + j - 1;
					if (A.lmd[ai] == ioff && B.lmd[bj] == joff) {
						fd[i][j] = std::min(
							{fd[i - 1][j] + costs.delete_cost,
							 fd[i][j - 1] + costs.insert_cost,
							 fd[i - 1][j - 1] + relabel(ai, bj)});
						td[ai][bj] = fd[i][j];
					} else {
						const std::size_t pi = A.lmd[ai] - ioff;
						const std::size_t pj = B.lmd[bj] - joff;
						fd[i][j] = std::min(
							{fd[i - 1][j] + costs.delete_cost,
							 fd[i][j - 1] + costs.insert_cost,
							 fd[pi][pj] + td[ai][bj]});
					}
				}
			}
		}
	}
	return td[na - 1][nb - 1];
}

double tedr(const MathTree &generated, const MathTree &reference) {
	double d = tree_edit_distance(generated, reference);
	double denom = static_cast<double>(
		std::max(node_count(generated), node_count(reference)));
	return d / denom;
}

EvalReport evaluate_corpus(const std::vector<CorpusTranslation> &outputs,
						   const std::map<std::string, MathTree> &references) {
	if (outputs.size() != references.size())
		throw IdMismatch("outputs and references differ in size (" +
						 std::to_string(outputs.size()) + " vs " +
						 std::to_string(references.size()) + ")");
	EvalReport report;
	double total = 0.0;
	for (const CorpusTranslation &out : outputs) {
		auto ref = references.find(out.id);
		if (ref == references.end())
			throw IdMismatch("no reference for id '" + out.id + "'");
		double score;
		if (out.content) {
			score = tedr(*out.content, ref->second);
		} else {
			// failed translation: every reference node must be inserted
			score = 1.0;
			++report.failures;
		}
		report.per_example.push_back(
			EvalReport::Example{out.id, score, !out.content.has_value()});
		total += score;
	}
	if (!report.per_example.empty())
		report.mean_tedr = total / static_cast<double>(report.per_example.size());
	return report;
}

} // namespace enrich
