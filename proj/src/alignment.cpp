#include "enrich/alignment.hpp"
#include "enrich/corpus.hpp"
#include "enrich/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace enrich {

namespace {

void linearize_node(const MathTree &t, NodeId id, TokenSeq &seq) {
	const MathNode &n = t.node(id);
	std::string tok = n.element;
	if (n.children.empty() && !n.text.empty()) tok += ":" + n.text;
	seq.tokens.push_back(std::move(tok));
	seq.token_nodes.push_back(id);
	for (NodeId c : n.children) linearize_node(t, c, seq);
}

} // namespace

TokenSeq linearize(const MathTree &tree) {
	TokenSeq seq;
	linearize_node(tree, tree.root(), seq);
	return seq;
}

double corpus_log_likelihood(const std::vector<TokenPair> &pairs,
							 const TranslationTable &table) {
	double ll = 0.0;
	for (const TokenPair &pair : pairs) {
		const auto &pres = pair.first.tokens;
		const auto &cont = pair.second.tokens;
		double uniform = 1.0 / static_cast<double>(pres.size() + 1);
		for (const std::string &c : cont) {
			double sum = table.prob(null_token(), c);
			for (const std::string &p : pres) sum += table.prob(p, c);
			ll += std::log(std::max(sum * uniform, 1e-300));
		}
	}
	return ll;
}

TranslationTable train_ibm1(const std::vector<TokenPair> &pairs, int iterations,
							const EmObserver &observer) {
	if (pairs.empty()) throw EmptyTrainingSet("no token pairs to align");
	if (iterations < 1) throw EmptyTrainingSet("iterations must be >= 1");

	// uniform initialization over co-occurring content tokens per row
	TranslationTable table;
	for (const TokenPair &pair : pairs) {
		for (const std::string &c : pair.second.tokens) {
			table.t[null_token()][c] = 1.0;
			for (const std::string &p : pair.first.tokens) table.t[p][c] = 1.0;
		}
	}
	for (auto &[p, row] : table.t) {
		double norm = 1.0 / static_cast<double>(row.size());
		for (auto &[c, v] : row) v = norm;
	}

	for (int it = 0; it < iterations; ++it) {
		std::map<std::string, std::map<std::string, double>> counts;
		for (const TokenPair &pair : pairs) {
			const auto &pres = pair.first.tokens;
			const auto &cont = pair.second.tokens;
			for (const std::string &c : cont) {
				double denom = table.prob(null_token(), c);
				for (const std::string &p : pres) denom += table.prob(p, c);
				if (denom <= 0) continue;
				counts[null_token()][c] += table.prob(null_token(), c) / denom;
				for (const std::string &p : pres)
					counts[p][c] += table.prob(p, c) / denom;
			}
		}
		for (auto &[p, row] : table.t) {
			double total = 0.0;
			for (auto &[c, v] : row) {
				v = std::max(counts[p][c], 1e-12);
				total += v;
			}
			for (auto &[c, v] : row) v /= total;
		}
		if (observer)
			observer(it + 1, table, corpus_log_likelihood(pairs, table));
	}
	return table;
}

Alignment align_best(const TokenPair &pair, const TranslationTable &table) {
	Alignment alignment;
	const auto &pres = pair.first.tokens;
	const auto &cont = pair.second.tokens;
	for (std::size_t j = 0; j < cont.size(); ++j) {
		// argmax over presentation tokens; ties to the lowest index, and NULL
		// only when it is strictly better than every real token
		std::size_t best = AlignmentLink::npos;
		double best_p = -1.0;
		for (std::size_t i = 0; i < pres.size(); ++i) {
			double p = table.prob(pres[i], cont[j]);
			if (p > best_p) {
				best_p = p;
				best = i;
			}
		}
		if (best_p <= 0.0 || table.prob(null_token(), cont[j]) > best_p)
			best = AlignmentLink::npos;
		alignment.links.push_back(AlignmentLink{best, j});
	}
	return alignment;
}

void save_table(const TranslationTable &table,
				const std::filesystem::path &path) {
	// rows sorted by token, entries by descending probability then token
	std::ostringstream out;
	out.precision(17);
	for (const auto &[p, row] : table.t) {
		std::vector<std::pair<std::string, double>> entries(row.begin(),
															row.end());
		std::stable_sort(entries.begin(), entries.end(),
						 [](const auto &a, const auto &b) {
							 if (a.second != b.second)
								 return a.second > b.second;
							 return a.first < b.first;
						 });
		for (const auto &[c, v] : entries)
			out << p << '\t' << c << '\t' << v << '\n';
	}
	write_file_atomic(path, out.str());
}

TranslationTable load_table(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw IoError("cannot open table " + path.string());
	TranslationTable table;
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty()) continue;
		std::size_t t1 = line.find('\t');
		std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
		if (t2 == std::string::npos)
			throw FormatError("table line " + std::to_string(line_no) +
							  ": expected 3 tab-separated fields");
		table.t[line.substr(0, t1)][line.substr(t1 + 1, t2 - t1 - 1)] =
			std::stod(line.substr(t2 + 1));
	}
	return table;
}

} // namespace enrich
