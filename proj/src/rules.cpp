#include "enrich/rules.hpp"
#include "enrich/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace enrich {

using nlohmann::json;

// ---------------------------------------------------------------- patterns

int RulePattern::max_var() const {
	int m = 0;
	for (const PatternNode &n : nodes)
		if (n.is_var) m = std::max(m, n.var);
	return m;
}

bool RulePattern::operator==(const RulePattern &o) const {
	return to_string() == o.to_string();
}

namespace {

void pattern_to_string(const RulePattern &p, std::size_t id, std::string &out) {
	const PatternNode &n = p.nodes[id];
	if (n.is_var) {
		out += "$" + std::to_string(n.var);
		return;
	}
	out += n.element;
	if (n.children.empty()) {
		if (!n.text.empty()) {
			out += ":\"";
			for (char c : n.text) {
				if (c == '\\' || c == '"') out += '\\';
				out += c;
			}
			out += '"';
		}
		return;
	}
	out += '(';
	for (std::size_t i = 0; i < n.children.size(); ++i) {
		if (i) out += ',';
		pattern_to_string(p, n.children[i], out);
	}
	out += ')';
}

class pattern_reader {
public:
	explicit pattern_reader(const std::string &s) : s_(s) {}

	RulePattern run() {
		RulePattern p;
		parse_node(p);
		if (pos_ != s_.size())
			throw FormatError("trailing characters in pattern: " + s_);
		return p;
	}

private:
	std::size_t parse_node(RulePattern &p) {
		if (pos_ >= s_.size()) throw FormatError("empty pattern: " + s_);
		std::size_t id = p.nodes.size();
		p.nodes.emplace_back();
		if (s_[pos_] == '$') {
			++pos_;
			std::size_t b = pos_;
			while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
				++pos_;
			if (pos_ == b) throw FormatError("bad variable in pattern: " + s_);
			p.nodes[id].is_var = true;
			p.nodes[id].var = std::stoi(s_.substr(b, pos_ - b));
			return id;
		}
		std::size_t b = pos_;
		while (pos_ < s_.size() && s_[pos_] != '(' && s_[pos_] != ')' &&
			   s_[pos_] != ',' && s_[pos_] != ':')
			++pos_;
		if (pos_ == b) throw FormatError("empty element name in pattern: " + s_);
		p.nodes[id].element = s_.substr(b, pos_ - b);
		if (pos_ < s_.size() && s_[pos_] == ':') {
			++pos_;
			if (pos_ >= s_.size() || s_[pos_] != '"')
				throw FormatError("expected quoted text in pattern: " + s_);
			++pos_;
			std::string text;
			while (pos_ < s_.size() && s_[pos_] != '"') {
				if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
				text += s_[pos_++];
			}
			if (pos_ >= s_.size())
				throw FormatError("unterminated text in pattern: " + s_);
			++pos_; // closing quote
			p.nodes[id].text = std::move(text);
		} else if (pos_ < s_.size() && s_[pos_] == '(') {
			++pos_;
			for (;;) {
				std::size_t child = parse_node(p);
				p.nodes[id].children.push_back(child);
				if (pos_ >= s_.size())
					throw FormatError("unterminated pattern: " + s_);
				if (s_[pos_] == ',') {
					++pos_;
					continue;
				}
				if (s_[pos_] == ')') {
					++pos_;
					break;
				}
				throw FormatError("malformed pattern: " + s_);
			}
		}
		return id;
	}

	const std::string &s_;
	std::size_t pos_ = 0;
};

} // namespace

std::string RulePattern::to_string() const {
	std::string out;
	pattern_to_string(*this, 0, out);
	return out;
}

RulePattern RulePattern::parse(const std::string &text) {
	return pattern_reader(text).run();
}

RulePattern RulePattern::from_subtree(const MathTree &tree, NodeId root,
									  const std::map<NodeId, int> &var_nodes) {
	RulePattern p;
	// recursive copy; var subtrees collapse to a single node
	auto copy = [&](auto &&self, NodeId id) -> std::size_t {
		std::size_t pid = p.nodes.size();
		p.nodes.emplace_back();
		auto var = var_nodes.find(id);
		if (var != var_nodes.end()) {
			p.nodes[pid].is_var = true;
			p.nodes[pid].var = var->second;
			return pid;
		}
		const MathNode &n = tree.node(id);
		p.nodes[pid].element = n.element;
		p.nodes[pid].text = n.text;
		for (NodeId c : n.children) {
			std::size_t child = self(self, c); // may reallocate p.nodes
			p.nodes[pid].children.push_back(child);
		}
		return pid;
	};
	copy(copy, root);
	return p;
}

bool RulePattern::match(const MathTree &tree, NodeId root,
						std::vector<NodeId> &bindings) const {
	bindings.assign(static_cast<std::size_t>(max_var()), 0);
	std::vector<bool> bound(bindings.size(), false);
	auto walk = [&](auto &&self, std::size_t pid, NodeId tid) -> bool {
		const PatternNode &pn = nodes[pid];
		if (pn.is_var) {
			std::size_t k = static_cast<std::size_t>(pn.var - 1);
			if (bound[k]) return bindings[k] == tid;
			bound[k] = true;
			bindings[k] = tid;
			return true;
		}
		const MathNode &tn = tree.node(tid);
		if (pn.element != tn.element) return false;
		if (pn.children.empty())
			return tn.children.empty() && pn.text == tn.text;
		if (pn.children.size() != tn.children.size()) return false;
		for (std::size_t i = 0; i < pn.children.size(); ++i)
			if (!self(self, pn.children[i], tn.children[i])) return false;
		return true;
	};
	return walk(walk, 0, root);
}

MathTree RulePattern::instantiate(const std::vector<MathTree> &var_values) const {
	auto build = [&](auto &&self, std::size_t pid) -> MathTree {
		const PatternNode &pn = nodes[pid];
		if (pn.is_var) return var_values.at(static_cast<std::size_t>(pn.var - 1));
		if (pn.children.empty()) return MathTree::leaf(pn.element, pn.text);
		std::vector<MathTree> children;
		children.reserve(pn.children.size());
		for (std::size_t c : pn.children) children.push_back(self(self, c));
		return MathTree::branch(pn.element, std::move(children));
	};
	return build(build, 0);
}

// -------------------------------------------------------------- extraction

namespace {

struct span {
	NodeId begin, end; // preorder range [begin, end)
	bool contains(NodeId v) const { return v >= begin && v < end; }
	bool inside(const span &o) const { return begin >= o.begin && end <= o.end; }
	bool disjoint(const span &o) const { return end <= o.begin || o.end <= begin; }
};

span node_span(const MathTree &t, NodeId v) {
	return span{v, v + t.subtree_size(v)};
}

using link_list = std::vector<std::pair<NodeId, NodeId>>;

bool admissible(const link_list &links, const span &a, const span &b) {
	bool any = false;
	for (const auto &[p, c] : links) {
		bool in_a = a.contains(p), in_b = b.contains(c);
		if (in_a != in_b) return false;
		any = any || in_a;
	}
	return any;
}

struct pending_rule {
	RulePattern lhs, rhs;
};

// one example's worth of lexicalized + generalized rules, plus the root
// segmentation residue when one exists
struct extraction {
	std::vector<pending_rule> rules;
	std::optional<SegmentationRule> segmentation;
};

extraction extract_from_example(const ParallelExample &ex,
								const Alignment &alignment) {
	const MathTree &P = ex.presentation;
	const MathTree &C = ex.content;

	// token index == preorder node id on both sides
	link_list links;
	for (const AlignmentLink &l : alignment.links)
		if (l.presentation != AlignmentLink::npos)
			links.emplace_back(l.presentation, l.content);

	// all admissible subtree pairs
	std::vector<std::pair<NodeId, NodeId>> pairs;
	for (NodeId a = 0; a < P.size(); ++a)
		for (NodeId b = 0; b < C.size(); ++b)
			if (admissible(links, node_span(P, a), node_span(C, b)))
				pairs.emplace_back(a, b);

	extraction out;
	for (const auto &[a, b] : pairs) {
		out.rules.push_back(pending_rule{RulePattern::from_subtree(P, a, {}),
										 RulePattern::from_subtree(C, b, {})});

		// generalize: abstract the maximal admissible proper sub-pairs
		span sa = node_span(P, a), sb = node_span(C, b);
		std::vector<bool> has_partner(P.size(), false);
		std::vector<NodeId> partner(P.size(), 0);
		for (NodeId ap = a + 1; ap < sa.end; ++ap) {
			// minimal admissible content partner within b (possibly b itself,
			// which makes the whole rhs a variable)
			NodeId best = C.size();
			std::size_t best_size = 0;
			for (const auto &[x, y] : pairs) {
				if (x != ap) continue;
				if (!node_span(C, y).inside(sb)) continue;
				std::size_t sz = C.subtree_size(y);
				if (best == C.size() || sz < best_size ||
					(sz == best_size && y < best)) {
					best = y;
					best_size = sz;
				}
			}
			if (best != C.size()) {
				has_partner[ap] = true;
				partner[ap] = best;
			}
		}
		// keep only pairs whose presentation side is not inside another
		std::vector<NodeId> frontier;
		for (NodeId ap = a + 1; ap < sa.end; ++ap) {
			if (!has_partner[ap]) continue;
			bool covered = false;
			for (NodeId anc = a + 1; anc < ap && !covered; ++anc)
				covered = has_partner[anc] && node_span(P, ap).inside(node_span(P, anc));
			if (!covered) frontier.push_back(ap);
		}
		if (frontier.empty()) continue;
		// content sides must be pairwise disjoint
		bool ok = true;
		for (std::size_t i = 0; i < frontier.size() && ok; ++i) {
			for (std::size_t j = i + 1; j < frontier.size() && ok; ++j)
				ok = node_span(C, partner[frontier[i]])
						 .disjoint(node_span(C, partner[frontier[j]]));
		}
		if (!ok) continue;

		std::map<NodeId, int> lhs_vars, rhs_vars;
		int next = 1;
		for (NodeId ap : frontier) {
			lhs_vars[ap] = next;
			rhs_vars[partner[ap]] = next;
			++next;
		}
		pending_rule gen{RulePattern::from_subtree(P, a, lhs_vars),
						 RulePattern::from_subtree(C, b, rhs_vars)};
		out.rules.push_back(gen);

		// arity-level residue at the example root: every child abstracted
		if (a == P.root() && b == C.root()) {
			const PatternNode &root = gen.lhs.nodes[0];
			bool pure = !root.children.empty();
			for (std::size_t c : root.children)
				pure = pure && gen.lhs.nodes[c].is_var;
			if (pure) {
				SegmentationRule seg;
				seg.parent_element = root.element;
				seg.arity = static_cast<int>(root.children.size());
				for (int i = 0; i < seg.arity; ++i) seg.split.push_back({i});
				seg.recombination = gen.rhs;
				out.segmentation = seg;
			}
		}
	}
	return out;
}

std::string seg_key(const SegmentationRule &s) {
	return s.parent_element + "/" + std::to_string(s.arity);
}

} // namespace

RuleSet extract_rules(const Corpus &corpus,
					  const std::map<std::string, Alignment> &alignments) {
	// (lhs, rhs) -> count, with first-seen patterns kept
	std::map<std::pair<std::string, std::string>, TranslationRule> trans;
	std::map<std::pair<std::string, std::string>, SegmentationRule> segs;

	for (const ParallelExample &ex : corpus.examples) {
		auto al = alignments.find(ex.id);
		if (al == alignments.end())
			throw MissingAlignment("no alignment for example '" + ex.id + "'");
		extraction e = extract_from_example(ex, al->second);
		for (const pending_rule &r : e.rules) {
			auto key = std::make_pair(r.lhs.to_string(), r.rhs.to_string());
			auto [it, fresh] = trans.try_emplace(
				key, TranslationRule{r.lhs, r.rhs, 0, 0.0});
			it->second.count += 1;
		}
		if (e.segmentation) {
			auto key = std::make_pair(seg_key(*e.segmentation),
									  e.segmentation->recombination.to_string());
			auto [it, fresh] = segs.try_emplace(key, *e.segmentation);
			it->second.count += 1;
		}
	}

	// relative frequencies per lhs
	std::map<std::string, int> lhs_totals;
	for (const auto &[key, rule] : trans) lhs_totals[key.first] += rule.count;
	std::map<std::string, int> seg_totals;
	for (const auto &[key, rule] : segs) seg_totals[key.first] += rule.count;

	RuleSet out;
	for (auto &[key, rule] : trans) {
		rule.probability =
			static_cast<double>(rule.count) / lhs_totals[key.first];
		out.translation_rules.push_back(std::move(rule));
	}
	for (auto &[key, rule] : segs) {
		rule.probability =
			static_cast<double>(rule.count) / seg_totals[key.first];
		out.segmentation_rules.push_back(std::move(rule));
	}
	return out;
}

// ------------------------------------------------------------------ lookup

std::vector<RuleMatch> match_rules(const RuleSet &rules, const MathTree &tree,
								   NodeId node) {
	std::vector<RuleMatch> out;
	for (const TranslationRule &r : rules.translation_rules) {
		std::vector<NodeId> bindings;
		if (r.lhs.match(tree, node, bindings))
			out.push_back(RuleMatch{&r, std::move(bindings)});
	}
	std::stable_sort(out.begin(), out.end(),
					 [](const RuleMatch &a, const RuleMatch &b) {
						 if (a.rule->probability != b.rule->probability)
							 return a.rule->probability > b.rule->probability;
						 auto ka = std::make_pair(a.rule->lhs.to_string(),
												  a.rule->rhs.to_string());
						 auto kb = std::make_pair(b.rule->lhs.to_string(),
												  b.rule->rhs.to_string());
						 return ka < kb;
					 });
	return out;
}

std::vector<std::pair<TranslationRule, double>> rule_lookup(
	const RuleSet &rules, const MathTree &presentation_subtree) {
	std::vector<std::pair<TranslationRule, double>> out;
	for (const RuleMatch &m :
		 match_rules(rules, presentation_subtree, presentation_subtree.root()))
		out.emplace_back(*m.rule, m.rule->probability);
	return out;
}

std::vector<const SegmentationRule *> match_segmentation(
	const RuleSet &rules, const std::string &element, int arity) {
	std::vector<const SegmentationRule *> out;
	for (const SegmentationRule &s : rules.segmentation_rules)
		if (s.parent_element == element && s.arity == arity)
			out.push_back(&s);
	std::stable_sort(out.begin(), out.end(),
					 [](const SegmentationRule *a, const SegmentationRule *b) {
						 if (a->probability != b->probability)
							 return a->probability > b->probability;
						 return a->recombination.to_string() <
								b->recombination.to_string();
					 });
	return out;
}

// ------------------------------------------------------------- persistence

bool RuleSet::operator==(const RuleSet &o) const {
	auto dump = [](const RuleSet &r) {
		std::vector<std::string> lines;
		for (const TranslationRule &t : r.translation_rules)
			lines.push_back("t " + t.lhs.to_string() + " " + t.rhs.to_string() +
							" " + std::to_string(t.count));
		for (const SegmentationRule &s : r.segmentation_rules)
			lines.push_back("s " + seg_key(s) + " " +
							s.recombination.to_string() + " " +
							std::to_string(s.count));
		std::sort(lines.begin(), lines.end());
		return lines;
	};
	return dump(*this) == dump(o);
}

void save_rules(const RuleSet &rules, const std::filesystem::path &path) {
	std::string out;
	for (const TranslationRule &r : rules.translation_rules) {
		json rec = {{"kind", "translation"},
					{"lhs", r.lhs.to_string()},
					{"rhs", r.rhs.to_string()},
					{"count", r.count},
					{"probability", r.probability}};
		out += rec.dump();
		out += '\n';
	}
	for (const SegmentationRule &r : rules.segmentation_rules) {
		json rec = {{"kind", "segmentation"},
					{"parent", r.parent_element},
					{"arity", r.arity},
					{"split", r.split},
					{"recombination", r.recombination.to_string()},
					{"count", r.count},
					{"probability", r.probability}};
		out += rec.dump();
		out += '\n';
	}
	write_file_atomic(path, out);
}

RuleSet load_rules(const std::filesystem::path &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw IoError("cannot open rules " + path.string());
	RuleSet rules;
	std::string line;
	int line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (line.empty()) continue;
		try {
			json rec = json::parse(line);
			std::string kind = rec.at("kind").get<std::string>();
			if (kind == "translation") {
				rules.translation_rules.push_back(TranslationRule{
					RulePattern::parse(rec.at("lhs").get<std::string>()),
					RulePattern::parse(rec.at("rhs").get<std::string>()),
					rec.at("count").get<int>(),
					rec.at("probability").get<double>()});
			} else if (kind == "segmentation") {
				SegmentationRule s;
				s.parent_element = rec.at("parent").get<std::string>();
				s.arity = rec.at("arity").get<int>();
				s.split = rec.at("split").get<std::vector<std::vector<int>>>();
				s.recombination =
					RulePattern::parse(rec.at("recombination").get<std::string>());
				s.count = rec.at("count").get<int>();
				s.probability = rec.at("probability").get<double>();
				rules.segmentation_rules.push_back(std::move(s));
			} else {
				throw FormatError("unknown rule kind '" + kind + "'");
			}
		} catch (const std::exception &e) {
			throw FormatError("rule file line " + std::to_string(line_no) +
							  ": " + e.what());
		}
	}
	return rules;
}

} // namespace enrich
