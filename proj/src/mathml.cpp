#include "enrich/mathml.hpp"
#include "enrich/errors.hpp"

#include <cctype>
#include <cstdint>

namespace enrich {

namespace {

const std::set<std::string> k_presentation = {
	"mi", "mo", "mn", "mrow", "msub", "msup", "msubsup", "mfrac", "msqrt",
	"mroot", "mfenced", "mtext", "mover", "munder", "munderover"};

// ci/cn are text leaves, apply is the only structural node, the rest are
// zero-child operator leaves
const std::set<std::string> k_content = {
	"ci", "cn", "apply", "selector",
	"plus", "minus", "times", "divide", "power", "root",
	"eq", "neq", "lt", "gt", "leq", "geq",
	"sin", "cos", "tan", "sec", "csc", "cot",
	"sinh", "cosh", "tanh", "arcsin", "arccos", "arctan",
	"exp", "ln", "log", "abs", "factorial",
	"sum", "product", "int", "diff", "partialdiff", "limit",
	"min", "max", "gcd", "rem", "quotient",
	"and", "or", "not", "union", "intersect", "in", "notin",
	"compose", "inverse", "ident", "degree"};

bool is_space(char c) {
	return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

void append_utf8(std::string &out, std::uint32_t cp) {
	if (cp < 0x80) {
		out += static_cast<char>(cp);
	} else if (cp < 0x800) {
		out += static_cast<char>(0xc0 | (cp >> 6));
		out += static_cast<char>(0x80 | (cp & 0x3f));
	} else if (cp < 0x10000) {
		out += static_cast<char>(0xe0 | (cp >> 12));
		out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
		out += static_cast<char>(0x80 | (cp & 0x3f));
	} else {
		out += static_cast<char>(0xf0 | (cp >> 18));
		out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
		out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
		out += static_cast<char>(0x80 | (cp & 0x3f));
	}
}

std::string trim(const std::string &s) {
	std::size_t b = 0, e = s.size();
	while (b < e && is_space(s[b])) ++b;
	while (e > b && is_space(s[e - 1])) --e;
	return s.substr(b, e - b);
}

// Minimal non-validating parser for a single XML fragment: elements,
// character data, entity/character references, comments. Attributes are
// scanned and discarded; namespace prefixes are stripped.
class fragment_parser {
public:
	explicit fragment_parser(const std::string &text) : s_(text) {}

	MathTree run(Markup kind, const ParseOptions &opts) {
		kind_ = kind;
		opts_ = &opts;
		skip_misc();
		if (pos_ >= s_.size() || s_[pos_] != '<')
			throw MalformedXml("expected an element");
		std::vector<MathNode> nodes;
		parse_element(nodes, std::nullopt);
		skip_misc();
		if (pos_ != s_.size())
			throw MalformedXml("trailing content after the root element");
		return make_tree(std::move(nodes));
	}

private:
	void skip_misc() {
		for (;;) {
			while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
			if (s_.compare(pos_, 4, "<!--") == 0) {
				std::size_t end = s_.find("-->", pos_ + 4);
				if (end == std::string::npos)
					throw MalformedXml("unterminated comment");
				pos_ = end + 3;
			} else if (s_.compare(pos_, 2, "<?") == 0) {
				std::size_t end = s_.find("?>", pos_ + 2);
				if (end == std::string::npos)
					throw MalformedXml("unterminated processing instruction");
				pos_ = end + 2;
			} else {
				return;
			}
		}
	}

	std::string parse_name() {
		std::size_t b = pos_;
		while (pos_ < s_.size() && !is_space(s_[pos_]) && s_[pos_] != '>' &&
			   s_[pos_] != '/' && s_[pos_] != '<' && s_[pos_] != '=')
			++pos_;
		if (pos_ == b) throw MalformedXml("empty element name");
		std::string name = s_.substr(b, pos_ - b);
		std::size_t colon = name.rfind(':');
		if (colon != std::string::npos) name = name.substr(colon + 1);
		return name;
	}

	void skip_attributes() {
		for (;;) {
			while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
			if (pos_ >= s_.size()) throw MalformedXml("unterminated tag");
			if (s_[pos_] == '>' || s_[pos_] == '/') return;
			parse_name();
			while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
			if (pos_ >= s_.size() || s_[pos_] != '=')
				throw MalformedXml("attribute without value");
			++pos_;
			while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
			if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\''))
				throw MalformedXml("unquoted attribute value");
			char quote = s_[pos_++];
			std::size_t end = s_.find(quote, pos_);
			if (end == std::string::npos)
				throw MalformedXml("unterminated attribute value");
			pos_ = end + 1;
		}
	}

	std::string parse_reference() {
		// pos_ is at '&'
		std::size_t end = s_.find(';', pos_);
		if (end == std::string::npos || end - pos_ > 12)
			throw MalformedXml("unterminated entity reference");
		std::string body = s_.substr(pos_ + 1, end - pos_ - 1);
		pos_ = end + 1;
		std::string out;
		if (body == "amp") return "&";
		if (body == "lt") return "<";
		if (body == "gt") return ">";
		if (body == "quot") return "\"";
		if (body == "apos") return "'";
		if (!body.empty() && body[0] == '#') {
			std::uint32_t cp = 0;
			std::size_t i = 1;
			int base = 10;
			if (i < body.size() && (body[i] == 'x' || body[i] == 'X')) {
				base = 16;
				++i;
			}
			if (i >= body.size())
				throw MalformedXml("empty character reference");
			for (; i < body.size(); ++i) {
				char c = body[i];
				int d;
				if (c >= '0' && c <= '9') d = c - '0';
				else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
				else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
				else throw MalformedXml("bad character reference: &" + body + ";");
				cp = cp * static_cast<std::uint32_t>(base) + static_cast<std::uint32_t>(d);
			}
			if (cp == 0 || cp > 0x10ffff)
				throw MalformedXml("character reference out of range");
			append_utf8(out, cp);
			return out;
		}
		throw MalformedXml("unknown entity: &" + body + ";");
	}

	void check_element(const std::string &name) {
		const std::set<std::string> &white =
			kind_ == Markup::presentation ? k_presentation : k_content;
		if (white.count(name) || opts_->extra_elements.count(name)) return;
		throw UnknownElement("element <" + name + "> is not valid " +
							 (kind_ == Markup::presentation ? "Presentation"
															: "Content") +
							 " markup");
	}

	// appends the element rooted at pos_ (and its subtree) in preorder
	void parse_element(std::vector<MathNode> &nodes,
					   std::optional<NodeId> parent) {
		++pos_; // '<'
		std::string name = parse_name();
		check_element(name);
		skip_attributes();
		NodeId id = nodes.size();
		nodes.push_back(MathNode{name, "", {}, parent});
		if (s_[pos_] == '/') {
			if (pos_ + 1 >= s_.size() || s_[pos_ + 1] != '>')
				throw MalformedXml("malformed empty-element tag");
			pos_ += 2;
			return;
		}
		++pos_; // '>'
		std::string text;
		bool saw_child = false;
		for (;;) {
			if (pos_ >= s_.size())
				throw MalformedXml("unterminated element <" + name + ">");
			char c = s_[pos_];
			if (c == '<') {
				if (s_.compare(pos_, 4, "<!--") == 0) {
					std::size_t end = s_.find("-->", pos_ + 4);
					if (end == std::string::npos)
						throw MalformedXml("unterminated comment");
					pos_ = end + 3;
					continue;
				}
				if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '/') {
					pos_ += 2;
					std::string close = parse_name();
					while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
					if (pos_ >= s_.size() || s_[pos_] != '>')
						throw MalformedXml("malformed closing tag");
					++pos_;
					if (close != name)
						throw MalformedXml("mismatched closing tag </" + close +
										   "> for <" + name + ">");
					break;
				}
				saw_child = true;
				NodeId child = nodes.size();
				parse_element(nodes, id);
				nodes[id].children.push_back(child);
			} else if (c == '&') {
				text += parse_reference();
			} else {
				text += c;
				++pos_;
			}
		}
		text = trim(text);
		if (saw_child) {
			if (!text.empty())
				throw MalformedXml("mixed text and element content in <" +
								   name + ">");
		} else {
			nodes[id].text = text;
		}
	}

	const std::string &s_;
	std::size_t pos_ = 0;
	Markup kind_ = Markup::presentation;
	const ParseOptions *opts_ = nullptr;
};

void escape_into(std::string &out, const std::string &text) {
	for (char c : text) {
		switch (c) {
			case '&': out += "&amp;"; break;
			case '<': out += "&lt;"; break;
			case '>': out += "&gt;"; break;
			default: out += c;
		}
	}
}

void serialize_node(const MathTree &t, NodeId id, std::string &out) {
	const MathNode &n = t.node(id);
	if (n.children.empty() && n.text.empty()) {
		out += "<" + n.element + "/>";
		return;
	}
	out += "<" + n.element + ">";
	if (n.children.empty()) {
		escape_into(out, n.text);
	} else {
		for (NodeId c : n.children) serialize_node(t, c, out);
	}
	out += "</" + n.element + ">";
}

} // namespace

void MathTree::compute_sizes() {
	sizes_.assign(nodes_.size(), 1);
	for (std::size_t i = nodes_.size(); i-- > 0;) {
		for (NodeId c : nodes_[i].children) sizes_[i] += sizes_[c];
	}
}

MathTree make_tree(std::vector<MathNode> nodes) {
	if (nodes.empty()) throw EmptyTree("tree has no nodes");
	if (nodes[0].parent) throw MalformedXml("root has a parent");
	for (std::size_t i = 0; i < nodes.size(); ++i) {
		const MathNode &n = nodes[i];
		if (!n.children.empty() && !n.text.empty())
			throw MalformedXml("node with both text and children");
		for (NodeId c : n.children) {
			if (c >= nodes.size() || nodes[c].parent != i)
				throw MalformedXml("inconsistent parent/child links");
		}
	}
	MathTree t;
	t.nodes_ = std::move(nodes);
	t.compute_sizes();
	return t;
}

MathTree MathTree::leaf(std::string element, std::string text) {
	std::vector<MathNode> nodes;
	nodes.push_back(MathNode{std::move(element), std::move(text), {}, std::nullopt});
	return make_tree(std::move(nodes));
}

MathTree MathTree::branch(std::string element, std::vector<MathTree> children) {
	std::vector<MathNode> nodes;
	nodes.push_back(MathNode{std::move(element), "", {}, std::nullopt});
	for (MathTree &child : children) {
		NodeId offset = nodes.size();
		nodes[0].children.push_back(offset);
		for (std::size_t i = 0; i < child.nodes_.size(); ++i) {
			MathNode n = child.nodes_[i];
			if (n.parent) n.parent = *n.parent + offset;
			else if (i == 0) n.parent = 0;
			for (NodeId &c : n.children) c += offset;
			nodes.push_back(std::move(n));
		}
	}
	return make_tree(std::move(nodes));
}

MathTree parse(const std::string &xml_text, Markup kind,
			   const ParseOptions &opts) {
	return fragment_parser(xml_text).run(kind, opts);
}

std::string serialize(const MathTree &tree) {
	std::string out;
	serialize_node(tree, tree.root(), out);
	return out;
}

std::size_t node_count(const MathTree &tree) { return tree.size(); }

const std::set<std::string> &presentation_elements() { return k_presentation; }
const std::set<std::string> &content_elements() { return k_content; }

} // namespace enrich
