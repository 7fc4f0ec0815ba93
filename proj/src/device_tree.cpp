// SPDX-License-Identifier: Apache-2.0
#include "vfpga/device_tree.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace vfpga {

namespace {

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == ',' || c == '.' || c == '_' ||
           c == '+' || c == '-' || c == '#' || c == '?';
}

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    int line() const { return line_; }
    int column() const { return col_; }

    [[noreturn]] void fail(Errc code, const std::string& msg) const {
        throw ParseError(code, msg, line_, col_);
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
                while (pos_ < text_.size() && text_[pos_] != '\n')
                    bump();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                bump();
            } else {
                break;
            }
        }
    }

    bool at_end() {
        skip_space();
        return pos_ >= text_.size();
    }

    char peek() {
        skip_space();
        if (pos_ >= text_.size())
            fail(Errc::SyntaxError, "unexpected end of input");
        return text_[pos_];
    }

    void expect(char c) {
        if (peek() != c)
            fail(Errc::SyntaxError, std::string("expected '") + c + "', found '" + peek() + "'");
        bump();
    }

    bool accept(char c) {
        if (at_end() || text_[pos_] != c)
            return false;
        bump();
        return true;
    }

    /// A node or property name; `allow_at` admits one unit-address suffix.
    std::string name(bool allow_at) {
        skip_space();
        std::string out;
        bool seen_at = false;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (is_name_char(c) || (allow_at && c == '@' && !seen_at && !out.empty())) {
                if (c == '@')
                    seen_at = true;
                out.push_back(c);
                bump();
            } else {
                break;
            }
        }
        if (out.empty())
            fail(Errc::SyntaxError, "expected a name");
        if (out.back() == '@')
            fail(Errc::SyntaxError, "unit address missing after '@'");
        return out;
    }

    std::string quoted_string() {
        expect('"');
        std::string out;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '"') {
                bump();
                return out;
            }
            if (c == '\\') {
                bump();
                if (pos_ >= text_.size())
                    break;
                char e = text_[pos_];
                switch (e) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                default: fail(Errc::SyntaxError, std::string("unknown escape '\\") + e + "'");
                }
                bump();
            } else if (c == '\n') {
                fail(Errc::SyntaxError, "unterminated string");
            } else {
                out.push_back(c);
                bump();
            }
        }
        fail(Errc::SyntaxError, "unterminated string");
    }

    uint32_t cell() {
        skip_space();
        uint64_t value = 0;
        size_t digits = 0;
        if (pos_ + 1 < text_.size() && text_[pos_] == '0' &&
            (text_[pos_ + 1] == 'x' || text_[pos_ + 1] == 'X')) {
            bump();
            bump();
            while (pos_ < text_.size() && std::isxdigit(static_cast<unsigned char>(text_[pos_]))) {
                value = value * 16 + hex_digit(text_[pos_]);
                ++digits;
                bump();
                if (value > 0xFFFFFFFFull)
                    fail(Errc::BadCell, "cell value exceeds 32 bits");
            }
        } else {
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                value = value * 10 + static_cast<uint64_t>(text_[pos_] - '0');
                ++digits;
                bump();
                if (value > 0xFFFFFFFFull)
                    fail(Errc::BadCell, "cell value exceeds 32 bits");
            }
        }
        if (digits == 0)
            fail(Errc::BadCell, "expected a cell value");
        // A trailing name character means a malformed literal like 0x1g.
        if (pos_ < text_.size() && is_name_char(text_[pos_]))
            fail(Errc::BadCell, std::string("bad digit '") + text_[pos_] + "' in cell value");
        return static_cast<uint32_t>(value);
    }

    std::vector<std::byte> hex_bytes() {
        std::vector<std::byte> out;
        for (;;) {
            skip_space();
            if (pos_ >= text_.size())
                fail(Errc::SyntaxError, "unterminated byte array");
            if (text_[pos_] == ']')
                return out;
            unsigned hi = hex_digit(text_[pos_]);
            bump();
            if (pos_ >= text_.size() || !std::isxdigit(static_cast<unsigned char>(text_[pos_])))
                fail(Errc::SyntaxError, "byte array needs full hex pairs");
            unsigned lo = hex_digit(text_[pos_]);
            bump();
            out.push_back(std::byte{static_cast<uint8_t>(hi << 4 | lo)});
        }
    }

    /// Recognizes a `/word/;` directive such as /dts-v1/ or /plugin/ without
    /// consuming anything else.
    bool accept_directive(std::string_view word) {
        skip_space();
        size_t save_pos = pos_;
        int save_line = line_, save_col = col_;
        if (!accept('/'))
            return false;
        for (char c : word) {
            if (pos_ >= text_.size() || text_[pos_] != c) {
                pos_ = save_pos;
                line_ = save_line;
                col_ = save_col;
                return false;
            }
            bump();
        }
        if (pos_ >= text_.size() || text_[pos_] != '/') {
            pos_ = save_pos;
            line_ = save_line;
            col_ = save_col;
            return false;
        }
        bump();
        expect(';');
        return true;
    }

private:
    unsigned hex_digit(char c) {
        if (c >= '0' && c <= '9')
            return static_cast<unsigned>(c - '0');
        if (c >= 'a' && c <= 'f')
            return static_cast<unsigned>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F')
            return static_cast<unsigned>(c - 'A' + 10);
        fail(Errc::SyntaxError, std::string("bad hex digit '") + c + "'");
    }

    void bump() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string_view text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view text) : lex_(text) {}

    DtNode parse_tree() {
        lex_.accept_directive("dts-v1");
        DtNode root = parse_root();
        if (!lex_.at_end())
            lex_.fail(Errc::SyntaxError, "content after root node");
        return root;
    }

    Overlay parse_overlay_doc() {
        lex_.accept_directive("dts-v1");
        if (!lex_.accept_directive("plugin"))
            lex_.fail(Errc::MissingPluginMarker, "overlay must start with /plugin/;");
        DtNode root = parse_root();
        if (!lex_.at_end())
            lex_.fail(Errc::SyntaxError, "content after root node");

        Overlay overlay;
        if (!root.props.empty())
            lex_.fail(Errc::SyntaxError, "overlay root cannot carry properties");
        for (DtNode& frag : root.children) {
            if (frag.name.rfind("fragment@", 0) != 0)
                lex_.fail(Errc::SyntaxError, "expected fragment@N, found '" + frag.name + "'");
            const PropValue* target = frag.find_prop("target-path");
            if (!target || !target->is_string())
                lex_.fail(Errc::SyntaxError, "fragment '" + frag.name +
                                                 "' needs a target-path string property");
            if (target->str().empty() || target->str()[0] != '/')
                throw Error(Errc::RelativeTarget,
                            "target-path '" + target->str() + "' is not absolute");
            if (frag.props.size() != 1)
                lex_.fail(Errc::SyntaxError,
                          "fragment '" + frag.name + "' carries unexpected properties");
            DtNode* content = frag.find_child("__overlay__");
            if (!content || frag.children.size() != 1)
                lex_.fail(Errc::SyntaxError,
                          "fragment '" + frag.name + "' needs a single __overlay__ node");
            overlay.fragments.push_back({target->str(), std::move(*content)});
        }
        return overlay;
    }

private:
    DtNode parse_root() {
        if (lex_.at_end())
            lex_.fail(Errc::SyntaxError, "a root node is required");
        lex_.expect('/');
        DtNode root;
        root.name = "/";
        parse_body(root);
        lex_.expect(';');
        return root;
    }

    void parse_body(DtNode& node) {
        lex_.expect('{');
        while (lex_.peek() != '}') {
            std::string name = lex_.name(/*allow_at=*/true);
            char c = lex_.peek();
            if (c == '{') {
                if (node.find_child(name))
                    lex_.fail(Errc::DuplicateNode,
                              "duplicate node '" + name + "' in '" + node.name + "'");
                DtNode child;
                child.name = std::move(name);
                parse_body(child);
                lex_.expect(';');
                node.children.push_back(std::move(child));
            } else {
                if (name.find('@') != std::string::npos)
                    lex_.fail(Errc::SyntaxError, "property name cannot contain '@'");
                if (node.find_prop(name))
                    lex_.fail(Errc::SyntaxError,
                              "duplicate property '" + name + "' in '" + node.name + "'");
                PropValue value = parse_value();
                lex_.expect(';');
                if (name == "status" && !(value.is_string() && (value.str() == "okay" ||
                                                                value.str() == "disabled")))
                    lex_.fail(Errc::SyntaxError, "status must be \"okay\" or \"disabled\"");
                node.props.push_back({std::move(name), std::move(value)});
            }
        }
        lex_.expect('}');
    }

    PropValue parse_value() {
        char c = lex_.peek();
        if (c == ';')
            return PropValue::empty();
        if (c != '=')
            lex_.fail(Errc::SyntaxError, "expected '=' or ';' after property name");
        lex_.expect('=');
        c = lex_.peek();
        if (c == '"')
            return PropValue::string(lex_.quoted_string());
        if (c == '<') {
            lex_.expect('<');
            std::vector<uint32_t> cells;
            while (lex_.peek() != '>')
                cells.push_back(lex_.cell());
            lex_.expect('>');
            return PropValue::cells(std::move(cells));
        }
        if (c == '[') {
            lex_.expect('[');
            auto bytes = lex_.hex_bytes();
            lex_.expect(']');
            return PropValue::bytes(std::move(bytes));
        }
        lex_.fail(Errc::SyntaxError, "expected a string, cell list, or byte array");
    }

    Lexer lex_;
};

void serialize_node(const DtNode& node, std::string& out, int depth) {
    std::string indent(static_cast<size_t>(depth) * 4, ' ');
    out += indent;
    out += node.name;
    out += " {\n";
    std::string inner(static_cast<size_t>(depth + 1) * 4, ' ');
    for (const DtProperty& prop : node.props) {
        out += inner;
        out += prop.name;
        if (prop.value.is_empty()) {
            out += ";\n";
            continue;
        }
        out += " = ";
        if (prop.value.is_string()) {
            out += '"';
            for (char c : prop.value.str()) {
                switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\t': out += "\\t"; break;
                default: out += c;
                }
            }
            out += '"';
        } else if (prop.value.is_cells()) {
            out += '<';
            const auto& cells = prop.value.cells();
            for (size_t i = 0; i < cells.size(); ++i) {
                if (i)
                    out += ' ';
                char buf[16];
                std::snprintf(buf, sizeof buf, "0x%x", cells[i]);
                out += buf;
            }
            out += '>';
        } else {
            out += '[';
            const auto& bytes = prop.value.bytes();
            for (size_t i = 0; i < bytes.size(); ++i) {
                if (i)
                    out += ' ';
                char buf[4];
                std::snprintf(buf, sizeof buf, "%02x", static_cast<unsigned>(bytes[i]));
                out += buf;
            }
            out += ']';
        }
        out += ";\n";
    }
    for (const DtNode& child : node.children) {
        serialize_node(child, out, depth + 1);
    }
    out += indent;
    out += "};\n";
}

/// Merges `patch` into `node`: properties replace, children merge or append.
/// `path` tracks the node's absolute path for guard checks.
void merge_node(DtNode& node, const DtNode& patch, const std::string& path,
                const GuardMap& guards) {
    auto guard_it = guards.find(path);
    for (const DtProperty& prop : patch.props) {
        if (guard_it != guards.end() && (prop.name == "reg" || prop.name == "interrupts")) {
            const PropValue* current = node.find_prop(prop.name);
            if (!current || !(prop.value == *current))
                throw Error(Errc::GuardViolation,
                            "overlay changes frozen '" + prop.name + "' of " + path);
        }
        node.set_prop(prop.name, prop.value);
    }
    for (const DtNode& patch_child : patch.children) {
        std::string child_path = (path == "/" ? "" : path) + "/" + patch_child.name;
        if (DtNode* existing = node.find_child(patch_child.name)) {
            merge_node(*existing, patch_child, child_path, guards);
        } else {
            if (guards.count(child_path))
                throw Error(Errc::GuardViolation,
                            "overlay replaces guarded node " + child_path);
            node.children.push_back(patch_child);
        }
    }
}

} // namespace

const PropValue* DtNode::find_prop(std::string_view name) const {
    for (const DtProperty& p : props)
        if (p.name == name)
            return &p.value;
    return nullptr;
}

void DtNode::set_prop(std::string_view name, PropValue value) {
    for (DtProperty& p : props) {
        if (p.name == name) {
            p.value = std::move(value);
            return;
        }
    }
    props.push_back({std::string(name), std::move(value)});
}

DtNode* DtNode::find_child(std::string_view name) {
    for (DtNode& c : children)
        if (c.name == name)
            return &c;
    return nullptr;
}

const DtNode* DtNode::find_child(std::string_view name) const {
    for (const DtNode& c : children)
        if (c.name == name)
            return &c;
    return nullptr;
}

const DtNode* DtNode::find_path(std::string_view path) const {
    return const_cast<DtNode*>(this)->find_path(path);
}

DtNode* DtNode::find_path(std::string_view path) {
    if (path.empty() || path[0] != '/')
        return nullptr;
    DtNode* node = this;
    size_t pos = 1;
    while (pos < path.size()) {
        size_t next = path.find('/', pos);
        std::string_view part = path.substr(pos, next == std::string_view::npos ? std::string_view::npos
                                                                                : next - pos);
        if (part.empty())
            return nullptr;
        node = node->find_child(part);
        if (!node)
            return nullptr;
        pos = next == std::string_view::npos ? path.size() : next + 1;
    }
    return node;
}

bool DtNode::status_is(std::string_view value) const {
    const PropValue* status = find_prop("status");
    return status && status->is_string() && status->str() == value;
}

DtNode parse_dts(std::string_view text) {
    return Parser(text).parse_tree();
}

Overlay parse_overlay(std::string_view text) {
    return Parser(text).parse_overlay_doc();
}

std::string serialize_dts(const DtNode& root) {
    std::string out;
    serialize_node(root, out, 0);
    return out;
}

BasePropertyGuard BasePropertyGuard::from_node(const DtNode& node) {
    const PropValue* reg = node.find_prop("reg");
    if (!reg || !reg->is_cells() || reg->cells().empty() || reg->cells().size() % 2 != 0)
        throw Error(Errc::MissingReg, "node '" + node.name + "' has no usable reg property");

    BasePropertyGuard guard;
    const auto& cells = reg->cells();
    for (size_t i = 0; i + 1 < cells.size(); i += 2)
        guard.reg.push_back({cells[i], cells[i + 1]});

    if (const PropValue* irqs = node.find_prop("interrupts"); irqs && irqs->is_cells())
        guard.interrupts = irqs->cells();
    return guard;
}

DtNode apply_overlay(const DtNode& root, const Overlay& overlay, const GuardMap& guards) {
    DtNode result = root;
    for (const OverlayFragment& frag : overlay.fragments) {
        DtNode* target = result.find_path(frag.target_path);
        if (!target)
            throw Error(Errc::TargetNotFound, "overlay target " + frag.target_path);
        merge_node(*target, frag.content, frag.target_path, guards);
    }
    return result;
}

} // namespace vfpga
