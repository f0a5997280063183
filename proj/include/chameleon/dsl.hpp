#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chameleon/error.hpp"
#include "chameleon/registry.hpp"

namespace chameleon::dsl {

enum class Verdict { POS, NEG, AMB };

inline std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::POS: return "POS";
        case Verdict::NEG: return "NEG";
        default: return "AMB";
    }
}

/// `A` is the pair's subject (always a lane), `B` its object.
enum class Binding { A, B };

enum class CmpOp { Lt, Le, Gt, Ge, Eq };

inline std::string_view to_string(CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
        default: return "==";
    }
}

struct Call {
    std::string name;
    std::vector<Binding> args;
    friend bool operator==(const Call&, const Call&) = default;
};

struct EnumLiteral {
    std::string value;
    friend bool operator==(const EnumLiteral&, const EnumLiteral&) = default;
};

using Operand = std::variant<double, Call, EnumLiteral>;

struct Expr {
    enum class Kind { Compare, Not, And, Or };
    Kind kind = Kind::Compare;
    Call lhs;
    CmpOp op = CmpOp::Eq;
    Operand rhs = 0.0;
    std::vector<Expr> children;

    friend bool operator==(const Expr&, const Expr&) = default;
};

struct Rule {
    Expr condition;
    Verdict verdict = Verdict::AMB;
    friend bool operator==(const Rule&, const Rule&) = default;
};

struct Program {
    Target target = Target::lsls;
    std::vector<Rule> rules;
    friend bool operator==(const Program&, const Program&) = default;
};

inline EntityKind binding_kind(Target t, Binding b) {
    return (b == Binding::B && t == Target::lste) ? EntityKind::TrafficElement : EntityKind::Lane;
}

namespace detail {

enum class Tok { Ident, Number, LParen, RParen, Comma, Cmp, Arrow, End };

struct Token {
    Tok type;
    std::string text;
    std::size_t line;
    std::size_t col;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
inline bool digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0, line = 1, col = 1;
    auto syntax = [&](const std::string& msg) {
        throw ProgramError(ProgramError::Kind::Syntax, line, col, msg);
    };
    while (i < src.size()) {
        const char c = src[i];
        if (c == '\n') {
            ++i;
            ++line;
            col = 1;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            ++col;
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        const std::size_t start = i, sc = col;
        auto push = [&](Tok t, std::size_t len) {
            out.push_back({t, std::string(src.substr(start, len)), line, sc});
            i += len;
            col += len;
        };
        if (ident_start(c)) {
            std::size_t n = 1;
            while (start + n < src.size() && ident_char(src[start + n])) ++n;
            push(Tok::Ident, n);
        } else if (digit(c) || ((c == '-' || c == '.') && i + 1 < src.size() && (digit(src[i + 1]) || src[i + 1] == '.'))) {
            std::size_t n = 0;
            if (src[start] == '-') ++n;
            while (start + n < src.size() && digit(src[start + n])) ++n;
            if (start + n < src.size() && src[start + n] == '.') {
                ++n;
                while (start + n < src.size() && digit(src[start + n])) ++n;
            }
            if (start + n < src.size() && (src[start + n] == 'e' || src[start + n] == 'E')) {
                std::size_t m = n + 1;
                if (start + m < src.size() && (src[start + m] == '+' || src[start + m] == '-')) ++m;
                if (start + m < src.size() && digit(src[start + m])) {
                    while (start + m < src.size() && digit(src[start + m])) ++m;
                    n = m;
                }
            }
            push(Tok::Number, n);
        } else if (c == '(') {
            push(Tok::LParen, 1);
        } else if (c == ')') {
            push(Tok::RParen, 1);
        } else if (c == ',') {
            push(Tok::Comma, 1);
        } else if (c == '-' && i + 1 < src.size() && src[i + 1] == '>') {
            push(Tok::Arrow, 2);
        } else if ((c == '<' || c == '>') && i + 1 < src.size() && src[i + 1] == '=') {
            push(Tok::Cmp, 2);
        } else if (c == '<' || c == '>') {
            push(Tok::Cmp, 1);
        } else if (c == '=' && i + 1 < src.size() && src[i + 1] == '=') {
            push(Tok::Cmp, 2);
        } else {
            syntax(std::string("unexpected character '") + (std::isprint(static_cast<unsigned char>(c)) ? std::string(1, c) : std::string("\\x") + std::to_string(static_cast<unsigned char>(c))) + "'");
        }
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

class Parser {
public:
    static constexpr int kMaxDepth = 64;

    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Program program() {
        Program p;
        if (is_ident("target")) {
            next();
            const Token& t = expect(Tok::Ident, "target name");
            if (t.text == "lsls") p.target = Target::lsls;
            else if (t.text == "lste") p.target = Target::lste;
            else fail(t, ProgramError::Kind::Syntax, "unknown target '" + t.text + "' (expected lsls or lste)");
        }
        target_ = p.target;
        while (peek().type != Tok::End) p.rules.push_back(rule());
        if (p.rules.empty()) fail(peek(), ProgramError::Kind::Syntax, "program has no rules");
        return p;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    const Token& next() { return toks_[pos_++]; }
    bool is_ident(std::string_view s) const { return peek().type == Tok::Ident && peek().text == s; }

    [[noreturn]] void fail(const Token& t, ProgramError::Kind k, const std::string& msg) const {
        throw ProgramError(k, t.line, t.col, msg);
    }

    const Token& expect(Tok type, const char* what) {
        if (peek().type != type) {
            const auto& t = peek();
            fail(t, ProgramError::Kind::Syntax,
                 std::string("expected ") + what + (t.type == Tok::End ? " at end of input" : ", found '" + t.text + "'"));
        }
        return next();
    }

    void expect_keyword(std::string_view kw) {
        if (!is_ident(kw)) {
            const auto& t = peek();
            fail(t, ProgramError::Kind::Syntax,
                 "expected '" + std::string(kw) + "'" + (t.type == Tok::End ? " at end of input" : ", found '" + t.text + "'"));
        }
        next();
    }

    Rule rule() {
        expect_keyword("when");
        Rule r;
        r.condition = or_expr(0);
        expect(Tok::Arrow, "'->'");
        const Token& v = expect(Tok::Ident, "verdict");
        if (v.text == "POS") r.verdict = Verdict::POS;
        else if (v.text == "NEG") r.verdict = Verdict::NEG;
        else if (v.text == "AMB") r.verdict = Verdict::AMB;
        else fail(v, ProgramError::Kind::Syntax, "unknown verdict '" + v.text + "' (expected POS, NEG or AMB)");
        return r;
    }

    void depth_check(int depth) const {
        if (depth > kMaxDepth) fail(peek(), ProgramError::Kind::Syntax, "expression nested too deeply");
    }

    Expr or_expr(int depth) {
        depth_check(depth);
        Expr lhs = and_expr(depth + 1);
        while (is_ident("or")) {
            next();
            Expr e;
            e.kind = Expr::Kind::Or;
            e.children.push_back(std::move(lhs));
            e.children.push_back(and_expr(depth + 1));
            lhs = std::move(e);
        }
        return lhs;
    }

    Expr and_expr(int depth) {
        depth_check(depth);
        Expr lhs = unary(depth + 1);
        while (is_ident("and")) {
            next();
            Expr e;
            e.kind = Expr::Kind::And;
            e.children.push_back(std::move(lhs));
            e.children.push_back(unary(depth + 1));
            lhs = std::move(e);
        }
        return lhs;
    }

    Expr unary(int depth) {
        depth_check(depth);
        if (is_ident("not")) {
            next();
            Expr e;
            e.kind = Expr::Kind::Not;
            e.children.push_back(unary(depth + 1));
            return e;
        }
        if (peek().type == Tok::LParen) {
            next();
            Expr e = or_expr(depth + 1);
            expect(Tok::RParen, "')'");
            return e;
        }
        return comparison();
    }

    const Primitive* call(Call& out) {
        const Token& name = expect(Tok::Ident, "function name");
        static const std::vector<std::string_view> reserved = {"when", "and", "or", "not", "target", "A", "B"};
        if (std::find(reserved.begin(), reserved.end(), name.text) != reserved.end())
            fail(name, ProgramError::Kind::Syntax, "expected function name, found '" + name.text + "'");
        const Primitive* prim = find_primitive(name.text);
        if (!prim) fail(name, ProgramError::Kind::UnknownPrimitive, "unknown primitive " + name.text);
        out.name = name.text;
        expect(Tok::LParen, "'('");
        while (peek().type != Tok::RParen) {
            if (!out.args.empty()) expect(Tok::Comma, "','");
            const Token& a = expect(Tok::Ident, "argument A or B");
            Binding b;
            if (a.text == "A") b = Binding::A;
            else if (a.text == "B") b = Binding::B;
            else fail(a, ProgramError::Kind::Syntax, "argument must be A or B, found '" + a.text + "'");
            const std::size_t k = out.args.size();
            if (k < prim->params.size() && binding_kind(target_, b) != prim->params[k])
                fail(a, ProgramError::Kind::Type,
                     "argument " + std::to_string(k + 1) + " of " + name.text + " must be a " +
                         (prim->params[k] == EntityKind::Lane ? "lane" : "traffic element") + " under target " +
                         std::string(to_string(target_)));
            out.args.push_back(b);
        }
        const Token& close = next();
        if (out.args.size() != prim->params.size())
            fail(close, ProgramError::Kind::Type,
                 name.text + " expects " + std::to_string(prim->params.size()) + " argument(s), got " +
                     std::to_string(out.args.size()));
        return prim;
    }

    Expr comparison() {
        const Token& at = peek();
        if (at.type != Tok::Ident)
            fail(at, ProgramError::Kind::Syntax,
                 "expected condition" + (at.type == Tok::End ? std::string(" at end of input") : ", found '" + at.text + "'"));
        Expr e;
        e.kind = Expr::Kind::Compare;
        const Primitive* lp = call(e.lhs);
        const Token& op = expect(Tok::Cmp, "comparison operator");
        if (op.text == "<") e.op = CmpOp::Lt;
        else if (op.text == "<=") e.op = CmpOp::Le;
        else if (op.text == ">") e.op = CmpOp::Gt;
        else if (op.text == ">=") e.op = CmpOp::Ge;
        else e.op = CmpOp::Eq;

        if (!lp->numeric()) {
            if (e.op != CmpOp::Eq)
                fail(op, ProgramError::Kind::Type, e.lhs.name + " returns an enumeration; only == is allowed");
            const Token& lit = expect(Tok::Ident, "enumeration literal");
            if (!lp->enum_result->contains(lit.text))
                fail(lit, ProgramError::Kind::Type,
                     "'" + lit.text + "' is not a value of " + std::string(lp->enum_result->name));
            e.rhs = EnumLiteral{lit.text};
            return e;
        }
        if (peek().type == Tok::Number) {
            const Token& num = next();
            double v = 0.0;
            const char* b = num.text.data();
            const char* end = b + num.text.size();
            auto [ptr, ec] = std::from_chars(b, end, v);
            if (ec != std::errc() || ptr != end || !std::isfinite(v))
                fail(num, ProgramError::Kind::Syntax, "invalid number '" + num.text + "'");
            e.rhs = v;
            return e;
        }
        if (peek().type == Tok::Ident) {
            const Token& rt = peek();
            Call rhs;
            const Primitive* rp = call(rhs);
            if (!rp->numeric())
                fail(rt, ProgramError::Kind::Type, rhs.name + " returns an enumeration; cannot compare with a number");
            e.rhs = std::move(rhs);
            return e;
        }
        const auto& t = peek();
        fail(t, ProgramError::Kind::Syntax,
             "expected number or function call" + (t.type == Tok::End ? std::string(" at end of input") : ", found '" + t.text + "'"));
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    Target target_ = Target::lsls;
};

inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, ptr);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

inline std::string format_call(const Call& c) {
    std::string s = c.name + "(";
    for (std::size_t i = 0; i < c.args.size(); ++i) {
        if (i) s += ",";
        s += c.args[i] == Binding::A ? "A" : "B";
    }
    return s + ")";
}

inline std::string format_expr(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Compare: {
            std::string s = format_call(e.lhs) + " " + std::string(to_string(e.op)) + " ";
            if (const auto* d = std::get_if<double>(&e.rhs)) s += format_number(*d);
            else if (const auto* c = std::get_if<Call>(&e.rhs)) s += format_call(*c);
            else s += std::get<EnumLiteral>(e.rhs).value;
            return s;
        }
        case Expr::Kind::Not: return "not " + format_expr(e.children[0]);
        case Expr::Kind::And: return "(" + format_expr(e.children[0]) + " and " + format_expr(e.children[1]) + ")";
        case Expr::Kind::Or: return "(" + format_expr(e.children[0]) + " or " + format_expr(e.children[1]) + ")";
    }
    return {};
}

}  // namespace detail

/// Parses rule text. Every call must name a registry primitive with the right
/// arity and argument kinds; diagnostics carry line:column.
inline Program parse_program(std::string_view text) {
    return detail::Parser(detail::lex(text)).program();
}

/// Canonical text: one rule per line, binary connectives fully parenthesised.
/// The target line is written only for lste (lsls is the default).
inline std::string format_program(const Program& p) {
    std::string s;
    if (p.target == Target::lste) s += "target lste\n";
    for (const auto& r : p.rules)
        s += "when " + detail::format_expr(r.condition) + " -> " + std::string(to_string(r.verdict)) + "\n";
    return s;
}

struct RuleOutcome {
    Verdict verdict = Verdict::AMB;
    std::optional<std::size_t> rule_index;  // rule that fired
    std::string note;                       // runtime error text, if any
    bool error = false;
    std::size_t rules_passed = 0;           // rules evaluated false before the outcome
};

namespace detail {

struct Evaluator {
    const SceneContext& ctx;
    EntityRef a;
    EntityRef b;

    PrimitiveValue call(const Call& c) const {
        const Primitive* p = find_primitive(c.name);
        EntityRef args[2];
        for (std::size_t i = 0; i < c.args.size(); ++i) args[i] = c.args[i] == Binding::A ? a : b;
        return p->fn(ctx, std::span<const EntityRef>(args, c.args.size()));
    }

    bool eval(const Expr& e) const {
        switch (e.kind) {
            case Expr::Kind::Not: return !eval(e.children[0]);
            case Expr::Kind::And: return eval(e.children[0]) && eval(e.children[1]);
            case Expr::Kind::Or: return eval(e.children[0]) || eval(e.children[1]);
            case Expr::Kind::Compare: break;
        }
        const PrimitiveValue lv = call(e.lhs);
        if (const auto* lit = std::get_if<EnumLiteral>(&e.rhs)) return std::get<std::string_view>(lv) == lit->value;
        const double l = std::get<double>(lv);
        const double r = std::holds_alternative<double>(e.rhs) ? std::get<double>(e.rhs)
                                                                : std::get<double>(call(std::get<Call>(e.rhs)));
        switch (e.op) {
            case CmpOp::Lt: return l < r;
            case CmpOp::Le: return l <= r;
            case CmpOp::Gt: return l > r;
            case CmpOp::Ge: return l >= r;
            default: return l == r;
        }
    }
};

}  // namespace detail

/// First matching rule wins; no match gives AMB. A primitive failure stops
/// evaluation with AMB and a note. Pair indices are into the scene's lists.
inline RuleOutcome eval_rule_program_at(const Program& p, const SceneContext& ctx, std::size_t subject_index,
                                        std::size_t object_index) {
    const detail::Evaluator ev{ctx, {EntityKind::Lane, subject_index},
                               {binding_kind(p.target, Binding::B), object_index}};
    RuleOutcome out;
    for (std::size_t i = 0; i < p.rules.size(); ++i) {
        try {
            if (ev.eval(p.rules[i].condition)) {
                out.verdict = p.rules[i].verdict;
                out.rule_index = i;
                return out;
            }
        } catch (const Error& e) {
            out.verdict = Verdict::AMB;
            out.error = true;
            out.note = "rule " + std::to_string(i + 1) + ": " + e.what();
            return out;
        }
        ++out.rules_passed;
    }
    return out;
}

/// Same, addressed by ids: (lane, lane) for lsls, (lane, traffic element) for lste.
inline Verdict eval_rule_program(const Program& p, const SceneContext& ctx, int subject_id, int object_id) {
    const auto& s = ctx.scene();
    const std::size_t si = s.lane_index(subject_id);
    const std::size_t oi = p.target == Target::lsls ? s.lane_index(object_id) : s.te_index(object_id);
    return eval_rule_program_at(p, ctx, si, oi).verdict;
}

}  // namespace chameleon::dsl
