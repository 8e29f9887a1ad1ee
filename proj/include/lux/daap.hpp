#pragma once

// Disjoint-array-access programs: loop-nest IR, DSL parser, validation and
// iteration counting. Every analysis in this project consumes this IR.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace lux::daap {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// IR

// Affine bound: constant, or a single variable/parameter plus a constant.
struct AffineExpr {
    enum class Kind { Constant, Symbol };
    Kind kind = Kind::Constant;
    std::string symbol;      // iteration variable or parameter name
    std::int64_t offset = 0;

    static AffineExpr constant(std::int64_t c) { return {Kind::Constant, "", c}; }
    static AffineExpr sym(std::string name, std::int64_t off = 0) {
        return {Kind::Symbol, std::move(name), off};
    }

    bool operator==(const AffineExpr&) const = default;

    std::string str() const {
        if (kind == Kind::Constant) return std::to_string(offset);
        if (offset == 0) return symbol;
        if (offset > 0) return symbol + "+" + std::to_string(offset);
        return symbol + std::to_string(offset);
    }

    std::int64_t eval(const std::map<std::string, std::int64_t>& env) const {
        if (kind == Kind::Constant) return offset;
        auto it = env.find(symbol);
        if (it == env.end())
            throw std::runtime_error("unbound symbol '" + symbol + "' in affine expression");
        return it->second + offset;
    }
};

struct IterVar {
    std::string name;
    int level = 0;  // nesting depth, 0-based outermost
    bool operator==(const IterVar&) const = default;
};

// Half-open range [lower, upper).
struct RangeExpr {
    AffineExpr lower, upper;
    bool operator==(const RangeExpr&) const = default;
};

struct AccessVector {
    std::string array;
    std::vector<std::string> components;  // iteration variable per array dimension
    bool operator==(const AccessVector&) const = default;

    std::string str() const {
        std::string s = array + "[";
        for (size_t i = 0; i < components.size(); ++i) {
            if (i) s += ",";
            s += components[i];
        }
        return s + "]";
    }
};

struct Statement {
    std::string id;
    std::vector<IterVar> vars;
    std::vector<RangeExpr> ranges;  // ranges[i] belongs to vars[i]
    AccessVector output;
    std::vector<AccessVector> inputs;
    std::vector<std::string> outdeg1_arrays;  // forced out-degree-one inputs

    bool operator==(const Statement&) const = default;

    int depth() const { return static_cast<int>(vars.size()); }

    int var_level(const std::string& name) const {
        for (const auto& v : vars)
            if (v.name == name) return v.level;
        return -1;
    }

    // Number of distinct iteration variables in the access vector.
    static int access_dim(const AccessVector& a) {
        std::set<std::string> distinct(a.components.begin(), a.components.end());
        return static_cast<int>(distinct.size());
    }

    // Distinct variable levels referenced by an access, in first-use order.
    std::vector<int> access_levels(const AccessVector& a) const {
        std::vector<int> levels;
        for (const auto& c : a.components) {
            int lv = var_level(c);
            if (lv >= 0 && std::find(levels.begin(), levels.end(), lv) == levels.end())
                levels.push_back(lv);
        }
        return levels;
    }
};

struct ProducerEdge {
    int producer = -1;  // statement index
    int consumer = -1;
    std::string array;
    bool operator==(const ProducerEdge&) const = default;
};

struct Program {
    std::vector<std::string> parameters;
    std::vector<Statement> statements;
    std::vector<ProducerEdge> producer_consumer;  // derived, program order

    bool operator==(const Program& o) const {
        return parameters == o.parameters && statements == o.statements;
    }

    const Statement& statement(const std::string& id) const {
        for (const auto& s : statements)
            if (s.id == id) return s;
        throw std::runtime_error("no statement named '" + id + "'");
    }

    bool is_parameter(const std::string& name) const {
        return std::find(parameters.begin(), parameters.end(), name) != parameters.end();
    }

    // Arrays that are never written by any statement.
    std::set<std::string> pure_input_arrays() const {
        std::set<std::string> written, read;
        for (const auto& s : statements) {
            written.insert(s.output.array);
            for (const auto& in : s.inputs) read.insert(in.array);
        }
        std::set<std::string> pure;
        for (const auto& a : read)
            if (!written.count(a)) pure.insert(a);
        return pure;
    }
};

// ---------------------------------------------------------------------------
// Errors and diagnostics

struct ParseError : std::runtime_error {
    int line, col;
    ParseError(const std::string& msg, int line_, int col_)
        : std::runtime_error("parse error at " + std::to_string(line_) + ":" +
                             std::to_string(col_) + ": " + msg),
          line(line_), col(col_) {}
};

struct Violation {
    std::string statement;
    std::string access_a, access_b;  // printed access vectors
    std::string detail;
};

// ---------------------------------------------------------------------------
// Lexer / parser

namespace detail {

struct Token {
    enum class Type { Ident, Int, Punct, End };
    Type type;
    std::string text;
    int line, col;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws();
        if (pos_ >= src_.size()) return {Token::Type::End, "", line_, col_};
        int line = line_, col = col_;
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                advance();
            return {Token::Type::Ident, std::string(src_.substr(start, pos_ - start)), line, col};
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                advance();
            return {Token::Type::Int, std::string(src_.substr(start, pos_ - start)), line, col};
        }
        if (c == '.' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '.') {
            advance(); advance();
            return {Token::Type::Punct, "..", line, col};
        }
        static const std::string punct = "{}[]();:,=+-@";
        if (punct.find(c) != std::string::npos) {
            advance();
            return {Token::Type::Punct, std::string(1, c), line, col};
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }

private:
    void advance() {
        if (src_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
        ++pos_;
    }
    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {  // comment to end of line
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }
    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) { shift(); }

    Program parse() {
        Program prog;
        while (tok_.type != Token::Type::End) {
            if (is_ident("param")) {
                shift();
                prog.parameters.push_back(expect_ident("parameter name"));
            } else if (is_ident("loop")) {
                std::vector<IterVar> vars;
                std::vector<RangeExpr> ranges;
                parse_loop(prog, vars, ranges);
            } else {
                fail("expected 'param' or 'loop'");
            }
        }
        finalize(prog);
        return prog;
    }

private:
    void parse_loop(Program& prog, std::vector<IterVar> vars, std::vector<RangeExpr> ranges) {
        expect_kw("loop");
        Token name_tok = tok_;
        std::string var = expect_ident("loop variable");
        for (const auto& v : vars)
            if (v.name == var)
                throw ParseError("duplicate loop variable '" + var + "'", name_tok.line, name_tok.col);
        if (std::find(prog.parameters.begin(), prog.parameters.end(), var) != prog.parameters.end())
            throw ParseError("loop variable '" + var + "' shadows a parameter", name_tok.line, name_tok.col);
        expect_kw("in");
        RangeExpr range;
        range.lower = parse_affine(prog, vars);
        expect_punct("..");
        range.upper = parse_affine(prog, vars);
        expect_punct("{");
        vars.push_back({var, static_cast<int>(vars.size())});
        ranges.push_back(range);
        while (!is_punct("}")) {
            if (is_ident("loop")) {
                parse_loop(prog, vars, ranges);
            } else if (tok_.type == Token::Type::Ident) {
                parse_statement(prog, vars, ranges);
            } else {
                fail("expected a nested loop, a statement, or '}'");
            }
        }
        expect_punct("}");
    }

    void parse_statement(Program& prog, const std::vector<IterVar>& vars,
                         const std::vector<RangeExpr>& ranges) {
        Statement st;
        st.vars = vars;
        st.ranges = ranges;
        Token id_tok = tok_;
        st.id = expect_ident("statement id");
        for (const auto& s : prog.statements)
            if (s.id == st.id)
                throw ParseError("duplicate statement id '" + st.id + "'", id_tok.line, id_tok.col);
        expect_punct(":");
        st.output = parse_access(st);
        expect_punct("=");
        Token f_tok = tok_;
        if (expect_ident("function name") != "f")
            throw ParseError("statement body must be an opaque call to 'f'", f_tok.line, f_tok.col);
        expect_punct("(");
        if (!is_punct(")")) {
            st.inputs.push_back(parse_access(st));
            while (is_punct(",")) {
                shift();
                st.inputs.push_back(parse_access(st));
            }
        }
        expect_punct(")");
        while (is_punct("@")) {
            shift();
            Token ann = tok_;
            std::string name = expect_ident("annotation name");
            if (name != "outdeg1")
                throw ParseError("unknown annotation '@" + name + "'", ann.line, ann.col);
            expect_punct("(");
            st.outdeg1_arrays.push_back(expect_ident("array name"));
            expect_punct(")");
        }
        prog.statements.push_back(std::move(st));
    }

    AccessVector parse_access(const Statement& st) {
        AccessVector acc;
        Token arr_tok = tok_;
        acc.array = expect_ident("array name");
        expect_punct("[");
        while (true) {
            Token comp = tok_;
            std::string c = expect_ident("index variable");
            if (st.var_level(c) < 0)
                throw ParseError("undeclared iteration variable '" + c + "' in access to '" +
                                 acc.array + "'", comp.line, comp.col);
            acc.components.push_back(c);
            if (is_punct(",")) { shift(); continue; }
            break;
        }
        expect_punct("]");
        (void)arr_tok;
        return acc;
    }

    AffineExpr parse_affine(const Program& prog, const std::vector<IterVar>& vars) {
        Token t = tok_;
        AffineExpr e;
        if (t.type == Token::Type::Int) {
            shift();
            e = AffineExpr::constant(std::stoll(t.text));
            if (is_punct("+") || is_punct("-")) fail("affine bounds allow a single symbol +/- constant");
            return e;
        }
        if (t.type != Token::Type::Ident) fail("expected affine bound");
        shift();
        bool known = prog.is_parameter(t.text) ||
                     std::any_of(vars.begin(), vars.end(),
                                 [&](const IterVar& v) { return v.name == t.text; });
        if (!known)
            throw ParseError("bound references undeclared symbol '" + t.text + "'", t.line, t.col);
        e = AffineExpr::sym(t.text);
        if (is_punct("+") || is_punct("-")) {
            bool neg = is_punct("-");
            shift();
            Token num = tok_;
            if (num.type != Token::Type::Int) fail("expected integer offset");
            shift();
            e.offset = std::stoll(num.text) * (neg ? -1 : 1);
        }
        return e;
    }

    void finalize(Program& prog) {
        // Arrays must be used with one consistent dimensionality.
        std::map<std::string, size_t> dims;
        auto check = [&](const AccessVector& a, const std::string& stmt) {
            auto [it, fresh] = dims.emplace(a.array, a.components.size());
            if (!fresh && it->second != a.components.size())
                throw std::runtime_error("dimensionality mismatch: array '" + a.array +
                                         "' used with " + std::to_string(a.components.size()) +
                                         " and " + std::to_string(it->second) +
                                         " indices (statement " + stmt + ")");
        };
        for (const auto& s : prog.statements) {
            check(s.output, s.id);
            for (const auto& in : s.inputs) check(in, s.id);
            for (const auto& a : s.outdeg1_arrays) {
                bool found = std::any_of(s.inputs.begin(), s.inputs.end(),
                                         [&](const AccessVector& in) { return in.array == a; });
                if (!found)
                    throw std::runtime_error("@outdeg1(" + a + ") on statement " + s.id +
                                             " names no input array");
            }
        }
        // Producer-consumer edges by array name, program order, self excluded.
        for (size_t a = 0; a < prog.statements.size(); ++a) {
            const std::string& out = prog.statements[a].output.array;
            for (size_t b = a + 1; b < prog.statements.size(); ++b) {
                for (const auto& in : prog.statements[b].inputs) {
                    if (in.array == out) {
                        prog.producer_consumer.push_back(
                            {static_cast<int>(a), static_cast<int>(b), out});
                        break;
                    }
                }
            }
        }
    }

    bool is_ident(std::string_view s) const {
        return tok_.type == Token::Type::Ident && tok_.text == s;
    }
    bool is_punct(std::string_view s) const {
        return tok_.type == Token::Type::Punct && tok_.text == s;
    }
    std::string expect_ident(const std::string& what) {
        if (tok_.type != Token::Type::Ident) fail("expected " + what);
        std::string s = tok_.text;
        shift();
        return s;
    }
    void expect_kw(std::string_view kw) {
        if (!is_ident(kw)) fail("expected '" + std::string(kw) + "'");
        shift();
    }
    void expect_punct(std::string_view p) {
        if (!is_punct(p)) fail("expected '" + std::string(p) + "'");
        shift();
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " (got '" + tok_.text + "')", tok_.line, tok_.col);
    }
    void shift() { tok_ = lex_.next(); }

    Lexer lex_;
    Token tok_{Token::Type::End, "", 0, 0};
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Disjoint-access validation
//
// Two distinct input access vectors of the same array must never address the
// same element at one iteration point. The output may alias an input (the
// write creates a fresh element version). The check is per-dimension symbolic:
// a pair of component variables can be proven distinct only through the range
// bounds (e.g. i in [k+1, N) can never equal k).

namespace detail {

// Can variables a and b take equal values at some iteration point?
inline bool possibly_equal(const Statement& st, const std::string& a, const std::string& b) {
    if (a == b) return true;
    auto excluded_by = [&](const std::string& inner, const std::string& outer) {
        int lv = st.var_level(inner);
        const RangeExpr& r = st.ranges[lv];
        // inner >= outer + c with c >= 1
        if (r.lower.kind == AffineExpr::Kind::Symbol && r.lower.symbol == outer &&
            r.lower.offset >= 1)
            return true;
        // inner < outer + c with c <= 0
        if (r.upper.kind == AffineExpr::Kind::Symbol && r.upper.symbol == outer &&
            r.upper.offset <= 0)
            return true;
        return false;
    };
    int la = st.var_level(a), lb = st.var_level(b);
    const std::string& inner = la > lb ? a : b;
    const std::string& outer = la > lb ? b : a;
    if (excluded_by(inner, outer)) return false;
    // Disjoint constant intervals.
    const RangeExpr& ra = st.ranges[la];
    const RangeExpr& rb = st.ranges[lb];
    if (ra.lower.kind == AffineExpr::Kind::Constant && ra.upper.kind == AffineExpr::Kind::Constant &&
        rb.lower.kind == AffineExpr::Kind::Constant && rb.upper.kind == AffineExpr::Kind::Constant) {
        if (ra.upper.offset <= rb.lower.offset || rb.upper.offset <= ra.lower.offset) return false;
    }
    return true;
}

}  // namespace detail

inline std::vector<Violation> validate_disjoint_access(const Program& prog) {
    std::vector<Violation> out;
    for (const auto& st : prog.statements) {
        for (size_t a = 0; a < st.inputs.size(); ++a) {
            for (size_t b = a + 1; b < st.inputs.size(); ++b) {
                const AccessVector& va = st.inputs[a];
                const AccessVector& vb = st.inputs[b];
                if (va.array != vb.array) continue;
                bool alias = true;
                for (size_t d = 0; d < va.components.size() && alias; ++d)
                    alias = detail::possibly_equal(st, va.components[d], vb.components[d]);
                if (alias)
                    out.push_back({st.id, va.str(), vb.str(),
                                   "accesses may address the same element at one iteration point"});
            }
        }
    }
    return out;
}

// Parses and checks structural consistency. Disjoint-access validation is a
// separate pass so callers can report all violations at once.
inline Program parse_program(std::string_view text) {
    detail::Parser p(text);
    return p.parse();
}

// ---------------------------------------------------------------------------
// Printing (DSL emitter; parse(print(p)) == p structurally)

inline std::string print_program(const Program& prog) {
    std::ostringstream os;
    for (const auto& p : prog.parameters) os << "param " << p << "\n";
    for (const auto& st : prog.statements) {
        std::string indent;
        for (size_t t = 0; t < st.vars.size(); ++t) {
            os << indent << "loop " << st.vars[t].name << " in " << st.ranges[t].lower.str()
               << ".." << st.ranges[t].upper.str() << " {\n";
            indent += "  ";
        }
        os << indent << st.id << ": " << st.output.str() << " = f(";
        for (size_t i = 0; i < st.inputs.size(); ++i)
            os << (i ? ", " : "") << st.inputs[i].str();
        os << ")";
        for (const auto& a : st.outdeg1_arrays) os << " @outdeg1(" << a << ")";
        os << "\n";
        for (size_t t = st.vars.size(); t > 0; --t) {
            indent.resize(indent.size() - 2);
            os << indent << "}\n";
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Iteration counting

using ParamMap = std::map<std::string, std::int64_t>;

namespace detail {

inline std::int64_t count_from(const Statement& st, size_t level, ParamMap& env,
                               std::int64_t budget) {
    std::int64_t lo = st.ranges[level].lower.eval(env);
    std::int64_t hi = st.ranges[level].upper.eval(env);
    if (hi <= lo) return 0;
    if (level + 1 == st.vars.size()) return hi - lo;  // innermost range in closed form
    std::int64_t total = 0;
    for (std::int64_t v = lo; v < hi; ++v) {
        env[st.vars[level].name] = v;
        total += count_from(st, level + 1, env, budget);
        if (total > budget)
            throw std::runtime_error("iteration domain of statement " + st.id +
                                     " exceeds the counting budget");
    }
    env.erase(st.vars[level].name);
    return total;
}

}  // namespace detail

// Exact number of iteration points of the statement's domain. Outer levels are
// enumerated, the innermost level is summed in closed form.
inline std::int64_t iteration_count(const Statement& st, const ParamMap& params,
                                    std::int64_t budget = std::int64_t(1) << 40) {
    for (const auto& [k, v] : params)
        if (v <= 0) throw std::runtime_error("parameter " + k + " must be positive");
    if (st.vars.empty()) return 1;
    ParamMap env = params;
    return detail::count_from(st, 0, env, budget);
}

// ---------------------------------------------------------------------------
// Canonical JSON form

inline json to_json(const Program& prog) {
    json j;
    j["parameters"] = prog.parameters;
    j["statements"] = json::array();
    for (const auto& st : prog.statements) {
        json s;
        s["id"] = st.id;
        s["loops"] = json::array();
        for (size_t t = 0; t < st.vars.size(); ++t)
            s["loops"].push_back({{"var", st.vars[t].name},
                                  {"lo", st.ranges[t].lower.str()},
                                  {"hi", st.ranges[t].upper.str()}});
        s["output"] = {{"array", st.output.array}, {"index", st.output.components}};
        s["inputs"] = json::array();
        for (const auto& in : st.inputs)
            s["inputs"].push_back({{"array", in.array}, {"index", in.components}});
        if (!st.outdeg1_arrays.empty()) s["outdeg1"] = st.outdeg1_arrays;
        j["statements"].push_back(std::move(s));
    }
    j["edges"] = json::array();
    for (const auto& e : prog.producer_consumer)
        j["edges"].push_back({{"producer", prog.statements[e.producer].id},
                              {"consumer", prog.statements[e.consumer].id},
                              {"array", e.array}});
    return j;
}

}  // namespace lux::daap
