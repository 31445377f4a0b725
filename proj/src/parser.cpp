#include "csll/parser.hpp"

#include <cctype>
#include <set>
#include <sstream>

namespace csll {

ParseError::ParseError(const std::string& msg, SourceSpan s)
    : std::runtime_error(format_span(s) + ": " + msg), span(std::move(s)) {}

std::string format_span(const SourceSpan& s) {
    return s.file + ":" + std::to_string(s.line) + ":" + std::to_string(s.column);
}

namespace {

enum class Tok { Ident, Sym, End };

struct Token {
    Tok kind;
    std::string text;
    SourceSpan span;
};

std::vector<Token> lex(const std::string& src, const std::string& file) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto adv = [&](size_t n) {
        for (size_t k = 0; k < n && i < src.size(); ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            adv(1);
            continue;
        }
        if (c == '-' && i + 1 < src.size() && src[i + 1] == '-') {
            while (i < src.size() && src[i] != '\n') adv(1);
            continue;
        }
        SourceSpan sp{file, line, col, 1};
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' || src[j] == '\''))
                ++j;
            sp.length = static_cast<int>(j - i);
            out.push_back({Tok::Ident, src.substr(i, j - i), sp});
            adv(j - i);
            continue;
        }
        static const std::string syms = "(){};:,|.*+&=01";
        if (syms.find(c) != std::string::npos) {
            out.push_back({Tok::Sym, std::string(1, c), sp});
            adv(1);
            continue;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", sp);
    }
    // the end token reuses the last token's span so it stays inside the input
    SourceSpan end = out.empty() ? SourceSpan{file, 1, 1, 0} : out.back().span;
    out.push_back({Tok::End, "", end});
    return out;
}

const std::set<std::string> kKeywords = {"close", "wait", "fail", "send", "recv",  "case", "server",
                                         "idle",  "client", "done", "new",  "def",   "main", "in1",
                                         "in2",   "bot",    "top",  "par",  "srv",   "cli"};

struct PendingCall {
    std::string name;
    size_t arity;
    SourceSpan span;
};

class Parser {
public:
    Parser(const std::string& text, const std::string& file) : toks_(lex(text, file)) {}

    Program program() {
        Program prog;
        std::vector<PendingCall> calls;
        calls_ = &calls;
        while (!at_end()) {
            if (peek_is("def")) {
                next();
                auto name_tok = expect_ident("definition name");
                if (prog.defs.count(name_tok.text))
                    throw ParseError("duplicate definition '" + name_tok.text + "'", name_tok.span);
                Definition d = definition(name_tok);
                prog.defs.emplace(d.name, std::move(d));
            } else if (peek_is("main")) {
                auto t = next();
                if (prog.main) throw ParseError("duplicate main", t.span);
                prog.main = definition(t);
            } else {
                throw ParseError("expected 'def' or 'main', found " + describe(peek()), peek().span);
            }
        }
        for (auto& c : calls) {
            const Definition* d = prog.find(c.name);
            if (!d) throw ParseError("undefined process '" + c.name + "'", c.span);
            if (d->params.size() != c.arity)
                throw ParseError("process '" + c.name + "' expects " + std::to_string(d->params.size()) +
                                     " arguments, got " + std::to_string(c.arity),
                                 c.span);
        }
        return prog;
    }

    Type type_only() {
        auto t = type();
        if (!at_end()) throw ParseError("unexpected " + describe(peek()) + " after type", peek().span);
        return t;
    }

    Proc process_only(std::map<std::string, Chan>& scope) {
        open_scope_ = true;
        for (auto& [n, c] : scope) scope_.push_back({n, c});
        auto p = process();
        if (!at_end()) throw ParseError("unexpected " + describe(peek()) + " after process", peek().span);
        for (auto& [n, c] : scope_) scope.emplace(n, c);
        return p;
    }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
    std::vector<std::pair<std::string, Chan>> scope_;
    std::vector<PendingCall>* calls_ = nullptr;
    bool open_scope_ = false;

    const Token& peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at_end() const { return peek().kind == Tok::End; }
    Token next() {
        Token t = peek();
        if (pos_ < toks_.size() - 1) ++pos_;
        return t;
    }
    bool peek_is(const std::string& s, size_t k = 0) const { return peek(k).kind != Tok::End && peek(k).text == s; }
    static std::string describe(const Token& t) {
        if (t.kind == Tok::End) return "end of input";
        return "'" + t.text + "'";
    }
    Token expect(const std::string& s) {
        if (!peek_is(s)) throw ParseError("expected '" + s + "', found " + describe(peek()), peek().span);
        return next();
    }
    Token expect_ident(const std::string& what) {
        if (peek().kind != Tok::Ident || kKeywords.count(peek().text))
            throw ParseError("expected " + what + ", found " + describe(peek()), peek().span);
        return next();
    }

    Definition definition(const Token& name_tok) {
        Definition d;
        d.name = name_tok.text;
        d.span = name_tok.span;
        expect("(");
        std::set<std::string> seen;
        if (!peek_is(")")) {
            while (true) {
                auto x = expect_ident("parameter name");
                if (!seen.insert(x.text).second) throw ParseError("duplicate parameter '" + x.text + "'", x.span);
                expect(":");
                d.params.push_back({fresh_channel(x.text), type()});
                if (peek_is(",")) {
                    next();
                    continue;
                }
                break;
            }
        }
        expect(")");
        expect("=");
        scope_.clear();
        for (auto& [c, t] : d.params) scope_.push_back({c.name, c});
        d.body = process();
        scope_.clear();
        return d;
    }

    Chan use(const Token& t) {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
            if (it->first == t.text) return it->second;
        if (open_scope_) {
            Chan c = fresh_channel(t.text);
            scope_.insert(scope_.begin(), {t.text, c});
            return c;
        }
        throw ParseError("channel '" + t.text + "' is not a parameter or bound name", t.span);
    }
    Chan use_ident() { return use(expect_ident("channel name")); }

    template <class F>
    auto with_binder(const Chan& y, F&& f) {
        scope_.push_back({y.name, y});
        auto r = f();
        scope_.pop_back();
        return r;
    }

    Proc block() {
        expect("{");
        auto p = process();
        expect("}");
        return p;
    }

    Proc process() {
        const Token& t = peek();
        SourceSpan sp = t.span;
        if (t.kind == Tok::Sym && t.text == "(") {
            next();
            auto p = process();
            expect(")");
            return p;
        }
        if (t.kind != Tok::Ident) throw ParseError("expected a process, found " + describe(t), sp);
        const std::string kw = t.text;
        if (kw == "close" || kw == "fail" || kw == "done") {
            next();
            Chan x = use_ident();
            if (kw == "close") return make_proc(Close{x}, sp);
            if (kw == "fail") return make_proc(Fail{x}, sp);
            return make_proc(Nil{x}, sp);
        }
        if (kw == "wait") {
            next();
            Chan x = use_ident();
            expect(";");
            return make_proc(Wait{x, process()}, sp);
        }
        if (kw == "send" || kw == "client") {
            next();
            Chan x = use_ident();
            expect("(");
            Chan y = fresh_channel(expect_ident("bound channel").text);
            expect(")");
            Proc p = with_binder(y, [&] { return block(); });
            expect(";");
            Proc q = process();
            if (kw == "send") return make_proc(Fork{x, y, p, q}, sp);
            return make_proc(Cons{x, y, p, q}, sp);
        }
        if (kw == "recv") {
            next();
            Chan x = use_ident();
            expect("(");
            Chan y = fresh_channel(expect_ident("bound channel").text);
            expect(")");
            expect(";");
            Proc p = with_binder(y, [&] { return process(); });
            return make_proc(Join{x, y, p}, sp);
        }
        if (kw == "case") {
            next();
            Chan x = use_ident();
            expect("{");
            expect("in1");
            expect(":");
            Proc p = process();
            expect(";");
            expect("in2");
            expect(":");
            Proc q = process();
            expect("}");
            return make_proc(Case{x, p, q}, sp);
        }
        if (kw == "server") {
            next();
            Chan x = use_ident();
            expect("(");
            Chan y = fresh_channel(expect_ident("bound channel").text);
            expect(")");
            Proc p = with_binder(y, [&] { return block(); });
            expect("idle");
            Proc q = block();
            return make_proc(Server{x, y, p, q}, sp);
        }
        if (kw == "new") {
            next();
            Chan x = fresh_channel(expect_ident("channel name").text);
            expect(":");
            Type ty = type();
            expect("{");
            Proc p = with_binder(x, [&] { return process(); });
            expect("|");
            Proc q = with_binder(x, [&] { return process(); });
            expect("}");
            return make_proc(Cut{x, ty, p, q}, sp);
        }
        if (kKeywords.count(kw)) throw ParseError("unexpected keyword '" + kw + "'", sp);
        if (peek_is("(", 1)) {
            next();
            next();
            std::vector<Chan> args;
            if (!peek_is(")")) {
                while (true) {
                    args.push_back(use_ident());
                    if (peek_is(",")) {
                        next();
                        continue;
                    }
                    break;
                }
            }
            expect(")");
            if (calls_) calls_->push_back({kw, args.size(), sp});
            return make_proc(Call{kw, args}, sp);
        }
        if (peek_is(".", 1)) {
            Chan x = use(next());
            next();
            Label l;
            if (peek_is("in1"))
                l = Label::In1;
            else if (peek_is("in2"))
                l = Label::In2;
            else
                throw ParseError("expected 'in1' or 'in2', found " + describe(peek()), peek().span);
            next();
            expect(";");
            return make_proc(Select{x, l, process()}, sp);
        }
        throw ParseError("expected a process, found " + describe(t), sp);
    }

    // type := mul (op mul)* with op in {+, &}; likewise mul over {*, par}
    Type type() { return binary_level(true); }

    static std::optional<TypeKind> op_kind(const Token& t, bool additive) {
        if (additive) {
            if (t.text == "+") return TypeKind::Plus;
            if (t.text == "&") return TypeKind::With;
        } else {
            if (t.text == "*") return TypeKind::Tensor;
            if (t.text == "par") return TypeKind::Par;
        }
        return std::nullopt;
    }

    Type binary_level(bool additive) {
        std::vector<Type> items{additive ? binary_level(false) : unary()};
        std::optional<TypeKind> op;
        while (peek().kind != Tok::End) {
            auto k = op_kind(peek(), additive);
            if (!k) break;
            if (op && *op != *k)
                throw ParseError("mixing '" + peek().text + "' with a different operator requires parentheses",
                                 peek().span);
            op = k;
            next();
            items.push_back(additive ? binary_level(false) : unary());
        }
        Type acc = items.back();
        for (size_t i = items.size() - 1; i-- > 0;) acc = make_type(*op, items[i], acc);
        return acc;
    }

    Type unary() {
        if (peek_is("srv")) {
            next();
            return t_server(unary());
        }
        if (peek_is("cli")) {
            next();
            return t_client(unary());
        }
        const Token& t = peek();
        if (t.text == "1" && t.kind == Tok::Sym) {
            next();
            return t_one();
        }
        if (t.text == "0" && t.kind == Tok::Sym) {
            next();
            return t_zero();
        }
        if (peek_is("bot")) {
            next();
            return t_bot();
        }
        if (peek_is("top")) {
            next();
            return t_top();
        }
        if (peek_is("(")) {
            next();
            auto ty = type();
            expect(")");
            return ty;
        }
        throw ParseError("expected a type, found " + describe(t), t.span);
    }
};

// ---------------------------------------------------------------- printing

int level(TypeKind k) {
    switch (k) {
        case TypeKind::Plus:
        case TypeKind::With: return 1;
        case TypeKind::Tensor:
        case TypeKind::Par: return 2;
        case TypeKind::Server:
        case TypeKind::Client: return 3;
        default: return 4;
    }
}

const char* op_text(TypeKind k) {
    switch (k) {
        case TypeKind::Plus: return "+";
        case TypeKind::With: return "&";
        case TypeKind::Tensor: return "*";
        case TypeKind::Par: return "par";
        case TypeKind::Server: return "srv";
        case TypeKind::Client: return "cli";
        case TypeKind::One: return "1";
        case TypeKind::Zero: return "0";
        case TypeKind::Bot: return "bot";
        case TypeKind::Top: return "top";
    }
    return "?";
}

void print_type(std::ostream& os, const Type& t) {
    auto paren = [&](const Type& c, bool need) {
        if (need) os << "(";
        print_type(os, c);
        if (need) os << ")";
    };
    int lv = level(t->kind);
    if (is_binary(t->kind)) {
        paren(t->left, level(t->left->kind) <= lv);
        os << " " << op_text(t->kind) << " ";
        int rl = level(t->right->kind);
        paren(t->right, rl < lv || (rl == lv && t->right->kind != t->kind));
        return;
    }
    if (is_unary(t->kind)) {
        os << op_text(t->kind) << " ";
        paren(t->left, level(t->left->kind) < 3);
        return;
    }
    os << op_text(t->kind);
}

class Printer {
public:
    explicit Printer(std::ostream& os) : os_(os) {}

    std::string name_free(const Chan& c, const std::string& preferred) {
        std::string n = pick(preferred);
        names_[c] = n;
        used_.insert(n);
        return n;
    }

    void name_free_all(const Proc& p) {
        for (auto& c : free_names(p))
            if (!names_.count(c)) name_free(c, c.name);
    }

    void print(const Proc& p) {
        std::visit([&](const auto& n) { node(n); }, p->node);
    }

private:
    std::ostream& os_;
    std::map<Chan, std::string> names_;
    std::multiset<std::string> used_;

    std::string pick(const std::string& base) {
        if (!used_.count(base)) return base;
        for (int k = 1;; ++k) {
            std::string n = base + "_" + std::to_string(k);
            if (!used_.count(n)) return n;
        }
    }

    std::string nm(const Chan& c) {
        auto it = names_.find(c);
        if (it != names_.end()) return it->second;
        name_free(c, c.name);
        return names_[c];
    }

    template <class F>
    void bind(const Chan& y, F&& f) {
        std::string n = pick(y.name);
        auto saved = names_.find(y) != names_.end() ? std::optional<std::string>(names_[y]) : std::nullopt;
        names_[y] = n;
        auto it = used_.insert(n);
        f(n);
        used_.erase(it);
        if (saved)
            names_[y] = *saved;
        else
            names_.erase(y);
    }

    void node(const Call& n) {
        os_ << n.name << "(";
        for (size_t i = 0; i < n.args.size(); ++i) os_ << (i ? ", " : "") << nm(n.args[i]);
        os_ << ")";
    }
    void node(const Fail& n) { os_ << "fail " << nm(n.x); }
    void node(const Close& n) { os_ << "close " << nm(n.x); }
    void node(const Nil& n) { os_ << "done " << nm(n.x); }
    void node(const Wait& n) {
        os_ << "wait " << nm(n.x) << "; ";
        print(n.p);
    }
    void node(const Select& n) {
        os_ << nm(n.x) << (n.label == Label::In1 ? ".in1; " : ".in2; ");
        print(n.p);
    }
    void node(const Case& n) {
        os_ << "case " << nm(n.x) << " { in1: ";
        print(n.p);
        os_ << " ; in2: ";
        print(n.q);
        os_ << " }";
    }
    void node(const Join& n) {
        std::string x = nm(n.x);
        bind(n.y, [&](const std::string& y) {
            os_ << "recv " << x << "(" << y << "); ";
            print(n.p);
        });
    }
    void node(const Fork& n) { out_in("send", n.x, n.y, n.p, n.q); }
    void node(const Cons& n) { out_in("client", n.x, n.y, n.p, n.q); }
    void out_in(const char* kw, const Chan& xc, const Chan& yc, const Proc& p, const Proc& q) {
        std::string x = nm(xc);
        bind(yc, [&](const std::string& y) {
            os_ << kw << " " << x << "(" << y << ") { ";
            print(p);
            os_ << " }; ";
        });
        print(q);
    }
    void node(const Server& n) {
        std::string x = nm(n.x);
        bind(n.y, [&](const std::string& y) {
            os_ << "server " << x << "(" << y << ") { ";
            print(n.p);
            os_ << " } idle { ";
        });
        print(n.q);
        os_ << " }";
    }
    void node(const Cut& n) {
        bind(n.x, [&](const std::string& x) {
            os_ << "new " << x << " : ";
            print_type(os_, n.type);
            os_ << " { ";
            print(n.p);
            os_ << " | ";
            print(n.q);
            os_ << " }";
        });
    }
};

}  // namespace

Program parse_program(const std::string& text, const std::string& file) { return Parser(text, file).program(); }

Type parse_type(const std::string& text) { return Parser(text, "<type>").type_only(); }

Proc parse_process(const std::string& text, std::map<std::string, Chan>& scope) {
    return Parser(text, "<process>").process_only(scope);
}

std::string pretty(const Type& t) {
    std::ostringstream os;
    print_type(os, t);
    return os.str();
}

std::string pretty(const Proc& p) { return pretty(p, {}); }

std::string pretty(const Proc& p, const std::map<Chan, std::string>& names) {
    std::ostringstream os;
    Printer pr(os);
    for (auto& [c, n] : names) pr.name_free(c, n);
    pr.name_free_all(p);
    pr.print(p);
    return os.str();
}

std::string pretty(const Definition& d, bool is_main) {
    std::ostringstream os;
    Printer pr(os);
    os << (is_main ? "main" : "def " + d.name) << "(";
    for (size_t i = 0; i < d.params.size(); ++i) {
        std::string n = pr.name_free(d.params[i].first, d.params[i].first.name);
        os << (i ? ", " : "") << n << ": " << pretty(d.params[i].second);
    }
    os << ") = ";
    pr.print(d.body);
    return os.str();
}

std::string pretty(const Program& prog) {
    std::string out;
    for (auto& [name, d] : prog.defs) out += pretty(d) + "\n";
    if (prog.main) out += pretty(*prog.main, true) + "\n";
    return out;
}

}  // namespace csll
