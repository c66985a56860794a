#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "irqav/errors.hpp"
#include "irqav/source_text.hpp"

namespace irqav {

enum class Tok {
    End,
    Ident,
    IntLit,
    Punct,  // operators and punctuation, text held in Token::text
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    long long value = 0;  // for IntLit
    int line = 0;
    int col = 0;
};

// Hand-rolled scanner for the restricted C subset. Comments (// and /* */)
// are skipped; preprocessor lines are rejected loudly since the subset does
// no preprocessing.
class Lexer {
public:
    explicit Lexer(const SourceText& src) : src_(src.text()) { scan(); }

    const std::vector<Token>& tokens() const { return toks_; }

private:
    void scan() {
        std::size_t i = 0;
        int line = 1, col = 1;
        auto advance = [&](std::size_t n = 1) {
            for (std::size_t k = 0; k < n && i < src_.size(); ++k) {
                if (src_[i] == '\n') {
                    ++line;
                    col = 1;
                } else {
                    ++col;
                }
                ++i;
            }
        };
        bool at_line_start = true;
        while (i < src_.size()) {
            char c = src_[i];
            if (c == '\n') {
                advance();
                at_line_start = true;
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
                continue;
            }
            if (c == '#' && at_line_start) throw UnsupportedConstruct(line, "preprocessor directive");
            at_line_start = false;
            if (c == '/' && i + 1 < src_.size() && src_[i + 1] == '/') {
                while (i < src_.size() && src_[i] != '\n') advance();
                continue;
            }
            if (c == '/' && i + 1 < src_.size() && src_[i + 1] == '*') {
                int open_line = line;
                advance(2);
                while (i + 1 < src_.size() && !(src_[i] == '*' && src_[i + 1] == '/')) advance();
                if (i + 1 >= src_.size()) throw SyntaxError(open_line, "unterminated comment");
                advance(2);
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                Token t{Tok::Ident, {}, 0, line, col};
                while (i < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[i])) || src_[i] == '_')) {
                    t.text.push_back(src_[i]);
                    advance();
                }
                toks_.push_back(std::move(t));
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                Token t{Tok::IntLit, {}, 0, line, col};
                while (i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i]))) {
                    t.text.push_back(src_[i]);
                    advance();
                }
                if (i < src_.size() && (src_[i] == '.' || src_[i] == 'e' || src_[i] == 'E' ||
                                        src_[i] == 'f' || src_[i] == 'F'))
                    throw UnsupportedConstruct(line, "floating-point literal");
                t.value = std::stoll(t.text);
                toks_.push_back(std::move(t));
                continue;
            }
            if (c == '\'' || c == '"') throw UnsupportedConstruct(line, "character or string literal");
            // Multi-char operators, longest match first.
            static const char* ops3[] = {"<<=", ">>="};
            static const char* ops2[] = {"+=", "-=", "*=", "/=", "|=", "&=", "^=", "%=",
                                         "==", "!=", "<=", ">=", "&&", "||", "++", "--",
                                         "<<", ">>", "->"};
            bool matched = false;
            for (const char* op : ops3) {
                if (src_.compare(i, 3, op) == 0) {
                    throw UnsupportedConstruct(line, std::string("operator ") + op);
                }
            }
            for (const char* op : ops2) {
                if (src_.compare(i, 2, op) == 0) {
                    if (std::string(op) == "->") throw UnsupportedConstruct(line, "operator ->");
                    toks_.push_back({Tok::Punct, op, 0, line, col});
                    advance(2);
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            static const std::string singles = "+-*/%<>=!&|^~(){}[];,.?:";
            if (singles.find(c) != std::string::npos) {
                toks_.push_back({Tok::Punct, std::string(1, c), 0, line, col});
                advance();
                continue;
            }
            throw SyntaxError(line, std::string("unexpected character '") + c + "'");
        }
        toks_.push_back({Tok::End, "", 0, line, col});
    }

    const std::string& src_;
    std::vector<Token> toks_;
};

}  // namespace irqav
