#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "irqav/errors.hpp"

namespace irqav {

// Raw program text plus a 1-based line index. The parser, annotator and
// extractor all need to address the original bytes by line.
class SourceText {
public:
    SourceText() = default;

    explicit SourceText(std::string text) : text_(std::move(text)) { index(); }

    static SourceText from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw AnalysisError(0, "cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return SourceText(ss.str());
    }

    const std::string& text() const { return text_; }
    std::size_t size() const { return text_.size(); }
    int line_count() const { return static_cast<int>(lines_.size()); }

    // Line content without the trailing newline. 1-based.
    std::string line(int n) const {
        if (n < 1 || n > line_count()) return {};
        return lines_[static_cast<std::size_t>(n - 1)];
    }

    const std::vector<std::string>& lines() const { return lines_; }

private:
    void index() {
        lines_.clear();
        std::string cur;
        for (char c : text_) {
            if (c == '\n') {
                lines_.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) lines_.push_back(cur);
    }

    std::string text_;
    std::vector<std::string> lines_;
};

}  // namespace irqav
