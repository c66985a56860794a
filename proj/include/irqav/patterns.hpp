#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "irqav/access_analysis.hpp"

namespace irqav {

// The four unserializable interleaving shapes. A triple (a1, a2, a3) over one
// shared variable qualifies iff it contains at least one read and no two
// adjacent reads; filtering all eight op-triples by those two rules yields
// exactly these four tags.
enum class ViolationPattern { RWR, WWR, RWW, WRW };

inline const char* to_string(ViolationPattern p) {
    switch (p) {
        case ViolationPattern::RWR: return "RWR";
        case ViolationPattern::WWR: return "WWR";
        case ViolationPattern::RWW: return "RWW";
        case ViolationPattern::WRW: return "WRW";
    }
    return "?";
}

inline std::optional<ViolationPattern> pattern_from_string(const std::string& s) {
    if (s == "RWR") return ViolationPattern::RWR;
    if (s == "WWR") return ViolationPattern::WWR;
    if (s == "RWW") return ViolationPattern::RWW;
    if (s == "WRW") return ViolationPattern::WRW;
    return std::nullopt;
}

inline std::vector<ViolationPattern> enumerate_patterns() {
    return {ViolationPattern::RWR, ViolationPattern::WWR, ViolationPattern::RWW,
            ViolationPattern::WRW};
}

inline std::optional<ViolationPattern> pattern_of(AccessOp a1, AccessOp a2, AccessOp a3) {
    bool has_read =
        a1 == AccessOp::Read || a2 == AccessOp::Read || a3 == AccessOp::Read;
    bool adjacent_reads = (a1 == AccessOp::Read && a2 == AccessOp::Read) ||
                          (a2 == AccessOp::Read && a3 == AccessOp::Read);
    if (!has_read || adjacent_reads) return std::nullopt;
    std::string tag;
    tag += to_string(a1);
    tag += to_string(a2);
    tag += to_string(a3);
    return pattern_from_string(tag);
}

// Brute-force derivation over all eight op-triples; used by tests to confirm
// the fixed enumeration is exactly the filtered set.
inline std::vector<std::string> derive_pattern_tags() {
    std::vector<std::string> out;
    const std::array<AccessOp, 2> ops{AccessOp::Read, AccessOp::Write};
    for (AccessOp x : ops)
        for (AccessOp y : ops)
            for (AccessOp z : ops)
                if (auto p = pattern_of(x, y, z)) out.push_back(to_string(*p));
    return out;
}

}  // namespace irqav
