#pragma once

// Brute-force oracles kept independent of the library implementations they
// check. CFGs of this language are DAGs, so path enumeration terminates.

#include <set>
#include <vector>

#include "oct/cfg.hpp"

namespace octtest {

inline void all_paths_from(const oct::Cfg& cfg, int from, int to, std::vector<int>& cur,
                           std::vector<std::vector<int>>& out) {
    cur.push_back(from);
    if (from == to) {
        out.push_back(cur);
    } else {
        for (int s : cfg.blocks[from].succs) all_paths_from(cfg, s, to, cur, out);
    }
    cur.pop_back();
}

inline std::vector<std::vector<int>> all_paths(const oct::Cfg& cfg, int from, int to) {
    std::vector<int> cur;
    std::vector<std::vector<int>> out;
    all_paths_from(cfg, from, to, cur, out);
    return out;
}

// dom(x, y): every entry -> y path visits x.
inline bool dom_oracle(const oct::Cfg& cfg, int x, int y) {
    auto paths = all_paths(cfg, cfg.entry, y);
    if (paths.empty()) return false;
    for (const auto& p : paths) {
        bool visits = false;
        for (int b : p)
            if (b == x) visits = true;
        if (!visits) return false;
    }
    return true;
}

inline bool postdom_oracle(const oct::Cfg& cfg, int x, int y) {
    auto paths = all_paths(cfg, y, cfg.exit);
    if (paths.empty()) return false;
    for (const auto& p : paths) {
        bool visits = false;
        for (int b : p)
            if (b == x) visits = true;
        if (!visits) return false;
    }
    return true;
}

// Naive closest common dominator: intersect oracle dominator sets, take the
// element dominated by every other common dominator.
inline int closest_common_dom_oracle(const oct::Cfg& cfg, const std::vector<int>& ids) {
    std::set<int> common;
    for (size_t b = 0; b < cfg.blocks.size(); ++b) {
        bool all = true;
        for (int y : ids)
            if (!dom_oracle(cfg, (int)b, y)) all = false;
        if (all) common.insert((int)b);
    }
    for (int d : common) {
        bool lowest = true;
        for (int d2 : common)
            if (d2 != d && !dom_oracle(cfg, d2, d)) lowest = false;
        if (lowest) return d;
    }
    return -1;
}

inline int closest_common_postdom_oracle(const oct::Cfg& cfg, const std::vector<int>& ids) {
    std::set<int> common;
    for (size_t b = 0; b < cfg.blocks.size(); ++b) {
        bool all = true;
        for (int y : ids)
            if (!postdom_oracle(cfg, (int)b, y)) all = false;
        if (all) common.insert((int)b);
    }
    for (int d : common) {
        bool lowest = true;
        for (int d2 : common)
            if (d2 != d && !postdom_oracle(cfg, d2, d)) lowest = false;
        if (lowest) return d;
    }
    return -1;
}

}  // namespace octtest
