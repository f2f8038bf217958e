#pragma once

#include <array>
#include <compare>
#include <cstdlib>
#include <optional>
#include <string>

namespace neurosis {

struct Pos {
    int x = 0;
    int y = 0;
    auto operator<=>(const Pos&) const = default;
};

// y grows upward, so N is y+1.
enum class Dir : int { N = 0, E = 1, S = 2, W = 3 };

inline constexpr std::array<Dir, 4> kAllDirs{Dir::N, Dir::E, Dir::S, Dir::W};

inline constexpr Pos step(Pos p, Dir d) {
    switch (d) {
        case Dir::N: return {p.x, p.y + 1};
        case Dir::E: return {p.x + 1, p.y};
        case Dir::S: return {p.x, p.y - 1};
        case Dir::W: return {p.x - 1, p.y};
    }
    return p;
}

inline constexpr Dir opposite(Dir d) { return static_cast<Dir>((static_cast<int>(d) + 2) % 4); }

inline char dir_char(Dir d) { return "NESW"[static_cast<int>(d)]; }

inline std::optional<Dir> dir_from_char(char c) {
    switch (c) {
        case 'N': return Dir::N;
        case 'E': return Dir::E;
        case 'S': return Dir::S;
        case 'W': return Dir::W;
        default: return std::nullopt;
    }
}

inline std::string dir_str(std::optional<Dir> d) { return d ? std::string(1, dir_char(*d)) : std::string("-"); }

inline int manhattan(Pos a, Pos b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

inline int chebyshev(Pos a, Pos b) {
    int dx = std::abs(a.x - b.x), dy = std::abs(a.y - b.y);
    return dx > dy ? dx : dy;
}

// Direction that moves a to b when they are 4-adjacent.
inline std::optional<Dir> dir_between(Pos a, Pos b) {
    for (Dir d : kAllDirs)
        if (step(a, d) == b) return d;
    return std::nullopt;
}

// Tie-break order over the four moves. order[0] wins ties.
struct Canon {
    std::array<Dir, 4> order{Dir::N, Dir::E, Dir::S, Dir::W};
    bool operator==(const Canon&) const = default;

    int rank(Dir d) const {
        for (int i = 0; i < 4; ++i)
            if (order[i] == d) return i;
        return 4;
    }
    static Canon standard() { return {}; }
    static Canon reversed() { return {{Dir::W, Dir::S, Dir::E, Dir::N}}; }
    static std::optional<Canon> parse(const std::string& s);
    std::string str() const {
        std::string s;
        for (Dir d : order) s += dir_char(d);
        return s;
    }
};

inline std::optional<Canon> Canon::parse(const std::string& s) {
    if (s.size() != 4) return std::nullopt;
    Canon c;
    int seen = 0;
    for (int i = 0; i < 4; ++i) {
        auto d = dir_from_char(s[i]);
        if (!d) return std::nullopt;
        int bit = 1 << static_cast<int>(*d);
        if (seen & bit) return std::nullopt;
        seen |= bit;
        c.order[i] = *d;
    }
    return c;
}

}  // namespace neurosis
