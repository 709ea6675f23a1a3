#pragma once

// 0-dimensional sublevel-set persistence of sampled 1D signals.
//
// Conventions shared by the fast sweep and the brute-force oracle:
//  * runs of equal consecutive samples are collapsed to one vertex,
//  * at a merge the component with the larger birth dies; equal births are
//    broken in favour of the smaller index (the elder survives),
//  * the component born at the global minimum never merges; by default it is
//    paired with the global maximum so every signal yields a finite pair.

#include "topoeeg/core.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace topoeeg {

struct PersistencePair {
    double birth = 0.0;
    double death = 0.0;

    double lifetime() const { return death - birth; }
    friend bool operator==(const PersistencePair&, const PersistencePair&) = default;
    friend auto operator<=>(const PersistencePair&, const PersistencePair&) = default;
};

/// What happens to the never-dying component.
enum class EssentialPolicy { PairWithGlobalMax, Drop };

struct PersistenceDiagram {
    std::vector<PersistencePair> pairs;
    EssentialPolicy essential = EssentialPolicy::PairWithGlobalMax;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }

    /// Pairs in ascending (birth, death) order, for multiset comparison.
    std::vector<PersistencePair> sorted() const {
        auto p = pairs;
        std::sort(p.begin(), p.end());
        return p;
    }
};

namespace persistence_detail {

inline void check_finite(std::span<const double> x) {
    if (x.empty()) throw ValidationError("persistence: signal must have at least one sample");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) throw ValidationError("persistence: non-finite sample at index " + std::to_string(i));
}

/// Values of the plateau-collapsed signal.
inline std::vector<double> collapse(std::span<const double> x) {
    std::vector<double> v;
    v.reserve(x.size());
    for (double s : x)
        if (v.empty() || v.back() != s) v.push_back(s);
    return v;
}

}  // namespace persistence_detail

/// Union-find sweep over vertices in (value, index) order.
inline PersistenceDiagram sublevel_diagram(std::span<const double> samples,
                                           EssentialPolicy essential = EssentialPolicy::PairWithGlobalMax) {
    using namespace persistence_detail;
    check_finite(samples);
    const auto v = collapse(samples);
    const std::size_t n = v.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });

    constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> parent(n, kUnset);
    std::vector<std::size_t> root_min(n, kUnset);  // index of the birth vertex of a root's component

    auto find = [&](std::size_t i) {
        std::size_t r = i;
        while (parent[r] != r) r = parent[r];
        while (parent[i] != r) {
            const std::size_t next = parent[i];
            parent[i] = r;
            i = next;
        }
        return r;
    };
    // True when the component born at vertex a is elder to the one born at b.
    auto elder = [&](std::size_t a, std::size_t b) { return v[a] < v[b] || (v[a] == v[b] && a < b); };

    PersistenceDiagram pd;
    pd.essential = essential;
    for (const std::size_t i : order) {
        parent[i] = i;
        root_min[i] = i;
        for (const std::size_t j : {i - 1, i + 1}) {
            if (i == 0 && j == kUnset) continue;
            if (j >= n || parent[j] == kUnset) continue;
            const std::size_t ri = find(i), rj = find(j);
            if (ri == rj) continue;
            const std::size_t mi = root_min[ri], mj = root_min[rj];
            const bool i_survives = elder(mi, mj);
            const std::size_t survivor = i_survives ? ri : rj;
            const std::size_t dying = i_survives ? rj : ri;
            const std::size_t dying_min = i_survives ? mj : mi;
            // A vertex that only just appeared and joins an existing component is not a birth.
            if (dying_min != i) pd.pairs.push_back({v[dying_min], v[i]});
            parent[dying] = survivor;
        }
    }
    if (essential == EssentialPolicy::PairWithGlobalMax) pd.pairs.push_back({v[order.front()], v[order.back()]});
    return pd;
}

inline PersistenceDiagram sublevel_diagram(const std::vector<double>& samples,
                                           EssentialPolicy essential = EssentialPolicy::PairWithGlobalMax) {
    return sublevel_diagram(std::span<const double>(samples), essential);
}

/// Definition-based oracle: at each distinct threshold t, recompute the
/// connected components (maximal index runs with value <= t) and compare with
/// the components at the previous threshold. Intended for short signals.
inline PersistenceDiagram brute_force_diagram(std::span<const double> samples,
                                              EssentialPolicy essential = EssentialPolicy::PairWithGlobalMax) {
    using namespace persistence_detail;
    check_finite(samples);
    const std::size_t n = samples.size();
    std::vector<double> thresholds(samples.begin(), samples.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    struct Component {
        std::size_t lo, hi;   // inclusive index range
        std::size_t rep;      // first index attaining the component's minimum
    };
    // Representative of a component, as tracked from its birth.
    struct Alive {
        std::size_t rep;
        double birth;
    };

    PersistenceDiagram pd;
    pd.essential = essential;
    std::vector<Alive> alive;  // indexed parallel to prev components
    std::vector<Component> prev;
    for (const double t : thresholds) {
        std::vector<Component> cur;
        for (std::size_t i = 0; i < n;) {
            if (samples[i] > t) {
                ++i;
                continue;
            }
            std::size_t j = i, rep = i;
            while (j < n && samples[j] <= t) {
                if (samples[j] < samples[rep]) rep = j;
                ++j;
            }
            cur.push_back({i, j - 1, rep});
            i = j;
        }
        std::vector<Alive> next;
        for (const auto& c : cur) {
            std::vector<Alive> inside;
            for (std::size_t k = 0; k < prev.size(); ++k)
                if (prev[k].lo >= c.lo && prev[k].hi <= c.hi) inside.push_back(alive[k]);
            if (inside.empty()) {
                next.push_back({c.rep, samples[c.rep]});
                continue;
            }
            auto oldest = std::min_element(inside.begin(), inside.end(), [](const Alive& a, const Alive& b) {
                return a.birth < b.birth || (a.birth == b.birth && a.rep < b.rep);
            });
            for (auto it = inside.begin(); it != inside.end(); ++it)
                if (it != oldest) pd.pairs.push_back({it->birth, t});
            next.push_back(*oldest);
        }
        prev = std::move(cur);
        alive = std::move(next);
    }
    if (essential == EssentialPolicy::PairWithGlobalMax) pd.pairs.push_back({alive.front().birth, thresholds.back()});
    return pd;
}

inline PersistenceDiagram brute_force_diagram(const std::vector<double>& samples,
                                              EssentialPolicy essential = EssentialPolicy::PairWithGlobalMax) {
    return brute_force_diagram(std::span<const double>(samples), essential);
}

/// Number of strict local minima of the plateau-collapsed signal (endpoints included).
inline std::size_t count_local_minima(std::span<const double> samples) {
    const auto v = persistence_detail::collapse(samples);
    if (v.size() == 1) return 1;
    std::size_t count = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool left = i == 0 || v[i - 1] > v[i];
        const bool right = i + 1 == v.size() || v[i + 1] > v[i];
        if (left && right) ++count;
    }
    return count;
}

/// Exact bottleneck distance (L-infinity ground metric, points may be
/// matched to their diagonal projection). Binary search over candidate
/// costs with a perfect-matching test; cubic, meant for small diagrams.
inline double bottleneck_distance(const PersistenceDiagram& a, const PersistenceDiagram& b) {
    const std::size_t n = a.size(), m = b.size(), size = n + m;
    if (size == 0) return 0.0;
    constexpr double inf = std::numeric_limits<double>::infinity();
    // Left: a points then diagonal copies of b. Right: b points then diagonal copies of a.
    auto cost = [&](std::size_t l, std::size_t r) {
        if (l < n && r < m)
            return std::max(std::abs(a.pairs[l].birth - b.pairs[r].birth), std::abs(a.pairs[l].death - b.pairs[r].death));
        if (l < n) return r - m == l ? a.pairs[l].lifetime() / 2.0 : inf;
        if (r < m) return l - n == r ? b.pairs[r].lifetime() / 2.0 : inf;
        return 0.0;
    };
    std::vector<double> candidates;
    for (std::size_t l = 0; l < size; ++l)
        for (std::size_t r = 0; r < size; ++r)
            if (const double c = cost(l, r); c < inf) candidates.push_back(c);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    auto perfect = [&](double eps) {
        std::vector<std::size_t> match_r(size, size);
        std::vector<char> seen;
        std::function<bool(std::size_t)> augment = [&](std::size_t l) {
            for (std::size_t r = 0; r < size; ++r) {
                if (seen[r] || cost(l, r) > eps) continue;
                seen[r] = 1;
                if (match_r[r] == size || augment(match_r[r])) {
                    match_r[r] = l;
                    return true;
                }
            }
            return false;
        };
        for (std::size_t l = 0; l < size; ++l) {
            seen.assign(size, 0);
            if (!augment(l)) return false;
        }
        return true;
    };
    std::size_t lo = 0, hi = candidates.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (perfect(candidates[mid])) hi = mid;
        else lo = mid + 1;
    }
    return candidates[lo];
}

/// CSV with header `birth,death`.
inline std::string diagram_to_csv(const PersistenceDiagram& pd) {
    std::ostringstream out;
    out << "birth,death\n";
    for (const auto& p : pd.pairs) out << format_double(p.birth) << ',' << format_double(p.death) << '\n';
    return out.str();
}

inline PersistenceDiagram diagram_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "birth,death") throw ParseError("diagram CSV: expected header 'birth,death'");
    PersistenceDiagram pd;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 2) throw ParseError("diagram CSV line " + std::to_string(lineno) + ": expected 2 fields");
        pd.pairs.push_back({parse_double(cells[0]), parse_double(cells[1])});
    }
    return pd;
}

}  // namespace topoeeg
