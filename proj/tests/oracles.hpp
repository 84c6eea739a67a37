#pragma once

// Independent reference implementations used as test oracles. None of them
// share code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Central angle from the chord between unit vectors, in long double.
inline double sphere_distance_km(double lat1, double lon1, double lat2, double lon2, double radius_km = 6371.0)
{
    const long double d2r = 3.14159265358979323846264338327950288L / 180.0L;
    const auto vec = [&](double lat, double lon) {
        const long double la = lat * d2r;
        const long double lo = lon * d2r;
        return std::array<long double, 3>{std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
    };
    const auto a = vec(lat1, lon1);
    const auto b = vec(lat2, lon2);
    long double c2 = 0;
    for (int k = 0; k < 3; ++k) {
        c2 += (a[k] - b[k]) * (a[k] - b[k]);
    }
    const long double chord = std::sqrt(c2);
    return static_cast<double>(2.0L * std::asin(std::min<long double>(1.0L, chord / 2.0L)) * radius_km);
}

struct Component {
    std::vector<std::pair<int, int>> cells; // sorted (row, col)
    std::int64_t activity{0};
};

// 8-connected components of cells with count >= threshold (threshold >= 1).
inline std::vector<Component> components_at(const std::vector<std::int64_t>& counts, int rows, int cols,
                                            std::int64_t threshold)
{
    std::vector<int> seen(counts.size(), 0);
    std::vector<Component> out;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const auto idx = static_cast<std::size_t>(r * cols + c);
            if (seen[idx] || counts[idx] < threshold) {
                continue;
            }
            Component comp;
            std::deque<std::pair<int, int>> queue{{r, c}};
            seen[idx] = 1;
            while (!queue.empty()) {
                auto [cr, cc] = queue.front();
                queue.pop_front();
                comp.cells.emplace_back(cr, cc);
                comp.activity += counts[static_cast<std::size_t>(cr * cols + cc)];
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = cr + dr;
                        const int nc = cc + dc;
                        if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) {
                            continue;
                        }
                        const auto n = static_cast<std::size_t>(nr * cols + nc);
                        if (!seen[n] && counts[n] >= threshold) {
                            seen[n] = 1;
                            queue.emplace_back(nr, nc);
                        }
                    }
                }
            }
            std::sort(comp.cells.begin(), comp.cells.end());
            out.push_back(std::move(comp));
        }
    }
    return out;
}

// Threshold sweep: the highest distinct positive level whose components number
// at least n; if no level gets there, the components of every nonzero cell.
// Ranked by activity, ties by smallest cell.
inline std::vector<Component> hotspots(const std::vector<std::int64_t>& counts, int rows, int cols, std::size_t n)
{
    std::set<std::int64_t, std::greater<>> levels;
    for (auto v : counts) {
        if (v > 0) {
            levels.insert(v);
        }
    }
    std::vector<Component> best;
    for (auto level : levels) {
        best = components_at(counts, rows, cols, level);
        if (best.size() >= n) {
            break;
        }
    }
    std::sort(best.begin(), best.end(), [](const Component& a, const Component& b) {
        if (a.activity != b.activity) {
            return a.activity > b.activity;
        }
        return a.cells.front() < b.cells.front();
    });
    return best;
}

// Minimal prefix of descending counts whose sum reaches percent% of the total.
inline std::size_t cells_for(std::vector<std::int64_t> counts, int percent)
{
    std::sort(counts.begin(), counts.end(), std::greater<>());
    long double total = 0;
    for (auto v : counts) {
        total += static_cast<long double>(v);
    }
    long double acc = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        acc += static_cast<long double>(counts[k]);
        if (acc * 100.0L >= total * percent) {
            return k + 1;
        }
    }
    return counts.size();
}

// Rejection sampler for a log-normal conditioned on x >= t.
inline std::vector<double> truncated_lognormal(std::mt19937_64& rng, double mu, double sigma, double t, std::size_t n)
{
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> out;
    out.reserve(n);
    while (out.size() < n) {
        const double x = std::exp(mu + sigma * z(rng));
        if (x >= t) {
            out.push_back(x);
        }
    }
    return out;
}

// Plain OLS slope/intercept/R^2 in long double.
struct Line {
    double slope{0};
    double intercept{0};
    double r2{0};
};

inline Line ols(const std::vector<double>& x, const std::vector<double>& y)
{
    long double mx = 0;
    long double my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    long double sxx = 0;
    long double sxy = 0;
    long double syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    Line l;
    l.slope = static_cast<double>(sxy / sxx);
    l.intercept = static_cast<double>(my - sxy / sxx * mx);
    l.r2 = syy == 0 ? 1.0 : static_cast<double>(sxy * sxy / (sxx * syy));
    return l;
}

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative path -> file bytes for every regular file under root.
inline std::map<std::string, std::string> tree(const std::filesystem::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out[std::filesystem::relative(e.path(), root).generic_string()] = slurp(e.path());
        }
    }
    return out;
}

inline std::filesystem::path scratch(const std::string& name)
{
    const auto p = std::filesystem::path(GEOPHOTO_TEST_TMP) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

} // namespace oracle
