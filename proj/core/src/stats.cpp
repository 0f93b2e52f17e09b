#include "tapscope/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tapscope/errors.hpp"

namespace tapscope {

double percentile(std::vector<double> v, double p)
{
    if (v.empty()) throw DomainError("percentile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("percentile: p must lie in [0,1]");
    std::sort(v.begin(), v.end());
    const double h = p * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

Summary summarize(const std::vector<double>& v)
{
    Summary s;
    s.count = static_cast<int>(v.size());
    if (v.empty()) return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    s.median = percentile(v, 0.5);
    s.p05 = percentile(v, 0.05);
    s.p95 = percentile(v, 0.95);
    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    s.min = *mn;
    s.max = *mx;
    return s;
}

double fraction(const std::vector<bool>& v)
{
    if (v.empty()) return 0.0;
    return double(std::count(v.begin(), v.end(), true)) / v.size();
}

}  // namespace tapscope
