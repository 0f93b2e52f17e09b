#pragma once

#include <vector>

namespace tapscope {

struct Summary {
    int count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p05 = 0.0;
    double p95 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

// Linear interpolation between order statistics (type 7). Throws on empty input.
double percentile(std::vector<double> v, double p);
double median(std::vector<double> v);
Summary summarize(const std::vector<double>& v);
// Fraction of entries that are true.
double fraction(const std::vector<bool>& v);

}  // namespace tapscope
