#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace bioseg {

// CSV report with a '#' comment header echoing the configuration. Every
// experiment and evaluation emits one of these.
struct Report {
    std::string experiment_id;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void echo(const std::string& key, const std::string& value) {
        config_echo.emplace_back(key, value);
    }
    void write_csv(const std::filesystem::path& path) const;
};

std::string fmt_f(double v, int decimals = 6);

struct SummaryStats {
    double mean = 0.0;
    double stddev = 0.0;   // population
    double stderr_mean = 0.0;
    size_t n = 0;
};

SummaryStats summarize(const std::vector<double>& values);

// Spearman rank correlation with average ranks for ties.
double spearman_correlation(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace bioseg
