#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lstmkit {

// FNV-1a 64-bit, used for checkpoint payload checksums and input-file digests.
std::uint64_t fnv1a64(const void* data, std::size_t length);
std::uint64_t fnv1a64_file(const std::string& path);

std::string hex_u64(std::uint64_t v);

// UTC timestamp like 2024-01-31T12:00:00Z.
std::string iso8601_now();

// Box-plot statistics over a sample; quartiles use linear interpolation
// between order statistics.
struct BoxStats {
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

BoxStats box_stats(std::vector<double> values);

double sample_mean(const std::vector<double>& values);
// Unbiased sample variance; zero for fewer than two values.
double sample_variance(const std::vector<double>& values);

// Runs fn(0..n-1) across at most `jobs` threads. Results must be written to
// index-owned slots; iteration order inside a thread is ascending.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace lstmkit
