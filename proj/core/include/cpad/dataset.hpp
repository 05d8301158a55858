#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cpad/types.hpp"

namespace cpad {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes one JSON object per line per scenario. Field order is fixed, so the
// same dataset always serializes to identical bytes. Returns the line count.
size_t write_dataset(const std::vector<Scenario>& scenarios, const std::string& path);

// Inverse of write_dataset. Malformed lines and schema violations raise
// DatasetError carrying the 1-based line number.
std::vector<Scenario> read_dataset(const std::string& path);

// Scenario-level split: every (scenario, agent) pair of a scenario lands in
// the same segment. Counts: floor for val and test, remainder to train.
DatasetSplit make_split(const std::vector<Scenario>& scenarios,
                        const std::array<double, 3>& fractions, uint64_t seed);

}  // namespace cpad
