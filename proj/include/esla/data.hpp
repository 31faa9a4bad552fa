// Loading, generating, and partitioning datasets: the plain-text benchmark
// file format (counted header + whitespace rows), ratio splits, stratified
// k-fold plans, and the built-in boolean problems.

#pragma once

#include "esla/net.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace esla {

// Parse/validation failure in a data file; carries the 1-based line number.
class DataError : public std::runtime_error {
  public:
    DataError(const std::string& path, int line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

struct DatasetHeader {
    int bool_in = 0, real_in = 0, bool_out = 0, real_out = 0;
    int training_examples = 0, validation_examples = 0, test_examples = 0;

    int n_inputs() const { return bool_in + real_in; }
    int n_outputs() const { return bool_out + real_out; }
    int n_total() const { return training_examples + validation_examples + test_examples; }
};

struct LoadedData {
    DatasetHeader header;
    Dataset data; // patterns in file order; labels derived for classification sets
    // index ranges taken from the header counts, in file order
    std::vector<int> train_idx, valid_idx, test_idx;
};

// Text format: 7 header lines "key=value" (bool_in, real_in, bool_out,
// real_out, training_examples, validation_examples, test_examples, any
// order), then one whitespace-separated row per example: inputs then
// outputs. Labels: argmax of outputs (2+ outputs) or threshold at 0.5.
LoadedData load_data_file(const std::string& path);
void write_data_file(const std::string& path, const DatasetHeader& h, const Dataset& data);

// take a subset of patterns (labels follow when present)
Dataset subset(const Dataset& data, const std::vector<int>& idx);

struct SplitIndices {
    std::vector<int> train, valid, test;
};

// 50/25/25 partition (integer rounding: n/2, n/4, rest). Shuffles with the
// seeded deterministic stream unless shuffle = false. Requires n >= 4.
SplitIndices split_ratio(std::size_t n, std::uint64_t seed, bool shuffle = true);

struct FoldPlan {
    std::vector<std::vector<int>> folds; // disjoint index sets covering the data
};

// Stratified k-fold: per-class shuffles, then round-robin dealing with a
// single global cursor so fold sizes differ by at most one overall and by
// at most one within every class. Requires labels and k >= 2.
FoldPlan stratified_kfold(const Dataset& data, int k, std::uint64_t seed);

// Training/heldout pair for fold f of a plan.
SplitIndices fold_split(const FoldPlan& plan, int f);

enum class BoolProblem { xor2, parity3 };

// Exhaustive truth-table datasets. signed_levels: inputs/targets in {-1,+1}
// (tansig convention); otherwise {0,1}. Labels are 0/1.
Dataset gen_boolean(BoolProblem p, bool signed_levels = true);

} // namespace esla
