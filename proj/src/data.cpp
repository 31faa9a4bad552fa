#include "esla/data.hpp"

#include "esla/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace esla {

namespace {

// strips comments (# to end of line) and returns trimmed content
std::string clean_line(const std::string& raw) {
    std::string s = raw.substr(0, raw.find('#'));
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int parse_int_field(const std::string& path, int line, const std::string& key, const std::string& text) {
    int v = 0;
    const char* first = text.data();
    const char* last = first + text.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last)
        throw DataError(path, line, "value of '" + key + "' is not an integer: '" + text + "'");
    if (v < 0)
        throw DataError(path, line, "value of '" + key + "' must be non-negative");
    return v;
}

std::vector<double> parse_row(const std::string& path, int line, const std::string& text) {
    std::vector<double> row;
    const char* p = text.data();
    const char* last = p + text.size();
    while (p != last) {
        while (p != last && (*p == ' ' || *p == '\t'))
            ++p;
        if (p == last)
            break;
        double v = 0.0;
        auto [next, ec] = std::from_chars(p, last, v);
        if (ec != std::errc{} || (next != last && *next != ' ' && *next != '\t'))
            throw DataError(path, line, std::string("not a number: '") +
                                            std::string(p, std::find_if(p, last, [](char c) {
                                                             return c == ' ' || c == '\t';
                                                         })) + "'");
        row.push_back(v);
        p = next;
    }
    return row;
}

int label_of(const std::vector<double>& target) {
    if (target.size() == 1)
        return target[0] > 0.5 ? 1 : 0;
    int best = 0;
    for (std::size_t j = 1; j < target.size(); ++j)
        if (target[j] > target[best])
            best = static_cast<int>(j);
    return best;
}

} // namespace

LoadedData load_data_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError(path, 0, "cannot open file");

    static const char* kKeys[7] = {"bool_in", "real_in", "bool_out", "real_out",
                                   "training_examples", "validation_examples", "test_examples"};
    std::map<std::string, int> header_vals;

    LoadedData out;
    std::string raw;
    int line = 0;
    int header_seen = 0;

    while (header_seen < 7 && std::getline(in, raw)) {
        ++line;
        const std::string s = clean_line(raw);
        if (s.empty())
            continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw DataError(path, line, "expected 'key=value' header line, got '" + s + "'");
        std::string key = clean_line(s.substr(0, eq));
        std::string val = clean_line(s.substr(eq + 1));
        if (std::find_if(std::begin(kKeys), std::end(kKeys),
                         [&](const char* k) { return key == k; }) == std::end(kKeys))
            throw DataError(path, line, "unknown header key '" + key + "'");
        if (header_vals.count(key))
            throw DataError(path, line, "duplicate header key '" + key + "'");
        header_vals[key] = parse_int_field(path, line, key, val);
        ++header_seen;
    }
    if (header_seen < 7) {
        std::string missing;
        for (const char* k : kKeys)
            if (!header_vals.count(k))
                missing += missing.empty() ? k : std::string(", ") + k;
        throw DataError(path, line, "incomplete header, missing: " + missing);
    }

    DatasetHeader& h = out.header;
    h.bool_in = header_vals["bool_in"];
    h.real_in = header_vals["real_in"];
    h.bool_out = header_vals["bool_out"];
    h.real_out = header_vals["real_out"];
    h.training_examples = header_vals["training_examples"];
    h.validation_examples = header_vals["validation_examples"];
    h.test_examples = header_vals["test_examples"];

    const int ni = h.n_inputs(), no = h.n_outputs();
    if (ni == 0)
        throw DataError(path, line, "header declares zero inputs");
    if (no == 0)
        throw DataError(path, line, "header declares zero outputs");
    if (h.n_total() == 0)
        throw DataError(path, line, "header declares zero examples");

    out.data.patterns.reserve(static_cast<std::size_t>(h.n_total()));
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = clean_line(raw);
        if (s.empty())
            continue;
        std::vector<double> row = parse_row(path, line, s);
        if (static_cast<int>(row.size()) != ni + no)
            throw DataError(path, line, "expected " + std::to_string(ni + no) + " values (" +
                                            std::to_string(ni) + " inputs + " + std::to_string(no) +
                                            " outputs), got " + std::to_string(row.size()));
        Pattern p;
        p.input.assign(row.begin(), row.begin() + ni);
        p.target.assign(row.begin() + ni, row.end());
        out.data.patterns.push_back(std::move(p));
    }
    if (static_cast<int>(out.data.size()) != h.n_total())
        throw DataError(path, line, "header promises " + std::to_string(h.n_total()) +
                                        " examples but file has " + std::to_string(out.data.size()));

    // classification labels when the outputs look like class encodings
    if (h.bool_out > 0 && h.real_out == 0) {
        out.data.labels.reserve(out.data.size());
        for (const Pattern& p : out.data.patterns)
            out.data.labels.push_back(label_of(p.target));
    }
    out.data.validate();

    out.train_idx.resize(h.training_examples);
    std::iota(out.train_idx.begin(), out.train_idx.end(), 0);
    out.valid_idx.resize(h.validation_examples);
    std::iota(out.valid_idx.begin(), out.valid_idx.end(), h.training_examples);
    out.test_idx.resize(h.test_examples);
    std::iota(out.test_idx.begin(), out.test_idx.end(), h.training_examples + h.validation_examples);
    return out;
}

void write_data_file(const std::string& path, const DatasetHeader& h, const Dataset& data) {
    data.validate();
    if (static_cast<int>(data.size()) != h.n_total())
        throw std::invalid_argument("write_data_file: header counts do not match dataset size");
    if (data.n_inputs() != h.n_inputs() || data.n_outputs() != h.n_outputs())
        throw std::invalid_argument("write_data_file: header dimensions do not match dataset");
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "bool_in=" << h.bool_in << "\nreal_in=" << h.real_in << "\nbool_out=" << h.bool_out
        << "\nreal_out=" << h.real_out << "\ntraining_examples=" << h.training_examples
        << "\nvalidation_examples=" << h.validation_examples
        << "\ntest_examples=" << h.test_examples << '\n';
    char buf[40];
    for (const Pattern& p : data.patterns) {
        bool first = true;
        for (const std::vector<double>* part : {&p.input, &p.target}) {
            for (double v : *part) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                if (!first)
                    out << ' ';
                out << buf;
                first = false;
            }
        }
        out << '\n';
    }
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

Dataset subset(const Dataset& data, const std::vector<int>& idx) {
    Dataset out;
    out.patterns.reserve(idx.size());
    for (int i : idx) {
        if (i < 0 || static_cast<std::size_t>(i) >= data.size())
            throw std::out_of_range("subset: index out of range");
        out.patterns.push_back(data.patterns[i]);
        if (!data.labels.empty())
            out.labels.push_back(data.labels[i]);
    }
    return out;
}

SplitIndices split_ratio(std::size_t n, std::uint64_t seed, bool shuffle) {
    if (n < 4)
        throw std::invalid_argument("split_ratio: need at least 4 examples");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (shuffle) {
        rng::Stream s(seed);
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(idx[i], idx[s.below(i + 1)]);
    }
    const std::size_t n_train = n / 2, n_valid = n / 4;
    SplitIndices out;
    out.train.assign(idx.begin(), idx.begin() + n_train);
    out.valid.assign(idx.begin() + n_train, idx.begin() + n_train + n_valid);
    out.test.assign(idx.begin() + n_train + n_valid, idx.end());
    return out;
}

FoldPlan stratified_kfold(const Dataset& data, int k, std::uint64_t seed) {
    data.validate();
    if (data.labels.empty())
        throw std::invalid_argument("stratified_kfold: dataset has no class labels");
    if (k < 2)
        throw std::invalid_argument("stratified_kfold: need k >= 2");
    if (static_cast<std::size_t>(k) > data.size())
        throw std::invalid_argument("stratified_kfold: more folds than examples");

    // group indices by class, classes in sorted order for determinism
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i)
        by_class[data.labels[i]].push_back(static_cast<int>(i));

    rng::Stream s(seed);
    FoldPlan plan;
    plan.folds.assign(static_cast<std::size_t>(k), {});
    // single cursor across classes: overall fold sizes differ by at most one
    int cursor = 0;
    for (auto& [label, members] : by_class) {
        for (std::size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[s.below(i)]);
        for (int idx : members) {
            plan.folds[static_cast<std::size_t>(cursor)].push_back(idx);
            cursor = (cursor + 1) % k;
        }
    }
    for (auto& fold : plan.folds)
        std::sort(fold.begin(), fold.end());
    return plan;
}

SplitIndices fold_split(const FoldPlan& plan, int f) {
    if (f < 0 || static_cast<std::size_t>(f) >= plan.folds.size())
        throw std::out_of_range("fold_split: fold index out of range");
    SplitIndices out;
    out.test = plan.folds[static_cast<std::size_t>(f)];
    for (std::size_t j = 0; j < plan.folds.size(); ++j)
        if (j != static_cast<std::size_t>(f))
            out.train.insert(out.train.end(), plan.folds[j].begin(), plan.folds[j].end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

Dataset gen_boolean(BoolProblem p, bool signed_levels) {
    const double lo = signed_levels ? -1.0 : 0.0;
    const double hi = 1.0;
    const int n_in = p == BoolProblem::xor2 ? 2 : 3;
    Dataset out;
    for (int m = 0; m < (1 << n_in); ++m) {
        Pattern pat;
        int ones = 0;
        for (int b = 0; b < n_in; ++b) {
            const bool bit = (m >> b) & 1;
            ones += bit;
            pat.input.push_back(bit ? hi : lo);
        }
        const bool truth = p == BoolProblem::xor2 ? (ones == 1) : (ones % 2 == 1);
        pat.target.push_back(truth ? hi : lo);
        out.patterns.push_back(std::move(pat));
        out.labels.push_back(truth ? 1 : 0);
    }
    return out;
}

} // namespace esla
