#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ndv/profile.hpp"

namespace ndv {

struct GeneratorSpec {
    enum class Kind { Zipf, Uniform, Geometric };
    Kind kind = Kind::Uniform;
    std::int64_t N = 0;     // rows to generate
    std::int64_t V = 0;     // domain size (values drawn from [1, V])
    double s = 1.0;         // zipf skew (zipf only)
    std::uint64_t seed = 0; // per-column stream seed

    std::string provenance() const;
};

// One dataset row: sample profile, exact ground truth D, and where the
// column came from.
struct LabeledColumn {
    FrequencyProfile profile;
    std::int64_t D = 0;
    std::string provenance;
};

struct Dataset {
    std::vector<LabeledColumn> train;
    std::vector<LabeledColumn> validation;
    std::vector<LabeledColumn> test;

    std::size_t size() const {
        return train.size() + validation.size() + test.size();
    }
};

// Materializes one synthetic column. Zipf draws value i in [1, V] with
// probability proportional to i^-s (inverse CDF over the normalized finite
// weights); uniform draws uniformly on [1, V]; geometric draws i with
// probability proportional to (1-q)^{i-1}, q = 1/V, over the same finite
// domain. Deterministic per seed.
ColumnData gen_column(const GeneratorSpec& spec);

// gen_column + exact ground truth + uniform sample at `rate` -> labeled row.
LabeledColumn label_column(const GeneratorSpec& spec, double rate);

// Reads one CSV column (RFC-4180-style quoting; first record is the header)
// as opaque byte-equal tokens. `column` is a header name, or a 0-based index
// if no header matches and the selector is numeric. Empty cells are a
// distinct token unless drop_empty.
ColumnData ingest_csv(const std::string& path, const std::string& column,
                      bool drop_empty = false);

// Deterministic column-granularity split: canonical order by provenance,
// seeded shuffle, then floor(70%) train / floor(15%) validation / remainder
// test. Invariant to the input ordering.
Dataset split_dataset(std::vector<LabeledColumn> columns, std::uint64_t seed);

// Generate + label every spec (parallel across columns), then split.
Dataset make_dataset(std::span<const GeneratorSpec> specs, double rate,
                     std::uint64_t seed, int threads = 1);

// On-disk dataset: <dir>/manifest.tsv indexing per-column profile files
// under <dir>/profiles/. Formats are documented in the README. Returns the
// manifest path.
std::string write_dataset(const std::string& dir, const Dataset& data);
Dataset read_dataset(const std::string& manifest_path);

// FNV-1a 64-bit digest (hex) used for profile files in manifests.
std::string fnv1a_hex(std::span<const char> bytes);

}  // namespace ndv
