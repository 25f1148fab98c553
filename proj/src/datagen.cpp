#include "ndv/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "ndv/errors.hpp"
#include "ndv/parallel.hpp"
#include "ndv/rng.hpp"

namespace ndv {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::int64_t parse_i64(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw data_error(context + ": invalid integer '" + s + "'");
    }
}

void validate_spec(const GeneratorSpec& spec) {
    if (spec.N < 1) throw std::domain_error("generator spec: N must be >= 1");
    if (spec.V < 1) throw std::domain_error("generator spec: V must be >= 1");
    if (spec.kind == GeneratorSpec::Kind::Zipf && !(spec.s > 0.0)) {
        throw std::domain_error("generator spec: zipf skew s must be > 0");
    }
}

// Inverse-CDF sampler over explicit normalized weights.
struct WeightedSampler {
    std::vector<double> cum;  // cumulative weights, cum.back() = total

    explicit WeightedSampler(std::vector<double> weights) : cum(std::move(weights)) {
        double acc = 0.0;
        for (double& w : cum) {
            acc += w;
            w = acc;
        }
    }

    std::int64_t draw(Rng& rng) const {
        const double u = uniform01(rng) * cum.back();
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        const std::size_t idx = std::min(
            static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
        return static_cast<std::int64_t>(idx) + 1;
    }
};

}  // namespace

std::string GeneratorSpec::provenance() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Zipf:
            os << "zipf,s=" << fmt_double(s);
            break;
        case Kind::Uniform:
            os << "uniform";
            break;
        case Kind::Geometric:
            os << "geometric";
            break;
    }
    os << ",V=" << V << ",N=" << N << ",seed=" << seed;
    return os.str();
}

ColumnData gen_column(const GeneratorSpec& spec) {
    validate_spec(spec);
    ColumnData col;
    col.values.resize(static_cast<std::size_t>(spec.N));
    Rng rng = make_rng(spec.seed, 0x67656e); // generation stream
    switch (spec.kind) {
        case GeneratorSpec::Kind::Uniform: {
            for (auto& v : col.values) {
                v = 1 + static_cast<std::int64_t>(
                            uniform_below(rng, static_cast<std::uint64_t>(spec.V)));
            }
            break;
        }
        case GeneratorSpec::Kind::Zipf: {
            std::vector<double> w(static_cast<std::size_t>(spec.V));
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = std::pow(static_cast<double>(i + 1), -spec.s);
            }
            const WeightedSampler sampler(std::move(w));
            for (auto& v : col.values) v = sampler.draw(rng);
            break;
        }
        case GeneratorSpec::Kind::Geometric: {
            const double q = 1.0 / static_cast<double>(spec.V);
            std::vector<double> w(static_cast<std::size_t>(spec.V));
            double cur = 1.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = cur;
                cur *= (1.0 - q);
            }
            const WeightedSampler sampler(std::move(w));
            for (auto& v : col.values) v = sampler.draw(rng);
            break;
        }
    }
    return col;
}

LabeledColumn label_column(const GeneratorSpec& spec, double rate) {
    const ColumnData col = gen_column(spec);
    // Values lie in [1, V], so exact ground truth comes from dense counting.
    std::vector<std::int64_t> counts(static_cast<std::size_t>(spec.V) + 1, 0);
    for (const std::int64_t v : col.values) {
        ++counts[static_cast<std::size_t>(v)];
    }
    std::int64_t D = 0;
    for (std::int64_t c : counts) {
        if (c > 0) ++D;
    }
    const std::vector<std::int64_t> sample =
        sample_uniform(col, rate, mix_seed(spec.seed, 0x73616d70)); // sampling stream
    LabeledColumn out;
    out.profile = build_profile(sample, col.N());
    out.D = D;
    out.provenance = spec.provenance();
    return out;
}

ColumnData ingest_csv(const std::string& path, const std::string& column,
                      bool drop_empty) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("csv: cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());

    // RFC-4180-style parse: quoted fields may contain commas, newlines and
    // doubled quotes; a bare quote inside an unquoted field is malformed.
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::int64_t line = 1;
    const auto end_field = [&]() {
        record.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    const auto end_record = [&]() {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted) {
                    throw data_error("csv: bare quote in unquoted field at line " +
                                     std::to_string(line) + " of " + path);
                }
                in_quotes = true;
                field_was_quoted = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                end_record();
                ++line;
                break;
            default:
                if (field_was_quoted) {
                    throw data_error("csv: content after closing quote at line " +
                                     std::to_string(line) + " of " + path);
                }
                field.push_back(c);
        }
    }
    if (in_quotes) {
        throw data_error("csv: unterminated quoted field at end of " + path);
    }
    if (!field.empty() || !record.empty() || field_was_quoted) end_record();

    if (records.empty()) throw data_error("csv: empty file: " + path);
    const std::vector<std::string>& header = records.front();
    std::size_t col_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == column) {
            col_idx = i;
            break;
        }
    }
    if (col_idx == header.size()) {
        // Fall back to a 0-based numeric selector.
        bool numeric = !column.empty() && column.size() <= 9;
        for (char c : column) numeric = numeric && c >= '0' && c <= '9';
        if (numeric) {
            const std::size_t idx = static_cast<std::size_t>(std::stoul(column));
            if (idx < header.size()) col_idx = idx;
        }
    }
    if (col_idx == header.size()) {
        throw data_error("csv: no column named '" + column + "' in " + path);
    }

    ColumnData out;
    std::unordered_map<std::string, std::int64_t> dict;
    for (std::size_t rec = 1; rec < records.size(); ++rec) {
        const auto& row = records[rec];
        if (col_idx >= row.size()) {
            throw data_error("csv: record " + std::to_string(rec) +
                             " has no field " + std::to_string(col_idx) +
                             " in " + path);
        }
        const std::string& cell = row[col_idx];
        if (drop_empty && cell.empty()) continue;
        const auto [it, inserted] =
            dict.try_emplace(cell, static_cast<std::int64_t>(dict.size()));
        out.values.push_back(it->second);
    }
    if (out.values.empty()) {
        throw data_error("csv: column '" + column + "' of " + path +
                         " has no rows");
    }
    return out;
}

Dataset split_dataset(std::vector<LabeledColumn> columns, std::uint64_t seed) {
    // Canonical order first so the split depends only on content + seed.
    std::sort(columns.begin(), columns.end(),
              [](const LabeledColumn& a, const LabeledColumn& b) {
                  return a.provenance < b.provenance;
              });
    Rng rng = make_rng(seed, 0x73706c69); // split stream
    for (std::size_t i = columns.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(
            uniform_below(rng, static_cast<std::uint64_t>(i)));
        std::swap(columns[i - 1], columns[j]);
    }
    const std::size_t M = columns.size();
    const std::size_t n_train = static_cast<std::size_t>(
        std::floor(0.70 * static_cast<double>(M)));
    const std::size_t n_val = static_cast<std::size_t>(
        std::floor(0.15 * static_cast<double>(M)));
    Dataset out;
    for (std::size_t i = 0; i < M; ++i) {
        if (i < n_train) {
            out.train.push_back(std::move(columns[i]));
        } else if (i < n_train + n_val) {
            out.validation.push_back(std::move(columns[i]));
        } else {
            out.test.push_back(std::move(columns[i]));
        }
    }
    return out;
}

Dataset make_dataset(std::span<const GeneratorSpec> specs, double rate,
                     std::uint64_t seed, int threads) {
    if (specs.empty()) throw std::domain_error("make_dataset: no specs");
    for (const auto& s : specs) validate_spec(s);
    std::vector<LabeledColumn> all(specs.size());
    parallel_for(static_cast<std::int64_t>(specs.size()), threads,
                 [&](std::int64_t i) {
                     all[static_cast<std::size_t>(i)] =
                         label_column(specs[static_cast<std::size_t>(i)], rate);
                 });
    return split_dataset(std::move(all), seed);
}

std::string fnv1a_hex(std::span<const char> bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string profile_text(const FrequencyProfile& p) {
    std::ostringstream os;
    os << "# ndv-profile v1\n";
    os << "N " << p.N << "\n";
    os << "n " << p.n << "\n";
    os << "d " << p.d << "\n";
    os << "f";
    for (std::int64_t j = 1; j <= p.max_count(); ++j) {
        const std::int64_t fj = p.f_at(j);
        if (fj != 0) os << " " << j << ":" << fj;
    }
    os << "\n";
    return os.str();
}

FrequencyProfile parse_profile(const std::string& text,
                               const std::string& path) {
    std::istringstream is(text);
    std::string line;
    FrequencyProfile p;
    bool have_n = false, have_nn = false, have_d = false, have_f = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "N") {
            ls >> p.N;
            have_nn = true;
        } else if (key == "n") {
            ls >> p.n;
            have_n = true;
        } else if (key == "d") {
            ls >> p.d;
            have_d = true;
        } else if (key == "f") {
            std::string pair;
            std::int64_t max_j = 0;
            std::vector<std::pair<std::int64_t, std::int64_t>> entries;
            while (ls >> pair) {
                const std::size_t colon = pair.find(':');
                if (colon == std::string::npos) {
                    throw data_error("profile: malformed f entry '" + pair +
                                     "' in " + path);
                }
                const std::int64_t j = parse_i64(pair.substr(0, colon), "profile");
                const std::int64_t fj = parse_i64(pair.substr(colon + 1), "profile");
                if (j < 1 || fj < 0) {
                    throw data_error("profile: invalid f entry in " + path);
                }
                entries.emplace_back(j, fj);
                max_j = std::max(max_j, j);
            }
            p.f.assign(static_cast<std::size_t>(max_j), 0);
            for (const auto& [j, fj] : entries) {
                p.f[static_cast<std::size_t>(j - 1)] = fj;
            }
            have_f = true;
        } else {
            throw data_error("profile: unknown key '" + key + "' in " + path);
        }
    }
    if (!(have_n && have_nn && have_d && have_f)) {
        throw data_error("profile: missing fields in " + path);
    }
    p.r = static_cast<double>(p.n) / static_cast<double>(p.N);
    check_profile(p);
    return p;
}

void append_rows(std::ostringstream& manifest, const std::string& dir,
                 const std::vector<LabeledColumn>& rows,
                 const std::string& split, std::size_t& id) {
    namespace fs = std::filesystem;
    for (const auto& col : rows) {
        const std::string rel = "profiles/" + std::to_string(id) + ".profile";
        const std::string text = profile_text(col.profile);
        std::ofstream os(fs::path(dir) / rel, std::ios::binary | std::ios::trunc);
        if (!os) throw data_error("dataset: cannot write " + rel);
        os << text;
        if (!os) throw data_error("dataset: write failed for " + rel);
        manifest << id << "\t" << split << "\t" << col.provenance << "\t"
                 << col.profile.N << "\t" << col.profile.n << "\t"
                 << col.profile.d << "\t" << col.D << "\t" << rel << "\t"
                 << fnv1a_hex({text.data(), text.size()}) << "\n";
        ++id;
    }
}

}  // namespace

std::string write_dataset(const std::string& dir, const Dataset& data) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "profiles", ec);
    if (ec) throw data_error("dataset: cannot create " + dir + ": " + ec.message());

    std::ostringstream manifest;
    manifest << "# ndv-manifest v1\n";
    manifest << "# id\tsplit\tprovenance\tN\tn\td\tD\tprofile\tdigest\n";
    std::size_t id = 0;
    append_rows(manifest, dir, data.train, "train", id);
    append_rows(manifest, dir, data.validation, "validation", id);
    append_rows(manifest, dir, data.test, "test", id);

    const std::string manifest_path = (fs::path(dir) / "manifest.tsv").string();
    std::ofstream os(manifest_path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("dataset: cannot write manifest " + manifest_path);
    os << manifest.str();
    if (!os) throw data_error("dataset: manifest write failed");
    return manifest_path;
}

Dataset read_dataset(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream is(manifest_path);
    if (!is) throw data_error("dataset: cannot open manifest " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    Dataset out;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            cells.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (cells.size() != 9) {
            throw data_error("manifest: expected 9 fields at line " +
                             std::to_string(lineno));
        }
        const std::string& split = cells[1];
        LabeledColumn col;
        col.provenance = cells[2];
        col.D = parse_i64(cells[6], "manifest");
        const std::string profile_path = (base / cells[7]).string();
        std::ifstream ps(profile_path, std::ios::binary);
        if (!ps) throw data_error("manifest: cannot open profile " + profile_path);
        std::string text((std::istreambuf_iterator<char>(ps)),
                         std::istreambuf_iterator<char>());
        if (fnv1a_hex({text.data(), text.size()}) != cells[8]) {
            throw data_error("manifest: digest mismatch for " + profile_path);
        }
        col.profile = parse_profile(text, profile_path);
        if (col.profile.N != parse_i64(cells[3], "manifest") ||
            col.profile.n != parse_i64(cells[4], "manifest") ||
            col.profile.d != parse_i64(cells[5], "manifest")) {
            throw data_error("manifest: stats disagree with profile for " +
                             profile_path);
        }
        if (split == "train") {
            out.train.push_back(std::move(col));
        } else if (split == "validation") {
            out.validation.push_back(std::move(col));
        } else if (split == "test") {
            out.test.push_back(std::move(col));
        } else {
            throw data_error("manifest: unknown split '" + split + "' at line " +
                             std::to_string(lineno));
        }
    }
    if (out.size() == 0) {
        throw data_error("manifest: no columns in " + manifest_path);
    }
    return out;
}

}  // namespace ndv
