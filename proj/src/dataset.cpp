#include "magix/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "magix/error.hpp"
#include "magix/log.hpp"
#include "magix/random.hpp"

namespace magix {

using nlohmann::json;

std::string_view to_string(ColumnKind kind) noexcept {
    return kind == ColumnKind::Numeric ? "numeric" : "categorical";
}

ColumnKind column_kind_from_string(std::string_view text) {
    if (text == "numeric") return ColumnKind::Numeric;
    if (text == "categorical") return ColumnKind::Categorical;
    throw ConfigError("unknown column kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------- Schema

void Schema::validate() const {
    std::set<std::string> seen;
    std::size_t features = 0;
    for (const auto& c : columns) {
        if (c.name.empty()) throw ConfigError("schema: empty column name");
        if (!seen.insert(c.name).second) throw ConfigError("schema: duplicate column '" + c.name + "'");
        if (!class_column || c.name != *class_column) ++features;
    }
    if (features == 0) throw ConfigError("schema: no feature column besides the class column");
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
    return std::nullopt;
}

json Schema::to_json() const {
    json cols = json::array();
    for (const auto& c : columns) cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    json doc{{"columns", cols}};
    doc["class_column"] = class_column ? json(*class_column) : json(nullptr);
    return doc;
}

Schema Schema::from_json(const json& doc) {
    Schema s;
    try {
        for (const auto& c : doc.at("columns"))
            s.columns.push_back({c.at("name").get<std::string>(),
                                 column_kind_from_string(c.at("kind").get<std::string>())});
        if (doc.contains("class_column") && !doc["class_column"].is_null())
            s.class_column = doc["class_column"].get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("schema document: ") + e.what());
    }
    s.validate();
    return s;
}

Schema Schema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open schema file " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ParseError("schema file " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- Dataset

Dataset::Dataset(std::vector<Column> columns, std::optional<std::vector<std::string>> labels,
                 std::optional<std::string> class_column)
    : columns_(std::move(columns)), labels_(std::move(labels)), class_column_(std::move(class_column)) {
    rows_ = columns_.empty() ? (labels_ ? labels_->size() : 0) : columns_.front().values.size();
    for (const auto& c : columns_)
        if (c.values.size() != rows_) throw ConfigError("dataset: ragged columns");
    if (labels_ && labels_->size() != rows_) throw ConfigError("dataset: label count differs from row count");
}

std::optional<std::size_t> Dataset::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name() == name) return i;
    return std::nullopt;
}

const std::vector<std::string>& Dataset::labels() const {
    if (!labels_) throw ConfigError("dataset has no class labels");
    return *labels_;
}

std::vector<std::string> Dataset::label_values() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& l : labels())
        if (seen.insert(l).second) out.push_back(l);
    return out;
}

Schema Dataset::schema() const {
    Schema s;
    for (const auto& c : columns_) s.columns.push_back(c.spec);
    if (class_column_) {
        s.columns.push_back({*class_column_, ColumnKind::Categorical});
        s.class_column = class_column_;
    }
    return s;
}

std::vector<double> Dataset::instance(std::size_t row) const {
    std::vector<double> x(columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j) x[j] = columns_[j].values[row];
    return x;
}

FeatureMatrix Dataset::matrix() const {
    FeatureMatrix m(rows_, columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j)
        for (std::size_t i = 0; i < rows_; ++i) m.at(i, j) = columns_[j].values[i];
    return m;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) {
        Column nc{c.spec, {}, c.categories};
        nc.values.reserve(rows.size());
        for (auto r : rows) nc.values.push_back(c.values.at(r));
        cols.push_back(std::move(nc));
    }
    std::optional<std::vector<std::string>> labels;
    if (labels_) {
        labels.emplace();
        labels->reserve(rows.size());
        for (auto r : rows) labels->push_back(labels_->at(r));
    }
    Dataset out(std::move(cols), std::move(labels), class_column_);
    out.fingerprint_ = fingerprint_;
    return out;
}

std::string Dataset::format_value(std::size_t col, double v) const {
    if (is_missing(v)) return "?";
    const auto& c = columns_.at(col);
    if (!c.numeric()) return c.categories.at(static_cast<std::size_t>(v));
    std::ostringstream os;
    os << v;
    return os.str();
}

// ---------------------------------------------------------------- CSV

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // A blank line is not a record.
        if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.empty())
                    throw ParseError("csv line " + std::to_string(line) + ": stray quote inside unquoted field");
                quoted = true;
                field_started = true;
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
                field.push_back(c);
                field_started = true;
        }
    }
    if (quoted) throw ParseError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();
    return records;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

bool is_missing_token(std::string_view s) { return s.empty() || s == "?" || s == "NA" || s == "NaN"; }

std::optional<double> parse_decimal(std::string_view s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::general);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Line numbers for error messages: records are 1-based, the header is line 1.
std::string record_location(std::size_t record_index) { return "line " + std::to_string(record_index + 1); }

}  // namespace

std::string content_fingerprint(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        if (c == '\r') continue;
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Dataset parse_csv(std::string_view text, const CsvOptions& options) {
    const auto records = parse_csv_records(text);
    if (records.empty()) throw ParseError("csv: missing header");
    std::vector<std::string> header;
    for (const auto& h : records.front()) header.push_back(trim(h));
    if (records.size() < 2) throw ParseError("csv: dataset has no data rows");

    for (std::size_t r = 1; r < records.size(); ++r)
        if (records[r].size() != header.size())
            throw ParseError("csv " + record_location(r) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(records[r].size()));

    std::optional<std::string> class_column;
    if (options.has_class_column) {
        if (options.class_column) class_column = options.class_column;
        else if (options.schema_hint && options.schema_hint->class_column) class_column = options.schema_hint->class_column;
        else class_column = header.back();
    }
    std::optional<std::size_t> class_index;
    if (class_column) {
        auto it = std::find(header.begin(), header.end(), *class_column);
        if (it == header.end()) throw ParseError("csv: class column '" + *class_column + "' not in header");
        class_index = static_cast<std::size_t>(it - header.begin());
    }

    if (options.schema_hint) {
        for (const auto& spec : options.schema_hint->columns)
            if (std::find(header.begin(), header.end(), spec.name) == header.end())
                throw ParseError("csv: schema column '" + spec.name + "' not in header");
    }

    const std::size_t n = records.size() - 1;
    std::vector<Column> columns;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (class_index && j == *class_index) continue;
        std::vector<std::string> cells(n);
        for (std::size_t r = 0; r < n; ++r) cells[r] = trim(records[r + 1][j]);

        ColumnKind kind = ColumnKind::Numeric;
        std::optional<ColumnKind> hinted;
        if (options.schema_hint)
            if (auto k = options.schema_hint->index_of(header[j])) hinted = options.schema_hint->columns[*k].kind;
        if (hinted) {
            kind = *hinted;
        } else {
            for (const auto& cell : cells)
                if (!is_missing_token(cell) && !parse_decimal(cell)) {
                    kind = ColumnKind::Categorical;
                    break;
                }
        }

        Column col{{header[j], kind}, std::vector<double>(n), {}};
        if (kind == ColumnKind::Numeric) {
            for (std::size_t r = 0; r < n; ++r) {
                if (is_missing_token(cells[r])) {
                    col.values[r] = std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
                auto v = parse_decimal(cells[r]);
                if (!v)
                    throw ParseError("csv " + record_location(r + 1) + ": column '" + header[j] +
                                     "' is numeric but holds '" + cells[r] + "'");
                col.values[r] = *v;
            }
        } else {
            std::unordered_map<std::string, std::size_t> index;
            for (std::size_t r = 0; r < n; ++r) {
                if (is_missing_token(cells[r])) {
                    col.values[r] = std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
                auto [it, inserted] = index.try_emplace(cells[r], col.categories.size());
                if (inserted) col.categories.push_back(cells[r]);
                col.values[r] = static_cast<double>(it->second);
            }
        }
        columns.push_back(std::move(col));
    }
    if (columns.empty()) throw ParseError("csv: no feature column besides the class column");

    std::optional<std::vector<std::string>> labels;
    if (class_index) {
        labels.emplace(n);
        for (std::size_t r = 0; r < n; ++r) {
            (*labels)[r] = trim(records[r + 1][*class_index]);
            if (is_missing_token((*labels)[r]))
                throw ParseError("csv " + record_location(r + 1) + ": missing class label");
        }
    }

    Dataset data(std::move(columns), std::move(labels), class_column);
    data.schema().validate();
    data.set_fingerprint(content_fingerprint(text));
    return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_csv(buffer.str(), options);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- split

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split: train fraction must lie strictly between 0 and 1");
}

SplitIndices split_indices(std::size_t n, const std::vector<std::string>* strata, const SplitSpec& spec) {
    spec.validate();
    if (strata && strata->size() != n) throw ConfigError("split: strata length differs from row count");
    auto rng = make_rng(derive_seed(spec.seed, "split"));
    SplitIndices out;

    std::map<std::string, std::vector<std::size_t>> groups;
    if (strata) {
        for (std::size_t i = 0; i < n; ++i) groups[(*strata)[i]].push_back(i);
    } else {
        auto& all = groups[""];
        all.resize(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
    }

    for (auto& [label, rows] : groups) {
        shuffle(rows.begin(), rows.end(), rng);
        if (strata && rows.size() < 2) {
            out.warnings.push_back("split: class '" + label + "' has fewer than 2 members; placed in train");
            log_warning(out.warnings.back());
            out.train.insert(out.train.end(), rows.begin(), rows.end());
            continue;
        }
        auto k = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(rows.size())));
        k = std::clamp<std::size_t>(k, rows.size() >= 2 ? 1 : 0, rows.size() >= 2 ? rows.size() - 1 : rows.size());
        out.train.insert(out.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
        out.test.insert(out.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

SplitResult split(const Dataset& data, const SplitSpec& spec, const std::vector<std::string>* predicted) {
    const std::vector<std::string>* strata = predicted;
    if (!strata && data.has_labels()) strata = &data.labels();
    auto idx = split_indices(data.rows(), strata, spec);
    SplitResult out{data.subset(idx.train), data.subset(idx.test), std::move(idx)};
    return out;
}

}  // namespace magix
