#include "bombus/ensemble.hpp"
#include "bombus/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace bombus::ensemble {

namespace fs = std::filesystem;

namespace {

void check_shape(const std::vector<std::string>& ids, const dataset::ClassCatalog& catalog,
                 const Eigen::MatrixXd& rows) {
    if (rows.rows() != static_cast<Eigen::Index>(ids.size())) {
        throw Error("invalid_matrix", "row count differs from the number of image ids");
    }
    if (rows.cols() != static_cast<Eigen::Index>(catalog.size())) {
        throw Error("invalid_matrix", "column count differs from the catalog size");
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw Error("duplicate_id", "image id '" + id + "' appears twice");
        }
    }
    if (!rows.allFinite()) {
        throw Error("invalid_matrix", "matrix contains non-finite values");
    }
    if ((rows.array() < 0.0).any()) {
        throw Error("invalid_matrix", "matrix contains negative values");
    }
}

struct ParsedTable {
    std::vector<std::string> ids;
    std::vector<std::string> labels;
    Eigen::MatrixXd rows;
};

double parse_number(std::string_view text, const std::string& where) {
    // strtod accepts the exponent forms std::from_chars might not on older toolchains.
    const std::string copy(text);
    char* end = nullptr;
    const double value = std::strtod(copy.c_str(), &end);
    if (copy.empty() || end != copy.c_str() + copy.size()) {
        throw Error("malformed_csv", where + "invalid number '" + copy + "'");
    }
    return value;
}

ParsedTable parse_table(std::string_view text, std::string_view origin) {
    std::istringstream in{std::string(text)};
    std::string line;
    ParsedTable table;
    std::vector<std::vector<double>> values;
    std::size_t line_number = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const std::string where = std::string(origin) + ":" + std::to_string(line_number) + ": ";
        auto fields = split_csv_line(line);
        if (header) {
            if (fields.empty() || fields.front() != "image_id") {
                throw Error("malformed_csv", where + "header must start with image_id");
            }
            table.labels.assign(fields.begin() + 1, fields.end());
            header = false;
            continue;
        }
        if (fields.size() != table.labels.size() + 1) {
            throw Error("malformed_csv", where + "expected " + std::to_string(table.labels.size() + 1) + " fields");
        }
        table.ids.push_back(fields.front());
        std::vector<double> row;
        row.reserve(table.labels.size());
        for (std::size_t i = 1; i < fields.size(); ++i) {
            row.push_back(parse_number(fields[i], where));
        }
        values.push_back(std::move(row));
    }
    if (header) {
        throw Error("malformed_csv", std::string(origin) + ": missing header");
    }
    table.rows.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(table.labels.size()));
    for (std::size_t r = 0; r < values.size(); ++r) {
        for (std::size_t c = 0; c < values[r].size(); ++c) {
            table.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r][c];
        }
    }
    return table;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("missing_file", "cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("unwritable_output", "cannot write " + path.string());
    }
    out << text;
}

dataset::ClassCatalog catalog_from_header(std::vector<std::string> labels, std::string_view origin) {
    try {
        return dataset::ClassCatalog(std::move(labels));
    } catch (const Error& e) {
        throw Error("malformed_csv", std::string(origin) + ": " + e.what());
    }
}

}  // namespace

void validate(const ProbabilityMatrix& matrix) {
    check_shape(matrix.image_ids, matrix.catalog, matrix.rows);
    for (Eigen::Index r = 0; r < matrix.rows.rows(); ++r) {
        const double sum = matrix.rows.row(r).sum();
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
            throw Error("invalid_matrix", "row for '" + matrix.image_ids[static_cast<std::size_t>(r)] +
                                              "' sums to " + std::to_string(sum) + ", not 1");
        }
    }
}

void validate(const CompositeScores& scores) {
    check_shape(scores.image_ids, scores.catalog, scores.rows);
    if (scores.members < 1) {
        throw Error("invalid_matrix", "a composite needs at least one member");
    }
    for (Eigen::Index r = 0; r < scores.rows.rows(); ++r) {
        const double sum = scores.rows.row(r).sum();
        if (std::abs(sum - scores.members) > kCompositeSumTolerance) {
            throw Error("invalid_matrix", "composite row for '" + scores.image_ids[static_cast<std::size_t>(r)] +
                                              "' does not sum to the member count");
        }
    }
}

CompositeScores as_scores(const ProbabilityMatrix& matrix) {
    return CompositeScores{matrix.image_ids, matrix.catalog, matrix.rows, 1};
}

ProbabilityMatrix align(const ProbabilityMatrix& matrix, std::span<const std::string> image_ids) {
    if (image_ids.size() != matrix.image_ids.size()) {
        throw Error("image_id_mismatch", "cannot align matrices over different image sets");
    }
    std::unordered_map<std::string_view, Eigen::Index> position;
    for (std::size_t i = 0; i < matrix.image_ids.size(); ++i) {
        position.emplace(matrix.image_ids[i], static_cast<Eigen::Index>(i));
    }
    ProbabilityMatrix out{{image_ids.begin(), image_ids.end()}, matrix.catalog,
                          Eigen::MatrixXd(matrix.rows.rows(), matrix.rows.cols())};
    for (std::size_t i = 0; i < image_ids.size(); ++i) {
        const auto it = position.find(image_ids[i]);
        if (it == position.end()) {
            throw Error("image_id_mismatch", "image id '" + image_ids[i] + "' is missing from the matrix");
        }
        out.rows.row(static_cast<Eigen::Index>(i)) = matrix.rows.row(it->second);
    }
    return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(text);
    }
    std::string out = "\"";
    for (const char c : text) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out += '"';
    return out;
}

std::string to_csv(const Eigen::MatrixXd& rows, std::span<const std::string> image_ids,
                   const dataset::ClassCatalog& catalog) {
    std::string out = "image_id";
    for (const auto& label : catalog.labels()) {
        out += ',';
        out += csv_field(label);
    }
    out += '\n';
    char buffer[32];
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        out += csv_field(image_ids[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", rows(r, c));
            out += ',';
            out += buffer;
        }
        out += '\n';
    }
    return out;
}

void write_csv(const ProbabilityMatrix& matrix, const fs::path& path) {
    validate(matrix);
    write_text(path, to_csv(matrix.rows, matrix.image_ids, matrix.catalog));
}

void write_csv(const CompositeScores& scores, const fs::path& path) {
    validate(scores);
    write_text(path, to_csv(scores.rows, scores.image_ids, scores.catalog));
}

ProbabilityMatrix parse_probability_csv(std::string_view text, std::string_view origin) {
    auto table = parse_table(text, origin);
    ProbabilityMatrix matrix{std::move(table.ids), catalog_from_header(std::move(table.labels), origin),
                             std::move(table.rows)};
    try {
        validate(matrix);
    } catch (const Error& e) {
        throw Error(e.code(), std::string(origin) + ": " + e.what());
    }
    return matrix;
}

CompositeScores parse_scores_csv(std::string_view text, std::string_view origin) {
    auto table = parse_table(text, origin);
    CompositeScores scores{std::move(table.ids), catalog_from_header(std::move(table.labels), origin),
                           std::move(table.rows), 1};
    if (scores.rows.rows() > 0) {
        scores.members = static_cast<int>(std::lround(scores.rows.row(0).sum()));
    }
    try {
        validate(scores);
    } catch (const Error& e) {
        throw Error(e.code(), std::string(origin) + ": " + e.what());
    }
    return scores;
}

ProbabilityMatrix read_probability_csv(const fs::path& path) {
    return parse_probability_csv(read_text(path), path.string());
}

CompositeScores read_scores_csv(const fs::path& path) {
    return parse_scores_csv(read_text(path), path.string());
}

}  // namespace bombus::ensemble
