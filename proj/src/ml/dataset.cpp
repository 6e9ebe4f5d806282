#include "nudgekit/ml/dataset.hpp"

#include "nudgekit/errors.hpp"

#include <istream>
#include <ostream>
#include <sstream>

namespace nudgekit::ml {

bool Dataset::trainable() const {
    if (rows.size() < 2) return false;
    bool pos = false, neg = false;
    for (const Row& r : rows) (r.label ? pos : neg) = true;
    return pos && neg;
}

Dataset Dataset::project(const std::vector<std::size_t>& columns) const {
    Dataset out;
    for (std::size_t c : columns) out.feature_names.push_back(feature_names.at(c));
    out.rows.reserve(rows.size());
    for (const Row& r : rows) {
        Row nr;
        nr.label = r.label;
        nr.tag = r.tag;
        nr.features.reserve(columns.size());
        for (std::size_t c : columns) nr.features.push_back(r.features.at(c));
        out.rows.push_back(std::move(nr));
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

} // namespace

void write_dataset_csv(std::ostream& out, const Dataset& ds) {
    for (const auto& name : ds.feature_names) out << name << ',';
    out << "label,subject,day,place\n";
    std::ostringstream num;
    num.precision(17);
    for (const Row& r : ds.rows) {
        for (double v : r.features) {
            if (!is_absent(v)) {
                num.str("");
                num << v;
                out << num.str();
            }
            out << ',';
        }
        out << r.label << ',' << r.tag.subject << ',' << r.tag.day << ',' << r.tag.place << '\n';
    }
}

Dataset read_dataset_csv(std::istream& in) {
    Dataset ds;
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset csv: missing header");
    auto header = split_csv_line(line);
    if (header.size() < 4) throw DataError("dataset csv: header too short");
    std::size_t n_feat = header.size() - 4;
    for (std::size_t i = 0; i < n_feat; ++i) ds.feature_names.push_back(header[i]);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("dataset csv: wrong cell count at line " + std::to_string(line_no));
        }
        Row r;
        r.features.reserve(n_feat);
        for (std::size_t i = 0; i < n_feat; ++i) {
            r.features.push_back(cells[i].empty() ? kAbsent : std::stod(cells[i]));
        }
        r.label = std::stoi(cells[n_feat]);
        r.tag = {cells[n_feat + 1], cells[n_feat + 2], cells[n_feat + 3]};
        ds.rows.push_back(std::move(r));
    }
    return ds;
}

} // namespace nudgekit::ml
