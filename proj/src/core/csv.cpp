// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/core/csv.hpp"

#include "maskpaint/core/error.hpp"
#include "maskpaint/core/io.hpp"

namespace maskpaint {

Table::Table(std::vector<std::string> columns) : m_columns(std::move(columns)) {}

namespace {

std::vector<std::vector<std::string>> parse_records(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        switch (ch) {
        case '"':
            quoted = true;
            field_started = true;
            break;
        case ',':
            record.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            if (field_started || !field.empty() || !record.empty()) {
                record.push_back(std::move(field));
                records.push_back(std::move(record));
            }
            record.clear();
            field.clear();
            field_started = false;
            break;
        default:
            field += ch;
            field_started = true;
        }
    }
    if (quoted) raise(Errc::io_failure, "unterminated quoted CSV field");
    if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

std::string quote(const std::string& value) {
    if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

Table Table::parse(std::string_view text) {
    auto records = parse_records(text);
    if (records.empty()) return Table{};
    Table table(std::move(records.front()));
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != table.m_columns.size()) {
            raise(Errc::io_failure, "CSV row " + std::to_string(i + 1) + " has " + std::to_string(records[i].size()) +
                                        " fields, header has " + std::to_string(table.m_columns.size()));
        }
        table.m_rows.push_back(std::move(records[i]));
    }
    return table;
}

Table Table::read(const std::filesystem::path& path) {
    return parse(read_text(path));
}

std::string Table::to_csv() const {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += quote(fields[i]);
        }
        out += '\n';
    };
    emit(m_columns);
    for (const auto& r : m_rows) emit(r);
    return out;
}

void Table::write(const std::filesystem::path& path) const {
    write_text_atomic(path, to_csv());
}

std::optional<std::size_t> Table::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < m_columns.size(); ++i)
        if (m_columns[i] == name) return i;
    return std::nullopt;
}

std::size_t Table::require_column(std::string_view name) const {
    auto idx = column_index(name);
    if (!idx) raise(Errc::missing_column, "metadata table has no column '" + std::string(name) + "'");
    return *idx;
}

void Table::add_row(std::vector<std::string> row) {
    if (row.size() != m_columns.size()) raise(Errc::io_failure, "row width does not match header");
    m_rows.push_back(std::move(row));
}

Table Table::select_rows(const std::vector<std::size_t>& indices) const {
    Table out(m_columns);
    out.m_rows.reserve(indices.size());
    for (auto i : indices) out.m_rows.push_back(m_rows[i]);
    return out;
}

}  // namespace maskpaint
