// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maskpaint {

// Header-indexed string table; RFC 4180 quoting on read and write.
class Table {
public:
    Table() = default;
    explicit Table(std::vector<std::string> columns);

    static Table parse(std::string_view text);
    static Table read(const std::filesystem::path& path);
    std::string to_csv() const;
    void write(const std::filesystem::path& path) const;

    const std::vector<std::string>& columns() const noexcept { return m_columns; }
    std::size_t rows() const noexcept { return m_rows.size(); }

    std::optional<std::size_t> column_index(std::string_view name) const;
    bool has_column(std::string_view name) const { return column_index(name).has_value(); }
    // Throws Errc::missing_column.
    std::size_t require_column(std::string_view name) const;

    const std::string& cell(std::size_t row, std::size_t column) const { return m_rows[row][column]; }
    const std::vector<std::string>& row(std::size_t index) const { return m_rows[index]; }
    void add_row(std::vector<std::string> row);

    Table select_rows(const std::vector<std::size_t>& indices) const;

private:
    std::vector<std::string> m_columns;
    std::vector<std::vector<std::string>> m_rows;
};

}  // namespace maskpaint
