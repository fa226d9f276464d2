// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/core/io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "maskpaint/core/error.hpp"

namespace maskpaint {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_failure, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_atomic(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(Errc::io_failure, "cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) raise(Errc::io_failure, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) raise(Errc::io_failure, "cannot rename into " + path.string() + ": " + ec.message());
}

json read_json_file(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        raise(Errc::config_invalid, path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& value) {
    write_text_atomic(path, value.dump(2) + "\n");
}

void write_json_file(const fs::path& path, const ordered_json& value) {
    write_text_atomic(path, value.dump(2) + "\n");
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr)) {
        raise(Errc::io_failure, "sha256 failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string sha256_file(const fs::path& path) {
    return sha256_hex(read_text(path));
}

std::string relative_ref(const fs::path& target, const fs::path& base) {
    const fs::path abs_target = fs::weakly_canonical(fs::absolute(target));
    const fs::path abs_base = fs::weakly_canonical(fs::absolute(base));
    return abs_target.lexically_relative(abs_base).generic_string();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

}  // namespace maskpaint
