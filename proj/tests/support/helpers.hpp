// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "maskpaint/core/error.hpp"
#include "maskpaint/core/external.hpp"
#include "maskpaint/datasets/synth.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        m_path = fs::temp_directory_path() /
                 ("maskpaint-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(m_path);
        fs::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(m_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return m_path; }
    fs::path operator/(const std::string& s) const { return m_path / s; }

private:
    fs::path m_path;
};

inline maskpaint::ExternalCommand fake_worker(std::vector<std::string> args = {}) {
    maskpaint::ExternalCommand c;
    c.program = MASKPAINT_FAKE_WORKER;
    c.args = std::move(args);
    return c;
}

inline maskpaint::datasets::SyntheticSpec small_spec(int n_per_cell = 10, int size = 16) {
    maskpaint::datasets::SyntheticSpec s;
    s.n_per_cell = n_per_cell;
    s.image_size = size;
    return s;
}

// Runs `fn` and returns the error code it raised, or nullopt.
template <typename Fn>
std::optional<maskpaint::Errc> error_of(Fn&& fn) {
    try {
        fn();
    } catch (const maskpaint::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

}  // namespace testing
