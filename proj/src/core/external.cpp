// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/core/external.hpp"

#include <atomic>
#include <map>
#include <sstream>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "maskpaint/core/error.hpp"

extern char** environ;

namespace maskpaint {

namespace fs = std::filesystem;

ExternalCommand ExternalCommand::from_json(const json& j) {
    ExternalCommand c;
    try {
        c.program = j.at("program").get<std::string>();
        c.args = j.value("args", std::vector<std::string>{});
        c.work_dir = j.value("work_dir", std::string{});
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, std::string("malformed external command: ") + e.what());
    }
    return c;
}

json ExternalCommand::to_json() const {
    return {{"program", program}, {"args", args}, {"work_dir", work_dir.string()}};
}

namespace {

std::atomic<unsigned long> g_batch_counter{0};

int spawn_and_wait(const std::vector<std::string>& argv) {
    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawnp(&pid, cargv[0], nullptr, nullptr, cargv.data(), environ) != 0) return -1;
    int status = 0;
    if (waitpid(pid, &status, 0) < 0) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

std::vector<json> run_external(const ExternalCommand& command, const std::vector<json>& requests) {
    if (command.program.empty()) raise(Errc::config_invalid, "external command has no program");
    if (requests.empty()) return {};
    const fs::path dir = command.work_dir.empty() ? fs::temp_directory_path() / "maskpaint-external" : command.work_dir;
    fs::create_directories(dir);
    const auto n = g_batch_counter.fetch_add(1);
    const std::string stem = "batch-" + std::to_string(::getpid()) + "-" + std::to_string(n);
    const fs::path request_file = dir / (stem + ".req.jsonl");
    const fs::path response_file = dir / (stem + ".resp.jsonl");

    std::string body;
    for (const auto& r : requests) body += r.dump() + "\n";
    write_text_atomic(request_file, body);
    fs::remove(response_file);

    std::vector<std::string> argv{command.program};
    argv.insert(argv.end(), command.args.begin(), command.args.end());
    argv.push_back(request_file.string());
    argv.push_back(response_file.string());
    const int rc = spawn_and_wait(argv);
    if (rc != 0) raise(Errc::backend_failure, command.program + " exited with status " + std::to_string(rc));
    if (!fs::exists(response_file)) raise(Errc::backend_failure, command.program + " wrote no response file");

    std::map<std::string, json> by_id;
    std::istringstream in(read_text(response_file));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            const std::string id = j.at("id").get<std::string>();
            by_id[id] = std::move(j);
        } catch (const json::exception& e) {
            raise(Errc::backend_failure, std::string("malformed response line: ") + e.what());
        }
    }
    std::vector<json> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        const std::string id = r.at("id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) raise(Errc::backend_failure, "no response for request " + id);
        if (it->second.value("status", "") != "ok")
            raise(Errc::backend_failure, "request " + id + " failed: " + it->second.value("message", "unknown error"));
        out.push_back(std::move(it->second));
    }
    fs::remove(request_file);
    fs::remove(response_file);
    return out;
}

}  // namespace maskpaint
