// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "maskpaint/datasets/manifest.hpp"
#include "maskpaint/review/queue.hpp"

namespace httplib {
class Server;
}

namespace maskpaint::review {

struct ItemPage {
    std::string queue_id;
    std::optional<ItemStatus> status;
    std::size_t page = 0;
    std::size_t page_size = 0;
    // Items matching the filter, over all pages.
    std::size_t total = 0;
    QueueCounts counts;
    std::vector<ReviewItem> items;

    json to_json() const;
};

struct ApprovedExport {
    std::string queue_id;
    // No item was pending when the snapshot was taken.
    bool final = false;
    QueueCounts counts;
    // Generated train records with provenance; image and result refs are
    // relative to the queue directory.
    std::vector<datasets::SampleRecord> records;

    json to_json() const;
};

inline constexpr std::size_t kDefaultPageSize = 50;
inline constexpr std::size_t kMaxPageSize = 1000;

// Thread-safe view over the queues under one root directory. Reads share a
// lock; decisions and notes are serialized, appended to the event log and
// flushed before they are applied.
class ReviewService {
public:
    explicit ReviewService(std::filesystem::path queues_root);

    std::vector<std::pair<std::string, QueueCounts>> queues() const;
    // Pages are 0-based. Throws Errc::unknown_queue.
    ItemPage list_items(const std::string& queue_id, std::optional<ItemStatus> status, std::size_t page,
                        std::size_t page_size = kDefaultPageSize) const;
    // `queue_id` disambiguates when several queues hold the same item id.
    ReviewItem item(const std::string& item_id, const std::optional<std::string>& queue_id = std::nullopt) const;
    // Throws Errc::already_decided, Errc::unknown_item, Errc::invalid_request.
    ReviewItem decide(const std::string& item_id, ItemStatus decision, const std::string& note,
                      const std::optional<std::string>& queue_id = std::nullopt);
    ReviewItem set_note(const std::string& item_id, const std::string& note,
                        const std::optional<std::string>& queue_id = std::nullopt);
    // which: "source" or "generated".
    std::filesystem::path image_path(const std::string& item_id, const std::string& which,
                                     const std::optional<std::string>& queue_id = std::nullopt) const;
    ApprovedExport export_approved(const std::string& queue_id) const;

private:
    const ReviewQueue& queue_locked(const std::string& queue_id) const;
    std::pair<ReviewQueue*, ReviewItem*> find_locked(const std::string& item_id,
                                                     const std::optional<std::string>& queue_id) const;

    std::filesystem::path m_root;
    mutable std::shared_mutex m_mutex;
    mutable std::map<std::string, ReviewQueue> m_queues;
};

struct ServerOptions {
    // Static bearer token; empty disables the check.
    std::string token;
    bool allow_cors = true;
};

// HTTP front end:
//   GET  /queues
//   GET  /queues/{id}/items?status=&page=&page_size=
//   GET  /queues/{id}/export
//   GET  /items/{id}[?queue=]
//   GET  /items/{id}/image/{source|generated}
//   POST /items/{id}/decision  {"decision": "approved"|"rejected", "note": ""}
//   POST /items/{id}/note      {"note": ""}
// Errors are {"error": <code>, "message": <text>} with 400/401/404/409/500.
class ReviewHttpServer {
public:
    ReviewHttpServer(ReviewService& service, ServerOptions options = {});
    ~ReviewHttpServer();
    ReviewHttpServer(const ReviewHttpServer&) = delete;
    ReviewHttpServer& operator=(const ReviewHttpServer&) = delete;

    // Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void serve();
    void stop();
    bool running() const;

private:
    void install_routes();

    ReviewService& m_service;
    ServerOptions m_options;
    std::unique_ptr<httplib::Server> m_server;
};

}  // namespace maskpaint::review
