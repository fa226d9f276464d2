// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "maskpaint/core/io.hpp"

namespace maskpaint::review {

enum class ItemStatus { pending, approved, rejected };
std::string_view to_string(ItemStatus status) noexcept;
ItemStatus parse_item_status(std::string_view text);

// Image refs are relative to the queue directory.
struct ReviewItem {
    std::string id;
    std::string source_sample_id;
    std::string source_image_ref;
    std::string generated_image_ref;
    std::string result_ref;
    std::string prompt;
    std::string class_label;
    ItemStatus status = ItemStatus::pending;
    std::string note;
    std::optional<std::string> decided_at;

    json to_json() const;
    static ReviewItem from_json(const json& j);
};

struct QueueCounts {
    std::size_t pending = 0;
    std::size_t approved = 0;
    std::size_t rejected = 0;
    std::size_t total() const noexcept { return pending + approved + rejected; }
};

// A queue lives in <root>/<id>/ as items.jsonl (the enqueued items, always
// pending) plus events.jsonl, an append-only log of decisions and notes.
// The current state is items.jsonl with the event log replayed over it.
struct ReviewQueue {
    std::string id;
    std::filesystem::path dir;
    // Sorted by item id.
    std::vector<ReviewItem> items;

    QueueCounts counts() const;
    // No item is pending.
    bool finalized() const;
    const ReviewItem* find(std::string_view item_id) const;
    ReviewItem* find(std::string_view item_id);
    std::filesystem::path resolve(const std::string& ref) const { return dir / ref; }
};

inline constexpr std::string_view kItemsFile = "items.jsonl";
inline constexpr std::string_view kEventsFile = "events.jsonl";

struct QueueEvent {
    enum class Kind { decision, note } kind = Kind::decision;
    std::string item_id;
    ItemStatus decision = ItemStatus::pending;
    std::string note;
    std::string at;

    json to_json() const;
    static QueueEvent from_json(const json& j);
};

std::filesystem::path queue_dir(const std::filesystem::path& root, const std::string& queue_id);

// Adds items not already present (by id) and returns the number added.
std::size_t enqueue_items(const std::filesystem::path& dir, const std::string& queue_id,
                          const std::vector<ReviewItem>& items);

// Throws Errc::unknown_queue when the directory holds no queue.
ReviewQueue load_queue(const std::filesystem::path& dir);

// Applies an event to in-memory state. Returns false (and leaves state
// unchanged) for a decision on an already decided item.
bool apply_event(ReviewQueue& queue, const QueueEvent& event);

// Appends one event line and flushes it to stable storage before returning.
void append_event(const std::filesystem::path& dir, const QueueEvent& event);

}  // namespace maskpaint::review
