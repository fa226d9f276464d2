// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/review/queue.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <set>
#include <utility>

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"

namespace maskpaint::review {

namespace fs = std::filesystem;

std::string_view to_string(ItemStatus status) noexcept {
    switch (status) {
    case ItemStatus::pending: return "pending";
    case ItemStatus::approved: return "approved";
    case ItemStatus::rejected: return "rejected";
    }
    return "pending";
}

ItemStatus parse_item_status(std::string_view text) {
    for (auto s : {ItemStatus::pending, ItemStatus::approved, ItemStatus::rejected})
        if (to_string(s) == text) return s;
    raise(Errc::invalid_request, "unknown status '" + std::string(text) + "'");
}

json ReviewItem::to_json() const {
    json j = {{"id", id},
              {"source_sample_id", source_sample_id},
              {"source_image_ref", source_image_ref},
              {"generated_image_ref", generated_image_ref},
              {"result_ref", result_ref},
              {"prompt", prompt},
              {"class_label", class_label},
              {"status", to_string(status)},
              {"note", note}};
    j["decided_at"] = decided_at ? json(*decided_at) : json(nullptr);
    return j;
}

ReviewItem ReviewItem::from_json(const json& j) {
    ReviewItem it;
    try {
        it.id = j.at("id").get<std::string>();
        it.source_sample_id = j.at("source_sample_id").get<std::string>();
        it.source_image_ref = j.at("source_image_ref").get<std::string>();
        it.generated_image_ref = j.at("generated_image_ref").get<std::string>();
        it.result_ref = j.value("result_ref", std::string{});
        it.prompt = j.value("prompt", std::string{});
        it.class_label = j.value("class_label", std::string{});
        it.status = parse_item_status(j.value("status", std::string("pending")));
        it.note = j.value("note", std::string{});
        if (j.contains("decided_at") && !j.at("decided_at").is_null())
            it.decided_at = j.at("decided_at").get<std::string>();
    } catch (const json::exception& e) {
        raise(Errc::io_failure, std::string("malformed review item: ") + e.what());
    }
    return it;
}

QueueCounts ReviewQueue::counts() const {
    QueueCounts c;
    for (const auto& it : items) {
        switch (it.status) {
        case ItemStatus::pending: ++c.pending; break;
        case ItemStatus::approved: ++c.approved; break;
        case ItemStatus::rejected: ++c.rejected; break;
        }
    }
    return c;
}

bool ReviewQueue::finalized() const {
    return counts().pending == 0;
}

const ReviewItem* ReviewQueue::find(std::string_view item_id) const {
    auto it = std::lower_bound(items.begin(), items.end(), item_id,
                               [](const ReviewItem& a, std::string_view b) { return a.id < b; });
    return it != items.end() && it->id == item_id ? &*it : nullptr;
}

ReviewItem* ReviewQueue::find(std::string_view item_id) {
    return const_cast<ReviewItem*>(std::as_const(*this).find(item_id));
}

json QueueEvent::to_json() const {
    json j = {{"kind", kind == Kind::decision ? "decision" : "note"}, {"item", item_id}, {"note", note}, {"at", at}};
    if (kind == Kind::decision) j["decision"] = to_string(decision);
    return j;
}

QueueEvent QueueEvent::from_json(const json& j) {
    QueueEvent e;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "decision") {
        e.kind = Kind::decision;
        e.decision = parse_item_status(j.at("decision").get<std::string>());
    } else if (kind == "note") {
        e.kind = Kind::note;
    } else {
        raise(Errc::io_failure, "unknown queue event kind '" + kind + "'");
    }
    e.item_id = j.at("item").get<std::string>();
    e.note = j.value("note", std::string{});
    e.at = j.value("at", std::string{});
    return e;
}

fs::path queue_dir(const fs::path& root, const std::string& queue_id) {
    return root / queue_id;
}

namespace {

std::vector<json> read_lines(const fs::path& path) {
    std::vector<json> out;
    if (!fs::exists(path)) return out;
    const std::string text = read_text(path);
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        const bool last = nl == std::string::npos;
        pos = last ? text.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception&) {
            // Only a torn final line is tolerated.
            if (last) {
                spdlog::warn("ignoring torn trailing line in {}", path.string());
                break;
            }
            raise(Errc::io_failure, path.string() + ":" + std::to_string(line_no) + " is not valid JSON");
        }
    }
    return out;
}

void write_meta(const fs::path& dir, const std::string& queue_id) {
    const fs::path meta = dir / "queue.json";
    if (!fs::exists(meta)) write_json_file(meta, json{{"id", queue_id}});
}

}  // namespace

std::size_t enqueue_items(const fs::path& dir, const std::string& queue_id, const std::vector<ReviewItem>& items) {
    fs::create_directories(dir);
    write_meta(dir, queue_id);
    std::vector<ReviewItem> existing;
    for (const auto& j : read_lines(dir / kItemsFile)) existing.push_back(ReviewItem::from_json(j));
    std::set<std::string> ids;
    for (const auto& it : existing) ids.insert(it.id);
    std::size_t added = 0;
    for (auto it : items) {
        if (!ids.insert(it.id).second) continue;
        it.status = ItemStatus::pending;
        it.note.clear();
        it.decided_at.reset();
        existing.push_back(std::move(it));
        ++added;
    }
    std::sort(existing.begin(), existing.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::string text;
    for (const auto& it : existing) text += it.to_json().dump() + "\n";
    write_text_atomic(dir / kItemsFile, text);
    if (!fs::exists(dir / kEventsFile)) write_text_atomic(dir / kEventsFile, "");
    return added;
}

ReviewQueue load_queue(const fs::path& dir) {
    if (!fs::exists(dir / "queue.json") || !fs::exists(dir / kItemsFile))
        raise(Errc::unknown_queue, "no review queue at " + dir.string());
    ReviewQueue q;
    q.dir = dir;
    q.id = read_json_file(dir / "queue.json").at("id").get<std::string>();
    for (const auto& j : read_lines(dir / kItemsFile)) q.items.push_back(ReviewItem::from_json(j));
    std::sort(q.items.begin(), q.items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& j : read_lines(dir / kEventsFile)) {
        const QueueEvent e = QueueEvent::from_json(j);
        if (!q.find(e.item_id)) {
            spdlog::warn("event log of queue {} names unknown item {}", q.id, e.item_id);
            continue;
        }
        if (!apply_event(q, e)) spdlog::warn("ignoring repeated decision for {} in queue {}", e.item_id, q.id);
    }
    return q;
}

bool apply_event(ReviewQueue& queue, const QueueEvent& event) {
    ReviewItem* it = queue.find(event.item_id);
    if (!it) raise(Errc::unknown_item, "no item '" + event.item_id + "' in queue " + queue.id);
    if (event.kind == QueueEvent::Kind::note) {
        it->note = event.note;
        return true;
    }
    if (it->status != ItemStatus::pending) return false;
    if (event.decision == ItemStatus::pending) raise(Errc::invalid_request, "a decision must approve or reject");
    it->status = event.decision;
    it->note = event.note;
    it->decided_at = event.at;
    return true;
}

void append_event(const fs::path& dir, const QueueEvent& event) {
    const std::string line = event.to_json().dump() + "\n";
    const fs::path path = dir / kEventsFile;
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) raise(Errc::io_failure, "cannot open " + path.string() + ": " + std::strerror(errno));
    std::size_t off = 0;
    while (off < line.size()) {
        const ssize_t n = ::write(fd, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            raise(Errc::io_failure, "cannot append to " + path.string() + ": " + std::strerror(err));
        }
        off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        const int err = errno;
        ::close(fd);
        raise(Errc::io_failure, "fsync failed on " + path.string() + ": " + std::strerror(err));
    }
    ::close(fd);
}

}  // namespace maskpaint::review
