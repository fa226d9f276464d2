// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/review/service.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <mutex>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"

namespace maskpaint::review {

namespace fs = std::filesystem;

json ItemPage::to_json() const {
    json items_j = json::array();
    for (const auto& it : items) items_j.push_back(it.to_json());
    return {{"queue", queue_id},
            {"status", status ? json(to_string(*status)) : json(nullptr)},
            {"page", page},
            {"page_size", page_size},
            {"total", total},
            {"counts",
             {{"pending", counts.pending},
              {"approved", counts.approved},
              {"rejected", counts.rejected},
              {"total", counts.total()}}},
            {"items", items_j}};
}

json ApprovedExport::to_json() const {
    json records_j = json::array();
    for (const auto& r : records) records_j.push_back(datasets::record_to_json(r));
    return {{"queue", queue_id},
            {"final", final},
            {"counts",
             {{"pending", counts.pending},
              {"approved", counts.approved},
              {"rejected", counts.rejected},
              {"total", counts.total()}}},
            {"records", records_j}};
}

ReviewService::ReviewService(fs::path queues_root) : m_root(std::move(queues_root)) {
    if (!fs::is_directory(m_root)) return;
    for (const auto& e : fs::directory_iterator(m_root)) {
        if (!e.is_directory() || !fs::exists(e.path() / "queue.json")) continue;
        ReviewQueue q = load_queue(e.path());
        m_queues.emplace(q.id, std::move(q));
    }
    spdlog::info("review service: {} queues under {}", m_queues.size(), m_root.string());
}

const ReviewQueue& ReviewService::queue_locked(const std::string& queue_id) const {
    auto it = m_queues.find(queue_id);
    if (it == m_queues.end()) raise(Errc::unknown_queue, "no review queue '" + queue_id + "'");
    return it->second;
}

std::pair<ReviewQueue*, ReviewItem*> ReviewService::find_locked(const std::string& item_id,
                                                                const std::optional<std::string>& queue_id) const {
    if (queue_id) {
        auto& q = const_cast<ReviewQueue&>(queue_locked(*queue_id));
        ReviewItem* it = q.find(item_id);
        if (!it) raise(Errc::unknown_item, "no item '" + item_id + "' in queue " + *queue_id);
        return {&q, it};
    }
    std::pair<ReviewQueue*, ReviewItem*> found{nullptr, nullptr};
    for (auto& [id, q] : m_queues) {
        if (ReviewItem* it = q.find(item_id)) {
            if (found.first) raise(Errc::invalid_request, "item '" + item_id + "' exists in several queues");
            found = {&q, it};
        }
    }
    if (!found.first) raise(Errc::unknown_item, "no item '" + item_id + "'");
    return found;
}

std::vector<std::pair<std::string, QueueCounts>> ReviewService::queues() const {
    std::shared_lock lock(m_mutex);
    std::vector<std::pair<std::string, QueueCounts>> out;
    for (const auto& [id, q] : m_queues) out.emplace_back(id, q.counts());
    return out;
}

ItemPage ReviewService::list_items(const std::string& queue_id, std::optional<ItemStatus> status, std::size_t page,
                                   std::size_t page_size) const {
    if (page_size == 0 || page_size > kMaxPageSize)
        raise(Errc::invalid_request, "page_size must lie in [1, " + std::to_string(kMaxPageSize) + "]");
    std::shared_lock lock(m_mutex);
    const ReviewQueue& q = queue_locked(queue_id);
    ItemPage p;
    p.queue_id = queue_id;
    p.status = status;
    p.page = page;
    p.page_size = page_size;
    p.counts = q.counts();
    std::size_t index = 0;
    for (const auto& it : q.items) {
        if (status && it.status != *status) continue;
        if (index >= page * page_size && index < (page + 1) * page_size) p.items.push_back(it);
        ++index;
    }
    p.total = index;
    return p;
}

ReviewItem ReviewService::item(const std::string& item_id, const std::optional<std::string>& queue_id) const {
    std::shared_lock lock(m_mutex);
    return *find_locked(item_id, queue_id).second;
}

ReviewItem ReviewService::decide(const std::string& item_id, ItemStatus decision, const std::string& note,
                                 const std::optional<std::string>& queue_id) {
    if (decision == ItemStatus::pending) raise(Errc::invalid_request, "a decision must approve or reject");
    std::unique_lock lock(m_mutex);
    auto [q, it] = find_locked(item_id, queue_id);
    if (it->status != ItemStatus::pending)
        raise(Errc::already_decided, "item '" + item_id + "' is already " + std::string(to_string(it->status)));
    QueueEvent e;
    e.kind = QueueEvent::Kind::decision;
    e.item_id = item_id;
    e.decision = decision;
    e.note = note;
    e.at = utc_timestamp();
    append_event(q->dir, e);
    apply_event(*q, e);
    spdlog::info("queue {}: {} {}", q->id, item_id, to_string(decision));
    return *it;
}

ReviewItem ReviewService::set_note(const std::string& item_id, const std::string& note,
                                   const std::optional<std::string>& queue_id) {
    std::unique_lock lock(m_mutex);
    auto [q, it] = find_locked(item_id, queue_id);
    QueueEvent e;
    e.kind = QueueEvent::Kind::note;
    e.item_id = item_id;
    e.note = note;
    e.at = utc_timestamp();
    append_event(q->dir, e);
    apply_event(*q, e);
    return *it;
}

fs::path ReviewService::image_path(const std::string& item_id, const std::string& which,
                                   const std::optional<std::string>& queue_id) const {
    std::shared_lock lock(m_mutex);
    auto [q, it] = find_locked(item_id, queue_id);
    if (which == "source") return q->resolve(it->source_image_ref);
    if (which == "generated") return q->resolve(it->generated_image_ref);
    raise(Errc::invalid_request, "image must be 'source' or 'generated', not '" + which + "'");
}

ApprovedExport ReviewService::export_approved(const std::string& queue_id) const {
    std::shared_lock lock(m_mutex);
    const ReviewQueue& q = queue_locked(queue_id);
    ApprovedExport out;
    out.queue_id = queue_id;
    out.counts = q.counts();
    out.final = out.counts.pending == 0;
    for (const auto& it : q.items) {
        if (it.status != ItemStatus::approved) continue;
        std::string method = "inpaint";
        if (!it.result_ref.empty()) {
            const fs::path result = q.resolve(it.result_ref);
            if (!fs::exists(result))
                raise(Errc::provenance_missing, "result " + result.string() + " of item " + it.id + " is missing");
            method = read_json_file(result).value("method", method);
        }
        datasets::SampleRecord r;
        r.id = it.id;
        r.image_ref = it.generated_image_ref;
        r.class_label = it.class_label;
        r.domain = datasets::Domain::source;
        r.split = datasets::Split::train;
        r.provenance = datasets::Provenance{it.source_sample_id, it.id, it.result_ref, method};
        out.records.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------- HTTP

namespace {

int status_for(Errc code) {
    switch (code) {
    case Errc::unknown_queue:
    case Errc::unknown_item: return 404;
    case Errc::already_decided: return 409;
    case Errc::invalid_request:
    case Errc::config_invalid: return 400;
    default: return 500;
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, status, json{{"error", code}, {"message", message}});
}

template <class F>
httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, status_for(e.code()), errc_name(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "InvalidRequest", std::string("malformed JSON body: ") + e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "InternalError", e.what());
        }
    };
}

std::optional<std::string> queue_param(const httplib::Request& req) {
    if (req.has_param("queue")) return req.get_param_value("queue");
    return std::nullopt;
}

std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback) {
    if (!req.has_param(name)) return fallback;
    const std::string v = req.get_param_value(name);
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 9)
        raise(Errc::invalid_request, std::string(name) + " must be a non-negative integer");
    return static_cast<std::size_t>(std::stoul(v));
}

ItemStatus decision_from(const std::string& text) {
    if (text == "approve" || text == "approved") return ItemStatus::approved;
    if (text == "reject" || text == "rejected") return ItemStatus::rejected;
    raise(Errc::invalid_request, "decision must be 'approved' or 'rejected'");
}

std::string content_type_for(const fs::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    return "application/octet-stream";
}

}  // namespace

ReviewHttpServer::ReviewHttpServer(ReviewService& service, ServerOptions options)
    : m_service(service), m_options(std::move(options)), m_server(std::make_unique<httplib::Server>()) {
    install_routes();
}

ReviewHttpServer::~ReviewHttpServer() {
    stop();
}

void ReviewHttpServer::install_routes() {
    auto& s = *m_server;
    if (m_options.allow_cors) {
        s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                               {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                               {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
        s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
    const std::string token = m_options.token;
    s.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
        if (token.empty() || req.method == "OPTIONS") return httplib::Server::HandlerResponse::Unhandled;
        const std::string auth = req.get_header_value("Authorization");
        if (auth == "Bearer " + token || req.get_header_value("X-Review-Token") == token)
            return httplib::Server::HandlerResponse::Unhandled;
        send_error(res, 401, "Unauthorized", "missing or wrong review token");
        return httplib::Server::HandlerResponse::Handled;
    });

    ReviewService& svc = m_service;
    s.Get("/queues", guarded([&svc](const httplib::Request&, httplib::Response& res) {
              json out = json::array();
              for (const auto& [id, c] : svc.queues())
                  out.push_back({{"id", id},
                                 {"counts",
                                  {{"pending", c.pending},
                                   {"approved", c.approved},
                                   {"rejected", c.rejected},
                                   {"total", c.total()}}}});
              send_json(res, 200, out);
          }));
    s.Get(R"(/queues/([^/]+)/items)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
              std::optional<ItemStatus> status;
              if (req.has_param("status") && !req.get_param_value("status").empty())
                  status = parse_item_status(req.get_param_value("status"));
              const auto page = svc.list_items(req.matches[1], status, size_param(req, "page", 0),
                                               size_param(req, "page_size", kDefaultPageSize));
              send_json(res, 200, page.to_json());
          }));
    s.Get(R"(/queues/([^/]+)/export)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, svc.export_approved(req.matches[1]).to_json());
          }));
    s.Get(R"(/items/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, svc.item(req.matches[1], queue_param(req)).to_json());
          }));
    s.Get(R"(/items/([^/]+)/image/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
              const fs::path p = svc.image_path(req.matches[1], req.matches[2], queue_param(req));
              std::ifstream in(p, std::ios::binary);
              if (!in) raise(Errc::io_failure, "cannot read image " + p.string());
              std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
              res.status = 200;
              res.set_content(bytes, content_type_for(p).c_str());
          }));
    s.Post(R"(/items/([^/]+)/decision)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               const json body = json::parse(req.body);
               if (!body.is_object() || !body.contains("decision"))
                   raise(Errc::invalid_request, "body must hold a decision");
               const auto item = svc.decide(req.matches[1], decision_from(body.at("decision").get<std::string>()),
                                            body.value("note", std::string{}), queue_param(req));
               send_json(res, 200, item.to_json());
           }));
    s.Post(R"(/items/([^/]+)/note)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
               const json body = json::parse(req.body);
               if (!body.is_object() || !body.contains("note")) raise(Errc::invalid_request, "body must hold a note");
               send_json(res, 200, svc.set_note(req.matches[1], body.at("note").get<std::string>(), queue_param(req)).to_json());
           }));
}

int ReviewHttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = m_server->bind_to_any_port(host);
        if (bound < 0) raise(Errc::io_failure, "cannot bind " + host);
        return bound;
    }
    if (!m_server->bind_to_port(host, port))
        raise(Errc::io_failure, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ReviewHttpServer::serve() {
    m_server->listen_after_bind();
}

void ReviewHttpServer::stop() {
    if (m_server && m_server->is_running()) m_server->stop();
}

bool ReviewHttpServer::running() const {
    return m_server->is_running();
}

}  // namespace maskpaint::review
