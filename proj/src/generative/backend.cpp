// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/generative/backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"
#include "maskpaint/core/rng.hpp"

namespace maskpaint::generative {

namespace fs = std::filesystem;

std::string_view to_string(FinetuneMode mode) noexcept {
    return mode == FinetuneMode::class_conditional ? "class_conditional" : "target_dreambooth";
}

std::string_view to_string(LrSchedule schedule) noexcept {
    switch (schedule) {
    case LrSchedule::constant: return "constant";
    case LrSchedule::linear: return "linear";
    case LrSchedule::cosine: return "cosine";
    }
    return "constant";
}

FinetuneMode parse_finetune_mode(std::string_view text) {
    if (text == "class_conditional") return FinetuneMode::class_conditional;
    if (text == "target_dreambooth") return FinetuneMode::target_dreambooth;
    raise(Errc::config_invalid, "unknown fine-tuning mode '" + std::string(text) + "'");
}

LrSchedule parse_lr_schedule(std::string_view text) {
    for (auto s : {LrSchedule::constant, LrSchedule::linear, LrSchedule::cosine})
        if (to_string(s) == text) return s;
    raise(Errc::config_invalid, "unknown learning-rate schedule '" + std::string(text) + "'");
}

FinetuneConfig FinetuneConfig::source_defaults() {
    return {};
}

FinetuneConfig FinetuneConfig::target_defaults() {
    FinetuneConfig c;
    c.learning_rate = 1e-6;
    c.mode = FinetuneMode::target_dreambooth;
    return c;
}

FinetuneConfig FinetuneConfig::from_json(const json& j, const FinetuneConfig& defaults) {
    FinetuneConfig c = defaults;
    if (!j.is_object()) raise(Errc::config_invalid, "fine-tuning config must be an object");
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("lr_schedule")) c.lr_schedule = parse_lr_schedule(j.at("lr_schedule").get<std::string>());
    c.snr_gamma = j.value("snr_gamma", c.snr_gamma);
    c.resolution = j.value("resolution", c.resolution);
    c.max_train_steps = j.value("max_train_steps", c.max_train_steps);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    if (j.contains("mode")) c.mode = parse_finetune_mode(j.at("mode").get<std::string>());
    c.validate();
    return c;
}

json FinetuneConfig::to_json() const {
    return {{"learning_rate", learning_rate},       {"lr_schedule", to_string(lr_schedule)},
            {"snr_gamma", snr_gamma},               {"resolution", resolution},
            {"max_train_steps", max_train_steps},   {"checkpoint_every", checkpoint_every},
            {"mode", to_string(mode)}};
}

void FinetuneConfig::validate() const {
    if (!(learning_rate > 0) || !(snr_gamma > 0) || resolution <= 0 || max_train_steps <= 0 || checkpoint_every <= 0)
        raise(Errc::config_invalid, "fine-tuning parameters must all be positive");
}

std::string ModelHandle::compute_checksum() const {
    json body = {{"backend_id", backend_id}, {"mode", to_string(mode)}, {"dummy_token", dummy_token},
                 {"config", config},         {"state", state}};
    std::string digest_input = body.dump();
    if (state.contains("files"))
        for (const auto& f : state.at("files")) digest_input += "\n" + sha256_file(dir / f.get<std::string>());
    return sha256_hex(digest_input);
}

void ModelHandle::save() {
    fs::create_directories(dir);
    checksum = compute_checksum();
    json j = {{"backend_id", backend_id}, {"mode", to_string(mode)}, {"dummy_token", dummy_token},
              {"config", config},         {"state", state},          {"checksum", checksum}};
    if (parent) j["parent"] = parent->string();
    write_json_file(dir / kFileName, j);
}

ModelHandle ModelHandle::load(const fs::path& dir) {
    const fs::path file = dir / kFileName;
    if (!fs::exists(file)) raise(Errc::io_failure, "no model handle at " + file.string());
    const json j = read_json_file(file);
    ModelHandle h;
    h.dir = dir;
    try {
        h.backend_id = j.at("backend_id").get<std::string>();
        h.mode = parse_finetune_mode(j.at("mode").get<std::string>());
        h.dummy_token = j.value("dummy_token", std::string{});
        h.config = j.value("config", json::object());
        h.state = j.value("state", json::object());
        if (j.contains("parent")) h.parent = fs::path(j.at("parent").get<std::string>());
        h.checksum = j.at("checksum").get<std::string>();
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, "malformed model handle " + file.string() + ": " + e.what());
    }
    if (h.compute_checksum() != h.checksum) raise(Errc::io_failure, "checksum mismatch for model handle " + dir.string());
    return h;
}

std::vector<GridPoint> InpaintGrid::points() const {
    std::vector<GridPoint> out;
    for (double s : strengths)
        for (double g : guidance_scales) out.push_back({s, g});
    return out;
}

bool InpaintGrid::contains(const GridPoint& point) const {
    auto near = [](double a, double b) { return std::abs(a - b) < 1e-9; };
    return std::any_of(strengths.begin(), strengths.end(), [&](double s) { return near(s, point.strength); }) &&
           std::any_of(guidance_scales.begin(), guidance_scales.end(),
                       [&](double g) { return near(g, point.guidance_scale); });
}

InpaintGrid InpaintGrid::from_json(const json& j) {
    InpaintGrid g;
    if (j.contains("strengths")) g.strengths = j.at("strengths").get<std::vector<double>>();
    if (j.contains("guidance_scales")) g.guidance_scales = j.at("guidance_scales").get<std::vector<double>>();
    if (g.strengths.empty() || g.guidance_scales.empty()) raise(Errc::config_invalid, "inpaint grid must not be empty");
    for (double s : g.strengths)
        if (!(s > 0 && s <= 1)) raise(Errc::config_invalid, "grid strengths must lie in (0, 1]");
    for (double v : g.guidance_scales)
        if (!(v > 0)) raise(Errc::config_invalid, "grid guidance scales must be positive");
    return g;
}

json InpaintGrid::to_json() const {
    return {{"strengths", strengths}, {"guidance_scales", guidance_scales}};
}

void validate_request(const InpaintRequest& request, const InpaintGrid* grid) {
    if (request.image.empty()) raise(Errc::invalid_request, "inpaint request has no image");
    if (request.prompt.empty()) raise(Errc::invalid_request, "inpaint request has an empty prompt");
    if (!(request.strength > 0 && request.strength <= 1))
        raise(Errc::invalid_request, "strength must lie in (0, 1]");
    if (!(request.guidance_scale > 0)) raise(Errc::invalid_request, "guidance scale must be positive");
    if (!request.protection_mask.mask.aligned_with(request.image))
        raise(Errc::shape_mismatch, "protection mask does not match the request image");
    if (grid && !grid->contains({request.strength, request.guidance_scale}))
        raise(Errc::invalid_request, "(strength, guidance) is not a point of the configured grid");
}

std::string_view to_string(ReviewStatus status) noexcept {
    switch (status) {
    case ReviewStatus::pending: return "pending";
    case ReviewStatus::approved: return "approved";
    case ReviewStatus::rejected: return "rejected";
    case ReviewStatus::automatic: return "auto";
    }
    return "pending";
}

ReviewStatus parse_review_status(std::string_view text) {
    for (auto s : {ReviewStatus::pending, ReviewStatus::approved, ReviewStatus::rejected, ReviewStatus::automatic})
        if (to_string(s) == text) return s;
    raise(Errc::config_invalid, "unknown review status '" + std::string(text) + "'");
}

std::vector<Image> GenerativeBackend::inpaint_batch(const ModelHandle& handle,
                                                    const std::vector<InpaintRequest>& requests) {
    std::vector<Image> out;
    out.reserve(requests.size());
    for (const auto& r : requests) out.push_back(inpaint(handle, r));
    return out;
}

// ---------------------------------------------------------------- mock

namespace {

std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

struct ColorStats {
    std::array<double, 3> mean{128, 128, 128};
    std::array<double, 3> std{0, 0, 0};
};

json stats_to_json(const ColorStats& s) {
    return {{"mean", s.mean}, {"std", s.std}};
}

ColorStats stats_from_json(const json& j) {
    ColorStats s;
    s.mean = j.at("mean").get<std::array<double, 3>>();
    s.std = j.at("std").get<std::array<double, 3>>();
    return s;
}

struct Accumulator {
    std::array<double, 3> sum{};
    std::array<double, 3> sum_sq{};
    double n = 0;

    void add(const Image& rgb, const Mask* roi) {
        for (int y = 0; y < rgb.height; ++y)
            for (int x = 0; x < rgb.width; ++x) {
                if (roi && roi->get(x, y)) continue;
                for (int c = 0; c < 3; ++c) {
                    const double v = rgb.at(x, y, c);
                    sum[c] += v;
                    sum_sq[c] += v * v;
                }
                n += 1;
            }
    }

    ColorStats stats() const {
        ColorStats s;
        if (n == 0) return s;
        for (int c = 0; c < 3; ++c) {
            s.mean[c] = sum[c] / n;
            s.std[c] = std::sqrt(std::max(0.0, sum_sq[c] / n - s.mean[c] * s.mean[c]));
        }
        return s;
    }
};

ColorStats stats_for_prompt(const ModelHandle& handle, const std::string& prompt) {
    const json& classes = handle.state.at("classes");
    std::string best;
    for (auto it = classes.begin(); it != classes.end(); ++it)
        if (it.key().size() > best.size() && prompt.find(it.key()) != std::string::npos) best = it.key();
    if (best.empty()) return stats_from_json(handle.state.at("pooled"));
    return stats_from_json(classes.at(best));
}

Image fill_from_stats(const ColorStats& s, int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    Image out(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = clamp_byte(s.mean[c] + s.std[c] * rng.normal());
    return out;
}

void require_mock(const ModelHandle& handle) {
    if (handle.backend_id != "mock")
        raise(Errc::backend_failure, "handle was produced by backend '" + handle.backend_id + "', not mock");
}

}  // namespace

ModelHandle MockBackend::finetune_source(const std::vector<TrainingPair>& pairs, const FinetuneConfig& cfg,
                                         const fs::path& out_dir) {
    std::map<std::string, Accumulator> per_class;
    Accumulator pooled;
    for (const auto& p : pairs) {
        const Image rgb = to_rgb(read_png(p.image));
        std::optional<Mask> roi;
        if (p.roi_mask && fs::exists(*p.roi_mask)) {
            roi = read_mask_png(*p.roi_mask);
            if (!roi->aligned_with(rgb)) raise(Errc::shape_mismatch, "ROI mask does not match image " + p.sample_id);
        }
        per_class[p.class_token].add(rgb, roi ? &*roi : nullptr);
        pooled.add(rgb, roi ? &*roi : nullptr);
    }
    ModelHandle h;
    h.dir = out_dir;
    h.backend_id = id();
    h.mode = FinetuneMode::class_conditional;
    h.config = cfg.to_json();
    h.state = {{"classes", json::object()}, {"pooled", stats_to_json(pooled.stats())}, {"resolution", cfg.resolution}};
    for (const auto& [token, acc] : per_class) h.state["classes"][token] = stats_to_json(acc.stats());
    h.save();
    return h;
}

ModelHandle MockBackend::finetune_target(const ModelHandle& source, const std::vector<fs::path>& backgrounds,
                                         const std::string& dummy_token, const FinetuneConfig& cfg,
                                         const fs::path& out_dir) {
    require_mock(source);
    ModelHandle h;
    h.dir = out_dir;
    h.backend_id = id();
    h.mode = FinetuneMode::target_dreambooth;
    h.dummy_token = dummy_token;
    h.config = cfg.to_json();
    h.parent = source.dir;
    h.state = source.state;
    h.state["files"] = json::array();
    fs::create_directories(out_dir / "backgrounds");
    for (std::size_t i = 0; i < backgrounds.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "backgrounds/%05zu.png", i);
        write_png(out_dir / name, to_rgb(read_png(backgrounds[i])));
        h.state["files"].push_back(name);
    }
    h.save();
    return h;
}

std::shared_ptr<const std::vector<Image>> MockBackend::exemplars(const ModelHandle& handle) {
    std::lock_guard lock(m_cache_mutex);
    const fs::path key = handle.dir / handle.checksum;
    if (m_cached_exemplars && m_cached_dir == key) return m_cached_exemplars;
    auto images = std::make_shared<std::vector<Image>>();
    for (const auto& f : handle.state.value("files", json::array()))
        images->push_back(read_png(handle.dir / f.get<std::string>()));
    m_cached_dir = key;
    m_cached_exemplars = images;
    return images;
}

Image MockBackend::inpaint(const ModelHandle& handle, const InpaintRequest& request) {
    require_mock(handle);
    if (handle.mode != FinetuneMode::target_dreambooth)
        raise(Errc::invalid_request, "inpainting needs a target-fine-tuned handle");
    const auto pool = exemplars(handle);
    if (pool->empty()) raise(Errc::backend_failure, "target handle holds no background exemplars");
    const Image src = to_rgb(request.image);
    Rng rng(request.seed);
    const Image ex = resize_nearest((*pool)[rng.index(pool->size())], src.width, src.height);
    const double s = request.strength;
    const double sigma = 6.0 * 7.5 / request.guidance_scale;
    const Mask& protect = request.protection_mask.mask;
    Image out = src;
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            if (protect.get(x, y)) continue;
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) =
                    clamp_byte((1.0 - s) * src.at(x, y, c) + s * (ex.at(x, y, c) + sigma * rng.normal()));
        }
    return out;
}

Image MockBackend::text2img(const ModelHandle& handle, const std::string& prompt, std::uint64_t seed) {
    require_mock(handle);
    const int res = handle.state.value("resolution", 512);
    return fill_from_stats(stats_for_prompt(handle, prompt), res, res, seed);
}

Image MockBackend::img2img(const ModelHandle& handle, const Image& image, const std::string& prompt, double strength,
                           std::uint64_t seed) {
    require_mock(handle);
    if (!(strength >= 0 && strength <= 1)) raise(Errc::invalid_request, "strength must lie in [0, 1]");
    const Image src = to_rgb(image);
    const Image gen = fill_from_stats(stats_for_prompt(handle, prompt), src.width, src.height, seed);
    Image out = src;
    for (std::size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = clamp_byte((1.0 - strength) * src.pixels[i] + strength * gen.pixels[i]);
    return out;
}

// ---------------------------------------------------------------- external

fs::path ExternalBackend::scratch() const {
    const fs::path dir =
        m_command.work_dir.empty() ? fs::temp_directory_path() / "maskpaint-external" : m_command.work_dir;
    fs::create_directories(dir);
    return dir;
}

namespace {

ModelHandle finish_handle(const fs::path& out_dir, FinetuneMode mode, const FinetuneConfig& cfg,
                          const std::string& dummy_token, const std::optional<fs::path>& parent, const json& response) {
    ModelHandle h;
    h.dir = out_dir;
    h.backend_id = "external";
    h.mode = mode;
    h.dummy_token = dummy_token;
    h.config = cfg.to_json();
    h.parent = parent;
    h.state = {{"worker", response.value("state", json::object())}};
    h.save();
    return h;
}

}  // namespace

ModelHandle ExternalBackend::finetune_source(const std::vector<TrainingPair>& pairs, const FinetuneConfig& cfg,
                                             const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const fs::path pairs_file = out_dir / "worker_pairs.jsonl";
    std::string lines;
    for (const auto& p : pairs) {
        json j = {{"sample_id", p.sample_id}, {"image", p.image.string()}, {"prompt", p.prompt},
                  {"class_label", p.class_label}};
        if (p.roi_mask) j["roi_mask"] = p.roi_mask->string();
        lines += j.dump() + "\n";
    }
    write_text_atomic(pairs_file, lines);
    const auto resp = run_external(m_command, {json{{"op", "finetune_source"},
                                                    {"id", "finetune-source"},
                                                    {"pairs", pairs_file.string()},
                                                    {"config", cfg.to_json()},
                                                    {"output_dir", out_dir.string()}}});
    return finish_handle(out_dir, FinetuneMode::class_conditional, cfg, "", std::nullopt, resp.front());
}

ModelHandle ExternalBackend::finetune_target(const ModelHandle& source, const std::vector<fs::path>& backgrounds,
                                             const std::string& dummy_token, const FinetuneConfig& cfg,
                                             const fs::path& out_dir) {
    fs::create_directories(out_dir);
    json paths = json::array();
    for (const auto& b : backgrounds) paths.push_back(b.string());
    const auto resp = run_external(m_command, {json{{"op", "finetune_target"},
                                                    {"id", "finetune-target"},
                                                    {"source_handle", source.dir.string()},
                                                    {"backgrounds", paths},
                                                    {"dummy_token", dummy_token},
                                                    {"config", cfg.to_json()},
                                                    {"output_dir", out_dir.string()}}});
    return finish_handle(out_dir, FinetuneMode::target_dreambooth, cfg, dummy_token, source.dir, resp.front());
}

Image ExternalBackend::inpaint(const ModelHandle& handle, const InpaintRequest& request) {
    return inpaint_batch(handle, {request}).front();
}

std::vector<Image> ExternalBackend::inpaint_batch(const ModelHandle& handle,
                                                  const std::vector<InpaintRequest>& requests) {
    const fs::path dir = scratch();
    std::vector<json> lines;
    std::vector<fs::path> outputs, temps;
    for (const auto& r : requests) {
        const std::string rid = "inpaint-" + std::to_string(m_counter++);
        const fs::path img = dir / (rid + ".image.png"), mask = dir / (rid + ".mask.png"), out = dir / (rid + ".out.png");
        write_png(img, r.image);
        write_mask_png(mask, r.protection_mask.mask);
        lines.push_back({{"op", "inpaint"},
                         {"id", rid},
                         {"handle", handle.dir.string()},
                         {"image", img.string()},
                         {"protection_mask", mask.string()},
                         {"prompt", r.prompt},
                         {"strength", r.strength},
                         {"guidance_scale", r.guidance_scale},
                         {"seed", r.seed},
                         {"output", out.string()}});
        outputs.push_back(out);
        temps.insert(temps.end(), {img, mask});
    }
    run_external(m_command, lines);
    std::vector<Image> images;
    for (const auto& o : outputs) {
        images.push_back(read_png(o));
        temps.push_back(o);
    }
    for (const auto& t : temps) fs::remove(t);
    return images;
}

Image ExternalBackend::text2img(const ModelHandle& handle, const std::string& prompt, std::uint64_t seed) {
    const fs::path out = scratch() / ("text2img-" + std::to_string(m_counter++) + ".png");
    run_external(m_command, {json{{"op", "text2img"},
                                  {"id", out.stem().string()},
                                  {"handle", handle.dir.string()},
                                  {"prompt", prompt},
                                  {"seed", seed},
                                  {"output", out.string()}}});
    Image img = read_png(out);
    fs::remove(out);
    return img;
}

Image ExternalBackend::img2img(const ModelHandle& handle, const Image& image, const std::string& prompt,
                               double strength, std::uint64_t seed) {
    const std::string rid = "img2img-" + std::to_string(m_counter++);
    const fs::path in = scratch() / (rid + ".in.png"), out = scratch() / (rid + ".out.png");
    write_png(in, image);
    run_external(m_command, {json{{"op", "img2img"},
                                  {"id", rid},
                                  {"handle", handle.dir.string()},
                                  {"image", in.string()},
                                  {"prompt", prompt},
                                  {"strength", strength},
                                  {"seed", seed},
                                  {"output", out.string()}}});
    Image img = read_png(out);
    fs::remove(in);
    fs::remove(out);
    return img;
}

std::unique_ptr<GenerativeBackend> make_backend(const std::string& id, const ExternalCommand* command) {
    if (id == "mock") return std::make_unique<MockBackend>();
    if (id == "external") {
        if (!command) raise(Errc::config_invalid, "external backend needs a command");
        return std::make_unique<ExternalBackend>(*command);
    }
    raise(Errc::config_invalid, "unknown generative backend '" + id + "'");
}

}  // namespace maskpaint::generative
