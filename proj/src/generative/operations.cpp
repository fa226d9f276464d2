// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/generative/operations.hpp"

#include <chrono>
#include <functional>

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"

namespace maskpaint::generative {

namespace fs = std::filesystem;
using datasets::Split;

fs::path resolve_ref(const fs::path& base, const std::string& ref) {
    const fs::path p(ref);
    return p.is_absolute() ? p : base / p;
}

std::vector<TrainingPair> training_pairs(const datasets::DatasetManifest& manifest, const fs::path& manifest_dir,
                                         const prompts::PromptRegistry& registry, const std::string& prompt_dataset,
                                         const std::optional<fs::path>& mask_dir) {
    std::vector<TrainingPair> pairs;
    for (const auto* r : manifest.in_split(Split::train)) {
        if (r->generated()) continue;
        TrainingPair p;
        p.sample_id = r->id;
        p.image = resolve_ref(manifest_dir, r->image_ref);
        if (mask_dir) p.roi_mask = masking::StoredMaskSegmenter::mask_path(*mask_dir, r->id);
        p.class_label = r->class_label;
        if (manifest.multi_label) {
            const auto present = datasets::decode_flags(manifest, r->class_label);
            const auto binding = registry.binding(prompt_dataset, std::nullopt);
            p.class_token = r->class_label;
            p.prompt = prompts::cxr_condition_prompt(present, prompts::Stage::source_finetune, binding, registry);
        } else {
            p.class_token = registry.class_token(prompt_dataset, r->class_label);
            p.prompt = registry.render(prompt_dataset, prompts::Stage::source_finetune, r->class_label);
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

ModelHandle finetune_source(GenerativeBackend& backend, const std::vector<TrainingPair>& pairs,
                            const FinetuneConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    if (cfg.mode != FinetuneMode::class_conditional)
        raise(Errc::config_invalid, "source fine-tuning requires mode class_conditional");
    if (pairs.empty()) raise(Errc::empty_train_set, "no training images for source fine-tuning");
    fs::create_directories(out_dir);
    std::string log;
    for (const auto& p : pairs)
        log += json{{"sample_id", p.sample_id}, {"image", p.image.string()}, {"prompt", p.prompt}}.dump() + "\n";
    write_text_atomic(out_dir / "training_pairs.jsonl", log);
    spdlog::info("fine-tuning {} on {} source pairs", backend.id(), pairs.size());
    try {
        return backend.finetune_source(pairs, cfg, out_dir);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::backend_failure, std::string("source fine-tuning failed: ") + e.what());
    }
}

ModelHandle finetune_target(GenerativeBackend& backend, const ModelHandle& source, const std::vector<fs::path>& backgrounds,
                            const std::string& dummy_token, const FinetuneConfig& cfg, const fs::path& out_dir,
                            const TargetImageGuard& guard) {
    cfg.validate();
    if (cfg.mode != FinetuneMode::target_dreambooth)
        raise(Errc::config_invalid, "target fine-tuning requires mode target_dreambooth");
    if (source.mode != FinetuneMode::class_conditional)
        raise(Errc::config_invalid, "target fine-tuning must start from a source-fine-tuned handle");
    if (backgrounds.empty()) raise(Errc::too_few_target_images, "no target background images");
    if (backgrounds.size() < guard.min_images) {
        const std::string msg = std::to_string(backgrounds.size()) + " target images, fewer than the minimum of " +
                                std::to_string(guard.min_images);
        if (!guard.allow_fewer) raise(Errc::too_few_target_images, msg);
        spdlog::warn("{}; continuing because the override is set", msg);
    }
    if (dummy_token.empty()) raise(Errc::config_invalid, "dummy token must not be empty");
    fs::create_directories(out_dir);
    try {
        return backend.finetune_target(source, backgrounds, dummy_token, cfg, out_dir);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::backend_failure, std::string("target fine-tuning failed: ") + e.what());
    }
}

void restamp_protected(Image& output, const Image& source, const Mask& protection) {
    for (int y = 0; y < source.height; ++y)
        for (int x = 0; x < source.width; ++x)
            if (protection.get(x, y))
                for (int c = 0; c < source.channels; ++c) output.at(x, y, c) = source.at(x, y, c);
}

bool protected_pixels_equal(const Image& output, const Image& source, const Mask& protection) {
    if (!output.same_shape(source) || !protection.aligned_with(source)) return false;
    for (int y = 0; y < source.height; ++y)
        for (int x = 0; x < source.width; ++x)
            if (protection.get(x, y))
                for (int c = 0; c < source.channels; ++c)
                    if (output.at(x, y, c) != source.at(x, y, c)) return false;
    return true;
}

namespace {

GenerationResult finish(Image raw, const InpaintRequest& request, const std::string& source_id,
                        const std::string& backend_id, double seconds) {
    const Image src = to_rgb(request.image);
    if (raw.width != src.width || raw.height != src.height)
        raise(Errc::shape_mismatch, "backend returned " + std::to_string(raw.width) + "x" + std::to_string(raw.height) +
                                        " for a " + std::to_string(src.width) + "x" + std::to_string(src.height) +
                                        " request");
    Image out = to_rgb(raw);
    restamp_protected(out, src, request.protection_mask.mask);
    GenerationResult r;
    r.image = std::move(out);
    r.request = request;
    r.request.image = src;
    r.source_sample_id = source_id;
    r.backend_id = backend_id;
    r.wall_time = seconds;
    return r;
}

Image call_backend(const std::function<Image()>& fn) {
    try {
        return fn();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::backend_failure, e.what());
    }
}

}  // namespace

GenerationResult inpaint(GenerativeBackend& backend, const ModelHandle& handle, const InpaintRequest& request,
                         const std::string& source_sample_id, const InpaintGrid* grid) {
    validate_request(request, grid);
    const auto t0 = std::chrono::steady_clock::now();
    Image raw = call_backend([&] { return backend.inpaint(handle, request); });
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish(std::move(raw), request, source_sample_id, backend.id(), dt);
}

std::vector<GenerationResult> inpaint_batch(GenerativeBackend& backend, const ModelHandle& handle,
                                            const std::vector<InpaintRequest>& requests,
                                            const std::vector<std::string>& source_sample_ids,
                                            const InpaintGrid* grid) {
    if (requests.size() != source_sample_ids.size())
        raise(Errc::invalid_request, "one source id is needed per request");
    for (const auto& r : requests) validate_request(r, grid);
    if (requests.empty()) return {};
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Image> raw;
    try {
        raw = backend.inpaint_batch(handle, requests);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::backend_failure, e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (raw.size() != requests.size()) raise(Errc::backend_failure, "backend returned the wrong number of images");
    std::vector<GenerationResult> out;
    for (std::size_t i = 0; i < raw.size(); ++i)
        out.push_back(finish(std::move(raw[i]), requests[i], source_sample_ids[i], backend.id(),
                             dt / static_cast<double>(raw.size())));
    return out;
}

std::string_view to_string(GenerationMethod method) noexcept {
    switch (method) {
    case GenerationMethod::inpaint: return "inpaint";
    case GenerationMethod::text2img: return "text2img";
    case GenerationMethod::img2img: return "img2img";
    }
    return "inpaint";
}

GenerationMethod parse_generation_method(std::string_view text) {
    for (auto m : {GenerationMethod::inpaint, GenerationMethod::text2img, GenerationMethod::img2img})
        if (to_string(m) == text) return m;
    raise(Errc::config_invalid, "unknown generation method '" + std::string(text) + "'");
}

Image generate(GenerationMethod method, GenerativeBackend& backend, const ModelHandle& handle,
               const InpaintRequest& request) {
    switch (method) {
    case GenerationMethod::inpaint: return inpaint(backend, handle, request, "").image;
    case GenerationMethod::text2img:
        return call_backend([&] { return backend.text2img(handle, request.prompt, request.seed); });
    case GenerationMethod::img2img:
        return call_backend(
            [&] { return backend.img2img(handle, request.image, request.prompt, request.strength, request.seed); });
    }
    raise(Errc::config_invalid, "unknown generation method");
}

}  // namespace maskpaint::generative
