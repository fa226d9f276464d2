// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"
#include "maskpaint/core/rng.hpp"

namespace maskpaint::pipeline {

namespace fs = std::filesystem;
using datasets::DatasetManifest;
using datasets::Domain;
using datasets::SampleRecord;
using datasets::Split;
using generative::GenerationMethod;
using generative::GridPoint;
using generative::ModelHandle;

// ---------------------------------------------------------------- config

namespace {

std::string_view to_string(GridSelection s) {
    return s == GridSelection::validation ? "validation" : "fixed";
}

std::string_view to_string(ReviewMode m) {
    return m == ReviewMode::automatic ? "auto" : "queue";
}

std::optional<ExternalCommand> command_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return ExternalCommand::from_json(j.at(key));
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig c;
    if (!j.is_object()) raise(Errc::config_invalid, "pipeline config must be an object");
    try {
        c.dataset = j.value("dataset", c.dataset);
        c.segmenter = j.value("segmenter", c.segmenter);
        c.remover = j.value("remover", c.remover);
        c.backend = j.value("backend", c.backend);
        c.segmenter_command = command_from(j, "segmenter_command");
        c.remover_command = command_from(j, "remover_command");
        c.backend_command = command_from(j, "backend_command");
        if (j.contains("mask_dir") && !j.at("mask_dir").is_null()) c.mask_dir = j.at("mask_dir").get<std::string>();
        c.coverage_floor = j.value("coverage_floor", c.coverage_floor);
        c.dilation_px = j.value("dilation_px", c.dilation_px);
        if (j.contains("dilation_element")) {
            const auto e = j.at("dilation_element").get<std::string>();
            if (e == "disc") c.dilation_element = masking::StructuringElement::disc;
            else if (e == "square") c.dilation_element = masking::StructuringElement::square;
            else raise(Errc::config_invalid, "unknown structuring element '" + e + "'");
        }
        if (j.contains("source_finetune"))
            c.source_finetune = generative::FinetuneConfig::from_json(j.at("source_finetune"), c.source_finetune);
        if (j.contains("target_finetune"))
            c.target_finetune = generative::FinetuneConfig::from_json(j.at("target_finetune"), c.target_finetune);
        if (j.contains("target_guard")) {
            c.target_guard.min_images = j.at("target_guard").value("min_images", c.target_guard.min_images);
            c.target_guard.allow_fewer = j.at("target_guard").value("allow_fewer", c.target_guard.allow_fewer);
        }
        if (j.contains("grid")) c.grid = generative::InpaintGrid::from_json(j.at("grid"));
        if (j.contains("selection")) {
            const auto s = j.at("selection").get<std::string>();
            if (s == "validation") c.selection = GridSelection::validation;
            else if (s == "fixed") c.selection = GridSelection::fixed;
            else raise(Errc::config_invalid, "unknown grid selection '" + s + "'");
        }
        if (j.contains("fixed_point")) {
            c.fixed_point.strength = j.at("fixed_point").value("strength", c.fixed_point.strength);
            c.fixed_point.guidance_scale = j.at("fixed_point").value("guidance_scale", c.fixed_point.guidance_scale);
        }
        c.probe_generated = j.value("probe_generated", c.probe_generated);
        if (j.contains("probe_classifier"))
            c.probe_classifier = classifier::TrainConfig::from_json(j.at("probe_classifier"));
        c.n_generated = j.value("n_generated", c.n_generated);
        if (j.contains("method")) c.method = generative::parse_generation_method(j.at("method").get<std::string>());
        c.merge_policy = j.value("merge_policy", c.merge_policy);
        if (j.contains("review")) {
            const auto r = j.at("review").get<std::string>();
            if (r == "auto") c.review = ReviewMode::automatic;
            else if (r == "queue") c.review = ReviewMode::queue;
            else raise(Errc::config_invalid, "unknown review mode '" + r + "'");
        }
        c.backend_batch = j.value("backend_batch", c.backend_batch);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, std::string("malformed pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

json PipelineConfig::to_json() const {
    json j = {{"dataset", dataset},
              {"segmenter", segmenter},
              {"remover", remover},
              {"backend", backend},
              {"coverage_floor", coverage_floor},
              {"dilation_px", dilation_px},
              {"dilation_element", dilation_element == masking::StructuringElement::disc ? "disc" : "square"},
              {"source_finetune", source_finetune.to_json()},
              {"target_finetune", target_finetune.to_json()},
              {"target_guard", {{"min_images", target_guard.min_images}, {"allow_fewer", target_guard.allow_fewer}}},
              {"grid", grid.to_json()},
              {"selection", to_string(selection)},
              {"fixed_point", {{"strength", fixed_point.strength}, {"guidance_scale", fixed_point.guidance_scale}}},
              {"probe_generated", probe_generated},
              {"probe_classifier", probe_classifier.to_json()},
              {"n_generated", n_generated},
              {"method", generative::to_string(method)},
              {"merge_policy", merge_policy},
              {"review", to_string(review)},
              {"backend_batch", backend_batch},
              {"seed", seed}};
    if (segmenter_command) j["segmenter_command"] = segmenter_command->to_json();
    if (remover_command) j["remover_command"] = remover_command->to_json();
    if (backend_command) j["backend_command"] = backend_command->to_json();
    if (mask_dir) j["mask_dir"] = mask_dir->string();
    return j;
}

void PipelineConfig::validate() const {
    if (n_generated < 0) raise(Errc::config_invalid, "n_generated must be non-negative");
    if (segmenter != "stored" && segmenter != "threshold" && segmenter != "external")
        raise(Errc::config_invalid, "unknown segmenter '" + segmenter + "'");
    if (remover != "mean-fill" && remover != "external") raise(Errc::config_invalid, "unknown remover '" + remover + "'");
    if (backend != "mock" && backend != "external") raise(Errc::config_invalid, "unknown backend '" + backend + "'");
    if (segmenter == "external" && !segmenter_command) raise(Errc::config_invalid, "segmenter_command is required");
    if (remover == "external" && !remover_command) raise(Errc::config_invalid, "remover_command is required");
    if (backend == "external" && !backend_command) raise(Errc::config_invalid, "backend_command is required");
    if (merge_policy != "originals_plus_generated")
        raise(Errc::config_invalid, "unknown merge policy '" + merge_policy + "'");
    if (dilation_px < 0) raise(Errc::config_invalid, "dilation_px must be non-negative");
    if (coverage_floor < 0 || coverage_floor > 1) raise(Errc::config_invalid, "coverage_floor must lie in [0, 1]");
    if (probe_generated < 1) raise(Errc::config_invalid, "probe_generated must be positive");
    if (backend_batch < 1) raise(Errc::config_invalid, "backend_batch must be positive");
    if (!(fixed_point.strength > 0 && fixed_point.strength <= 1) || !(fixed_point.guidance_scale > 0))
        raise(Errc::config_invalid, "fixed grid point out of range");
    if (source_finetune.mode != generative::FinetuneMode::class_conditional)
        raise(Errc::config_invalid, "source_finetune.mode must be class_conditional");
    if (target_finetune.mode != generative::FinetuneMode::target_dreambooth)
        raise(Errc::config_invalid, "target_finetune.mode must be target_dreambooth");
}

// ---------------------------------------------------------------- planning

namespace {

std::vector<const SampleRecord*> source_train(const DatasetManifest& m) {
    std::vector<const SampleRecord*> out;
    for (const auto* r : m.in_split(Split::train))
        if (!r->generated()) out.push_back(r);
    return out;
}

// Class keys in a stable order: vocabulary order for single-label, sorted
// flag strings for multi-label.
std::vector<std::string> class_keys(const DatasetManifest& m, const std::vector<const SampleRecord*>& train) {
    if (!m.multi_label) return m.classes;
    std::set<std::string> keys;
    for (const auto* r : train) keys.insert(r->class_label);
    return {keys.begin(), keys.end()};
}

}  // namespace

std::map<std::string, std::size_t> class_quotas(const DatasetManifest& manifest, std::size_t n) {
    const auto train = source_train(manifest);
    const auto keys = class_keys(manifest, train);
    std::map<std::string, std::size_t> counts;
    for (const auto& k : keys) counts[k] = 0;
    for (const auto* r : train) ++counts[r->class_label];
    std::map<std::string, std::size_t> quota;
    if (train.empty()) {
        if (n > 0) raise(Errc::empty_train_set, "cannot plan generations from an empty train split");
        return quota;
    }
    const double total = static_cast<double>(train.size());
    std::size_t assigned = 0;
    std::vector<std::pair<double, std::size_t>> remainders;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const double exact = static_cast<double>(n) * static_cast<double>(counts[keys[i]]) / total;
        const auto base = static_cast<std::size_t>(std::floor(exact));
        quota[keys[i]] = base;
        assigned += base;
        remainders.emplace_back(exact - static_cast<double>(base), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++quota[keys[remainders[k % remainders.size()].second]];
    return quota;
}

std::vector<GenerationDraw> plan_generations(const DatasetManifest& manifest, std::size_t n, std::uint64_t seed) {
    const auto train = source_train(manifest);
    const auto quota = class_quotas(manifest, n);
    const bool with_replacement = n > train.size();
    const std::uint64_t gen_seed = derive_seed(seed, "generation");
    std::vector<GenerationDraw> draws;
    for (const auto& key : class_keys(manifest, train)) {
        std::vector<const SampleRecord*> pool;
        for (const auto* r : train)
            if (r->class_label == key) pool.push_back(r);
        const std::size_t q = quota.at(key);
        std::vector<const SampleRecord*> picked;
        if (!with_replacement) {
            Rng rng(derive_seed(seed, "draw/" + key));
            rng.shuffle(pool);
            picked.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(q));
        } else {
            for (std::size_t k = 0; k < q; ++k) {
                Rng rng(derive_seed(seed, "draw/" + key + "/" + std::to_string(k)));
                picked.push_back(pool[rng.index(pool.size())]);
            }
        }
        for (const auto* r : picked) {
            GenerationDraw d;
            d.index = draws.size();
            char prefix[16];
            std::snprintf(prefix, sizeof prefix, "g%05zu-", d.index);
            d.id = prefix + r->id;
            d.source_id = r->id;
            d.seed = derive_seed(gen_seed, static_cast<std::uint64_t>(d.index));
            draws.push_back(std::move(d));
        }
    }
    return draws;
}

// ---------------------------------------------------------------- steps 1-2

namespace {

struct MaskIndex {
    std::map<std::string, json> entries;
    fs::path file;

    static MaskIndex load(const fs::path& dir) {
        MaskIndex idx;
        idx.file = dir / "index.json";
        if (fs::exists(idx.file)) {
            const json j = read_json_file(idx.file);
            for (auto it = j.begin(); it != j.end(); ++it) idx.entries[it.key()] = it.value();
        }
        return idx;
    }
    void save() const {
        json j = json::object();
        for (const auto& [k, v] : entries) j[k] = v;
        write_json_file(file, j);
    }
    bool empty_mask(const std::string& id) const {
        auto it = entries.find(id);
        return it != entries.end() && it->second.value("status", "") == "empty";
    }
};

bool reusable_handle(const fs::path& dir, const std::string& backend_id, const generative::FinetuneConfig& cfg) {
    if (!fs::exists(dir / ModelHandle::kFileName)) return false;
    try {
        const ModelHandle h = ModelHandle::load(dir);
        return h.backend_id == backend_id && h.config == cfg.to_json();
    } catch (const Error& e) {
        spdlog::warn("discarding stored model at {}: {}", dir.string(), e.what());
        return false;
    }
}

std::string prompt_for(const PipelineConfig& cfg, const DatasetManifest& manifest, const SampleRecord& r,
                       prompts::Stage stage, const prompts::PromptRegistry& registry) {
    if (manifest.multi_label) {
        const auto present = datasets::decode_flags(manifest, r.class_label);
        return prompts::cxr_condition_prompt(present, stage, registry.binding(cfg.dataset, std::nullopt), registry);
    }
    return registry.render(cfg.dataset, stage, r.class_label);
}

}  // namespace

MaskStage compute_masks(const PipelineConfig& cfg, const DatasetManifest& manifest, const fs::path& manifest_dir,
                        const fs::path& work_dir) {
    MaskStage out;
    out.mask_dir = work_dir / "masks";
    fs::create_directories(out.mask_dir);
    const fs::path stored_masks = cfg.mask_dir.value_or(manifest_dir);
    auto segmenter =
        masking::make_segmenter(cfg.segmenter, stored_masks, cfg.segmenter_command ? &*cfg.segmenter_command : nullptr);
    MaskIndex index = MaskIndex::load(out.mask_dir);
    std::size_t computed = 0, considered = 0;
    for (const auto& r : manifest.records) {
        if (r.generated() || r.split == Split::test) continue;
        ++considered;
        const fs::path mask_file = masking::StoredMaskSegmenter::mask_path(out.mask_dir, r.id);
        if (index.entries.contains(r.id) && (index.empty_mask(r.id) || fs::exists(mask_file))) continue;
        const Image image = read_png(generative::resolve_ref(manifest_dir, r.image_ref));
        try {
            const auto artifact = masking::segment_roi(image, *segmenter, {r.id}, cfg.coverage_floor);
            write_mask_png(mask_file, artifact.mask);
            index.entries[r.id] = {{"status", "ok"}, {"coverage", artifact.coverage}, {"backend", artifact.source_backend}};
        } catch (const Error& e) {
            if (e.code() != Errc::empty_mask) throw;
            index.entries[r.id] = {{"status", "empty"}, {"reason", e.what()}};
        }
        ++computed;
    }
    index.save();
    for (const auto& [id, entry] : index.entries)
        if (entry.value("status", "") == "empty") out.skipped.push_back({id, "masks", "EmptyMask"});
    spdlog::info("masks: {} computed, {} reused, {} empty", computed, considered - computed, out.skipped.size());
    return out;
}

ModelHandle finetune_source_stage(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                  const fs::path& manifest_dir, const fs::path& work_dir,
                                  const prompts::PromptRegistry& registry) {
    const fs::path mask_dir = work_dir / "masks";
    if (!fs::exists(mask_dir / "index.json")) raise(Errc::stage_dependency_unmet, "masks have not been computed");
    auto backend = generative::make_backend(cfg.backend, cfg.backend_command ? &*cfg.backend_command : nullptr);
    const fs::path source_dir = work_dir / "models" / "source";
    if (reusable_handle(source_dir, backend->id(), cfg.source_finetune)) return ModelHandle::load(source_dir);
    const MaskIndex index = MaskIndex::load(mask_dir);
    std::vector<generative::TrainingPair> pairs;
    for (auto& p : generative::training_pairs(manifest, manifest_dir, registry, cfg.dataset, mask_dir)) {
        if (index.empty_mask(p.sample_id)) p.roi_mask.reset();
        pairs.push_back(std::move(p));
    }
    return generative::finetune_source(*backend, pairs, cfg.source_finetune, source_dir);
}

std::vector<fs::path> extract_backgrounds(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                          const fs::path& manifest_dir, const fs::path& work_dir) {
    const fs::path mask_dir = work_dir / "masks";
    if (!fs::exists(mask_dir / "index.json")) raise(Errc::stage_dependency_unmet, "masks have not been computed");
    const MaskIndex index = MaskIndex::load(mask_dir);
    auto remover = masking::make_remover(cfg.remover, cfg.remover_command ? &*cfg.remover_command : nullptr);
    const fs::path bg_dir = work_dir / "backgrounds";
    fs::create_directories(bg_dir);
    std::vector<fs::path> backgrounds;
    for (const auto* r : manifest.in_split(Split::extra)) {
        const fs::path bg = bg_dir / (r->id + ".png");
        if (!fs::exists(bg)) {
            const Image image = read_png(generative::resolve_ref(manifest_dir, r->image_ref));
            if (index.empty_mask(r->id)) {
                write_png(bg, to_rgb(image));
            } else {
                const Mask m = read_mask_png(masking::StoredMaskSegmenter::mask_path(mask_dir, r->id));
                write_png(bg, masking::extract_background(image, masking::make_artifact(m, cfg.segmenter), *remover));
            }
        }
        backgrounds.push_back(bg);
    }
    return backgrounds;
}

ModelHandle finetune_target_stage(const PipelineConfig& cfg, const ModelHandle& source,
                                  const std::vector<fs::path>& backgrounds, const fs::path& work_dir,
                                  const prompts::PromptRegistry& registry) {
    auto backend = generative::make_backend(cfg.backend, cfg.backend_command ? &*cfg.backend_command : nullptr);
    const fs::path target_dir = work_dir / "models" / "target";
    const std::string dummy = registry.dataset(cfg.dataset).dummy_token;
    if (reusable_handle(target_dir, backend->id(), cfg.target_finetune)) {
        ModelHandle t = ModelHandle::load(target_dir);
        if (t.parent == source.dir && t.dummy_token == dummy) return t;
    }
    return generative::finetune_target(*backend, source, backgrounds, dummy, cfg.target_finetune, target_dir,
                                       cfg.target_guard);
}

PreparedModels prepare_models(const PipelineConfig& cfg, const DatasetManifest& manifest, const fs::path& manifest_dir,
                              const fs::path& work_dir, const prompts::PromptRegistry& registry) {
    cfg.validate();
    if (!registry.contains(cfg.dataset)) raise(Errc::config_invalid, "no prompt entry for dataset '" + cfg.dataset + "'");
    PreparedModels out;
    auto masks = compute_masks(cfg, manifest, manifest_dir, work_dir);
    out.mask_dir = masks.mask_dir;
    out.skipped = std::move(masks.skipped);
    out.source = finetune_source_stage(cfg, manifest, manifest_dir, work_dir, registry);
    const auto backgrounds = extract_backgrounds(cfg, manifest, manifest_dir, work_dir);
    out.target = finetune_target_stage(cfg, out.source, backgrounds, work_dir, registry);
    return out;
}

// ---------------------------------------------------------------- results

json StoredResult::to_json() const {
    return {{"id", id},
            {"source_sample_id", source_sample_id},
            {"source_image_ref", source_image_ref},
            {"image_ref", image_ref},
            {"protection_mask_ref", protection_mask_ref},
            {"class_label", class_label},
            {"prompt", prompt},
            {"method", method},
            {"strength", strength},
            {"guidance_scale", guidance_scale},
            {"seed", seed},
            {"backend_id", backend_id},
            {"wall_time", wall_time},
            {"review_status", review_status}};
}

StoredResult StoredResult::from_json(const json& j) {
    StoredResult r;
    try {
        r.id = j.at("id").get<std::string>();
        r.source_sample_id = j.at("source_sample_id").get<std::string>();
        r.source_image_ref = j.at("source_image_ref").get<std::string>();
        r.image_ref = j.at("image_ref").get<std::string>();
        r.protection_mask_ref = j.value("protection_mask_ref", std::string{});
        r.class_label = j.at("class_label").get<std::string>();
        r.prompt = j.at("prompt").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.strength = j.at("strength").get<double>();
        r.guidance_scale = j.at("guidance_scale").get<double>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.backend_id = j.at("backend_id").get<std::string>();
        r.wall_time = j.value("wall_time", 0.0);
        r.review_status = j.value("review_status", std::string("pending"));
    } catch (const json::exception& e) {
        raise(Errc::provenance_missing, std::string("malformed generation result: ") + e.what());
    }
    return r;
}

StoredResult load_result(const fs::path& run_dir, const std::string& result_ref) {
    const fs::path p = run_dir / result_ref;
    if (!fs::exists(p)) raise(Errc::provenance_missing, "generation result " + p.string() + " does not exist");
    return StoredResult::from_json(read_json_file(p));
}

// ---------------------------------------------------------------- step 3

namespace {

SampleRecord generated_record(const StoredResult& res, const std::string& result_ref) {
    SampleRecord g;
    g.id = res.id;
    g.image_ref = res.image_ref;
    g.class_label = res.class_label;
    g.domain = Domain::source;
    g.split = Split::train;
    g.provenance = datasets::Provenance{res.source_sample_id, res.id, result_ref, res.method};
    return g;
}

}  // namespace

GenerationBatch generate_augmentations(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                       const fs::path& manifest_dir, const PreparedModels& models,
                                       const GridPoint& point, std::size_t n, std::uint64_t seed,
                                       const fs::path& out_dir, const prompts::PromptRegistry& registry,
                                       const PipelineHooks& hooks) {
    GenerationBatch out;
    const auto draws = plan_generations(manifest, n, seed);
    const fs::path gen_dir = out_dir / "generated";
    fs::create_directories(gen_dir);
    auto backend = generative::make_backend(cfg.backend, cfg.backend_command ? &*cfg.backend_command : nullptr);
    const MaskIndex index = MaskIndex::load(models.mask_dir);
    const std::string status = cfg.review == ReviewMode::automatic ? "auto" : "pending";

    struct Pending {
        const GenerationDraw* draw;
        const SampleRecord* source;
        generative::InpaintRequest request;
    };
    std::vector<std::optional<SampleRecord>> slots(draws.size());
    std::vector<Pending> pending;
    std::size_t stored = 0;

    auto store = [&](const Pending& p, const Image& image, double wall_time) {
        const std::string rel_img = "generated/" + p.draw->id + ".png";
        const std::string rel_mask = "generated/" + p.draw->id + ".mask.png";
        const std::string rel_json = "generated/" + p.draw->id + ".json";
        write_png(out_dir / rel_img, image);
        write_mask_png(out_dir / rel_mask, p.request.protection_mask.mask);
        StoredResult res;
        res.id = p.draw->id;
        res.source_sample_id = p.source->id;
        res.source_image_ref = relative_ref(generative::resolve_ref(manifest_dir, p.source->image_ref), out_dir);
        res.image_ref = rel_img;
        res.protection_mask_ref = rel_mask;
        res.class_label = p.source->class_label;
        res.prompt = p.request.prompt;
        res.method = std::string(generative::to_string(cfg.method));
        res.strength = p.request.strength;
        res.guidance_scale = p.request.guidance_scale;
        res.seed = p.request.seed;
        res.backend_id = backend->id();
        res.wall_time = wall_time;
        res.review_status = status;
        // The JSON is written last and marks the generation as complete.
        write_json_file(out_dir / rel_json, res.to_json());
        slots[p.draw->index] = generated_record(res, rel_json);
        ++stored;
        if (hooks.after_generation) hooks.after_generation(stored);
    };

    auto flush = [&] {
        if (pending.empty()) return;
        if (cfg.method == GenerationMethod::inpaint) {
            std::vector<generative::InpaintRequest> reqs;
            std::vector<std::string> ids;
            for (const auto& p : pending) {
                reqs.push_back(p.request);
                ids.push_back(p.source->id);
            }
            const auto results = generative::inpaint_batch(*backend, models.target, reqs, ids, &cfg.grid);
            for (std::size_t i = 0; i < pending.size(); ++i) store(pending[i], results[i].image, results[i].wall_time);
        } else {
            for (const auto& p : pending) store(p, generative::generate(cfg.method, *backend, models.target, p.request), 0.0);
        }
        pending.clear();
    };

    std::size_t reused = 0;
    for (const auto& d : draws) {
        const SampleRecord* src = manifest.find(d.source_id);
        const fs::path rel_json = fs::path("generated") / (d.id + ".json");
        if (fs::exists(out_dir / rel_json) && fs::exists(out_dir / "generated" / (d.id + ".png"))) {
            slots[d.index] = generated_record(load_result(out_dir, rel_json.generic_string()), rel_json.generic_string());
            ++reused;
            continue;
        }
        if (index.empty_mask(d.source_id)) {
            out.skipped.push_back({d.id, "generate", "EmptyMask on source " + d.source_id});
            continue;
        }
        const Image image = to_rgb(read_png(generative::resolve_ref(manifest_dir, src->image_ref)));
        const Mask roi = read_mask_png(masking::StoredMaskSegmenter::mask_path(models.mask_dir, src->id));
        Pending p{&d, src, {}};
        p.request.image = image;
        p.request.protection_mask = masking::make_protection_mask(masking::make_artifact(roi, cfg.segmenter),
                                                                  cfg.dilation_px, cfg.dilation_element);
        p.request.prompt = prompt_for(cfg, manifest, *src, prompts::Stage::inference, registry);
        p.request.strength = point.strength;
        p.request.guidance_scale = point.guidance_scale;
        p.request.seed = d.seed;
        pending.push_back(std::move(p));
        if (pending.size() >= cfg.backend_batch) flush();
    }
    flush();
    for (auto& s : slots)
        if (s) out.records.push_back(std::move(*s));
    spdlog::info("generation: {} planned, {} reused, {} new, {} skipped", draws.size(), reused, stored,
                 out.skipped.size());
    return out;
}

generative::GridPoint select_grid_point(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                        const fs::path& manifest_dir, const PreparedModels& models,
                                        const fs::path& work_dir, const prompts::PromptRegistry& registry) {
    if (cfg.selection == GridSelection::fixed) return cfg.fixed_point;
    const fs::path cache = work_dir / "grid_selection.json";
    const std::string key = sha256_hex(
        json{{"grid", cfg.grid.to_json()}, {"probe", cfg.probe_classifier.to_json()}, {"n", cfg.probe_generated},
             {"seed", cfg.seed}, {"target", models.target.checksum}, {"method", generative::to_string(cfg.method)}}
            .dump());
    if (fs::exists(cache)) {
        const json j = read_json_file(cache);
        if (j.value("key", "") == key)
            return {j.at("chosen").at("strength").get<double>(), j.at("chosen").at("guidance_scale").get<double>()};
    }
    const auto train = classifier::labeled_split(manifest, manifest_dir, Split::train);
    const auto val = classifier::labeled_split(manifest, manifest_dir, Split::val);
    const std::uint64_t probe_seed = derive_seed(cfg.seed, "probe");
    GridPoint best = cfg.grid.points().front();
    double best_score = -1;
    json scores = json::array();
    for (const auto& point : cfg.grid.points()) {
        char name[64];
        std::snprintf(name, sizeof name, "s%.3f_g%.3f", point.strength, point.guidance_scale);
        const fs::path dir = work_dir / "probe" / name;
        PipelineConfig probe_cfg = cfg;
        probe_cfg.review = ReviewMode::automatic;
        const auto batch = generate_augmentations(probe_cfg, manifest, manifest_dir, models, point,
                                                  static_cast<std::size_t>(cfg.probe_generated), probe_seed, dir,
                                                  registry);
        DatasetManifest probe = merge_records(manifest, manifest_dir, batch.records, dir);
        auto set = train;
        set.append(classifier::labeled_split(probe, dir, Split::train));
        std::set<std::string> seen(train.ids.begin(), train.ids.end());
        classifier::LabeledSet generated;
        for (std::size_t i = 0; i < set.size(); ++i)
            if (i >= train.size() && !seen.contains(set.ids[i])) {
                generated.ids.push_back(set.ids[i]);
                generated.images.push_back(set.images[i]);
                generated.targets.push_back(set.targets[i]);
            }
        auto combined = train;
        combined.append(generated);
        classifier::TrainConfig tc = cfg.probe_classifier;
        tc.seed = derive_seed(probe_seed, "classifier");
        const auto handle =
            classifier::train_sets(combined, val, manifest.classes, manifest.multi_label, tc, dir / "classifier");
        scores.push_back({{"strength", point.strength}, {"guidance_scale", point.guidance_scale},
                          {"val_score", handle.best_val_score}});
        spdlog::info("grid point strength {} guidance {}: probe val {:.4f}", point.strength, point.guidance_scale,
                     handle.best_val_score);
        if (handle.best_val_score >= best_score) {
            best_score = handle.best_val_score;
            best = point;
        }
    }
    write_json_file(cache, json{{"key", key},
                                {"scores", scores},
                                {"chosen", {{"strength", best.strength}, {"guidance_scale", best.guidance_scale}}}});
    return best;
}

DatasetManifest merge_records(const DatasetManifest& manifest, const fs::path& manifest_dir,
                              const std::vector<SampleRecord>& generated, const fs::path& out_dir) {
    DatasetManifest out = manifest;
    out.records.clear();
    for (auto r : manifest.records) {
        if (!r.generated()) r.image_ref = relative_ref(generative::resolve_ref(manifest_dir, r.image_ref), out_dir);
        out.records.push_back(std::move(r));
    }
    out.records.insert(out.records.end(), generated.begin(), generated.end());
    return out;
}

// ---------------------------------------------------------------- full run

PipelineOutcome run_pipeline(const PipelineConfig& cfg, const DatasetManifest& manifest, const fs::path& manifest_dir,
                             const fs::path& out_dir, const prompts::PromptRegistry& registry,
                             const PipelineHooks& hooks) {
    cfg.validate();
    datasets::validate_manifest(manifest);
    if (manifest.count(Split::extra) == 0) raise(Errc::empty_split, "the manifest has no target extra images");
    fs::create_directories(out_dir);

    PipelineOutcome outcome;
    const PreparedModels models = prepare_models(cfg, manifest, manifest_dir, out_dir, registry);
    outcome.grid_point = select_grid_point(cfg, manifest, manifest_dir, models, out_dir, registry);
    const auto batch = generate_augmentations(cfg, manifest, manifest_dir, models, outcome.grid_point,
                                              static_cast<std::size_t>(cfg.n_generated), cfg.seed, out_dir, registry,
                                              hooks);
    outcome.manifest = merge_records(manifest, manifest_dir, batch.records, out_dir);
    datasets::validate_manifest(outcome.manifest);
    datasets::write_manifest(out_dir / "manifest.jsonl", outcome.manifest);

    std::vector<StoredResult> results;
    std::string results_text;
    for (const auto& g : batch.records) {
        results.push_back(load_result(out_dir, g.provenance->result_ref));
        results_text += results.back().to_json().dump() + "\n";
        ++outcome.generated_per_class[g.class_label];
        outcome.generation_ids.push_back(g.id);
    }
    write_text_atomic(out_dir / "results.jsonl", results_text);

    for (const auto& s : models.skipped)
        if (const auto* r = manifest.find(s.sample_id); r && r->split == Split::train) outcome.skipped.push_back(s);
    outcome.skipped.insert(outcome.skipped.end(), batch.skipped.begin(), batch.skipped.end());
    outcome.partial_failure = !batch.skipped.empty();
    if (outcome.partial_failure)
        spdlog::warn("partial failure: {} planned generations skipped", batch.skipped.size());

    if (cfg.review == ReviewMode::queue)
        outcome.queue_id = export_review_queue(results, out_dir, out_dir / "review");

    json quota = json::object();
    for (const auto& [k, v] : class_quotas(manifest, static_cast<std::size_t>(cfg.n_generated))) quota[k] = v;
    json per_class = json::object();
    for (const auto& [k, v] : outcome.generated_per_class) per_class[k] = v;
    json skipped = json::array();
    for (const auto& s : outcome.skipped)
        skipped.push_back({{"sample_id", s.sample_id}, {"stage", s.stage}, {"reason", s.reason}});
    json meta = {{"config", cfg.to_json()},
                 {"seeds", {{"root", cfg.seed}, {"generation", derive_seed(cfg.seed, "generation")}}},
                 {"grid_point", {{"strength", outcome.grid_point.strength},
                                 {"guidance_scale", outcome.grid_point.guidance_scale}}},
                 {"quota_per_class", quota},
                 {"generated_per_class", per_class},
                 {"skip_count", outcome.skipped.size()},
                 {"skipped", skipped},
                 {"partial_failure", outcome.partial_failure},
                 {"source_model_checksum", models.source.checksum},
                 {"target_model_checksum", models.target.checksum},
                 {"finished_at", utc_timestamp()}};
    if (outcome.queue_id) meta["queue_id"] = *outcome.queue_id;
    write_json_file(out_dir / "run_meta.json", meta);
    for (const auto& [k, v] : outcome.generated_per_class) spdlog::info("generated {} for class {}", v, k);
    return outcome;
}

// ---------------------------------------------------------------- review

std::string export_review_queue(const std::vector<StoredResult>& results, const fs::path& run_dir,
                                const fs::path& queues_root, std::optional<std::string> queue_id) {
    if (!queue_id) {
        std::vector<std::string> ids;
        for (const auto& r : results) ids.push_back(r.id);
        std::sort(ids.begin(), ids.end());
        std::string joined;
        for (const auto& id : ids) joined += id + "\n";
        queue_id = "q-" + sha256_hex(joined).substr(0, 12);
    }
    const fs::path dir = review::queue_dir(queues_root, *queue_id);
    fs::create_directories(dir);
    std::vector<review::ReviewItem> items;
    for (const auto& r : results) {
        review::ReviewItem it;
        it.id = r.id;
        it.source_sample_id = r.source_sample_id;
        it.source_image_ref = relative_ref(run_dir / r.source_image_ref, dir);
        it.generated_image_ref = relative_ref(run_dir / r.image_ref, dir);
        it.result_ref = relative_ref(run_dir / "generated" / (r.id + ".json"), dir);
        it.prompt = r.prompt;
        it.class_label = r.class_label;
        items.push_back(std::move(it));
    }
    const std::size_t added = review::enqueue_items(dir, *queue_id, items);
    spdlog::info("review queue {}: {} items added ({} already present)", *queue_id, added, items.size() - added);
    return *queue_id;
}

DatasetManifest merge_approved(const DatasetManifest& manifest, const review::ReviewQueue& queue, bool auto_mode) {
    if (!auto_mode && !queue.finalized())
        raise(Errc::queue_not_finalized, "queue " + queue.id + " still has " + std::to_string(queue.counts().pending) +
                                             " pending items");
    DatasetManifest out = manifest;
    out.records.clear();
    for (const auto& r : manifest.records) {
        if (!r.generated() || auto_mode) {
            out.records.push_back(r);
            continue;
        }
        const auto* item = queue.find(r.provenance->generation_id);
        if (item && item->status == review::ItemStatus::approved) out.records.push_back(r);
    }
    return out;
}

}  // namespace maskpaint::pipeline
