// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/baselines/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"
#include "maskpaint/core/rng.hpp"

namespace maskpaint::baselines {

namespace fs = std::filesystem;
using datasets::DatasetManifest;
using datasets::Domain;
using datasets::Split;
using generative::GenerationMethod;

std::string_view to_string(AblationKind kind) noexcept {
    return kind == AblationKind::real_vs_generated ? "real_vs_generated" : "generation_method";
}

AblationKind parse_ablation_kind(std::string_view text) {
    if (text == "real_vs_generated") return AblationKind::real_vs_generated;
    if (text == "generation_method") return AblationKind::generation_method;
    raise(Errc::config_invalid, "unknown ablation kind '" + std::string(text) + "'");
}

AblationPlan AblationPlan::from_json(const json& j) {
    AblationPlan p;
    try {
        if (j.contains("kind")) p.kind = parse_ablation_kind(j.at("kind").get<std::string>());
        p.real_counts = j.value("real_counts", p.real_counts);
        p.generated_counts = j.value("generated_counts", p.generated_counts);
        if (j.contains("methods")) {
            p.methods.clear();
            for (const auto& m : j.at("methods")) p.methods.push_back(generative::parse_generation_method(m.get<std::string>()));
        }
        p.seeds = j.value("seeds", p.seeds);
        p.method_count = j.value("method_count", p.method_count);
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, std::string("malformed ablation plan: ") + e.what());
    }
    p.validate();
    return p;
}

json AblationPlan::to_json() const {
    json methods_j = json::array();
    for (auto m : methods) methods_j.push_back(generative::to_string(m));
    return {{"kind", to_string(kind)},      {"real_counts", real_counts}, {"generated_counts", generated_counts},
            {"methods", methods_j},         {"seeds", seeds},             {"method_count", method_count}};
}

void AblationPlan::validate() const {
    auto ascending = [](const std::vector<std::size_t>& v, const char* name) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] == 0) raise(Errc::config_invalid, std::string(name) + " must be positive");
            if (i > 0 && v[i] <= v[i - 1]) raise(Errc::config_invalid, std::string(name) + " must be strictly ascending");
        }
    };
    ascending(real_counts, "real_counts");
    ascending(generated_counts, "generated_counts");
    if (seeds < 1) raise(Errc::config_invalid, "an ablation needs at least one seed");
    if (kind == AblationKind::real_vs_generated && real_counts.empty() && generated_counts.empty())
        raise(Errc::config_invalid, "real_vs_generated ablation has no counts");
    if (kind == AblationKind::generation_method) {
        if (methods.empty()) raise(Errc::config_invalid, "generation_method ablation has no methods");
        if (method_count == 0) raise(Errc::config_invalid, "method_count must be positive");
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (std::size_t k = 0; k < i; ++k)
                if (methods[i] == methods[k]) raise(Errc::config_invalid, "duplicate generation method");
    }
}

json AblationCell::to_json() const {
    json j = {{"id", id},
              {"condition", condition},
              {"count", count},
              {"seed_index", seed_index},
              {"classifier_seed", classifier_seed},
              {"data_seed", data_seed}};
    j["method"] = method ? json(generative::to_string(*method)) : json(nullptr);
    return j;
}

AblationCell AblationCell::from_json(const json& j) {
    AblationCell c;
    c.id = j.at("id").get<std::string>();
    c.condition = j.at("condition").get<std::string>();
    c.count = j.at("count").get<std::size_t>();
    if (!j.at("method").is_null()) c.method = generative::parse_generation_method(j.at("method").get<std::string>());
    c.seed_index = j.at("seed_index").get<int>();
    c.classifier_seed = j.at("classifier_seed").get<std::uint64_t>();
    c.data_seed = j.at("data_seed").get<std::uint64_t>();
    return c;
}

std::vector<AblationCell> enumerate_cells(const AblationPlan& plan, std::uint64_t root_seed) {
    plan.validate();
    const std::uint64_t clf_root = derive_seed(root_seed, "ablation/classifier");
    std::vector<AblationCell> cells;
    auto add = [&](const std::string& condition, std::size_t count, std::optional<GenerationMethod> method) {
        for (int s = 0; s < plan.seeds; ++s) {
            AblationCell c;
            char buf[96];
            if (method)
                std::snprintf(buf, sizeof buf, "%s-%s-s%d", condition.c_str(),
                              std::string(generative::to_string(*method)).c_str(), s);
            else
                std::snprintf(buf, sizeof buf, "%s-n%05zu-s%d", condition.c_str(), count, s);
            c.id = buf;
            c.condition = condition;
            c.count = count;
            c.method = method;
            c.seed_index = s;
            c.classifier_seed = derive_seed(clf_root, static_cast<std::uint64_t>(s));
            c.data_seed = derive_seed(root_seed, "ablation/" + c.id);
            cells.push_back(std::move(c));
        }
    };
    if (plan.kind == AblationKind::real_vs_generated) {
        for (auto n : plan.real_counts) add("real", n, std::nullopt);
        for (auto n : plan.generated_counts) add("generated", n, GenerationMethod::inpaint);
    } else {
        for (auto m : plan.methods) add("method", plan.method_count, m);
    }
    return cells;
}

namespace {

classifier::MetricSummary summarize(const std::vector<double>& values) {
    classifier::MetricSummary s;
    s.n_seeds = static_cast<int>(values.size());
    if (values.size() == 1) {
        s.mean = s.lower_95 = s.upper_95 = values.front();
        return s;
    }
    const auto ci = classifier::aggregate_ci(values);
    s.mean = ci.mean;
    s.lower_95 = ci.lower_95;
    s.upper_95 = ci.upper_95;
    return s;
}

json summary_json(const classifier::MetricSummary& s) {
    return {{"mean", s.mean}, {"lower_95", s.lower_95}, {"upper_95", s.upper_95}, {"n_seeds", s.n_seeds}};
}

json metrics_json(const CellMetrics& m) {
    return {{"overall", m.overall}, {"source", m.source}, {"target", m.target}};
}

}  // namespace

json AblationReport::to_json() const {
    json cells_j = json::array();
    for (const auto& [cell, m] : cells) cells_j.push_back({{"cell", cell.to_json()}, {"metrics", metrics_json(m)}});
    json rows_j = json::array();
    for (const auto& r : rows)
        rows_j.push_back({{"condition", r.condition},
                          {"count", r.count},
                          {"method", r.method ? json(generative::to_string(*r.method)) : json(nullptr)},
                          {"overall", summary_json(r.overall)},
                          {"source", summary_json(r.source)},
                          {"target", summary_json(r.target)},
                          {"seeds", r.seeds}});
    return {{"plan", plan.to_json()}, {"root_seed", root_seed}, {"cells", cells_j}, {"rows", rows_j}};
}

json AblationReport::series() const {
    json out = json::object();
    for (const auto& r : rows) {
        json point = {{"x", r.method ? json(generative::to_string(*r.method)) : json(r.count)},
                      {"overall", summary_json(r.overall)},
                      {"source", summary_json(r.source)},
                      {"target", summary_json(r.target)}};
        out[r.condition].push_back(point);
    }
    return out;
}

AblationReport run_ablation(const AblationPlan& plan, std::uint64_t root_seed, std::size_t target_pool_size,
                            const CellEvaluator& evaluator, const fs::path& out_dir) {
    plan.validate();
    if (plan.kind == AblationKind::real_vs_generated && !plan.real_counts.empty() &&
        plan.real_counts.back() > target_pool_size)
        raise(Errc::insufficient_target_pool, "real count " + std::to_string(plan.real_counts.back()) +
                                                  " exceeds the labeled target pool of " +
                                                  std::to_string(target_pool_size));
    fs::create_directories(out_dir);
    const auto cells = enumerate_cells(plan, root_seed);

    std::map<std::string, CellMetrics> done;
    const fs::path log_path = out_dir / "cells.jsonl";
    if (fs::exists(log_path)) {
        const std::string text = read_text(log_path);
        std::size_t pos = 0;
        while (pos < text.size()) {
            const std::size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) break;
            const std::string line = text.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.empty()) continue;
            const json j = json::parse(line);
            const auto cell = AblationCell::from_json(j.at("cell"));
            const auto& m = j.at("metrics");
            done[cell.id + "/" + std::to_string(cell.data_seed) + "/" + std::to_string(cell.classifier_seed)] = {
                m.at("overall").get<double>(), m.at("source").get<double>(), m.at("target").get<double>()};
        }
    }

    AblationReport report;
    report.plan = plan;
    report.root_seed = root_seed;
    std::string log_text = fs::exists(log_path) ? read_text(log_path) : std::string{};
    if (!log_text.empty() && log_text.back() != '\n') log_text.erase(log_text.rfind('\n') + 1);
    for (const auto& cell : cells) {
        const std::string key =
            cell.id + "/" + std::to_string(cell.data_seed) + "/" + std::to_string(cell.classifier_seed);
        CellMetrics m;
        if (auto it = done.find(key); it != done.end()) {
            m = it->second;
            spdlog::info("ablation cell {} already logged", cell.id);
        } else {
            m = evaluator(cell);
            log_text += json{{"cell", cell.to_json()}, {"metrics", metrics_json(m)}}.dump() + "\n";
            write_text_atomic(log_path, log_text);
            spdlog::info("ablation cell {}: overall {:.4f} source {:.4f} target {:.4f}", cell.id, m.overall, m.source,
                         m.target);
        }
        report.cells.emplace_back(cell, m);
    }

    for (std::size_t i = 0; i < report.cells.size();) {
        const auto& head = report.cells[i].first;
        AblationRow row;
        row.condition = head.condition;
        row.count = head.count;
        row.method = head.method;
        std::vector<double> overall, source, target;
        for (; i < report.cells.size() && report.cells[i].first.condition == head.condition &&
               report.cells[i].first.count == head.count && report.cells[i].first.method == head.method;
             ++i) {
            overall.push_back(report.cells[i].second.overall);
            source.push_back(report.cells[i].second.source);
            target.push_back(report.cells[i].second.target);
            row.seeds.push_back(report.cells[i].first.classifier_seed);
        }
        row.overall = summarize(overall);
        row.source = summarize(source);
        row.target = summarize(target);
        report.rows.push_back(std::move(row));
    }
    write_json_file(out_dir / "report.json", report.to_json());
    write_json_file(out_dir / "series.json", report.series());
    return report;
}

// ---------------------------------------------------------------- evaluator

StandardEvaluator::StandardEvaluator(DatasetManifest manifest, fs::path manifest_dir,
                                     pipeline::PipelineConfig pipeline_cfg, classifier::TrainConfig train_cfg,
                                     fs::path work_dir, const prompts::PromptRegistry& registry)
    : m_manifest(std::move(manifest)),
      m_manifest_dir(std::move(manifest_dir)),
      m_pipeline(std::move(pipeline_cfg)),
      m_train(std::move(train_cfg)),
      m_work_dir(std::move(work_dir)),
      m_registry(registry) {}

const pipeline::PreparedModels& StandardEvaluator::models() {
    if (!m_models) {
        m_models = pipeline::prepare_models(m_pipeline, m_manifest, m_manifest_dir, m_work_dir / "shared", m_registry);
        m_point = pipeline::select_grid_point(m_pipeline, m_manifest, m_manifest_dir, *m_models, m_work_dir / "shared",
                                              m_registry);
    }
    return *m_models;
}

CellMetrics StandardEvaluator::train_and_score(const DatasetManifest& manifest, const fs::path& dir,
                                               const AblationCell& cell) {
    classifier::TrainConfig cfg = m_train;
    cfg.seed = cell.classifier_seed;
    const fs::path clf_dir = m_work_dir / "cells" / cell.id / "classifier";
    const auto handle = classifier::train(manifest, dir, cfg, clf_dir);
    CellMetrics m;
    m.overall = classifier::evaluate(handle, manifest, dir, std::nullopt).value;
    m.source = classifier::evaluate(handle, manifest, dir, Domain::source).value;
    m.target = classifier::evaluate(handle, manifest, dir, Domain::target).value;
    return m;
}

CellMetrics StandardEvaluator::operator()(const AblationCell& cell) {
    if (cell.condition == "real") {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < m_manifest.records.size(); ++i)
            if (m_manifest.records[i].split == Split::extra) pool.push_back(i);
        if (cell.count > pool.size())
            raise(Errc::insufficient_target_pool, "cell " + cell.id + " needs more target images than available");
        Rng rng(cell.data_seed);
        rng.shuffle(pool);
        DatasetManifest m = m_manifest;
        for (std::size_t k = 0; k < cell.count; ++k) {
            auto& r = m.records[pool[k]];
            r.split = Split::train;
            r.domain = Domain::source;
        }
        return train_and_score(m, m_manifest_dir, cell);
    }
    const auto& prepared = models();
    pipeline::PipelineConfig cfg = m_pipeline;
    cfg.method = cell.method.value_or(GenerationMethod::inpaint);
    cfg.review = pipeline::ReviewMode::automatic;
    const fs::path out = m_work_dir / "cells" / cell.id;
    const auto batch = pipeline::generate_augmentations(cfg, m_manifest, m_manifest_dir, prepared, *m_point, cell.count,
                                                        cell.data_seed, out, m_registry);
    const DatasetManifest merged = pipeline::merge_records(m_manifest, m_manifest_dir, batch.records, out);
    return train_and_score(merged, out, cell);
}

}  // namespace maskpaint::baselines
