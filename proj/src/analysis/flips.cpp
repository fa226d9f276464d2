// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/analysis/flips.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"

namespace maskpaint::analysis {

namespace fs = std::filesystem;
using datasets::DatasetManifest;
using datasets::Domain;
using datasets::Split;

void AttributeModel::save() const {
    write_json_file(dir / "attribute.json", json{{"attribute", attribute},
                                                 {"values", values},
                                                 {"accuracy", accuracy},
                                                 {"classifier", relative_ref(handle.dir, dir)}});
}

AttributeModel AttributeModel::load(const fs::path& dir) {
    const fs::path file = dir / "attribute.json";
    if (!fs::exists(file)) raise(Errc::io_failure, "no attribute model at " + dir.string());
    const json j = read_json_file(file);
    AttributeModel m;
    m.dir = dir;
    m.attribute = j.at("attribute").get<std::string>();
    m.values = j.at("values").get<std::vector<std::string>>();
    m.accuracy = j.at("accuracy").get<double>();
    m.handle = classifier::ClassifierHandle::load(dir / j.at("classifier").get<std::string>());
    return m;
}

AttributeModel train_attribute_classifier(const DatasetManifest& manifest, const fs::path& manifest_dir,
                                          const std::string& attribute, const classifier::TrainConfig& cfg,
                                          const fs::path& out_dir) {
    std::set<std::string> values;
    for (const auto& r : manifest.records) {
        if (r.generated()) continue;
        auto it = r.group_attrs.find(attribute);
        if (it == r.group_attrs.end() || it->second.empty())
            raise(Errc::missing_annotation, "record " + r.id + " has no '" + attribute + "' annotation");
        values.insert(it->second);
    }
    if (values.size() < 2)
        raise(Errc::missing_annotation, "attribute '" + attribute + "' takes fewer than two values");

    DatasetManifest derived;
    derived.name = manifest.name + "-" + attribute;
    derived.classes.assign(values.begin(), values.end());
    derived.spurious_attr = std::nullopt;
    for (const auto& r : manifest.records) {
        if (r.generated()) continue;
        auto rec = r;
        rec.class_label = r.group_attrs.at(attribute);
        if (r.split == Split::extra) {
            rec.split = Split::train;
            rec.domain = Domain::source;
        }
        derived.records.push_back(std::move(rec));
    }
    fs::create_directories(out_dir);
    AttributeModel m;
    m.dir = out_dir;
    m.attribute = attribute;
    m.values = derived.classes;
    m.handle = classifier::train(derived, manifest_dir, cfg, out_dir / "classifier");
    m.accuracy = classifier::evaluate(m.handle, derived, manifest_dir, std::nullopt).value;
    m.save();
    spdlog::info("attribute classifier for '{}': held-out accuracy {:.4f}", attribute, m.accuracy);
    return m;
}

json AttributePrediction::to_json() const {
    return {{"generation_id", generation_id},
            {"source_id", source_id},
            {"class_label", class_label},
            {"source_attribute", source_attribute},
            {"predicted_attribute", predicted_attribute}};
}

AttributePrediction AttributePrediction::from_json(const json& j) {
    return {j.at("generation_id").get<std::string>(), j.at("source_id").get<std::string>(),
            j.at("class_label").get<std::string>(), j.at("source_attribute").get<std::string>(),
            j.at("predicted_attribute").get<std::string>()};
}

json FlipReport::to_json() const {
    json classes = json::object();
    for (const auto& [c, f] : per_class)
        classes[c] = {{"flipped", f.flipped}, {"total", f.total}, {"rate", f.rate()}};
    return {{"attribute", attribute},
            {"per_class", classes},
            {"attribute_classifier_accuracy", attribute_classifier_accuracy}};
}

std::vector<AttributePrediction> predict_attributes(const std::vector<pipeline::StoredResult>& results,
                                                    const fs::path& run_dir, const DatasetManifest& source_manifest,
                                                    const AttributeModel& model) {
    std::vector<AttributePrediction> out;
    std::vector<fs::path> images;
    for (const auto& res : results) {
        const auto* src = source_manifest.find(res.source_sample_id);
        if (!src) raise(Errc::provenance_missing, "result " + res.id + " names unknown source " + res.source_sample_id);
        auto it = src->group_attrs.find(model.attribute);
        if (it == src->group_attrs.end())
            raise(Errc::provenance_missing, "source " + src->id + " has no '" + model.attribute + "' annotation");
        AttributePrediction p;
        p.generation_id = res.id;
        p.source_id = src->id;
        p.class_label = res.class_label;
        p.source_attribute = it->second;
        out.push_back(std::move(p));
        images.push_back(run_dir / res.image_ref);
    }
    if (images.empty()) return out;
    const auto scores = classifier::predict(model.handle, images);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& s = scores[i];
        const auto k = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
        out[i].predicted_attribute = model.values.at(k);
    }
    return out;
}

FlipReport flip_report(const std::vector<AttributePrediction>& predictions, const std::string& attribute,
                       double attribute_accuracy) {
    FlipReport r;
    r.attribute = attribute;
    r.attribute_classifier_accuracy = attribute_accuracy;
    for (const auto& p : predictions) {
        auto& c = r.per_class[p.class_label];
        ++c.total;
        if (p.flipped()) ++c.flipped;
    }
    return r;
}

FlipReport flip_rates(const std::vector<pipeline::StoredResult>& results, const fs::path& run_dir,
                      const DatasetManifest& source_manifest, const AttributeModel& model, const fs::path& out_dir) {
    const auto predictions = predict_attributes(results, run_dir, source_manifest, model);
    fs::create_directories(out_dir);
    std::string text;
    for (const auto& p : predictions) text += p.to_json().dump() + "\n";
    write_text_atomic(out_dir / "predictions.jsonl", text);
    const auto report = flip_report(predictions, model.attribute, model.accuracy);
    write_json_file(out_dir / "flips.json", report.to_json());
    for (const auto& [c, f] : report.per_class)
        spdlog::info("flip rate for class {}: {}/{} = {:.4f}", c, f.flipped, f.total, f.rate());
    return report;
}

std::vector<pipeline::StoredResult> load_results(const fs::path& run_dir) {
    std::vector<pipeline::StoredResult> out;
    const fs::path index = run_dir / "results.jsonl";
    if (fs::exists(index)) {
        const std::string text = read_text(index);
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) nl = text.size();
            const std::string line = text.substr(pos, nl - pos);
            pos = nl + 1;
            if (!line.empty()) out.push_back(pipeline::StoredResult::from_json(json::parse(line)));
        }
        return out;
    }
    const fs::path gen = run_dir / "generated";
    if (!fs::is_directory(gen)) raise(Errc::provenance_missing, "no generation results under " + run_dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(gen))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(pipeline::StoredResult::from_json(read_json_file(f)));
    return out;
}

}  // namespace maskpaint::analysis
