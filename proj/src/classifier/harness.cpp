// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/classifier/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "maskpaint/classifier/metrics.hpp"
#include "maskpaint/classifier/network.hpp"
#include "maskpaint/core/error.hpp"

namespace maskpaint::classifier {

namespace fs = std::filesystem;
using datasets::Domain;
using datasets::Split;

namespace {

constexpr std::string_view kBuiltin = "tiny-cnn";
constexpr std::string_view kWeightsFile = "weights.bin";

std::string_view to_string(Init init) {
    return init == Init::pretrained ? "pretrained" : "random";
}

Init parse_init(const std::string& text) {
    if (text == "pretrained") return Init::pretrained;
    if (text == "random") return Init::random;
    raise(Errc::config_invalid, "unknown init '" + text + "'");
}

}  // namespace

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    if (!j.is_object()) raise(Errc::config_invalid, "training config must be an object");
    try {
        c.backbone = j.value("backbone", c.backbone);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.input_size = j.value("input_size", c.input_size);
        if (j.contains("normalization")) {
            c.normalization.mean = j.at("normalization").at("mean").get<std::array<float, 3>>();
            c.normalization.std = j.at("normalization").at("std").get<std::array<float, 3>>();
        }
        if (j.contains("init")) c.init = parse_init(j.at("init").get<std::string>());
        c.seed = j.value("seed", c.seed);
        if (j.contains("widths")) c.widths = j.at("widths").get<std::array<int, 2>>();
        if (j.contains("external") && !j.at("external").is_null())
            c.external = ExternalCommand::from_json(j.at("external"));
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, std::string("malformed training config: ") + e.what());
    }
    c.validate();
    return c;
}

json TrainConfig::to_json() const {
    json j = {{"backbone", backbone},
              {"learning_rate", learning_rate},
              {"weight_decay", weight_decay},
              {"batch_size", batch_size},
              {"epochs", epochs},
              {"input_size", input_size},
              {"normalization", {{"mean", normalization.mean}, {"std", normalization.std}}},
              {"init", to_string(init)},
              {"seed", seed},
              {"widths", widths}};
    if (external) j["external"] = external->to_json();
    return j;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0) || weight_decay < 0 || batch_size <= 0 || epochs <= 0 || input_size < 4)
        raise(Errc::config_invalid, "training parameters out of range");
    for (float s : normalization.std)
        if (!(s > 0)) raise(Errc::config_invalid, "normalization std must be positive");
    if (backbone == kBuiltin && init == Init::pretrained)
        raise(Errc::config_invalid, "the built-in network has no pretrained weights; use init=random");
    if (backbone != kBuiltin && !external)
        raise(Errc::config_invalid, "backbone '" + backbone + "' needs an external worker command");
}

void LabeledSet::append(const LabeledSet& other) {
    ids.insert(ids.end(), other.ids.begin(), other.ids.end());
    images.insert(images.end(), other.images.begin(), other.images.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

LabeledSet labeled_split(const datasets::DatasetManifest& manifest, const fs::path& manifest_dir, Split split,
                         std::optional<Domain> domain) {
    LabeledSet set;
    const std::size_t k = manifest.classes.size();
    for (const auto* r : manifest.in_split(split)) {
        if (domain && r->domain != *domain) continue;
        std::vector<float> t(k, 0.0f);
        if (manifest.multi_label) {
            if (r->class_label.size() != k) raise(Errc::manifest_invalid, "bad flag vector on " + r->id);
            for (std::size_t c = 0; c < k; ++c) t[c] = r->class_label[c] == '1' ? 1.0f : 0.0f;
        } else {
            const auto idx = manifest.class_index(r->class_label);
            if (!idx) raise(Errc::manifest_invalid, "record '" + r->id + "' has an unknown class");
            t[*idx] = 1.0f;
        }
        const fs::path ref(r->image_ref);
        set.ids.push_back(r->id);
        set.images.push_back(ref.is_absolute() ? ref : manifest_dir / ref);
        set.targets.push_back(std::move(t));
    }
    return set;
}

void ClassifierHandle::save() const {
    json curve_j = json::array();
    for (const auto& e : curve)
        curve_j.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_score", e.val_score}});
    write_json_file(dir / kFileName, json{{"backbone", backbone},
                                          {"classes", classes},
                                          {"multi_label", multi_label},
                                          {"config", config.to_json()},
                                          {"best_epoch", best_epoch},
                                          {"best_val_score", best_val_score},
                                          {"curve", curve_j}});
}

ClassifierHandle ClassifierHandle::load(const fs::path& dir) {
    const fs::path file = dir / kFileName;
    if (!fs::exists(file)) raise(Errc::io_failure, "no classifier handle at " + file.string());
    const json j = read_json_file(file);
    ClassifierHandle h;
    h.dir = dir;
    try {
        h.backbone = j.at("backbone").get<std::string>();
        h.classes = j.at("classes").get<std::vector<std::string>>();
        h.multi_label = j.at("multi_label").get<bool>();
        h.config = TrainConfig::from_json(j.at("config"));
        h.best_epoch = j.at("best_epoch").get<int>();
        h.best_val_score = j.at("best_val_score").get<double>();
        for (const auto& e : j.at("curve"))
            h.curve.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("val_score").get<double>()});
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, "malformed classifier handle " + file.string() + ": " + e.what());
    }
    return h;
}

namespace {

std::vector<Tensor> load_tensors(const std::vector<fs::path>& images, const TrainConfig& cfg) {
    std::vector<Tensor> out;
    out.reserve(images.size());
    for (const auto& p : images) out.push_back(to_tensor(read_png(p), cfg.input_size, cfg.normalization));
    return out;
}

std::vector<double> output_scores(const std::vector<float>& logits, bool multi_label) {
    std::vector<double> s(logits.size());
    if (multi_label) {
        for (std::size_t k = 0; k < logits.size(); ++k) s[k] = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[k])));
        return s;
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (std::size_t k = 0; k < logits.size(); ++k) z += s[k] = std::exp(logits[k] - m);
    for (double& v : s) v /= z;
    return s;
}

double score_set(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<float>>& targets,
                 bool multi_label, std::vector<double>* per_class) {
    if (multi_label) {
        std::vector<std::vector<int>> flags;
        for (const auto& t : targets) {
            std::vector<int> f(t.size());
            for (std::size_t k = 0; k < t.size(); ++k) f[k] = t[k] > 0.5f;
            flags.push_back(std::move(f));
        }
        return mean_auroc(scores, flags, per_class);
    }
    std::vector<int> labels;
    for (const auto& t : targets) labels.push_back(static_cast<int>(std::max_element(t.begin(), t.end()) - t.begin()));
    return accuracy(scores, labels);
}

class TinyCnnBackbone final : public ClassifierBackbone {
public:
    std::string id() const override { return std::string(kBuiltin); }

    ClassifierHandle train(const LabeledSet& train, const LabeledSet& val, const std::vector<std::string>& classes,
                           bool multi_label, const TrainConfig& cfg, const TrainOptions& options,
                           const fs::path& out_dir) override {
        const std::vector<Tensor> xtr = load_tensors(train.images, cfg);
        const std::vector<Tensor> xval = load_tensors(val.images, cfg);
        const int k = static_cast<int>(classes.size());
        TinyCnn net(3, k, cfg.widths);
        Rng init_rng(derive_seed(cfg.seed, "init"));
        net.init(init_rng);
        Rng order_rng(derive_seed(cfg.seed, "order"));
        Rng aug_rng(derive_seed(cfg.seed, "batch-transform"));
        Adam opt(net.num_params(), cfg.learning_rate, cfg.weight_decay);

        ClassifierHandle h;
        h.dir = out_dir;
        h.backbone = id();
        h.classes = classes;
        h.multi_label = multi_label;
        h.config = cfg;
        h.best_val_score = -1.0;
        std::vector<float> best = net.params();

        TinyCnn::Workspace ws;
        std::vector<float> grad(net.num_params());
        std::vector<std::size_t> order(xtr.size());
        std::iota(order.begin(), order.end(), 0);
        const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            order_rng.shuffle(order);
            double loss_sum = 0;
            for (std::size_t start = 0; start < order.size(); start += bs) {
                const std::size_t end = std::min(order.size(), start + bs);
                Batch batch;
                for (std::size_t i = start; i < end; ++i) {
                    batch.images.push_back(xtr[order[i]]);
                    batch.labels.push_back(train.targets[order[i]]);
                }
                if (options.batch_transform && batch.size() >= 2) options.batch_transform(batch, aug_rng);
                std::fill(grad.begin(), grad.end(), 0.0f);
                const float inv = 1.0f / static_cast<float>(batch.size());
                std::vector<float> dl(k);
                for (std::size_t b = 0; b < batch.size(); ++b) {
                    const auto& logits = net.forward(batch.images[b], ws);
                    const auto& t = batch.labels[b];
                    const std::vector<double> p = output_scores(logits, multi_label);
                    if (multi_label) {
                        for (int c = 0; c < k; ++c) {
                            const double pc = std::clamp(p[c], 1e-12, 1 - 1e-12);
                            loss_sum -= t[c] * std::log(pc) + (1 - t[c]) * std::log(1 - pc);
                            dl[c] = static_cast<float>(p[c] - t[c]) * inv;
                        }
                    } else {
                        const float mass = std::accumulate(t.begin(), t.end(), 0.0f);
                        for (int c = 0; c < k; ++c) {
                            loss_sum -= t[c] * std::log(std::max(p[c], 1e-12));
                            dl[c] = static_cast<float>(p[c] * mass - t[c]) * inv;
                        }
                    }
                    net.backward(batch.images[b], ws, dl, grad);
                }
                opt.step(net.params(), grad);
            }
            std::vector<std::vector<double>> vs;
            for (const auto& x : xval) vs.push_back(output_scores(net.forward(x, ws), multi_label));
            double v = score_set(vs, val.targets, multi_label, nullptr);
            if (std::isnan(v)) v = 0.0;
            const double mean_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, xtr.size()));
            h.curve.push_back({epoch, mean_loss, v});
            spdlog::debug("epoch {} loss {:.4f} val {:.4f}", epoch, mean_loss, v);
            if (v >= h.best_val_score) {
                h.best_val_score = v;
                h.best_epoch = epoch;
                best = net.params();
            }
        }
        net.params() = best;
        fs::create_directories(out_dir);
        net.save(out_dir / kWeightsFile);
        std::string curve;
        for (const auto& e : h.curve)
            curve += json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_score", e.val_score}}.dump() + "\n";
        write_text_atomic(out_dir / "curve.jsonl", curve);
        h.save();
        return h;
    }

    std::vector<std::vector<double>> predict(const ClassifierHandle& handle,
                                             const std::vector<fs::path>& images) override {
        TinyCnn net(3, static_cast<int>(handle.classes.size()), handle.config.widths);
        net.load(handle.dir / kWeightsFile);
        TinyCnn::Workspace ws;
        std::vector<std::vector<double>> out;
        out.reserve(images.size());
        for (const auto& p : images) {
            const Tensor x = to_tensor(read_png(p), handle.config.input_size, handle.config.normalization);
            out.push_back(output_scores(net.forward(x, ws), handle.multi_label));
        }
        return out;
    }
};

// op "train": {train, val (JSONL of {id, image, target}), classes,
// multi_label, config, output_dir} -> {best_epoch, best_val_score}.
// op "predict": {handle, images (JSONL of {id, image}), output} -> output
// holds one {id, scores} line per image.
class ExternalClassifierBackbone final : public ClassifierBackbone {
public:
    ExternalClassifierBackbone(std::string name, ExternalCommand command)
        : m_name(std::move(name)), m_command(std::move(command)) {}
    std::string id() const override { return m_name; }

    ClassifierHandle train(const LabeledSet& train, const LabeledSet& val, const std::vector<std::string>& classes,
                           bool multi_label, const TrainConfig& cfg, const TrainOptions& options,
                           const fs::path& out_dir) override {
        if (options.batch_transform)
            spdlog::warn("batch transforms are not forwarded to external backbone '{}'", m_name);
        fs::create_directories(out_dir);
        auto dump = [](const LabeledSet& s, const fs::path& p) {
            std::string text;
            for (std::size_t i = 0; i < s.size(); ++i)
                text += json{{"id", s.ids[i]}, {"image", s.images[i].string()}, {"target", s.targets[i]}}.dump() + "\n";
            write_text_atomic(p, text);
        };
        dump(train, out_dir / "train.jsonl");
        dump(val, out_dir / "val.jsonl");
        const auto resp = run_external(m_command, {json{{"op", "train"},
                                                        {"id", "train"},
                                                        {"backbone", m_name},
                                                        {"train", (out_dir / "train.jsonl").string()},
                                                        {"val", (out_dir / "val.jsonl").string()},
                                                        {"classes", classes},
                                                        {"multi_label", multi_label},
                                                        {"config", cfg.to_json()},
                                                        {"output_dir", out_dir.string()}}});
        ClassifierHandle h;
        h.dir = out_dir;
        h.backbone = m_name;
        h.classes = classes;
        h.multi_label = multi_label;
        h.config = cfg;
        h.best_epoch = resp.front().value("best_epoch", 0);
        h.best_val_score = resp.front().value("best_val_score", 0.0);
        h.save();
        return h;
    }

    std::vector<std::vector<double>> predict(const ClassifierHandle& handle,
                                             const std::vector<fs::path>& images) override {
        const fs::path list = handle.dir / "predict-in.jsonl", output = handle.dir / "predict-out.jsonl";
        std::string text;
        for (std::size_t i = 0; i < images.size(); ++i)
            text += json{{"id", std::to_string(i)}, {"image", images[i].string()}}.dump() + "\n";
        write_text_atomic(list, text);
        run_external(m_command, {json{{"op", "predict"},
                                      {"id", "predict"},
                                      {"handle", handle.dir.string()},
                                      {"images", list.string()},
                                      {"output", output.string()}}});
        std::vector<std::vector<double>> out(images.size());
        std::vector<bool> seen(images.size(), false);
        const std::string body = read_text(output);
        std::size_t pos = 0;
        while (pos < body.size()) {
            const std::size_t nl = body.find('\n', pos);
            const std::string line = body.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
            pos = nl == std::string::npos ? body.size() : nl + 1;
            if (line.empty()) continue;
            const json j = json::parse(line);
            const std::size_t i = std::stoul(j.at("id").get<std::string>());
            if (i >= out.size()) raise(Errc::backend_failure, "worker returned an unknown prediction id");
            out[i] = j.at("scores").get<std::vector<double>>();
            seen[i] = true;
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end())
            raise(Errc::backend_failure, "worker omitted predictions");
        fs::remove(list);
        fs::remove(output);
        return out;
    }

private:
    std::string m_name;
    ExternalCommand m_command;
};

}  // namespace

std::unique_ptr<ClassifierBackbone> make_classifier_backbone(const TrainConfig& cfg) {
    if (cfg.backbone == kBuiltin) return std::make_unique<TinyCnnBackbone>();
    if (!cfg.external) raise(Errc::config_invalid, "backbone '" + cfg.backbone + "' needs an external worker command");
    return std::make_unique<ExternalClassifierBackbone>(cfg.backbone, *cfg.external);
}

ClassifierHandle train_sets(const LabeledSet& train, const LabeledSet& val, const std::vector<std::string>& classes,
                            bool multi_label, const TrainConfig& cfg, const fs::path& out_dir,
                            const TrainOptions& options) {
    cfg.validate();
    if (train.size() == 0) raise(Errc::empty_split, "train split is empty");
    if (val.size() == 0) raise(Errc::empty_split, "val split is empty");
    if (classes.empty()) raise(Errc::config_invalid, "no classes to train on");
    auto backbone = make_classifier_backbone(cfg);
    try {
        return backbone->train(train, val, classes, multi_label, cfg, options, out_dir);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::backend_failure, std::string("training failed: ") + e.what());
    }
}

ClassifierHandle train(const datasets::DatasetManifest& manifest, const fs::path& manifest_dir, const TrainConfig& cfg,
                       const fs::path& out_dir, const TrainOptions& options) {
    const LabeledSet tr = labeled_split(manifest, manifest_dir, Split::train);
    const LabeledSet val = labeled_split(manifest, manifest_dir, Split::val);
    return train_sets(tr, val, manifest.classes, manifest.multi_label, cfg, out_dir, options);
}

std::vector<std::vector<double>> predict(const ClassifierHandle& handle, const std::vector<fs::path>& images) {
    return make_classifier_backbone(handle.config)->predict(handle, images);
}

DomainEval evaluate_set(const ClassifierHandle& handle, const LabeledSet& set, const std::string& domain_name) {
    if (set.size() == 0) raise(Errc::empty_split, "no test samples for domain " + domain_name);
    DomainEval e;
    e.domain = domain_name;
    e.metric = handle.multi_label ? "auroc" : "accuracy";
    e.ids = set.ids;
    e.scores = predict(handle, set.images);
    e.value = score_set(e.scores, set.targets, handle.multi_label, &e.per_class);
    return e;
}

DomainEval evaluate(const ClassifierHandle& handle, const datasets::DatasetManifest& manifest,
                    const fs::path& manifest_dir, std::optional<Domain> domain) {
    const LabeledSet set = labeled_split(manifest, manifest_dir, Split::test, domain);
    return evaluate_set(handle, set, domain ? std::string(datasets::to_string(*domain)) : "all");
}

}  // namespace maskpaint::classifier
