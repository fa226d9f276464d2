// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/datasets/synth.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "maskpaint/core/error.hpp"
#include "maskpaint/core/rng.hpp"

namespace maskpaint::datasets {

namespace fs = std::filesystem;

std::vector<std::string> SyntheticSpec::resolved_class_names() const {
    return class_names.empty() ? class_shapes : class_names;
}

std::vector<std::string> SyntheticSpec::group_values() const {
    if (spurious == SpuriousKind::ruler) return {"yes", "no"};
    std::vector<std::string> out;
    for (const auto& p : background_palettes) out.push_back(p.name);
    return out;
}

namespace {

void check_spec(const SyntheticSpec& spec) {
    const auto n_classes = spec.class_shapes.size();
    if (n_classes < 2) raise(Errc::config_invalid, "synthetic spec needs at least two classes");
    if (!spec.class_names.empty() && spec.class_names.size() != n_classes)
        raise(Errc::config_invalid, "class_names must match class_shapes");
    if (spec.correlation < 0.0 || spec.correlation > 1.0)
        raise(Errc::config_invalid, "correlation must lie in [0,1]");
    if (spec.image_size < 8) raise(Errc::config_invalid, "image_size must be at least 8");
    if (spec.n_per_cell < 0) raise(Errc::config_invalid, "n_per_cell must be non-negative");
    if (spec.background_palettes.empty()) raise(Errc::config_invalid, "no background palettes");
    if (spec.spurious == SpuriousKind::background && spec.background_palettes.size() != n_classes)
        raise(Errc::config_invalid, "background mode needs one palette per class");
    if (spec.spurious == SpuriousKind::ruler && n_classes != 2)
        raise(Errc::config_invalid, "ruler mode supports exactly two classes");
}

bool inside_shape(const std::string& shape, double dx, double dy, double r) {
    const double ax = std::abs(dx), ay = std::abs(dy);
    if (shape == "disc") return dx * dx + dy * dy <= r * r;
    if (shape == "square") return ax <= 0.8 * r && ay <= 0.8 * r;
    if (shape == "hbar") return ax <= r && ay <= 0.35 * r;
    if (shape == "vbar") return ay <= r && ax <= 0.35 * r;
    if (shape == "cross") return (ax <= r && ay <= 0.3 * r) || (ay <= r && ax <= 0.3 * r);
    if (shape == "ring") {
        const double d2 = dx * dx + dy * dy;
        return d2 <= r * r && d2 >= 0.25 * r * r;
    }
    raise(Errc::config_invalid, "unknown shape '" + shape + "'");
}

std::uint8_t clamp_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

SynthSample render_sample(const SyntheticSpec& spec, std::size_t class_index, const std::string& group,
                          const std::string& sample_id) {
    check_spec(spec);
    const int n = spec.image_size;
    Rng rng(derive_seed(spec.noise_seed, sample_id));

    const Palette* palette = &spec.background_palettes.front();
    bool ruler = false;
    if (spec.spurious == SpuriousKind::background) {
        auto it = std::find_if(spec.background_palettes.begin(), spec.background_palettes.end(),
                               [&](const Palette& p) { return p.name == group; });
        if (it == spec.background_palettes.end()) raise(Errc::config_invalid, "unknown palette '" + group + "'");
        palette = &*it;
    } else {
        ruler = group == "yes";
    }

    std::array<double, 3> bg{};
    for (int c = 0; c < 3; ++c) bg[c] = palette->mean[c] + palette->jitter * rng.normal();

    const double r = 0.25 * n;
    const double cx = (n - 1) / 2.0 + rng.uniform(-0.1, 0.1) * n;
    const double cy = (n - 1) / 2.0 + rng.uniform(-0.1, 0.1) * n;
    const std::string& shape = spec.class_shapes.at(class_index);
    const int ruler_rows = std::max(2, n / 12);

    SynthSample s{Image(n, n, 3), Mask(n, n)};
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const bool object = inside_shape(shape, x - cx, y - cy, r);
            s.roi.set(x, y, object);
            std::array<double, 3> base = object ? spec.object_color : bg;
            double noise = object ? spec.object_noise : palette->noise;
            if (!object && ruler && y >= 1 && y < 1 + ruler_rows) {
                base = ((x / 2) % 2 == 0) ? std::array<double, 3>{25, 25, 25} : std::array<double, 3>{215, 200, 60};
                noise = 2.0;
            }
            for (int c = 0; c < 3; ++c) s.image.at(x, y, c) = clamp_u8(base[c] + noise * rng.normal());
        }
    }
    return s;
}

DatasetManifest synth_dataset(const SyntheticSpec& spec, const fs::path& out_dir) {
    check_spec(spec);
    const auto classes = spec.resolved_class_names();
    const auto groups = spec.group_values();
    const int train_n = spec.train_per_class.value_or(2 * spec.n_per_cell);
    const int val_n = spec.val_per_class.value_or(spec.n_per_cell / 2);
    const int extra_n = spec.extra_per_cell.value_or(spec.n_per_cell);

    DatasetManifest manifest;
    manifest.name = spec.name;
    manifest.classes = classes;
    manifest.spurious_attr = spec.spurious == SpuriousKind::ruler ? "ruler" : "background";

    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (ec) raise(Errc::io_failure, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

    auto emit = [&](Split split, std::size_t ci, std::size_t gi, int index, Domain domain) {
        SampleRecord rec;
        rec.id = fmt::format("{}-{}-{}-{:05}", to_string(split), classes[ci], groups[gi], index);
        rec.image_ref = "images/" + rec.id + ".png";
        rec.class_label = classes[ci];
        rec.domain = domain;
        rec.split = split;
        rec.group_attrs[*manifest.spurious_attr] = groups[gi];
        const SynthSample sample = render_sample(spec, ci, groups[gi], rec.id);
        write_png(out_dir / rec.image_ref, sample.image);
        write_mask_png(out_dir / (rec.id + ".mask.png"), sample.roi);
        manifest.records.push_back(std::move(rec));
    };

    // Class i is correlated with group i; the remaining share of each class
    // is spread round-robin over the other groups.
    auto emit_source = [&](Split split, int per_class) {
        for (std::size_t ci = 0; ci < classes.size(); ++ci) {
            const int correlated = static_cast<int>(std::lround(spec.correlation * per_class));
            int counter_index = 0;
            for (int i = 0; i < per_class; ++i) {
                std::size_t gi = ci;
                if (i >= correlated) {
                    gi = (ci + 1 + static_cast<std::size_t>(counter_index % static_cast<int>(groups.size() - 1))) %
                         groups.size();
                    ++counter_index;
                }
                emit(split, ci, gi, i, Domain::source);
            }
        }
    };

    emit_source(Split::train, train_n);
    emit_source(Split::val, val_n);
    for (std::size_t ci = 0; ci < classes.size(); ++ci)
        for (std::size_t gi = 0; gi < groups.size(); ++gi)
            if (gi != ci)
                for (int i = 0; i < extra_n; ++i) emit(Split::extra, ci, gi, i, Domain::target);
    for (std::size_t ci = 0; ci < classes.size(); ++ci)
        for (std::size_t gi = 0; gi < groups.size(); ++gi)
            for (int i = 0; i < spec.n_per_cell; ++i)
                emit(Split::test, ci, gi, i, gi == ci ? Domain::source : Domain::target);

    validate_manifest(manifest);
    write_manifest(out_dir / "manifest.jsonl", manifest);
    return manifest;
}

SyntheticSpec synth_spec_from_json(const json& j) {
    try {
        SyntheticSpec s;
        s.name = j.value("name", s.name);
        s.n_per_cell = j.value("n_per_cell", s.n_per_cell);
        s.image_size = j.value("image_size", s.image_size);
        s.class_shapes = j.value("class_shapes", s.class_shapes);
        s.class_names = j.value("class_names", s.class_names);
        const std::string kind = j.value("spurious", std::string("background"));
        if (kind == "background")
            s.spurious = SpuriousKind::background;
        else if (kind == "ruler")
            s.spurious = SpuriousKind::ruler;
        else
            raise(Errc::config_invalid, "spurious must be 'background' or 'ruler'");
        if (j.contains("background_palettes")) {
            s.background_palettes.clear();
            for (const auto& pj : j["background_palettes"]) {
                Palette p;
                p.name = pj.at("name").get<std::string>();
                p.mean = pj.at("mean").get<std::array<double, 3>>();
                p.jitter = pj.value("jitter", p.jitter);
                p.noise = pj.value("noise", p.noise);
                s.background_palettes.push_back(p);
            }
        }
        s.object_color = j.value("object_color", s.object_color);
        s.object_noise = j.value("object_noise", s.object_noise);
        s.correlation = j.value("correlation", s.correlation);
        s.noise_seed = j.value("noise_seed", s.noise_seed);
        if (j.contains("train_per_class")) s.train_per_class = j["train_per_class"].get<int>();
        if (j.contains("val_per_class")) s.val_per_class = j["val_per_class"].get<int>();
        if (j.contains("extra_per_cell")) s.extra_per_cell = j["extra_per_cell"].get<int>();
        return s;
    } catch (const json::exception& e) {
        raise(Errc::config_invalid, std::string("malformed synthetic spec: ") + e.what());
    }
}

json synth_spec_to_json(const SyntheticSpec& s) {
    json j;
    j["name"] = s.name;
    j["n_per_cell"] = s.n_per_cell;
    j["image_size"] = s.image_size;
    j["class_shapes"] = s.class_shapes;
    j["class_names"] = s.class_names;
    j["spurious"] = s.spurious == SpuriousKind::ruler ? "ruler" : "background";
    j["background_palettes"] = json::array();
    for (const auto& p : s.background_palettes)
        j["background_palettes"].push_back({{"name", p.name}, {"mean", p.mean}, {"jitter", p.jitter}, {"noise", p.noise}});
    j["object_color"] = s.object_color;
    j["object_noise"] = s.object_noise;
    j["correlation"] = s.correlation;
    j["noise_seed"] = s.noise_seed;
    if (s.train_per_class) j["train_per_class"] = *s.train_per_class;
    if (s.val_per_class) j["val_per_class"] = *s.val_per_class;
    if (s.extra_per_cell) j["extra_per_cell"] = *s.extra_per_cell;
    return j;
}

}  // namespace maskpaint::datasets
