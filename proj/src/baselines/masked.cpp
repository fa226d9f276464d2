// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include "maskpaint/baselines/masked.hpp"

#include <spdlog/spdlog.h>

#include "maskpaint/core/error.hpp"
#include "maskpaint/core/io.hpp"
#include "maskpaint/generative/operations.hpp"

namespace maskpaint::baselines {

namespace fs = std::filesystem;
using datasets::Split;

MaskedBaseline masked_baseline(const datasets::DatasetManifest& manifest, const fs::path& manifest_dir,
                               const fs::path& mask_dir, const fs::path& out_dir, masking::Fill fill) {
    MaskedBaseline out;
    out.manifest = manifest;
    out.manifest.records.clear();
    fs::create_directories(out_dir / "masked");
    for (const auto& r : manifest.records) {
        auto rec = r;
        const fs::path image_path = generative::resolve_ref(manifest_dir, r.image_ref);
        if (r.split != Split::train && r.split != Split::val) {
            rec.image_ref = relative_ref(image_path, out_dir);
            out.manifest.records.push_back(std::move(rec));
            continue;
        }
        const fs::path mask_path = masking::StoredMaskSegmenter::mask_path(mask_dir, r.id);
        if (!fs::exists(mask_path)) raise(Errc::missing_mask, "no ROI mask for " + r.id + " at " + mask_path.string());
        const Mask mask = read_mask_png(mask_path);
        if (mask.count() == 0) {
            spdlog::warn("masked baseline: excluding {} (empty ROI)", r.id);
            out.excluded.push_back(r.id);
            continue;
        }
        const Image image = read_png(image_path);
        const std::string ref = "masked/" + r.id + ".png";
        write_png(out_dir / ref, masking::mask_out_background(image, masking::make_artifact(mask, "stored"), fill));
        rec.image_ref = ref;
        out.manifest.records.push_back(std::move(rec));
    }
    datasets::write_manifest(out_dir / "manifest.jsonl", out.manifest);
    spdlog::info("masked baseline: {} records, {} excluded", out.manifest.records.size(), out.excluded.size());
    return out;
}

}  // namespace maskpaint::baselines
