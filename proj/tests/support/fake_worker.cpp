// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

// Stand-in external worker for tests. Its inpaint output rewrites every
// pixel, including the protected ones, so callers must re-stamp the ROI.
//
//   fake_worker [--fail-op OP] [--exit CODE] [--no-response] <request> <response>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "maskpaint/core/image.hpp"
#include "maskpaint/core/io.hpp"

using namespace maskpaint;
namespace fs = std::filesystem;

namespace {

Image invert(const Image& in) {
    Image out = in;
    for (auto& p : out.pixels) p = static_cast<std::uint8_t>(255 - p);
    return out;
}

std::vector<json> read_lines(const fs::path& p) {
    std::vector<json> out;
    std::istringstream in(read_text(p));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

json handle_op(const json& req) {
    const std::string op = req.at("op");
    json resp = {{"id", req.at("id")}, {"status", "ok"}};
    if (op == "segment") {
        const Image img = read_png(req.at("image").get<std::string>());
        Mask m(img.width, img.height);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) m.set(x, y, img.at(x, y, 0) > 200 && img.at(x, y, 1) > 200);
        write_mask_png(req.at("output").get<std::string>(), m);
    } else if (op == "remove_background") {
        Image img = read_png(req.at("image").get<std::string>());
        const Mask m = read_mask_png(req.at("mask").get<std::string>());
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if (m.get(x, y))
                    for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = 90;
        write_png(req.at("output").get<std::string>(), img);
    } else if (op == "finetune_source" || op == "finetune_target") {
        const fs::path dir = req.at("output_dir").get<std::string>();
        fs::create_directories(dir);
        write_text_atomic(dir / "weights.bin", op);
        resp["state"] = {{"op", op}};
    } else if (op == "inpaint" || op == "img2img") {
        write_png(req.at("output").get<std::string>(), invert(read_png(req.at("image").get<std::string>())));
    } else if (op == "text2img") {
        write_png(req.at("output").get<std::string>(), Image(16, 16, 3, 77));
    } else if (op == "train") {
        const fs::path dir = req.at("output_dir").get<std::string>();
        fs::create_directories(dir);
        write_text_atomic(dir / "weights.bin", "train");
        resp["best_epoch"] = 1;
        resp["best_val_score"] = 0.5;
    } else if (op == "predict") {
        const fs::path dir = req.at("handle").get<std::string>();
        const auto classes = read_json_file(dir / "classifier.json").at("classes").size();
        std::string text;
        for (const auto& item : read_lines(req.at("images").get<std::string>())) {
            // Scores by mean brightness so predictions depend on the image.
            const Image img = read_png(item.at("image").get<std::string>());
            double mean = 0;
            for (auto p : img.pixels) mean += p;
            mean /= static_cast<double>(img.pixels.size()) * 255.0;
            std::vector<double> scores(classes, (1.0 - mean) / static_cast<double>(classes > 1 ? classes - 1 : 1));
            scores[0] = mean;
            text += json{{"id", item.at("id")}, {"scores", scores}}.dump() + "\n";
        }
        write_text_atomic(req.at("output").get<std::string>(), text);
    } else {
        resp = {{"id", req.at("id")}, {"status", "error"}, {"message", "unsupported op " + op}};
    }
    return resp;
}

}  // namespace

int main(int argc, char** argv) {
    std::string fail_op;
    int exit_code = 0;
    bool no_response = false;
    std::vector<std::string> positional;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--fail-op" && i + 1 < argc) fail_op = argv[++i];
        else if (a == "--exit" && i + 1 < argc) exit_code = std::atoi(argv[++i]);
        else if (a == "--no-response") no_response = true;
        else positional.push_back(a);
    }
    if (positional.size() != 2) {
        std::cerr << "usage: fake_worker [flags] <request> <response>\n";
        return 64;
    }
    if (exit_code != 0) return exit_code;
    if (no_response) return 0;
    std::string out;
    for (const auto& req : read_lines(positional[0])) {
        json resp;
        if (req.at("op") == fail_op) {
            resp = {{"id", req.at("id")}, {"status", "error"}, {"message", "injected failure"}};
        } else {
            try {
                resp = handle_op(req);
            } catch (const std::exception& e) {
                resp = {{"id", req.at("id")}, {"status", "error"}, {"message", e.what()}};
            }
        }
        out += resp.dump() + "\n";
    }
    write_text_atomic(positional[1], out);
    return 0;
}
