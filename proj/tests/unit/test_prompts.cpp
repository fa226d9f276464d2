// Copyright (C) 2026 maskpaint contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "helpers.hpp"
#include "maskpaint/prompts/prompt_engine.hpp"

using namespace maskpaint;
using namespace maskpaint::prompts;
using testing::error_of;

TEST_CASE("waterbirds prompts") {
    const auto reg = PromptRegistry::defaults();
    CHECK(reg.render("waterbirds", Stage::source_finetune, "landbird") == "a photo of landbird");
    CHECK(reg.render("waterbirds", Stage::target_finetune, std::nullopt) == "a photo of target background");
    CHECK(reg.render("waterbirds", Stage::inference, "landbird") == "a photo of landbird with target background");
    CHECK(reg.render("waterbirds", Stage::inference, "waterbird") == "a photo of waterbird with target background");
}

TEST_CASE("class tokens map labels onto the declared vocabulary") {
    const auto reg = PromptRegistry::defaults();
    CHECK(reg.class_token("iwildcam", "dik-dik") == "dik-diks");
    CHECK(reg.render("iwildcam", Stage::inference, "zebra") == "a camera trap photo of zebras with target-domain");
    CHECK(error_of([&] { reg.class_token("iwildcam", "lion"); }) == Errc::unbound_placeholder);
    CHECK(reg.class_token("synthetic", "anything") == "anything");
}

TEST_CASE("templates must carry the slots of their stage") {
    PromptTemplate t{Stage::source_finetune, "a photo of [CLASS]", "x"};
    CHECK_NOTHROW(validate_template(t));
    t.text = "a photo of [CLASS] with [DUMMY]";
    CHECK(error_of([&] { validate_template(t); }) == Errc::template_invalid);
    t.stage = Stage::inference;
    CHECK_NOTHROW(validate_template(t));
    t.text = "a photo of [DUMMY]";
    CHECK(error_of([&] { validate_template(t); }) == Errc::template_invalid);
    t.text = "a photo of [CLAS]";
    CHECK(error_of([&] { validate_template(t); }) == Errc::template_invalid);
}

TEST_CASE("rendering is byte exact and rejects unbound slots") {
    PromptTemplate t{Stage::inference, "[CLASS]-[DUMMY]  ok", "x"};
    TokenBinding b;
    b.class_token = "melanoma";
    b.dummy_token = "target";
    CHECK(render_prompt(t, b) == "melanoma-target  ok");
    b.dummy_token.reset();
    CHECK(error_of([&] { render_prompt(t, b); }) == Errc::unbound_placeholder);
}

TEST_CASE("chest x-ray conditions are canonically ordered") {
    const auto reg = PromptRegistry::defaults();
    const auto b = reg.binding("cxr", std::nullopt);
    const std::vector<std::string> conds{"Edema", "Atelectasis"};
    CHECK(cxr_condition_prompt(conds, Stage::inference, b, reg) ==
          "a radiograph from dataset target with conditions Atelectasis, Edema");
    CHECK(cxr_condition_prompt(conds, Stage::source_finetune, b, reg) ==
          "a radiograph from dataset source with conditions Atelectasis, Edema");
    const std::vector<std::string> bad{"Fracture"};
    CHECK(error_of([&] { cxr_condition_prompt(bad, Stage::inference, b, reg); }) == Errc::unknown_condition);
    CHECK(error_of([&] { cxr_condition_prompt({}, Stage::inference, b, reg); }) == Errc::unknown_condition);
}

TEST_CASE("registry json round trip and overrides") {
    const auto reg = PromptRegistry::defaults();
    const auto back = PromptRegistry::from_json(reg.to_json());
    for (const char* d : {"waterbirds", "iwildcam", "isic", "cxr", "synthetic"}) {
        REQUIRE(back.contains(d));
        CHECK(back.get(d, Stage::inference).text == reg.get(d, Stage::inference).text);
    }
    json j = reg.to_json();
    j["datasets"]["waterbirds"]["dummy_token"] = "sks background";
    const auto custom = PromptRegistry::from_json(j);
    CHECK(custom.render("waterbirds", Stage::inference, "landbird") == "a photo of landbird with sks background");
    CHECK_FALSE(reg.contains("mnist"));
    CHECK(error_of([&] { reg.dataset("mnist"); }) == Errc::config_invalid);
}
