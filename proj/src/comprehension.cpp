// SPDX-License-Identifier: Apache-2.0
#include "dentra/comprehension.hpp"

#include <algorithm>
#include <future>

#include "dentra/error.hpp"

namespace dentra {

json ModalityLabel::to_json() const {
    json j = {{"label", to_string(value)}, {"confidence", confidence}};
    if (warning) j["warning"] = true;
    return j;
}

ModalityLabel ModalityLabel::from_json(const json& j) {
    ModalityLabel m;
    m.value = modality_from_string(j.at("label").get<std::string>()).value_or(Modality::unknown);
    m.confidence = j.value("confidence", 0.0);
    m.warning = j.value("warning", false);
    return m;
}

std::vector<std::string> StructuredInstruction::violations() const {
    std::vector<std::string> bad;
    if (text::trim(query).empty()) bad.push_back("query: must be non-empty");
    if (intents.empty()) bad.push_back("intents: must be non-empty");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        const std::string at = "images/" + std::to_string(i);
        if (img.image_id.empty()) bad.push_back(at + "/image_id: must be non-empty");
        else if (!ids.insert(img.image_id).second) bad.push_back(at + "/image_id: duplicate");
        if (!(img.modality.confidence >= 0.0 && img.modality.confidence <= 1.0))
            bad.push_back(at + "/modality/confidence: must be in [0,1]");
    }
    return bad;
}

json StructuredInstruction::to_json(bool with_timestamp) const {
    json imgs = json::array();
    for (const auto& img : images)
        imgs.push_back({{"image_id", img.image_id}, {"ref", img.ref}, {"modality", img.modality.to_json()}});
    json labels = json::array();
    for (Intent i : intents) labels.push_back(to_string(i));
    json j = {{"query", query},
              {"images", imgs},
              {"intents", labels},
              {"language", text::to_string(language)}};
    if (with_timestamp) j["created_at"] = format_timestamp(created_at);
    return j;
}

StructuredInstruction StructuredInstruction::from_json(const json& j) {
    StructuredInstruction s;
    s.query = j.at("query").get<std::string>();
    for (const auto& img : j.value("images", json::array())) {
        s.images.push_back({img.at("image_id").get<std::string>(), img.value("ref", std::string{}),
                            ModalityLabel::from_json(img.at("modality"))});
    }
    for (const auto& l : j.at("intents")) {
        auto intent = intent_from_string(l.get<std::string>());
        if (!intent) throw ValidationError("intents", "unknown label " + l.dump());
        s.intents.insert(*intent);
    }
    s.language = text::language_from_string(j.value("language", std::string("other")));
    if (j.contains("created_at")) s.created_at = parse_timestamp(j["created_at"].get<std::string>());
    return s;
}

std::optional<std::set<Intent>> parse_intent_labels(std::string_view reply) {
    std::set<Intent> out;
    std::string token;
    auto flush = [&]() -> bool {
        std::string t = text::trim(token);
        token.clear();
        // tolerate quoting and list punctuation around labels
        while (!t.empty() && std::string("\"'[]`.-* ").find(t.front()) != std::string::npos) t.erase(0, 1);
        while (!t.empty() && std::string("\"'[]`. ").find(t.back()) != std::string::npos) t.pop_back();
        if (t.empty()) return true;
        auto intent = intent_from_string(text::to_lower(t));
        if (!intent) return false;
        out.insert(*intent);
        return true;
    };
    for (char c : reply) {
        if (c == ',' || c == '\n' || c == ';' || c == '|') {
            if (!flush()) return std::nullopt;
        } else {
            token.push_back(c);
        }
    }
    if (!flush()) return std::nullopt;
    if (out.empty()) return std::nullopt;
    return out;
}

StructuredInstruction build_structured_instruction(std::string query,
                                                   std::vector<InstructionImage> images,
                                                   std::set<Intent> intents, const Clock& clock) {
    StructuredInstruction s;
    s.query = std::move(query);
    s.images = std::move(images);
    s.intents = std::move(intents);
    s.language = text::detect_language(s.query);
    s.created_at = clock.now();
    if (auto bad = s.violations(); !bad.empty()) throw ValidationError(std::move(bad));
    return s;
}

std::string intent_system_prompt() {
    std::string labels;
    for (Intent i : kAllIntents) labels += "- " + std::string(to_string(i)) + "\n";
    return "You classify the intent of a user message sent to a dental assistant.\n"
           "Choose one or more labels from this list and nothing else:\n" +
           labels +
           "Use out_of_scope for requests unrelated to dentistry.\n"
           "Reply with the labels only, separated by commas.";
}

Comprehension::Comprehension(std::shared_ptr<gateway::ChatModel> intent_model,
                             std::shared_ptr<gateway::ImageClassifier> classifier, double threshold)
    : intent_model_(std::move(intent_model)), classifier_(std::move(classifier)), threshold_(threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
        throw ValidationError("threshold", "must be in [0,1]");
}

IntentResult Comprehension::recognize_intent(std::string_view utterance, std::string_view history) const {
    if (text::trim(utterance).empty()) throw ValidationError("utterance", "must be non-empty");
    const IntentResult fail_closed{{Intent::out_of_scope}, true};
    if (!intent_model_) return fail_closed;

    std::vector<gateway::ChatMessage> messages;
    messages.push_back({"system", intent_system_prompt(), {}});
    std::string user;
    if (!history.empty()) user += "Conversation so far:\n" + std::string(history) + "\n\n";
    user += "Message: " + std::string(utterance);
    messages.push_back({"user", user, {}});

    try {
        auto first = intent_model_->chat(messages);
        if (auto labels = parse_intent_labels(first.text)) return {*labels, false};
        messages.push_back({"assistant", first.text, {}});
        messages.push_back({"user",
                            "That reply contained labels outside the list. Answer again using only "
                            "the listed labels, separated by commas.",
                            {}});
        auto second = intent_model_->chat(messages);
        if (auto labels = parse_intent_labels(second.text)) return {*labels, false};
        return {{Intent::out_of_scope}, false};
    } catch (const GatewayError&) {
        return fail_closed;
    }
}

ModalityLabel Comprehension::classify_modality(std::span<const std::uint8_t> image) const {
    if (!gateway::sniff_image_type(image))
        throw ValidationError("image", "bytes do not decode as a supported image format");
    if (!classifier_) return {Modality::unknown, 0.0, true};
    gateway::ModalityDistribution dist{};
    try {
        dist = classifier_->classify_image(image);
    } catch (const GatewayError&) {
        return {Modality::unknown, 0.0, true};
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < dist.size(); ++i) {
        if (dist[i] > dist[best]) best = i;
    }
    ModalityLabel out{kImagingModalities[best], dist[best], false};
    if (out.confidence < threshold_) out.value = Modality::unknown;
    return out;
}

std::vector<ModalityLabel> Comprehension::classify_all(
    const std::vector<std::vector<std::uint8_t>>& images) const {
    std::vector<std::future<ModalityLabel>> pending;
    pending.reserve(images.size());
    for (const auto& img : images) {
        pending.push_back(std::async(std::launch::async, [this, &img] { return classify_modality(img); }));
    }
    std::vector<ModalityLabel> out;
    out.reserve(images.size());
    for (auto& f : pending) out.push_back(f.get());
    return out;
}

}  // namespace dentra
