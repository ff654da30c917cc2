// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dentra/clock.hpp"
#include "dentra/gateway.hpp"
#include "dentra/json.hpp"
#include "dentra/labels.hpp"
#include "dentra/text.hpp"

namespace dentra {

struct ModalityLabel {
    Modality value = Modality::unknown;
    double confidence = 0.0;
    bool warning = false;  // classifier endpoint failed; value is unknown

    json to_json() const;
    static ModalityLabel from_json(const json& j);
    friend bool operator==(const ModalityLabel&, const ModalityLabel&) = default;
};

struct InstructionImage {
    std::string image_id;
    std::string ref;  // artifact-store id of the uploaded bytes
    ModalityLabel modality;

    friend bool operator==(const InstructionImage&, const InstructionImage&) = default;
};

struct StructuredInstruction {
    std::string query;
    std::vector<InstructionImage> images;
    std::set<Intent> intents;
    text::Language language = text::Language::other;
    TimePoint created_at{};

    // Empty list when valid.
    std::vector<std::string> violations() const;
    bool out_of_scope_only() const {
        return intents.size() == 1 && *intents.begin() == Intent::out_of_scope;
    }

    json to_json(bool with_timestamp = true) const;
    static StructuredInstruction from_json(const json& j);
    friend bool operator==(const StructuredInstruction&, const StructuredInstruction&) = default;
};

struct IntentResult {
    std::set<Intent> labels;
    bool warning = false;  // fail-closed default was applied
};

// Parses a comma/newline separated label list. Returns nullopt if any token
// falls outside the taxonomy or the list is empty.
std::optional<std::set<Intent>> parse_intent_labels(std::string_view reply);

// Assembles and validates an instruction; throws ValidationError naming every bad field.
StructuredInstruction build_structured_instruction(std::string query,
                                                   std::vector<InstructionImage> images,
                                                   std::set<Intent> intents, const Clock& clock);

class Comprehension {
public:
    static constexpr double kDefaultThreshold = 0.5;

    Comprehension(std::shared_ptr<gateway::ChatModel> intent_model,
                  std::shared_ptr<gateway::ImageClassifier> classifier,
                  double threshold = kDefaultThreshold);

    // Non-empty subset of the nine labels. Falls back to {out_of_scope} after a
    // failed repair retry or on gateway failure.
    IntentResult recognize_intent(std::string_view utterance, std::string_view history = {}) const;

    // Argmax over the classifier distribution; below threshold or on endpoint
    // failure the label is unknown. Undecodable bytes throw ValidationError.
    ModalityLabel classify_modality(std::span<const std::uint8_t> image) const;

    // Fans classification out in parallel, results in input order.
    std::vector<ModalityLabel> classify_all(const std::vector<std::vector<std::uint8_t>>& images) const;

    double threshold() const noexcept { return threshold_; }

private:
    std::shared_ptr<gateway::ChatModel> intent_model_;
    std::shared_ptr<gateway::ImageClassifier> classifier_;
    double threshold_;
};

std::string intent_system_prompt();

}  // namespace dentra
