// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace dentra {

enum class Intent {
    visual_feature_description,
    anomaly_diagnosis,
    report_generation,
    treatment_planning,
    prognosis_prediction,
    subtype_grading_classification,
    education,
    scientific_research,
    out_of_scope,
};

inline constexpr std::array<Intent, 9> kAllIntents = {
    Intent::visual_feature_description, Intent::anomaly_diagnosis,
    Intent::report_generation,          Intent::treatment_planning,
    Intent::prognosis_prediction,       Intent::subtype_grading_classification,
    Intent::education,                  Intent::scientific_research,
    Intent::out_of_scope,
};

enum class Modality {
    intraoral_image,
    panoramic_radiograph,
    periapical_radiograph,
    cephalometric_radiograph,
    histopathology,
    cytopathology,
    unknown,
};

// The six imaging modalities a classifier can emit; `unknown` is a runtime verdict only.
inline constexpr std::array<Modality, 6> kImagingModalities = {
    Modality::intraoral_image,          Modality::panoramic_radiograph,
    Modality::periapical_radiograph,    Modality::cephalometric_radiograph,
    Modality::histopathology,           Modality::cytopathology,
};

std::string_view to_string(Intent intent);
std::optional<Intent> intent_from_string(std::string_view s);

std::string_view to_string(Modality modality);
std::optional<Modality> modality_from_string(std::string_view s);

}  // namespace dentra
