// SPDX-License-Identifier: Apache-2.0
#include "dentra/labels.hpp"

namespace dentra {

std::string_view to_string(Intent intent) {
    switch (intent) {
        case Intent::visual_feature_description: return "visual_feature_description";
        case Intent::anomaly_diagnosis: return "anomaly_diagnosis";
        case Intent::report_generation: return "report_generation";
        case Intent::treatment_planning: return "treatment_planning";
        case Intent::prognosis_prediction: return "prognosis_prediction";
        case Intent::subtype_grading_classification: return "subtype_grading_classification";
        case Intent::education: return "education";
        case Intent::scientific_research: return "scientific_research";
        case Intent::out_of_scope: return "out_of_scope";
    }
    return "out_of_scope";
}

std::optional<Intent> intent_from_string(std::string_view s) {
    for (Intent i : kAllIntents) {
        if (to_string(i) == s) return i;
    }
    return std::nullopt;
}

std::string_view to_string(Modality modality) {
    switch (modality) {
        case Modality::intraoral_image: return "intraoral_image";
        case Modality::panoramic_radiograph: return "panoramic_radiograph";
        case Modality::periapical_radiograph: return "periapical_radiograph";
        case Modality::cephalometric_radiograph: return "cephalometric_radiograph";
        case Modality::histopathology: return "histopathology";
        case Modality::cytopathology: return "cytopathology";
        case Modality::unknown: return "unknown";
    }
    return "unknown";
}

std::optional<Modality> modality_from_string(std::string_view s) {
    for (Modality m : kImagingModalities) {
        if (to_string(m) == s) return m;
    }
    if (s == "unknown") return Modality::unknown;
    return std::nullopt;
}

}  // namespace dentra
