// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

namespace dentra {
using json = nlohmann::json;
}
