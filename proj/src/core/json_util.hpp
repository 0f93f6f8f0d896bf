#pragma once

#include <json.hpp>

#include "core/model.hpp"

namespace seufi {

// Shared by the fp32 and quantized container serializers.
nlohmann::json layer_to_json(const LayerSpec& l);
LayerSpec layer_from_json(const nlohmann::json& j);
nlohmann::json meta_to_json(const ModelMeta& m);
ModelMeta meta_from_json(const nlohmann::json& j);

}  // namespace seufi
