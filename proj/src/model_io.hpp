#pragma once

#include <string>

#include "model.hpp"

namespace faramtn {

struct LoadedModel {
    Model model;
    ParamMap params;
};

// Versioned container: magic + version, a JSON header describing the model
// config and grouping, then named parameter arrays as shape + little-endian
// doubles. Loading rejects unknown versions and any shape that disagrees with
// the embedded config.
void save_model(const std::string& path, const Model& model, const ParamMap& params);
LoadedModel load_model(const std::string& path);

}  // namespace faramtn
