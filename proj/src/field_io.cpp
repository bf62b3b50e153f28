#include "exk/field_io.hpp"

#include "exk/errors.hpp"

namespace exk {

std::unique_ptr<FieldModel> model_from_json(const nlohmann::json& spec) {
  const nlohmann::json& field = spec.contains("field") ? spec.at("field") : spec;
  if (!field.is_object() || !field.contains("type")) throw ConfigError("field: missing \"type\"");
  try {
    const auto type = field.at("type").get<std::string>();
    if (type == "cosine") return std::make_unique<CosineField>();
    if (type == "spectral_sum") {
      std::vector<SpectralAtom> atoms;
      for (const auto& atom : field.at("atoms")) {
        const auto freq = atom.at("freq").get<std::vector<double>>();
        atoms.push_back({Eigen::Map<const Vector>(freq.data(), static_cast<Index>(freq.size())),
                         atom.at("weight").get<double>()});
      }
      return std::make_unique<SpectralSumField>(std::move(atoms), field.value("offset_var", 0.0));
    }
    if (type == "gaussian_increment") {
      return std::make_unique<GaussianIncrementField>(field.at("dim").get<Index>(), field.value("scale", 1.0));
    }
    throw ConfigError("field: unknown type \"" + type + "\"");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field: ") + e.what());
  }
}

nlohmann::json model_to_json(const FieldModel& model) {
  if (dynamic_cast<const CosineField*>(&model)) return {{"type", "cosine"}};
  if (const auto* s = dynamic_cast<const SpectralSumField*>(&model)) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : s->atoms()) {
      atoms.push_back({{"freq", std::vector<double>(a.freq.data(), a.freq.data() + a.freq.size())},
                       {"weight", a.weight}});
    }
    return {{"type", "spectral_sum"}, {"atoms", atoms}, {"offset_var", s->offset_var()}};
  }
  if (const auto* g = dynamic_cast<const GaussianIncrementField*>(&model)) {
    return {{"type", "gaussian_increment"}, {"dim", g->dim()}, {"scale", g->scale()}};
  }
  return {{"type", model.name()}};
}

}  // namespace exk
