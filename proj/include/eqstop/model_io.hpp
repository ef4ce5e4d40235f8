#pragma once

#include "eqstop/chain.hpp"
#include "eqstop/payoff.hpp"

#include <optional>
#include <string>

namespace eqstop {

struct ModelFile {
    MarkovModel model;
    std::optional<PayoffSpec> payoff;
};

/// Parses the JSON model schema:
///   {"states":[{"label":..,"value":..},...],
///    "transition":[[..],..],
///    "payoff": {"type":"mean_variance","gamma":..} | {"type":"variance"}
///            | {"type":"custom","f":[..],"h":[..],"g":{"family":..,...}}}
/// The payoff block is optional; numbers are read as decimal text with
/// exponents allowed.
ModelFile parse_model_json(const std::string& text);

ModelFile load_model_file(const std::string& path);

/// Serializes a model (plus payoff, when given) back to the same schema.
std::string model_to_json(const MarkovModel& model, const PayoffSpec* payoff);

} // namespace eqstop
