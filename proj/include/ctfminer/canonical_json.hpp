#pragma once

#include <json.hpp>

#include <string>

namespace ctfminer {

using Json = nlohmann::json;

/// Canonical text form: compact, object keys sorted, floats printed with
/// 9 significant digits, negative zero folded to 0. Non-finite numbers throw.
/// CLI and HTTP responses both go through this so they compare byte-for-byte.
std::string canonical_dump(const Json& value);

/// Rounds a double the way canonical_dump prints it.
double canonical_number(double v);

}  // namespace ctfminer
