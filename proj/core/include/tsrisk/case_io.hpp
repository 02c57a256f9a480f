#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "tsrisk/case.hpp"

namespace tsrisk {

/// Reads and validates a case document (see docs/case-format.md).
/// Throws ParseError for malformed input and ValidationError for invariant
/// violations; both messages name the offending element.
PowerSystemCase load_case(const std::filesystem::path& path);
PowerSystemCase parse_case(std::string_view text);

/// Serializes a case back into the documented JSON schema. Sequence
/// impedances are written only when explicitly set, so a parse of the
/// output reproduces the original case exactly.
std::string serialize_case(const PowerSystemCase& c);

}  // namespace tsrisk
