#pragma once

#include <string_view>

// System prompts compiled in from core/prompts/*.txt. Editing a prompt
// changes request fingerprints, so recorded transcripts must be re-sealed.
namespace threathive::prompts {

std::string_view keyword_generation() noexcept;
std::string_view relevance() noexcept;
std::string_view threat_analysis() noexcept;
std::string_view upd_chain() noexcept;
std::string_view entity_extraction() noexcept;
std::string_view entity_resolution() noexcept;
std::string_view plan_batch() noexcept;
std::string_view plan_refine() noexcept;

}  // namespace threathive::prompts
