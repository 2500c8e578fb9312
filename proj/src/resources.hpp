#pragma once

#include <string_view>

namespace dialsynth::resources {

std::string_view builtin_schema();
std::string_view builtin_templates();

}  // namespace dialsynth::resources
