// Tracks how output functions relate to the functions of the input module,
// so downstream matching studies can score reidentification.
#pragma once

#include <map>
#include <string>
#include <vector>

namespace irobf {

struct FunctionProvenance {
  std::vector<std::string> origins;  // input function names feeding this one
  std::string role;  // unchanged | remFunc | sepFunc | fusFunc | trampoline
};

using ProvenanceMap = std::map<std::string, FunctionProvenance>;

}  // namespace irobf
