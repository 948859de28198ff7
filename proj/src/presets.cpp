#include <map>
#include <string>

#include "splitprune/errors.hpp"
#include "splitprune/model_graph.hpp"

namespace splitprune {

namespace {

// Kept identical to presets/*.txt.
const std::map<std::string, std::string, std::less<>>& preset_table() {
  static const std::map<std::string, std::string, std::less<>> table = {
      {"toy3", R"(name toy3
input 32 32 3
conv 3 8 1
conv 3 16 2
conv 3 32 2
fc - 10 -
)"},
      {"toy4", R"(name toy4
input 32 32 3
conv 3 32 1
conv 3 64 2
conv 3 128 2
conv 3 256 2
fc - 10 -
)"},
      {"vgg16", R"(name vgg16
input 320 320 3
conv 3 64 1
conv 3 64 1
pool 2 - 2
conv 3 128 1
conv 3 128 1
pool 2 - 2
conv 3 256 1
conv 3 256 1
conv 3 256 1
pool 2 - 2
conv 3 512 1
conv 3 512 1
conv 3 512 1
pool 2 - 2
conv 3 512 1
conv 3 512 1
conv 3 512 1
pool 2 - 2
pool 0 - -   # global average pool
flatten - - -
fc - 10 -
)"},
      {"vgg19", R"(name vgg19
input 320 320 3
conv 3 64 1
conv 3 64 1
pool 2 - 2
conv 3 128 1
conv 3 128 1
pool 2 - 2
conv 3 256 1
conv 3 256 1
conv 3 256 1
conv 3 256 1
pool 2 - 2
conv 3 512 1
conv 3 512 1
conv 3 512 1
conv 3 512 1
pool 2 - 2
conv 3 512 1
conv 3 512 1
conv 3 512 1
conv 3 512 1
pool 2 - 2
pool 0 - -   # global average pool
flatten - - -
fc - 10 -
)"},
      {"resnet34", R"(name resnet34
input 320 320 3
conv 7 64 2
pool 2 - 2   # stem max pool (2x2 keeps 80x80)
block
conv 3 64 1
conv 3 64 1
add - - -
block
conv 3 64 1
conv 3 64 1
add - - -
block
conv 3 64 1
conv 3 64 1
add - - -
block
conv 3 128 2
conv 3 128 1
add - - -
block
conv 3 128 1
conv 3 128 1
add - - -
block
conv 3 128 1
conv 3 128 1
add - - -
block
conv 3 128 1
conv 3 128 1
add - - -
block
conv 3 256 2
conv 3 256 1
add - - -
block
conv 3 256 1
conv 3 256 1
add - - -
block
conv 3 256 1
conv 3 256 1
add - - -
block
conv 3 256 1
conv 3 256 1
add - - -
block
conv 3 256 1
conv 3 256 1
add - - -
block
conv 3 256 1
conv 3 256 1
add - - -
block
conv 3 512 2
conv 3 512 1
add - - -
block
conv 3 512 1
conv 3 512 1
add - - -
block
conv 3 512 1
conv 3 512 1
add - - -
pool 0 - -
flatten - - -
fc - 10 -
)"},
  };
  return table;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : preset_table()) names.push_back(name);
  return names;
}

std::string preset_text(std::string_view name) {
  const auto& table = preset_table();
  auto it = table.find(name);
  if (it == table.end()) {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw NotFound("unknown preset '" + std::string(name) + "' (valid presets: " + valid + ")");
  }
  return it->second;
}

LayerGraph preset(std::string_view name) { return parse_graph(preset_text(name)); }

}  // namespace splitprune
