#include "coldl/dictionary.hpp"

namespace coldl {

Id Dictionary::intern(std::string_view s) {
  if (auto it = ids_.find(s); it != ids_.end()) return it->second;
  const Id id = strings_.size();
  strings_.emplace_back(s);
  ids_.emplace(strings_.back(), id);
  return id;
}

const std::string& Dictionary::lookup(Id id) const {
  if (id >= strings_.size()) throw Error("unknown dictionary id " + std::to_string(id));
  return strings_[id];
}

std::optional<Id> Dictionary::find(std::string_view s) const {
  if (auto it = ids_.find(s); it != ids_.end()) return it->second;
  return std::nullopt;
}

}  // namespace coldl
