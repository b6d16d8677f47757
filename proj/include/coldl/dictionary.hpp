#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coldl/common.hpp"

namespace coldl {

/// Bidirectional string <-> id map. Ids are dense and assigned in first-seen order.
class Dictionary {
 public:
  Id intern(std::string_view s);

  /// Throws Error for an id that was never issued.
  const std::string& lookup(Id id) const;

  std::optional<Id> find(std::string_view s) const;

  std::size_t size() const noexcept { return strings_.size(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };

  std::unordered_map<std::string, Id, Hash, std::equal_to<>> ids_;
  std::vector<std::string> strings_;
};

}  // namespace coldl
