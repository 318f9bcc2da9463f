#include "dockorder/errors.hpp"

namespace dockorder {

namespace {

std::string describe_groups(const std::vector<std::size_t>& groups) {
    std::string s;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(groups[i]);
    }
    return s;
}

}  // namespace

GroupCycle::GroupCycle(std::vector<std::size_t> groups)
    : Error(ErrorClass::user_input, "group contraction creates a cycle between groups " + describe_groups(groups)),
      groups_(std::move(groups)) {}

}  // namespace dockorder
