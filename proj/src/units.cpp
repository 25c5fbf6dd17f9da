#include "ghq/units.hpp"

#include <stdexcept>

namespace ghq {

namespace {

const std::vector<UnitStats>& registry() {
    static const std::vector<UnitStats> types = {
        {"marine", 45.0, 5.0, 6.97, 2.25, UnitKind::attacker, false},
        {"medivac", 150.0, 4.0, 9.00, 2.75, UnitKind::supporter, true},
        {"marauder", 125.0, 6.0, 6.67, 2.25, UnitKind::attacker, false},
    };
    return types;
}

}  // namespace

const UnitStats& unit_type(const std::string& name) {
    for (const auto& t : registry())
        if (t.type_name == name) return t;
    throw std::invalid_argument("unknown unit type: " + name);
}

bool is_known_unit_type(const std::string& name) {
    for (const auto& t : registry())
        if (t.type_name == name) return true;
    return false;
}

const std::vector<std::string>& known_unit_types() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& t : registry()) n.push_back(t.type_name);
        return n;
    }();
    return names;
}

}  // namespace ghq
