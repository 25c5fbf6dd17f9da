#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ghq {

enum class UnitKind { attacker, supporter };
enum class Side { ally, enemy };

struct UnitStats {
    std::string type_name;
    double max_health = 0;   // hit points
    double shot_range = 0;   // map units
    double dps = 0;          // damage (or healing) per game-second
    double speed = 0;        // map units per game-second
    UnitKind kind = UnitKind::attacker;
    bool flying = false;
};

// Built-in unit types: marine, medivac, marauder.
const UnitStats& unit_type(const std::string& name);
bool is_known_unit_type(const std::string& name);
const std::vector<std::string>& known_unit_types();  // registry order

// Health and damage are tracked in integer centi-hitpoints so that episode
// reward accounting is exact.
inline std::int64_t to_centi(double hp) { return (std::int64_t)(hp * 100.0 + 0.5); }

struct UnitState {
    UnitStats stats;
    int type_index = 0;  // index into the map's distinct type list
    Side side = Side::ally;
    double x = 0, y = 0;
    std::int64_t health_centi = 0;
    std::int64_t max_health_centi = 0;
    double cooldown = 0;  // game-seconds until the weapon is ready
    bool alive = true;

    double health_fraction() const {
        return max_health_centi ? (double)health_centi / (double)max_health_centi : 0.0;
    }
};

}  // namespace ghq
