#pragma once

#include <map>
#include <string>
#include <vector>

#include "ghq/units.hpp"

namespace ghq {

struct UnitGroupSpec {
    std::string type;
    int count = 0;
};

struct SpawnLayout {
    double ally_x = 8.0;
    double enemy_x = 24.0;
    double row_spacing = 1.0;
    // Supporters are shifted toward the enemy side by this amount.
    double supporter_offset = 0.0;
    // Per-unit uniform spawn jitter radius; reset(seed) draws from it, which
    // is what differentiates evaluation episodes.
    double jitter = 0.5;
};

struct MapConfig {
    std::string name;
    std::vector<UnitGroupSpec> ally;
    std::vector<UnitGroupSpec> enemy;
    int max_episode_steps = 200;
    double sight_range = 9.0;
    double step_duration = 1.0;  // game-seconds per env step
    double move_amount = 1.0;    // multiplies speed * step_duration per move
    double width = 32.0, height = 32.0;
    SpawnLayout spawn;
    bool normalize_reward = true;
    std::map<std::string, UnitStats> overrides;

    int n_allies() const;
    int n_enemies() const;
    // Distinct unit type names across both sides, in registry order; the
    // one-hot type dimension shared by observations and states.
    std::vector<std::string> unit_types() const;
    const UnitStats& stats_for(const std::string& type) const;

    void validate() const;  // throws std::invalid_argument on bad configs
};

// Parses names like "6m2m_15m" (6 marines + 2 medivacs vs 15 marines) or
// "11m_15m" (homogeneous marines).
bool parse_map_pattern(const std::string& name, int& marines, int& medivacs,
                       int& enemy_marines);

// Named registry: the seven published asymmetric maps plus desk-scale
// presets; any other XmYm_Zm pattern or a JSON file path also resolves.
MapConfig resolve_map(const std::string& name_or_path);
MapConfig load_map_file(const std::string& path);
const std::vector<std::string>& paper_map_names();
const std::vector<std::string>& desk_map_names();

}  // namespace ghq
