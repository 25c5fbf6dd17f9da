#include "ghq/map_config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace ghq {

int MapConfig::n_allies() const {
    int n = 0;
    for (const auto& s : ally) n += s.count;
    return n;
}

int MapConfig::n_enemies() const {
    int n = 0;
    for (const auto& s : enemy) n += s.count;
    return n;
}

std::vector<std::string> MapConfig::unit_types() const {
    std::set<std::string> present;
    for (const auto& s : ally) present.insert(s.type);
    for (const auto& s : enemy) present.insert(s.type);
    std::vector<std::string> ordered;
    for (const auto& name : known_unit_types())
        if (present.count(name)) ordered.push_back(name);
    // types only defined via overrides keep declaration order after built-ins
    for (const auto& name : present)
        if (std::find(ordered.begin(), ordered.end(), name) == ordered.end())
            ordered.push_back(name);
    return ordered;
}

const UnitStats& MapConfig::stats_for(const std::string& type) const {
    auto it = overrides.find(type);
    if (it != overrides.end()) return it->second;
    return unit_type(type);
}

void MapConfig::validate() const {
    if (ally.empty() || enemy.empty())
        throw std::invalid_argument("map " + name + ": both sides need units");
    if (max_episode_steps < 1)
        throw std::invalid_argument("map " + name + ": max_episode_steps must be >= 1");
    auto has_attacker = [&](const std::vector<UnitGroupSpec>& side) {
        for (const auto& s : side) {
            if (s.count < 0) throw std::invalid_argument("map " + name + ": negative count");
            if (s.count > 0 && stats_for(s.type).kind == UnitKind::attacker) return true;
        }
        return false;
    };
    if (!has_attacker(ally) || !has_attacker(enemy))
        throw std::invalid_argument("map " + name +
                                    ": each side needs at least one attacker");
    for (const auto& side : {ally, enemy})
        for (const auto& s : side) {
            const UnitStats& st = stats_for(s.type);
            if (st.max_health <= 0 || st.shot_range <= 0 || st.dps <= 0 || st.speed <= 0)
                throw std::invalid_argument("map " + name + ": unit stats must be > 0");
        }
    if (sight_range <= 0 || step_duration <= 0 || move_amount <= 0 || width <= 0 ||
        height <= 0)
        throw std::invalid_argument("map " + name + ": geometry fields must be > 0");
}

bool parse_map_pattern(const std::string& name, int& marines, int& medivacs,
                       int& enemy_marines) {
    // XmYm_Zm or Xm_Zm
    auto read_int = [&](std::size_t& i) -> int {
        std::size_t start = i;
        while (i < name.size() && isdigit((unsigned char)name[i])) ++i;
        if (i == start) return -1;
        return std::stoi(name.substr(start, i - start));
    };
    std::size_t i = 0;
    int x = read_int(i);
    if (x < 0 || i >= name.size() || name[i] != 'm') return false;
    ++i;
    int y = 0;
    if (i < name.size() && isdigit((unsigned char)name[i])) {
        y = read_int(i);
        if (i >= name.size() || name[i] != 'm') return false;
        ++i;
    }
    if (i >= name.size() || name[i] != '_') return false;
    ++i;
    int z = read_int(i);
    if (z <= 0 || i >= name.size() || name[i] != 'm' || i + 1 != name.size())
        return false;
    marines = x;
    medivacs = y;
    enemy_marines = z;
    return true;
}

namespace {

MapConfig pattern_map(const std::string& name, int marines, int medivacs,
                      int enemy_marines) {
    MapConfig cfg;
    cfg.name = name;
    cfg.ally.push_back({"marine", marines});
    if (medivacs > 0) cfg.ally.push_back({"medivac", medivacs});
    cfg.enemy.push_back({"marine", enemy_marines});
    cfg.max_episode_steps = 200;
    cfg.spawn.ally_x = 8.0;
    cfg.spawn.enemy_x = 24.0;
    return cfg;
}

// CI-feasible presets: a small arena, fast contact and a short episode cap.
// Supporters spawn slightly ahead of the line so the healer-tanking policy
// that wins these maps is reachable at desk scale.
MapConfig desk_map(const std::string& name, int marines, int medivacs,
                   int enemy_marines) {
    MapConfig cfg = pattern_map(name, marines, medivacs, enemy_marines);
    cfg.max_episode_steps = 60;
    cfg.spawn.ally_x = 11.0;
    cfg.spawn.enemy_x = 21.0;
    cfg.spawn.supporter_offset = 2.0;
    return cfg;
}

}  // namespace

const std::vector<std::string>& paper_map_names() {
    static const std::vector<std::string> names = {
        "6m2m_15m", "6m2m_16m", "8m3m_21m", "8m4m_23m",
        "12m4m_30m", "15m2m_28m", "16m2m_30m",
    };
    return names;
}

const std::vector<std::string>& desk_map_names() {
    static const std::vector<std::string> names = {"3m1m_5m", "2m1m_3m", "3m_4m",
                                                   "5m_1m"};
    return names;
}

MapConfig load_map_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open map file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw std::invalid_argument("map file " + path + ": " + e.what());
    }
    MapConfig cfg;
    cfg.name = j.value("name", std::filesystem::path(path).stem().string());
    auto read_side = [&](const char* key, std::vector<UnitGroupSpec>& out) {
        if (!j.contains(key))
            throw std::invalid_argument("map file " + path + ": missing '" +
                                        std::string(key) + "'");
        for (const auto& u : j.at(key))
            out.push_back({u.at("type").get<std::string>(), u.at("count").get<int>()});
    };
    read_side("ally", cfg.ally);
    read_side("enemy", cfg.enemy);
    cfg.max_episode_steps = j.value("max_episode_steps", cfg.max_episode_steps);
    cfg.sight_range = j.value("sight_range", cfg.sight_range);
    cfg.step_duration = j.value("step_duration", cfg.step_duration);
    cfg.move_amount = j.value("move_amount", cfg.move_amount);
    cfg.width = j.value("width", cfg.width);
    cfg.height = j.value("height", cfg.height);
    cfg.normalize_reward = j.value("normalize_reward", cfg.normalize_reward);
    if (j.contains("spawn")) {
        const auto& s = j.at("spawn");
        cfg.spawn.ally_x = s.value("ally_x", cfg.spawn.ally_x);
        cfg.spawn.enemy_x = s.value("enemy_x", cfg.spawn.enemy_x);
        cfg.spawn.row_spacing = s.value("row_spacing", cfg.spawn.row_spacing);
        cfg.spawn.supporter_offset = s.value("supporter_offset", cfg.spawn.supporter_offset);
        cfg.spawn.jitter = s.value("jitter", cfg.spawn.jitter);
    }
    if (j.contains("unit_overrides")) {
        for (auto& [type, o] : j.at("unit_overrides").items()) {
            UnitStats st = is_known_unit_type(type) ? unit_type(type) : UnitStats{};
            st.type_name = type;
            st.max_health = o.value("max_health", st.max_health);
            st.shot_range = o.value("shot_range", st.shot_range);
            st.dps = o.value("dps", st.dps);
            st.speed = o.value("speed", st.speed);
            if (o.contains("kind"))
                st.kind = o.at("kind").get<std::string>() == "supporter"
                              ? UnitKind::supporter
                              : UnitKind::attacker;
            st.flying = o.value("flying", st.flying);
            cfg.overrides[type] = st;
        }
    }
    cfg.validate();
    return cfg;
}

MapConfig resolve_map(const std::string& name_or_path) {
    for (const auto& n : desk_map_names()) {
        if (n == name_or_path) {
            int x, y, z;
            parse_map_pattern(n, x, y, z);
            MapConfig cfg = desk_map(n, x, y, z);
            cfg.validate();
            return cfg;
        }
    }
    int x, y, z;
    if (parse_map_pattern(name_or_path, x, y, z)) {
        MapConfig cfg = pattern_map(name_or_path, x, y, z);
        cfg.validate();
        return cfg;
    }
    if (std::filesystem::exists(name_or_path)) return load_map_file(name_or_path);
    throw std::invalid_argument("unknown map or missing file: " + name_or_path);
}

}  // namespace ghq
