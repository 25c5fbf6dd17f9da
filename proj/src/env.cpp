#include "ghq/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ghq/rng.hpp"

namespace ghq {

double unit_distance(const UnitState& a, const UnitState& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

CombatEnv::CombatEnv(MapConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    types_ = cfg_.unit_types();
    spawn_units();  // establish dims before the first reset
}

namespace {

int type_index_of(const std::vector<std::string>& types, const std::string& name) {
    for (std::size_t i = 0; i < types.size(); ++i)
        if (types[i] == name) return (int)i;
    return 0;
}

}  // namespace

void CombatEnv::spawn_units() {
    allies_.clear();
    enemies_.clear();
    auto make_side = [&](const std::vector<UnitGroupSpec>& specs, Side side,
                         double base_x, std::vector<UnitState>& out) {
        int total = 0;
        for (const auto& s : specs) total += s.count;
        int row = 0;
        for (const auto& s : specs) {
            const UnitStats& st = cfg_.stats_for(s.type);
            for (int i = 0; i < s.count; ++i, ++row) {
                UnitState u;
                u.stats = st;
                u.type_index = type_index_of(types_, s.type);
                u.side = side;
                double fwd = 0.0;
                if (side == Side::ally && st.kind == UnitKind::supporter)
                    fwd = cfg_.spawn.supporter_offset;
                u.x = base_x + (side == Side::ally ? fwd : -0.0);
                u.y = cfg_.height / 2.0 +
                      (row - (total - 1) / 2.0) * cfg_.spawn.row_spacing;
                u.x = std::clamp(u.x, 0.0, cfg_.width);
                u.y = std::clamp(u.y, 0.0, cfg_.height);
                u.max_health_centi = to_centi(st.max_health);
                u.health_centi = u.max_health_centi;
                u.cooldown = 0;
                u.alive = true;
                out.push_back(u);
            }
        }
    };
    make_side(cfg_.ally, Side::ally, cfg_.spawn.ally_x, allies_);
    make_side(cfg_.enemy, Side::enemy, cfg_.spawn.enemy_x, enemies_);
    initial_enemy_health_centi_ = 0;
    for (const auto& e : enemies_) initial_enemy_health_centi_ += e.max_health_centi;
}

void CombatEnv::reset(std::uint64_t seed) {
    seed_ = seed;
    spawn_units();
    Rng rng(Rng::mix(seed, 0x656e76ULL));
    double j = cfg_.spawn.jitter;
    if (j > 0) {
        for (auto* side : {&allies_, &enemies_})
            for (UnitState& u : *side) {
                u.x = std::clamp(u.x + rng.uniform(-j, j), 0.0, cfg_.width);
                u.y = std::clamp(u.y + rng.uniform(-j, j), 0.0, cfg_.height);
            }
    }
    step_ = 0;
    terminated_ = false;
    won_ = false;
}

int CombatEnv::action_dim(int agent) const {
    const UnitState& u = allies_[agent];
    return 6 + (u.stats.kind == UnitKind::attacker ? (int)enemies_.size()
                                                   : (int)allies_.size());
}

int CombatEnv::max_action_dim() const {
    int m = 0;
    for (int i = 0; i < n_agents(); ++i) m = std::max(m, action_dim(i));
    return m;
}

bool CombatEnv::in_sight(const UnitState& a, const UnitState& b) const {
    return unit_distance(a, b) <= cfg_.sight_range;
}

std::vector<std::uint8_t> CombatEnv::available_actions(int agent) const {
    const UnitState& u = allies_[agent];
    std::vector<std::uint8_t> mask(action_dim(agent), 0);
    if (!u.alive) {
        mask[0] = 1;
        return mask;
    }
    for (int a = 1; a <= 5; ++a) mask[a] = 1;
    if (u.stats.kind == UnitKind::attacker) {
        for (std::size_t j = 0; j < enemies_.size(); ++j)
            if (enemies_[j].alive && in_sight(u, enemies_[j])) mask[6 + j] = 1;
    } else {
        for (std::size_t j = 0; j < allies_.size(); ++j)
            if ((int)j != agent && allies_[j].alive && in_sight(u, allies_[j]))
                mask[6 + j] = 1;
    }
    return mask;
}

std::vector<std::vector<std::uint8_t>> CombatEnv::available_actions() const {
    std::vector<std::vector<std::uint8_t>> masks;
    for (int i = 0; i < n_agents(); ++i) masks.push_back(available_actions(i));
    return masks;
}

void CombatEnv::move_dir(UnitState& u, int dir) {
    double d = cfg_.move_amount * u.stats.speed * cfg_.step_duration;
    switch (dir) {
        case 2: u.y += d; break;
        case 3: u.y -= d; break;
        case 4: u.x -= d; break;
        case 5: u.x += d; break;
        default: break;
    }
    u.x = std::clamp(u.x, 0.0, cfg_.width);
    u.y = std::clamp(u.y, 0.0, cfg_.height);
}

void CombatEnv::move_toward(UnitState& u, double tx, double ty) {
    double dx = tx - u.x, dy = ty - u.y;
    double dist = std::hypot(dx, dy);
    if (dist < 1e-12) return;
    double d = std::min(cfg_.move_amount * u.stats.speed * cfg_.step_duration, dist);
    u.x = std::clamp(u.x + dx / dist * d, 0.0, cfg_.width);
    u.y = std::clamp(u.y + dy / dist * d, 0.0, cfg_.height);
}

void CombatEnv::resolve_interactive(UnitState& u, UnitState& target) {
    if (!target.alive) return;  // killed earlier this step; order fizzles
    double dist = unit_distance(u, target);
    if (u.stats.kind == UnitKind::attacker) {
        if (dist <= u.stats.shot_range && u.cooldown <= 0) {
            std::int64_t dmg = to_centi(u.stats.dps * cfg_.step_duration);
            target.health_centi = std::max<std::int64_t>(0, target.health_centi - dmg);
            if (target.health_centi == 0) target.alive = false;
            u.cooldown = 1.0;  // attack period; DPS applies per game-second
        } else {
            move_toward(u, target.x, target.y);
        }
    } else {
        if (dist <= u.stats.shot_range) {
            std::int64_t heal = to_centi(u.stats.dps * cfg_.step_duration);
            target.health_centi =
                std::min(target.max_health_centi, target.health_centi + heal);
        } else {
            move_toward(u, target.x, target.y);
        }
    }
}

int CombatEnv::scripted_enemy_action(const UnitState& e) const {
    // Attack-nearest: nearest living ally, lowest index on ties; approach
    // when out of shot range. Scripted supporters heal the lowest-index
    // injured teammate (unused by the shipped maps).
    if (e.stats.kind == UnitKind::attacker) {
        int best = -1;
        double best_d = 0;
        for (std::size_t j = 0; j < allies_.size(); ++j) {
            if (!allies_[j].alive) continue;
            double d = unit_distance(e, allies_[j]);
            if (best < 0 || d < best_d) {
                best = (int)j;
                best_d = d;
            }
        }
        return best < 0 ? 1 : 6 + best;
    }
    for (std::size_t j = 0; j < enemies_.size(); ++j) {
        const UnitState& t = enemies_[j];
        if (&t != &e && t.alive && t.health_centi < t.max_health_centi)
            return 6 + (int)j;
    }
    return 1;
}

StepResult CombatEnv::step(const std::vector<int>& ally_actions) {
    if (terminated_) throw std::logic_error("step on a terminated episode");
    if ((int)ally_actions.size() != n_agents())
        throw std::logic_error("step: expected one action per agent");
    for (int i = 0; i < n_agents(); ++i) {
        auto mask = available_actions(i);
        int a = ally_actions[i];
        if (a < 0 || a >= (int)mask.size() || !mask[a])
            throw std::logic_error("step: action " + std::to_string(a) +
                                   " unavailable for agent " + std::to_string(i));
    }

    for (auto* side : {&allies_, &enemies_})
        for (UnitState& u : *side)
            if (u.alive) u.cooldown = std::max(0.0, u.cooldown - cfg_.step_duration);

    std::int64_t health_before = 0;
    int alive_before = 0;
    for (const auto& e : enemies_) {
        health_before += e.health_centi;
        alive_before += e.alive ? 1 : 0;
    }

    for (int i = 0; i < n_agents(); ++i) {
        UnitState& u = allies_[i];
        if (!u.alive) continue;
        int a = ally_actions[i];
        if (a >= 2 && a <= 5) {
            move_dir(u, a);
        } else if (a >= 6) {
            UnitState& target = u.stats.kind == UnitKind::attacker
                                    ? enemies_[a - 6]
                                    : allies_[a - 6];
            resolve_interactive(u, target);
        }
    }

    for (UnitState& e : enemies_) {
        if (!e.alive) continue;
        int a = scripted_enemy_action(e);
        if (a == 1) continue;
        UnitState& target =
            e.stats.kind == UnitKind::attacker ? allies_[a - 6] : enemies_[a - 6];
        resolve_interactive(e, target);
    }

    std::int64_t health_after = 0;
    int alive_after = 0;
    for (const auto& e : enemies_) {
        health_after += e.health_centi;
        alive_after += e.alive ? 1 : 0;
    }

    ++step_;
    bool allies_dead = true;
    for (const auto& a : allies_)
        if (a.alive) allies_dead = false;
    won_ = alive_after == 0;
    terminated_ = won_ || allies_dead || step_ >= cfg_.max_episode_steps;

    StepResult res;
    res.reward_centi = std::max<std::int64_t>(0, health_before - health_after);
    res.reward_centi += (std::int64_t)(alive_before - alive_after) * 1000;
    if (won_) res.reward_centi += 20000;
    res.reward = cfg_.normalize_reward
                     ? (double)res.reward_centi / (double)max_reward_centi()
                     : (double)res.reward_centi / 100.0;
    res.terminated = terminated_;
    res.won = won_;
    return res;
}

std::int64_t CombatEnv::max_reward_centi() const {
    return initial_enemy_health_centi_ + (std::int64_t)enemies_.size() * 1000 + 20000;
}

int CombatEnv::obs_dim() const {
    int t = n_unit_types();
    return 4 + (n_agents() - 1) * (5 + t) + n_enemies() * (5 + t) + 1 + t;
}

int CombatEnv::state_dim() const {
    int t = n_unit_types();
    return n_agents() * (4 + t) + n_enemies() * (3 + t);
}

std::vector<double> CombatEnv::build_observation(int agent) const {
    std::vector<double> obs(obs_dim(), 0.0);
    const UnitState& u = allies_[agent];
    if (!u.alive) return obs;  // dead agents observe nothing

    int t = n_unit_types();
    std::size_t k = 0;
    // moving-feature: which of up/down/left/right actually displaces the unit
    double d = cfg_.move_amount * u.stats.speed * cfg_.step_duration;
    obs[k++] = u.y + d <= cfg_.height ? 1.0 : 0.0;
    obs[k++] = u.y - d >= 0.0 ? 1.0 : 0.0;
    obs[k++] = u.x - d >= 0.0 ? 1.0 : 0.0;
    obs[k++] = u.x + d <= cfg_.width ? 1.0 : 0.0;

    auto write_unit = [&](const UnitState& o) {
        if (o.alive && in_sight(u, o)) {
            double dist = unit_distance(u, o);
            obs[k++] = 1.0;
            obs[k++] = o.health_fraction();
            for (int ti = 0; ti < t; ++ti) obs[k++] = o.type_index == ti ? 1.0 : 0.0;
            obs[k++] = dist / cfg_.sight_range;
            obs[k++] = (o.x - u.x) / cfg_.sight_range;
            obs[k++] = (o.y - u.y) / cfg_.sight_range;
        } else {
            k += 5 + t;
        }
    };
    for (int j = 0; j < n_agents(); ++j)
        if (j != agent) write_unit(allies_[j]);
    for (const auto& e : enemies_) write_unit(e);

    obs[k++] = u.health_fraction();
    for (int ti = 0; ti < t; ++ti) obs[k++] = u.type_index == ti ? 1.0 : 0.0;
    return obs;
}

std::vector<double> CombatEnv::build_state() const {
    std::vector<double> st(state_dim(), 0.0);
    int t = n_unit_types();
    std::size_t k = 0;
    for (const auto& a : allies_) {
        if (a.alive) {
            st[k++] = a.health_fraction();
            st[k++] = a.cooldown;  // attack period is 1 game-second
            for (int ti = 0; ti < t; ++ti) st[k++] = a.type_index == ti ? 1.0 : 0.0;
            st[k++] = a.x / cfg_.width;
            st[k++] = a.y / cfg_.height;
        } else {
            k += 4 + t;
        }
    }
    for (const auto& e : enemies_) {
        if (e.alive) {
            st[k++] = e.health_fraction();
            for (int ti = 0; ti < t; ++ti) st[k++] = e.type_index == ti ? 1.0 : 0.0;
            st[k++] = e.x / cfg_.width;
            st[k++] = e.y / cfg_.height;
        } else {
            k += 3 + t;
        }
    }
    return st;
}

}  // namespace ghq
