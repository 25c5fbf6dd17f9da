#pragma once

#include <cstdint>
#include <vector>

#include "ghq/map_config.hpp"
#include "ghq/units.hpp"

namespace ghq {

struct StepResult {
    double reward = 0;           // normalized when the map asks for it
    std::int64_t reward_centi = 0;  // exact, un-normalized centi-hitpoint units
    bool terminated = false;
    bool won = false;
};

// Deterministic heterogeneous micro-combat Dec-POMDP.
//
// Action space per agent: 0 = null (dead only), 1 = stop, 2..5 = move
// up/down/left/right, 6.. = interactive (attack enemy j for attackers,
// heal ally j for supporters). Interactive actions are available when the
// target is alive and inside sight_range; choosing one against a target
// beyond shot_range moves the unit toward it (attack-move).
//
// Reward per step: enemy health lost + 10 per enemy killed + 200 when the
// last enemy dies, optionally normalized so a winning episode totals 1.
class CombatEnv {
  public:
    explicit CombatEnv(MapConfig cfg);

    void reset(std::uint64_t seed);
    StepResult step(const std::vector<int>& ally_actions);

    // Per-agent availability masks at the agent's true action dim.
    std::vector<std::vector<std::uint8_t>> available_actions() const;
    std::vector<std::uint8_t> available_actions(int agent) const;

    std::vector<double> build_observation(int agent) const;
    std::vector<double> build_state() const;

    int n_agents() const { return (int)allies_.size(); }
    int n_enemies() const { return (int)enemies_.size(); }
    int action_dim(int agent) const;
    int max_action_dim() const;
    int obs_dim() const;
    int state_dim() const;
    int n_unit_types() const { return (int)types_.size(); }

    int step_count() const { return step_; }
    bool terminated() const { return terminated_; }
    bool won() const { return won_; }
    std::int64_t initial_enemy_health_centi() const { return initial_enemy_health_centi_; }
    // Exact maximum un-normalized episode reward: initial enemy health
    // + 10 per enemy + 200 for the win, in centi units.
    std::int64_t max_reward_centi() const;

    const MapConfig& config() const { return cfg_; }
    const std::vector<UnitState>& allies() const { return allies_; }
    const std::vector<UnitState>& enemies() const { return enemies_; }

  private:
    void spawn_units();
    bool in_sight(const UnitState& a, const UnitState& b) const;
    void move_dir(UnitState& u, int dir);
    void move_toward(UnitState& u, double tx, double ty);
    void resolve_interactive(UnitState& u, UnitState& target);
    int scripted_enemy_action(const UnitState& e) const;

    MapConfig cfg_;
    std::vector<std::string> types_;
    std::vector<UnitState> allies_;
    std::vector<UnitState> enemies_;
    int step_ = 0;
    bool terminated_ = false;
    bool won_ = false;
    std::int64_t initial_enemy_health_centi_ = 0;
    std::uint64_t seed_ = 0;
};

double unit_distance(const UnitState& a, const UnitState& b);

}  // namespace ghq
