#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dasc/allocation.hpp"
#include "dasc/incentives.hpp"
#include "dasc/routing.hpp"
#include "dasc/scouting.hpp"

namespace dasc {

enum class Scheme {
  dasc,
  dasc_no_mdp,
  social_car,
  random,
  fixed_route,
  shortest_distance,
  reputation_based,
  incentive_based,
};

inline constexpr std::array<std::pair<Scheme, std::string_view>, 8> kSchemeNames{{
    {Scheme::dasc, "DASC"},
    {Scheme::dasc_no_mdp, "DASC_no_MDP"},
    {Scheme::social_car, "SocialCar"},
    {Scheme::random, "Random"},
    {Scheme::fixed_route, "FixedRoute"},
    {Scheme::shortest_distance, "ShortestDistance"},
    {Scheme::reputation_based, "ReputationBased"},
    {Scheme::incentive_based, "IncentiveBased"},
}};

inline std::string_view scheme_name(Scheme s) {
  for (auto [k, v] : kSchemeNames)
    if (k == s) return v;
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  for (auto [k, v] : kSchemeNames)
    if (v == name) return k;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

/// Schemes that run the game-theoretic allocation with reward control.
inline bool uses_game(Scheme s) { return s == Scheme::dasc || s == Scheme::dasc_no_mdp || s == Scheme::social_car; }
/// Schemes that send scouts and keep accessibility indices.
inline bool uses_scouts(Scheme s) { return s == Scheme::dasc || s == Scheme::dasc_no_mdp; }
/// Schemes whose route planning avoids damage the fleet has seen.
inline bool damage_aware(Scheme s) { return s != Scheme::social_car; }

struct RunConfig {
  std::string scenario_path;
  Scheme scheme = Scheme::dasc;
  std::uint64_t seed = 1;

  UtilityParams utility;  // lambda = (0.82, 0.58, 0.49), k = 2, epsilon = 0.01
  double eta = 0.1;
  double initial_reputation = 0.5;
  PidParams pid;  // gains (0.11, 0.67, 0.38), e' = 1, r0 = 1
  double psi = 0.62;
  KappaParams kappa;  // window 6, floor 0.05, fallback 0.65
  double x0 = 0.5;
  double q_percent = 20.0;
  int scout_radius = 1;
  MdpParams mdp;                // K = 8, epsilon = 0.1
  int exploration_cycles = -1;  // -1: a quarter of the run's cycles
  double ec_threshold = 0.6;
  double confidence_scale = 2.0;

  std::optional<int> cycles;
  std::optional<double> cycle_length_min;
  std::optional<int> completers;
  std::optional<int> aborters;
  std::optional<int> refusers;
  std::optional<double> abort_probability;

  bool trace = false;  // collect the per-cycle event trace
};

/// The parameters the tuner searches over, in a fixed order.
inline constexpr std::array<std::string_view, 8> kTunedNames{"lambda1", "lambda2", "lambda3", "kp",
                                                             "ki",      "kd",      "psi",     "kappa"};

inline std::array<double, 8> tuned_values(const RunConfig& c) {
  return {c.utility.lambda1, c.utility.lambda2, c.utility.lambda3, c.pid.kp,
          c.pid.ki,          c.pid.kd,          c.psi,             c.kappa.fallback};
}

inline void set_tuned_values(RunConfig& c, std::span<const double> v) {
  if (v.size() != kTunedNames.size()) throw std::invalid_argument("set_tuned_values: expected 8 values");
  c.utility.lambda1 = v[0];
  c.utility.lambda2 = v[1];
  c.utility.lambda3 = v[2];
  c.pid.kp = v[3];
  c.pid.ki = v[4];
  c.pid.kd = v[5];
  c.psi = v[6];
  c.kappa.fallback = v[7];
}

}  // namespace dasc
